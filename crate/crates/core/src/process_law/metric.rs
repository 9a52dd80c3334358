use std::collections::{BTreeMap, HashMap};
use std::fmt;

use super::space::{CoordinateSpace, Path, PathSpace};
use crate::error::{Error, Result};

const AXIOM_TOLERANCE: f64 = 1e-12;

/// Distance table on the atoms of one coordinate, keyed by atom id.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTable {
    ids: Vec<String>,
    dist: Vec<Vec<f64>>,
}

impl GroundTable {
    /// Validates nonnegativity, zero diagonal, symmetry and the triangle inequality.
    pub fn new(ids: Vec<String>, dist: Vec<Vec<f64>>) -> Result<Self> {
        let n = ids.len();
        if dist.len() != n || dist.iter().any(|r| r.len() != n) {
            return Err(Error::Metric(format!("distance table must be {n}x{n}")));
        }
        for i in 0..n {
            if dist[i][i] != 0.0 {
                return Err(Error::Metric(format!("d({0},{0}) must be 0", ids[i])));
            }
            for j in 0..n {
                let d = dist[i][j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::Metric(format!(
                        "d({},{}) = {d} is invalid",
                        ids[i], ids[j]
                    )));
                }
                if (d - dist[j][i]).abs() > AXIOM_TOLERANCE {
                    return Err(Error::Metric(format!(
                        "table is not symmetric at ({},{})",
                        ids[i], ids[j]
                    )));
                }
                for k in 0..n {
                    if d > dist[i][k] + dist[k][j] + AXIOM_TOLERANCE {
                        return Err(Error::Metric(format!(
                            "triangle inequality fails for ({},{},{})",
                            ids[i], ids[k], ids[j]
                        )));
                    }
                }
            }
        }
        Ok(GroundTable { ids, dist })
    }
}

/// Metric `d_t` on a single coordinate space.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundMetric {
    /// `|value(a) - value(b)|`; every atom must carry a value.
    Absolute,
    /// `1` for distinct atoms.
    Discrete,
    Table(GroundTable),
}

impl GroundMetric {
    fn matrix(&self, coord: &CoordinateSpace, t: usize) -> Result<Vec<Vec<f64>>> {
        let n = coord.len();
        match self {
            GroundMetric::Absolute => {
                let values = coord
                    .atoms()
                    .iter()
                    .map(|a| {
                        a.value.ok_or_else(|| {
                            Error::Metric(format!(
                                "atom {:?} in coordinate {} has no numeric value",
                                a.id,
                                t + 1
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((0..n)
                    .map(|i| (0..n).map(|j| (values[i] - values[j]).abs()).collect())
                    .collect())
            }
            GroundMetric::Discrete => Ok((0..n)
                .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
                .collect()),
            GroundMetric::Table(table) => {
                let pos = coord
                    .atoms()
                    .iter()
                    .map(|a| {
                        table.ids.iter().position(|id| *id == a.id).ok_or_else(|| {
                            Error::Metric(format!("atom {:?} missing from distance table", a.id))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((0..n)
                    .map(|i| (0..n).map(|j| table.dist[pos[i]][pos[j]]).collect())
                    .collect())
            }
        }
    }
}

/// How per-coordinate distances combine into a path distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    /// `Σ_t d_t(x_t, y_t)`
    L1,
    /// `max_t d_t(x_t, y_t)`
    Max,
}

/// A metric on full paths assembled from per-coordinate ground metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMetric {
    default_ground: GroundMetric,
    overrides: BTreeMap<usize, GroundMetric>,
    combine: Combine,
}

impl Default for PathMetric {
    fn default() -> Self {
        Self::l1()
    }
}

impl PathMetric {
    /// ℓ¹ sum of `|value difference|` ground metrics.
    pub fn l1() -> Self {
        Self::uniform(GroundMetric::Absolute, Combine::L1)
    }

    /// Maximum of `|value difference|` ground metrics.
    pub fn max() -> Self {
        Self::uniform(GroundMetric::Absolute, Combine::Max)
    }

    pub fn uniform(ground: GroundMetric, combine: Combine) -> Self {
        PathMetric {
            default_ground: ground,
            overrides: BTreeMap::new(),
            combine,
        }
    }

    /// Replaces the ground metric of coordinate `t` (zero-based).
    pub fn with_coordinate(mut self, t: usize, ground: GroundMetric) -> Self {
        self.overrides.insert(t, ground);
        self
    }

    pub fn combine(&self) -> Combine {
        self.combine
    }

    /// Tabulates every ground metric on `space`.
    pub fn bind(&self, space: &PathSpace) -> Result<BoundMetric> {
        if let Some(&t) = self.overrides.keys().find(|&&t| t >= space.horizon()) {
            return Err(Error::Metric(format!(
                "coordinate override {} exceeds horizon {}",
                t + 1,
                space.horizon()
            )));
        }
        let tables = space
            .coordinates()
            .iter()
            .enumerate()
            .map(|(t, c)| {
                self.overrides
                    .get(&t)
                    .unwrap_or(&self.default_ground)
                    .matrix(c, t)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundMetric {
            tables,
            combine: self.combine,
        })
    }
}

impl fmt::Display for PathMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let combine = match self.combine {
            Combine::L1 => "l1",
            Combine::Max => "max",
        };
        let ground = match self.default_ground {
            GroundMetric::Absolute => "",
            GroundMetric::Discrete => "-discrete",
            GroundMetric::Table(_) => "-table",
        };
        write!(f, "{combine}{ground}")?;
        if !self.overrides.is_empty() {
            write!(f, "+{}overrides", self.overrides.len())?;
        }
        Ok(())
    }
}

/// A [`PathMetric`] tabulated on a concrete space.
#[derive(Debug, Clone)]
pub struct BoundMetric {
    tables: Vec<Vec<Vec<f64>>>,
    combine: Combine,
}

impl BoundMetric {
    /// Ground distance at coordinate `t` (zero-based).
    pub fn coordinate(&self, t: usize, a: usize, b: usize) -> f64 {
        self.tables[t][a][b]
    }

    /// Distance between two full paths.
    pub fn distance(&self, x: &Path, y: &Path) -> f64 {
        let terms = x
            .atoms()
            .iter()
            .zip(y.atoms())
            .enumerate()
            .map(|(t, (&a, &b))| self.tables[t][a][b]);
        match self.combine {
            Combine::L1 => terms.sum(),
            Combine::Max => terms.fold(0.0, f64::max),
        }
    }
}

/// A nonnegative weight `φ` on full paths.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFunction {
    Constant(f64),
    /// Weights keyed by the atom ids of each full path.
    Table(BTreeMap<Vec<String>, f64>),
    /// `φ(x) = √α · d(x, x₀)^p`.
    Rule {
        alpha: f64,
        p: f64,
        /// Atom ids of `x₀`; `None` selects the smallest-valued atom of each coordinate.
        base: Option<Vec<String>>,
        metric: PathMetric,
    },
}

impl WeightFunction {
    pub fn rule(alpha: f64, p: f64, metric: PathMetric) -> Self {
        WeightFunction::Rule {
            alpha,
            p,
            base: None,
            metric,
        }
    }

    /// Short text form: `const:C`, `rule:ALPHA,P` or `table`.
    pub fn descriptor(&self) -> String {
        match self {
            WeightFunction::Constant(c) => format!("const:{c}"),
            WeightFunction::Table(_) => "table".into(),
            WeightFunction::Rule { alpha, p, .. } => format!("rule:{alpha},{p}"),
        }
    }

    /// Returns `c·φ`.
    pub fn scaled(&self, c: f64) -> Result<WeightFunction> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::Weight(format!("scale {c} must be nonnegative")));
        }
        Ok(match self {
            WeightFunction::Constant(v) => WeightFunction::Constant(c * v),
            WeightFunction::Table(t) => {
                WeightFunction::Table(t.iter().map(|(k, v)| (k.clone(), c * v)).collect())
            }
            WeightFunction::Rule {
                alpha,
                p,
                base,
                metric,
            } => WeightFunction::Rule {
                alpha: alpha * c * c,
                p: *p,
                base: base.clone(),
                metric: metric.clone(),
            },
        })
    }

    pub fn bind(&self, space: &PathSpace) -> Result<BoundWeight> {
        match self {
            WeightFunction::Constant(c) => {
                if !(*c >= 0.0) || !c.is_finite() {
                    return Err(Error::Weight(format!(
                        "constant weight {c} must be nonnegative"
                    )));
                }
                Ok(BoundWeight::Constant(*c))
            }
            WeightFunction::Table(table) => {
                let mut values = HashMap::with_capacity(table.len());
                for (ids, &w) in table {
                    if !(w >= 0.0) || !w.is_finite() {
                        return Err(Error::Weight(format!(
                            "weight {w} at {ids:?} must be nonnegative"
                        )));
                    }
                    if ids.len() != space.horizon() {
                        return Err(Error::Weight(format!(
                            "table key {ids:?} is not a full path"
                        )));
                    }
                    // paths through atoms foreign to this space can never be evaluated
                    if let Ok(path) = space.path_from_ids(0, ids) {
                        values.insert(path, w);
                    }
                }
                Ok(BoundWeight::Table(values))
            }
            WeightFunction::Rule {
                alpha,
                p,
                base,
                metric,
            } => {
                if !(*alpha > 0.0) || !alpha.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "alpha = {alpha} must be positive"
                    )));
                }
                if !(*p >= 1.0) || !p.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "p = {p} must be at least 1"
                    )));
                }
                let base = match base {
                    Some(ids) => space.path_from_ids(0, ids)?,
                    None => default_base(space),
                };
                if base.len() != space.horizon() {
                    return Err(Error::Weight("base point must be a full path".into()));
                }
                Ok(BoundWeight::Rule {
                    scale: alpha.sqrt(),
                    p: *p,
                    base,
                    metric: metric.bind(space)?,
                })
            }
        }
    }
}

/// Per coordinate, the atom with the smallest value (ties and missing values
/// resolved by position).
pub fn default_base(space: &PathSpace) -> Path {
    Path::from_atoms(
        space
            .coordinates()
            .iter()
            .map(|c| {
                c.atoms()
                    .iter()
                    .enumerate()
                    .min_by(|(i, a), (j, b)| {
                        let va = a.value.unwrap_or(f64::INFINITY);
                        let vb = b.value.unwrap_or(f64::INFINITY);
                        va.total_cmp(&vb).then(i.cmp(j))
                    })
                    .map(|(i, _)| i)
                    .unwrap_or(0)
            })
            .collect(),
    )
}

/// A [`WeightFunction`] resolved against a concrete space.
#[derive(Debug, Clone)]
pub enum BoundWeight {
    Constant(f64),
    Table(HashMap<Path, f64>),
    Rule {
        scale: f64,
        p: f64,
        base: Path,
        metric: BoundMetric,
    },
}

impl BoundWeight {
    pub fn value(&self, x: &Path) -> Result<f64> {
        match self {
            BoundWeight::Constant(c) => Ok(*c),
            BoundWeight::Table(t) => t
                .get(x)
                .copied()
                .ok_or_else(|| Error::Weight(format!("no tabulated weight for path {x}"))),
            BoundWeight::Rule {
                scale,
                p,
                base,
                metric,
            } => Ok(scale * metric.distance(x, base).powf(*p)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process_law::space::Atom;

    #[test]
    fn l1_and_max_on_grid() {
        let space = PathSpace::grid(3, 3).unwrap();
        let x = Path::from_atoms(vec![0, 2, 1]);
        let y = Path::from_atoms(vec![1, 0, 1]);
        assert_eq!(PathMetric::l1().bind(&space).unwrap().distance(&x, &y), 3.0);
        assert_eq!(
            PathMetric::max().bind(&space).unwrap().distance(&x, &y),
            2.0
        );
    }

    #[test]
    fn absolute_metric_needs_values() {
        let space = PathSpace::new(vec![vec![Atom::new("a")]]).unwrap();
        assert!(matches!(
            PathMetric::l1().bind(&space),
            Err(Error::Metric(_))
        ));
    }

    #[test]
    fn table_checks_triangle_inequality() {
        let ids = vec!["a".to_string(), "b".into(), "c".into()];
        let bad = vec![
            vec![0.0, 1.0, 3.0],
            vec![1.0, 0.0, 1.0],
            vec![3.0, 1.0, 0.0],
        ];
        assert!(GroundTable::new(ids.clone(), bad).is_err());
        let asym = vec![
            vec![0.0, 1.0, 1.0],
            vec![2.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ];
        assert!(GroundTable::new(ids.clone(), asym).is_err());
        let good = vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ];
        assert!(GroundTable::new(ids, good).is_ok());
    }

    #[test]
    fn rule_weight_matches_formula() {
        let space = PathSpace::grid(2, 3).unwrap();
        let w = WeightFunction::rule(4.0, 2.0, PathMetric::l1())
            .bind(&space)
            .unwrap();
        // base is (0,0); d = 1 + 2 = 3
        let v = w.value(&Path::from_atoms(vec![1, 2])).unwrap();
        assert!((v - 2.0 * 9.0).abs() < 1e-12);
    }

    #[test]
    fn rule_rejects_bad_parameters() {
        let space = PathSpace::grid(1, 2).unwrap();
        assert!(matches!(
            WeightFunction::rule(0.0, 1.0, PathMetric::l1()).bind(&space),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            WeightFunction::rule(1.0, 0.5, PathMetric::l1()).bind(&space),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn scaled_rule_scales_values() {
        let space = PathSpace::grid(2, 3).unwrap();
        let w = WeightFunction::rule(1.0, 1.0, PathMetric::l1());
        let x = Path::from_atoms(vec![2, 1]);
        let a = w.bind(&space).unwrap().value(&x).unwrap();
        let b = w
            .scaled(3.0)
            .unwrap()
            .bind(&space)
            .unwrap()
            .value(&x)
            .unwrap();
        assert!((b - 3.0 * a).abs() < 1e-12);
    }
}

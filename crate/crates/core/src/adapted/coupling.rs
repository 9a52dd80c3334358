use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::process_law::{Path, PathMeasure, PathSpace, ProcessLaw};

/// A joint finite-support law on pairs of full paths of a common space.
#[derive(Debug, Clone)]
pub struct Coupling {
    space: Arc<PathSpace>,
    masses: BTreeMap<(Path, Path), f64>,
}

impl Coupling {
    pub fn new(
        space: Arc<PathSpace>,
        masses: impl IntoIterator<Item = ((Path, Path), f64)>,
    ) -> Result<Self> {
        let horizon = space.horizon();
        let mut out = Coupling {
            space,
            masses: BTreeMap::new(),
        };
        for ((x, y), m) in masses {
            if x.len() != horizon || y.len() != horizon {
                return Err(Error::SpaceMismatch(
                    "coupling atoms must be full paths".into(),
                ));
            }
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "coupling mass {m} is invalid"
                )));
            }
            out.add(x, y, m);
        }
        Ok(out)
    }

    /// The independent coupling `μ ⊗ ν`.
    pub fn independent(mu: &ProcessLaw, nu: &ProcessLaw) -> Result<Self> {
        let (mu, nu) = ProcessLaw::aligned(mu, nu)?;
        let mut out = Coupling {
            space: mu.space().clone(),
            masses: BTreeMap::new(),
        };
        for (x, p) in mu.paths() {
            for (y, q) in nu.paths() {
                out.add(x.clone(), y.clone(), p * q);
            }
        }
        Ok(out)
    }

    pub(crate) fn empty(space: Arc<PathSpace>) -> Self {
        Coupling {
            space,
            masses: BTreeMap::new(),
        }
    }

    pub(crate) fn add(&mut self, x: Path, y: Path, m: f64) {
        if m > 0.0 {
            *self.masses.entry((x, y)).or_insert(0.0) += m;
        }
    }

    pub fn space(&self) -> &Arc<PathSpace> {
        &self.space
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Path, &Path, f64)> + '_ {
        self.masses.iter().map(|((x, y), &m)| (x, y, m))
    }

    pub fn get(&self, x: &Path, y: &Path) -> f64 {
        self.masses
            .get(&(x.clone(), y.clone()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn support_size(&self) -> usize {
        self.masses.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.values().sum()
    }

    /// `∫ c(x,y) dπ`.
    pub fn integrate(&self, mut cost: impl FnMut(&Path, &Path) -> f64) -> f64 {
        self.masses.iter().map(|((x, y), &m)| m * cost(x, y)).sum()
    }

    /// `π(x ≠ y)`.
    pub fn off_diagonal_mass(&self) -> f64 {
        self.integrate(|x, y| if x == y { 0.0 } else { 1.0 })
    }

    /// First and second marginals.
    pub fn marginals(&self) -> (PathMeasure, PathMeasure) {
        let h = self.space.horizon();
        let mut left = PathMeasure::zero(self.space.clone(), 0, h);
        let mut right = left.clone();
        for ((x, y), &m) in &self.masses {
            left.add(x.clone(), m);
            right.add(y.clone(), m);
        }
        (left, right)
    }

    /// Largest atomwise deviation of the marginals from `μ` and `ν`.
    pub fn marginal_error(&self, mu: &ProcessLaw, nu: &ProcessLaw) -> Result<f64> {
        let (mu, nu) = ProcessLaw::aligned(mu, nu)?;
        if **mu.space() != *self.space {
            return Err(Error::SpaceMismatch(
                "coupling and laws live on different spaces".into(),
            ));
        }
        let (left, right) = self.marginals();
        let l = left.residual_parts(&mu.path_measure())?.abs_diff;
        let r = right.residual_parts(&nu.path_measure())?.abs_diff;
        Ok(l.iter().chain(r.iter()).map(|(_, m)| m).fold(0.0, f64::max))
    }
}

/// Composes per-node kernel couplings into a coupling on full paths.
///
/// `kernel_plan(a, b)` receives node ids of `mu` and `nu` at equal depth and
/// returns `(i, j, mass)` triples over their children (indices into the
/// children lists), summing to one.
pub(crate) fn compose_kernels(
    mu: &ProcessLaw,
    nu: &ProcessLaw,
    mut kernel_plan: impl FnMut(usize, usize) -> Result<Vec<(usize, usize, f64)>>,
) -> Result<Coupling> {
    let mut out = Coupling::empty(mu.space().clone());
    let mut stack = vec![(0usize, 0usize, 1.0f64)];
    while let Some((a, b, mass)) = stack.pop() {
        let (na, nb) = (mu.node(a), nu.node(b));
        if na.children.is_empty() {
            out.add(na.prefix.clone(), nb.prefix.clone(), mass);
            continue;
        }
        for (i, j, m) in kernel_plan(a, b)? {
            if m > 0.0 {
                stack.push((na.children[i].node, nb.children[j].node, mass * m));
            }
        }
    }
    Ok(out)
}

use std::collections::BTreeMap;
use std::sync::Arc;

use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::simplex::{RationalLp, VARIABLE_CAP};
use crate::error::{Error, Result};
use crate::process_law::{Path, PathSpace, ProcessLaw};

/// Exact binary value of a finite float.
pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// A process law with exact rational path masses.
#[derive(Debug, Clone)]
pub struct RationalLaw {
    space: Arc<PathSpace>,
    paths: Vec<(Path, BigRational)>,
}

impl RationalLaw {
    /// Rationalizes each kernel row of `law` (shortest nearby fraction per
    /// entry, last entry fixed so the row sums to exactly one) and multiplies
    /// along paths.
    pub fn from_law(law: &ProcessLaw) -> Result<Self> {
        let mut paths = Vec::new();
        let mut stack = vec![(0usize, BigRational::one())];
        while let Some((id, mass)) = stack.pop() {
            let node = law.node(id);
            if node.children.is_empty() {
                paths.push((node.prefix.clone(), mass));
                continue;
            }
            let mut rest = BigRational::one();
            let last = node.children.len() - 1;
            for (k, b) in node.children.iter().enumerate() {
                let p = if k == last {
                    rest.clone()
                } else {
                    let r = Ratio::<i64>::approximate_float(b.prob)
                        .ok_or_else(|| Error::Solver(format!("cannot rationalize {}", b.prob)))?;
                    BigRational::new((*r.numer()).into(), (*r.denom()).into())
                };
                rest -= &p;
                stack.push((b.node, &mass * p));
            }
            if rest.is_negative() {
                return Err(Error::Solver("rationalized kernel row exceeds one".into()));
            }
        }
        paths.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(RationalLaw {
            space: law.space().clone(),
            paths,
        })
    }

    pub fn space(&self) -> &Arc<PathSpace> {
        &self.space
    }

    pub fn paths(&self) -> &[(Path, BigRational)] {
        &self.paths
    }

    pub fn horizon(&self) -> usize {
        self.space.horizon()
    }
}

/// Transport LP for a cost matrix and two marginal vectors.
pub fn transport_lp(
    cost: &[Vec<BigRational>],
    source: &[BigRational],
    target: &[BigRational],
) -> RationalLp {
    let (m, n) = (source.len(), target.len());
    let mut lp = RationalLp::new(cost.iter().flat_map(|r| r.iter().cloned()).collect());
    for (i, a) in source.iter().enumerate() {
        let row = (0..m * n).map(|k| indicator(k / n == i)).collect();
        lp.push_row(row, a.clone());
    }
    for (j, b) in target.iter().enumerate() {
        let row = (0..m * n).map(|k| indicator(k % n == j)).collect();
        lp.push_row(row, b.clone());
    }
    lp
}

fn indicator(b: bool) -> BigRational {
    if b {
        BigRational::one()
    } else {
        BigRational::zero()
    }
}

fn check_pairs(mu: &RationalLaw, nu: &RationalLaw) -> Result<()> {
    if mu.space != nu.space && *mu.space != *nu.space {
        return Err(Error::SpaceMismatch(
            "oracle laws must share a path space".into(),
        ));
    }
    let size = mu.paths.len() * nu.paths.len();
    if size > VARIABLE_CAP {
        return Err(Error::TooLarge {
            size,
            cap: VARIABLE_CAP,
        });
    }
    Ok(())
}

fn cost_matrix(
    mu: &RationalLaw,
    nu: &RationalLaw,
    cost: &impl Fn(&Path, &Path) -> BigRational,
) -> Vec<Vec<BigRational>> {
    mu.paths
        .iter()
        .map(|(x, _)| nu.paths.iter().map(|(y, _)| cost(x, y)).collect())
        .collect()
}

fn masses(law: &RationalLaw) -> Vec<BigRational> {
    law.paths.iter().map(|(_, m)| m.clone()).collect()
}

/// Exact `min_{π ∈ Cpl(μ,ν)} ∫ c dπ`.
pub fn classical_ot_lp(
    mu: &RationalLaw,
    nu: &RationalLaw,
    cost: impl Fn(&Path, &Path) -> BigRational,
) -> Result<BigRational> {
    check_pairs(mu, nu)?;
    let lp = transport_lp(&cost_matrix(mu, nu, &cost), &masses(mu), &masses(nu));
    Ok(lp.solve()?.value)
}

/// Exact `min_{π ∈ Cpl_bc(μ,ν)} ∫ c dπ`.
///
/// Besides the marginal rows, for every `t < T`, prefix pair `(a, b)` and
/// suffix `s` of `μ` below `a`:
/// `π(X = a·s, Y_{1:t} = b) = μ̄^a(s) π(X_{1:t} = a, Y_{1:t} = b)`,
/// and symmetrically for `ν`.
pub fn bicausal_lp(
    mu: &RationalLaw,
    nu: &RationalLaw,
    cost: impl Fn(&Path, &Path) -> BigRational,
) -> Result<BigRational> {
    check_pairs(mu, nu)?;
    let mut lp = transport_lp(&cost_matrix(mu, nu, &cost), &masses(mu), &masses(nu));
    let ny = nu.paths.len();
    let vars = lp.variables();
    for t in 1..mu.horizon() {
        let groups_x = prefix_groups(mu, t);
        let groups_y = prefix_groups(nu, t);
        for (xs, x_mass) in groups_x.values() {
            for (ys, y_mass) in groups_y.values() {
                // X side: each x below the prefix against the block
                for &i in xs {
                    let share = &mu.paths[i].1 / x_mass;
                    let mut row = vec![BigRational::zero(); vars];
                    for &j in ys {
                        row[i * ny + j] += BigRational::one();
                    }
                    for &k in xs {
                        for &j in ys {
                            row[k * ny + j] -= &share;
                        }
                    }
                    lp.push_row(row, BigRational::zero());
                }
                for &j in ys {
                    let share = &nu.paths[j].1 / y_mass;
                    let mut row = vec![BigRational::zero(); vars];
                    for &i in xs {
                        row[i * ny + j] += BigRational::one();
                    }
                    for &k in xs {
                        for &l in ys {
                            row[k * ny + l] -= &share;
                        }
                    }
                    lp.push_row(row, BigRational::zero());
                }
            }
        }
    }
    Ok(lp.solve()?.value)
}

/// Indices of paths grouped by their length-`t` prefix, with group mass.
fn prefix_groups(law: &RationalLaw, t: usize) -> BTreeMap<Path, (Vec<usize>, BigRational)> {
    let mut out: BTreeMap<Path, (Vec<usize>, BigRational)> = BTreeMap::new();
    for (i, (x, m)) in law.paths.iter().enumerate() {
        let entry = out
            .entry(x.prefix(t))
            .or_insert_with(|| (Vec::new(), BigRational::zero()));
        entry.0.push(i);
        entry.1 += m;
    }
    out
}

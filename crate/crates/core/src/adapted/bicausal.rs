use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use super::coupling::Coupling;
use crate::error::{Error, Result};
use crate::process_law::{Path, PathMeasure, ProcessLaw};

/// Bicausality passes when every conditional table is within this distance.
pub const BICAUSAL_TOLERANCE: f64 = 1e-9;

/// Marginals of a coupling must match the laws within this distance.
pub const MARGINAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    /// Future of `X` given `(X_{1:t}, Y_{1:t})` against `μ`'s tail law.
    First,
    /// Future of `Y` given `(X_{1:t}, Y_{1:t})` against `ν`'s tail law.
    Second,
}

/// Where the worst discrepancy was observed.
#[derive(Debug, Clone, Serialize)]
pub struct BicausalityWitness {
    pub t: usize,
    pub side: Side,
    pub x_prefix: String,
    pub y_prefix: String,
    /// `suffix -> π(suffix | prefixes)`.
    pub conditional: BTreeMap<String, f64>,
    /// `suffix -> tail law of the corresponding marginal`.
    pub expected: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BicausalityReport {
    pub ok: bool,
    pub worst_violation: f64,
    pub witness: Option<BicausalityWitness>,
}

#[derive(Default)]
struct Block {
    mass: f64,
    x_future: BTreeMap<Path, f64>,
    y_future: BTreeMap<Path, f64>,
}

/// Checks that `pi` couples `mu` and `nu` bicausally.
///
/// For every `t < T` and every charged prefix pair, the conditional law of
/// `X_{t+1:T}` given `(X_{1:t}, Y_{1:t})` must equal `μ`'s tail law at
/// `X_{1:t}`, and symmetrically for `Y`.
pub fn check_bicausal(
    pi: &Coupling,
    mu: &ProcessLaw,
    nu: &ProcessLaw,
) -> Result<BicausalityReport> {
    let err = pi.marginal_error(mu, nu)?;
    if err > MARGINAL_TOLERANCE {
        return Err(Error::NotACoupling(format!(
            "marginals deviate by {err:e} (tolerance {MARGINAL_TOLERANCE:e})"
        )));
    }
    let (mu, nu) = ProcessLaw::aligned(mu, nu)?;
    let space = mu.space().clone();
    let mut worst = 0.0f64;
    let mut witness = None;
    let mut mu_tails: HashMap<Path, PathMeasure> = HashMap::new();
    let mut nu_tails: HashMap<Path, PathMeasure> = HashMap::new();

    for t in 1..space.horizon() {
        let mut blocks: BTreeMap<(Path, Path), Block> = BTreeMap::new();
        for (x, y, m) in pi.iter() {
            let block = blocks.entry((x.prefix(t), y.prefix(t))).or_default();
            block.mass += m;
            *block.x_future.entry(x.suffix(t)).or_insert(0.0) += m;
            *block.y_future.entry(y.suffix(t)).or_insert(0.0) += m;
        }
        for ((xp, yp), block) in blocks {
            for side in [Side::First, Side::Second] {
                let (law, tails, prefix, future) = match side {
                    Side::First => (&mu, &mut mu_tails, &xp, &block.x_future),
                    Side::Second => (&nu, &mut nu_tails, &yp, &block.y_future),
                };
                if !tails.contains_key(prefix) {
                    tails.insert(prefix.clone(), law.tail_law(prefix)?);
                }
                let tail = &tails[prefix];
                let suffixes: BTreeSet<&Path> =
                    future.keys().chain(tail.iter().map(|(s, _)| s)).collect();
                let mut local = 0.0f64;
                for s in &suffixes {
                    let cond = future.get(*s).copied().unwrap_or(0.0) / block.mass;
                    local = local.max((cond - tail.get(s)).abs());
                }
                if local > worst {
                    worst = local;
                    witness = Some(BicausalityWitness {
                        t,
                        side,
                        x_prefix: space.render(0, &xp),
                        y_prefix: space.render(0, &yp),
                        conditional: future
                            .iter()
                            .map(|(s, m)| (space.render(t, s), m / block.mass))
                            .collect(),
                        expected: tail.iter().map(|(s, m)| (space.render(t, s), m)).collect(),
                    });
                }
            }
        }
    }
    Ok(BicausalityReport {
        ok: worst <= BICAUSAL_TOLERANCE,
        worst_violation: worst,
        witness: if worst > 0.0 { witness } else { None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process_law::PathSpace;
    use std::sync::Arc;

    fn coin(h: usize) -> ProcessLaw {
        let s = Arc::new(PathSpace::grid(h, 2).unwrap());
        ProcessLaw::product(s, &vec![vec![(0, 0.5), (1, 0.5)]; h]).unwrap()
    }

    #[test]
    fn independent_coupling_is_bicausal() {
        let mu = coin(3);
        let s = mu.space().clone();
        let nu = ProcessLaw::product(
            s,
            &[
                vec![(0, 0.2), (1, 0.8)],
                vec![(0, 0.6), (1, 0.4)],
                vec![(0, 0.1), (1, 0.9)],
            ],
        )
        .unwrap();
        let pi = Coupling::independent(&mu, &nu).unwrap();
        let report = check_bicausal(&pi, &mu, &nu).unwrap();
        assert!(report.ok);
        assert!(report.worst_violation < 1e-15);
    }

    #[test]
    fn any_one_step_coupling_is_bicausal() {
        let mu = coin(1);
        let pi = Coupling::new(
            mu.space().clone(),
            [
                ((Path::from_atoms(vec![0]), Path::from_atoms(vec![1])), 0.5),
                ((Path::from_atoms(vec![1]), Path::from_atoms(vec![0])), 0.5),
            ],
        )
        .unwrap();
        assert!(check_bicausal(&pi, &mu, &mu).unwrap().ok);
    }

    #[test]
    fn anticipating_coupling_is_flagged() {
        // Y = (X_2, X_1): Y_1 reveals the future of X.
        let mu = coin(2);
        let mut masses = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                masses.push((
                    (Path::from_atoms(vec![a, b]), Path::from_atoms(vec![b, a])),
                    0.25,
                ));
            }
        }
        let pi = Coupling::new(mu.space().clone(), masses).unwrap();
        let report = check_bicausal(&pi, &mu, &mu).unwrap();
        assert!(!report.ok);
        assert!((report.worst_violation - 0.5).abs() < 1e-15);
        let w = report.witness.unwrap();
        assert_eq!(w.t, 1);
    }

    #[test]
    fn wrong_marginals_are_rejected() {
        let mu = coin(1);
        let pi = Coupling::new(
            mu.space().clone(),
            [((Path::from_atoms(vec![0]), Path::from_atoms(vec![0])), 1.0)],
        )
        .unwrap();
        assert!(matches!(
            check_bicausal(&pi, &mu, &mu),
            Err(Error::NotACoupling(_))
        ));
    }
}

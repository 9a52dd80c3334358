//! The explicit bicausal coupling `γ`, the adapted weighted total variation
//! it realizes, and the per-step measures `γ^(j)` that bound its
//! off-diagonal cost.

use serde::Serialize;

use super::coupling::{compose_kernels, Coupling};
use crate::divergences::{
    entropy_chain_terms, log_exp_moment, log_sum_exp_weighted, weighted_tv, ExtendedReal,
};
use crate::error::{Error, Result};
use crate::process_law::{BoundWeight, Node, Path, PathMeasure, ProcessLaw, WeightFunction};

/// Kernel coupling on equal prefixes: diagonal mass `μ^x ∧ ν^x` plus the
/// normalized product of the residuals. When the kernels agree the residual
/// term is the zero measure.
fn diagonal_plus_residual(a: &Node, b: &Node) -> Vec<(usize, usize, f64)> {
    let mut plan = Vec::new();
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    let (mut i, mut j) = (0, 0);
    let (ka, kb) = (&a.children, &b.children);
    while i < ka.len() || j < kb.len() {
        let atom_a = ka.get(i).map_or(usize::MAX, |x| x.atom);
        let atom_b = kb.get(j).map_or(usize::MAX, |x| x.atom);
        if atom_a == atom_b {
            let (p, q) = (ka[i].prob, kb[j].prob);
            plan.push((i, j, p.min(q)));
            if p > q {
                positive.push((i, p - q));
            } else if q > p {
                negative.push((j, q - p));
            }
            i += 1;
            j += 1;
        } else if atom_a < atom_b {
            positive.push((i, ka[i].prob));
            i += 1;
        } else {
            negative.push((j, kb[j].prob));
            j += 1;
        }
    }
    let residual: f64 = positive.iter().map(|x| x.1).sum();
    if residual > 0.0 {
        for &(i, p) in &positive {
            for &(j, q) in &negative {
                plan.push((i, j, p * q / residual));
            }
        }
    }
    plan
}

fn independent(a: &Node, b: &Node) -> Vec<(usize, usize, f64)> {
    let mut plan = Vec::with_capacity(a.children.len() * b.children.len());
    for (i, x) in a.children.iter().enumerate() {
        for (j, y) in b.children.iter().enumerate() {
            plan.push((i, j, x.prob * y.prob));
        }
    }
    plan
}

/// The coupling `γ`: kernels are coupled diagonal-plus-residual while the
/// two paths agree and independently once they have split.
pub fn build_gamma(mu: &ProcessLaw, nu: &ProcessLaw) -> Result<Coupling> {
    let (mu, nu) = ProcessLaw::aligned(mu, nu)?;
    compose_kernels(&mu, &nu, |a, b| {
        let (na, nb) = (mu.node(a), nu.node(b));
        Ok(if na.prefix == nb.prefix {
            diagonal_plus_residual(na, nb)
        } else {
            independent(na, nb)
        })
    })
}

/// `∫ (φ(x)+φ(y)) 1{x≠y} dγ`, which equals `ATV_φ(μ, ν)`.
pub fn atv_weighted(mu: &ProcessLaw, nu: &ProcessLaw, phi: &WeightFunction) -> Result<f64> {
    let gamma = build_gamma(mu, nu)?;
    let phi = phi.bind(gamma.space())?;
    off_diagonal_cost(&gamma, &phi)
}

pub(crate) fn off_diagonal_cost(pi: &Coupling, phi: &BoundWeight) -> Result<f64> {
    let mut total = 0.0;
    for (x, y, m) in pi.iter() {
        if x != y {
            total += m * (phi.value(x)? + phi.value(y)?);
        }
    }
    Ok(total)
}

/// `γ^(j)(dx) = μ̄^{x_{1:j}}(dx_{j+1:T}) |μ^{x_{1:j-1}} - ν^{x_{1:j-1}}|(dx_j) (μ_{1:j-1} ∧ ν_{1:j-1})(dx_{1:j-1})`.
///
/// Atoms `x_j` charged by `ν^{x_{1:j-1}}` alone have no `μ` tail; for those
/// the suffix is drawn from `ν̄^{x_{1:j}}` instead.
pub fn gamma_j(mu: &ProcessLaw, nu: &ProcessLaw, j: usize) -> Result<PathMeasure> {
    let (mu, nu) = ProcessLaw::aligned(mu, nu)?;
    let horizon = mu.horizon();
    if j == 0 || j > horizon {
        return Err(Error::InvalidIndex {
            index: j,
            max: horizon,
        });
    }
    let mut out = PathMeasure::zero(mu.space().clone(), 0, horizon);
    for node in mu.nodes_at(j - 1) {
        let Some(nu_id) = nu.node_id_opt(&node.prefix) else {
            continue;
        };
        let other = nu.node(nu_id);
        let common = node.mass.min(other.mass);
        let mut diffs: Vec<(usize, f64)> = node.children.iter().map(|b| (b.atom, b.prob)).collect();
        for b in &other.children {
            match diffs.iter_mut().find(|d| d.0 == b.atom) {
                Some(d) => d.1 -= b.prob,
                None => diffs.push((b.atom, -b.prob)),
            }
        }
        for (atom, diff) in diffs {
            let weight = common * diff.abs();
            if weight <= 0.0 {
                continue;
            }
            let prefix = node.prefix.child(atom);
            let (law, id) = match mu.node_id_opt(&prefix) {
                Some(id) => (&mu, id),
                None => (&nu, nu.node_id(&prefix)?),
            };
            law.walk_tail(id, Path::root(), weight, &mut |suffix, m| {
                out.add(prefix.concat(&suffix), m)
            });
        }
    }
    Ok(out)
}

/// Right-hand side pieces of `ATV_φ ≤ TV_φ + 2 Σ_j ∫φ dγ^(j)`.
#[derive(Debug, Clone, Serialize)]
pub struct SplitBound {
    pub tv_term: f64,
    pub gamma_integrals: Vec<f64>,
}

impl SplitBound {
    pub fn rhs(&self) -> f64 {
        self.tv_term + 2.0 * self.gamma_integrals.iter().sum::<f64>()
    }
}

pub fn split_bound_terms(
    mu: &ProcessLaw,
    nu: &ProcessLaw,
    phi: &WeightFunction,
) -> Result<SplitBound> {
    let (mu, nu) = ProcessLaw::aligned(mu, nu)?;
    let bound = phi.bind(mu.space())?;
    let tv_term = weighted_tv(&mu, &nu, phi)?;
    let gamma_integrals = (1..=mu.horizon())
        .map(|j| integrate_weight(&gamma_j(&mu, &nu, j)?, &bound))
        .collect::<Result<Vec<_>>>()?;
    Ok(SplitBound {
        tv_term,
        gamma_integrals,
    })
}

fn integrate_weight(m: &PathMeasure, phi: &BoundWeight) -> Result<f64> {
    let mut total = 0.0;
    for (x, mass) in m.iter() {
        total += mass * phi.value(x)?;
    }
    Ok(total)
}

/// `ψ^(j)(x_{1:j}) = ∫ φ(x) μ̄^{x_{1:j}}(dx_{j+1:T})`, with `ψ^(T) = φ`.
pub fn psi_j(mu: &ProcessLaw, phi: &WeightFunction, j: usize, prefix: &Path) -> Result<f64> {
    let horizon = mu.horizon();
    if j == 0 || j > horizon {
        return Err(Error::InvalidIndex {
            index: j,
            max: horizon,
        });
    }
    if prefix.len() != j {
        return Err(Error::InvalidParameter(format!(
            "prefix has length {}, expected {j}",
            prefix.len()
        )));
    }
    let id = mu.node_id(prefix)?;
    let phi = phi.bind(mu.space())?;
    let mut total = 0.0;
    let mut failure = None;
    mu.walk_tail(
        id,
        Path::root(),
        1.0,
        &mut |suffix, m| match phi.value(&prefix.concat(&suffix)) {
            Ok(v) => total += m * v,
            Err(e) => failure = Some(e),
        },
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// `(∫φ dγ^(j), (1 + log∫e^{φ²}dμ)^{1/2} √h_j)`.
pub fn gamma_j_entropy_bound(
    mu: &ProcessLaw,
    nu: &ProcessLaw,
    phi: &WeightFunction,
    j: usize,
) -> Result<(f64, ExtendedReal)> {
    let (mu, nu) = ProcessLaw::aligned(mu, nu)?;
    let gamma = gamma_j(&mu, &nu, j)?;
    let lhs = integrate_weight(&gamma, &phi.bind(mu.space())?)?;
    let h = entropy_chain_terms(&nu, &mu)?.terms[j - 1];
    let moment = log_exp_moment(&mu, phi)?;
    Ok((lhs, h.sqrt() * (1.0 + moment).sqrt()))
}

/// One node of the Jensen comparison
/// `∫e^{ψ^(j)²} dμ^{x_{1:j-1}} ≤ ∫e^{φ²} dμ̄^{x_{1:j-1}}`, in log scale.
#[derive(Debug, Clone, Serialize)]
pub struct JensenCheck {
    pub j: usize,
    pub prefix: String,
    pub log_lhs: f64,
    pub log_rhs: f64,
}

/// Evaluates the Jensen comparison at every node of `μ`'s tree.
pub fn psi_jensen_checks(mu: &ProcessLaw, phi: &WeightFunction) -> Result<Vec<JensenCheck>> {
    let phi = phi.bind(mu.space())?;
    let horizon = mu.horizon();
    // bottom-up: ψ at each node and log ∫e^{φ²} under the node's tail law
    let total_nodes = mu.depth_range(horizon).end;
    let mut psi = vec![0.0; total_nodes];
    let mut log_moment = vec![0.0; total_nodes];
    for id in mu.depth_range(horizon) {
        let v = phi.value(&mu.node(id).prefix)?;
        psi[id] = v;
        log_moment[id] = v * v;
    }
    let mut checks = Vec::new();
    for depth in (0..horizon).rev() {
        for id in mu.depth_range(depth) {
            let node = mu.node(id);
            psi[id] = node.children.iter().map(|b| b.prob * psi[b.node]).sum();
            let tail: Vec<(f64, f64)> = node
                .children
                .iter()
                .map(|b| (b.prob, log_moment[b.node]))
                .collect();
            log_moment[id] = log_sum_exp_weighted(&tail);
            let lhs: Vec<(f64, f64)> = node
                .children
                .iter()
                .map(|b| (b.prob, psi[b.node] * psi[b.node]))
                .collect();
            checks.push(JensenCheck {
                j: depth + 1,
                prefix: mu.space().render(0, &node.prefix),
                log_lhs: log_sum_exp_weighted(&lhs),
                log_rhs: log_moment[id],
            });
        }
    }
    checks.reverse();
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapted::check_bicausal;
    use crate::process_law::PathSpace;
    use std::sync::Arc;

    fn space(h: usize, b: usize) -> Arc<PathSpace> {
        Arc::new(PathSpace::grid(h, b).unwrap())
    }

    type Row<'a> = (&'a [usize], &'a [(usize, f64)]);

    fn tree(s: &Arc<PathSpace>, rows: &[Row]) -> ProcessLaw {
        ProcessLaw::from_kernels(
            s.clone(),
            rows.iter()
                .map(|(p, r)| (Path::from_atoms(p.to_vec()), r.to_vec())),
        )
        .unwrap()
    }

    fn pair() -> (ProcessLaw, ProcessLaw) {
        let s = space(2, 2);
        let mu = tree(
            &s,
            &[
                (&[], &[(0, 0.5), (1, 0.5)]),
                (&[0], &[(0, 0.7), (1, 0.3)]),
                (&[1], &[(0, 0.2), (1, 0.8)]),
            ],
        );
        let nu = tree(
            &s,
            &[
                (&[], &[(0, 0.6), (1, 0.4)]),
                (&[0], &[(0, 0.7), (1, 0.3)]),
                (&[1], &[(0, 0.9), (1, 0.1)]),
            ],
        );
        (mu, nu)
    }

    #[test]
    fn equal_laws_give_diagonal() {
        let (mu, _) = pair();
        let g = build_gamma(&mu, &mu).unwrap();
        assert_eq!(g.off_diagonal_mass(), 0.0);
        assert_eq!(
            atv_weighted(&mu, &mu, &WeightFunction::Constant(1.0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn gamma_is_bicausal_coupling() {
        let (mu, nu) = pair();
        let g = build_gamma(&mu, &nu).unwrap();
        assert!(g.marginal_error(&mu, &nu).unwrap() < 1e-15);
        let report = check_bicausal(&g, &mu, &nu).unwrap();
        assert!(report.ok, "{report:?}");
    }

    #[test]
    fn one_step_atv_is_tv() {
        let s = space(1, 3);
        let mu = ProcessLaw::product(s.clone(), &[vec![(0, 0.2), (1, 0.5), (2, 0.3)]]).unwrap();
        let nu = ProcessLaw::product(s, &[vec![(0, 0.4), (1, 0.1), (2, 0.5)]]).unwrap();
        let phi = WeightFunction::Constant(1.0);
        let atv = atv_weighted(&mu, &nu, &phi).unwrap();
        assert!((atv - 0.8).abs() < 1e-15);
        assert!((atv - weighted_tv(&mu, &nu, &phi).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_atv() {
        // first step: diagonal 0.5 on 0, 0.4 on 1, residual 0.1 from 1 to 0
        // below 0 the kernels agree; below 1 they share 0.2 on 0 and 0.1 on 1
        let (mu, nu) = pair();
        let off = 0.1 + 0.4 * 0.7;
        let atv = atv_weighted(&mu, &nu, &WeightFunction::Constant(1.0)).unwrap();
        assert!((atv - 2.0 * off).abs() < 1e-14, "{atv}");
    }

    #[test]
    fn gamma_one_for_products() {
        let s = space(2, 2);
        let mu = ProcessLaw::product(
            s.clone(),
            &[vec![(0, 0.3), (1, 0.7)], vec![(0, 0.4), (1, 0.6)]],
        )
        .unwrap();
        let nu =
            ProcessLaw::product(s, &[vec![(0, 0.5), (1, 0.5)], vec![(0, 0.9), (1, 0.1)]]).unwrap();
        let g = gamma_j(&mu, &nu, 1).unwrap();
        for (x, m) in g.iter() {
            // |μ_1 - ν_1| charges both atoms with 0.2
            let second = if x.atoms()[1] == 0 { 0.4 } else { 0.6 };
            assert!((m - 0.2 * second).abs() < 1e-15);
        }
        assert_eq!(g.support_size(), 4);
        assert!(matches!(
            gamma_j(&mu, &mu, 3),
            Err(Error::InvalidIndex { .. })
        ));
    }

    #[test]
    fn split_and_step_bounds_hold() {
        let (mu, nu) = pair();
        for phi in [
            WeightFunction::Constant(1.0),
            WeightFunction::rule(1.0, 1.0, Default::default()),
        ] {
            let terms = split_bound_terms(&mu, &nu, &phi).unwrap();
            assert!(atv_weighted(&mu, &nu, &phi).unwrap() <= terms.rhs() * (1.0 + 1e-9));
            for j in 1..=2 {
                let (lhs, rhs) = gamma_j_entropy_bound(&mu, &nu, &phi, j).unwrap();
                assert!(lhs <= rhs.to_f64() * (1.0 + 1e-9), "j={j}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn psi_matches_tail_average() {
        let (mu, _) = pair();
        let phi = WeightFunction::rule(1.0, 1.0, Default::default());
        // d(x, (0,0)) = x_1 + x_2 under l1
        let v = psi_j(&mu, &phi, 1, &Path::from_atoms(vec![1])).unwrap();
        assert!((v - (1.0 + 0.8)).abs() < 1e-15);
        let leaf = psi_j(&mu, &phi, 2, &Path::from_atoms(vec![1, 1])).unwrap();
        assert!((leaf - 2.0).abs() < 1e-15);
        let checks = psi_jensen_checks(&mu, &phi).unwrap();
        assert_eq!(checks.len(), 3);
        assert!(checks.iter().all(|c| c.log_lhs <= c.log_rhs + 1e-12));
    }
}

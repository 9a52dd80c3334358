//! Backward dynamic program over pairs of tree nodes.
//!
//! Every node of a [`ProcessLaw`] is keyed by its full prefix, so the value
//! function `V_t(x_{1:t}, y_{1:t})` already carries the whole history and the
//! recursion
//!
//! `V_t(x_{1:t}, y_{1:t}) = min_{π ∈ Cpl(μ^{x_{1:t}}, ν^{y_{1:t}})} ∫ V_{t+1} dπ`,
//! `V_T = c`,
//!
//! is exact for any cost on full paths, separable or not.

use ndarray::Array2;

use super::coupling::{compose_kernels, Coupling};
use crate::error::{Error, Result};
use crate::ot::{ground_cost, solve_transport, TransportProblem};
use crate::process_law::{Node, Path, PathMetric, ProcessLaw};

/// Optimal value and an optimal bicausal coupling.
#[derive(Debug, Clone)]
pub struct AdaptedSolution {
    pub value: f64,
    pub coupling: Coupling,
}

/// `min_{π ∈ Cpl_bc(μ,ν)} ∫ c dπ` by backward induction.
pub fn bicausal_optimum(
    mu: &ProcessLaw,
    nu: &ProcessLaw,
    cost: impl Fn(&Path, &Path) -> f64,
) -> Result<AdaptedSolution> {
    let (mu, nu) = ProcessLaw::aligned(mu, nu)?;
    let horizon = mu.horizon();
    let leaves_mu = mu.nodes_at(horizon);
    let leaves_nu = nu.nodes_at(horizon);
    let mut next: Vec<f64> = Vec::with_capacity(leaves_mu.len() * leaves_nu.len());
    for a in leaves_mu {
        for b in leaves_nu {
            let c = cost(&a.prefix, &b.prefix);
            if !c.is_finite() || c < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "cost {c} at ({}, {}) must be finite and nonnegative",
                    a.prefix, b.prefix
                )));
            }
            next.push(c);
        }
    }
    // plans[t][pair] for pairs of nodes at depth t
    let mut plans: Vec<Vec<Vec<(usize, usize, f64)>>> = vec![Vec::new(); horizon];
    for t in (0..horizon).rev() {
        let (ra, rb) = (mu.depth_range(t), nu.depth_range(t));
        let (ca, cb) = (mu.depth_range(t + 1).start, nu.depth_range(t + 1).start);
        let stride = nu.depth_range(t + 1).len();
        let mut cur = Vec::with_capacity(ra.len() * rb.len());
        let mut level = Vec::with_capacity(ra.len() * rb.len());
        for a in ra.clone() {
            for b in rb.clone() {
                let (value, plan) = node_transport(mu.node(a), nu.node(b), |i, j| {
                    next[(i - ca) * stride + (j - cb)]
                })?;
                cur.push(value);
                level.push(plan);
            }
        }
        plans[t] = level;
        next = cur;
    }
    let value = next[0];

    let starts: Vec<(usize, usize, usize)> = (0..horizon)
        .map(|t| {
            (
                mu.depth_range(t).start,
                nu.depth_range(t).start,
                nu.depth_range(t).len(),
            )
        })
        .collect();
    let coupling = compose_kernels(&mu, &nu, |a, b| {
        let t = mu.node(a).prefix.len();
        let (sa, sb, width) = starts[t];
        Ok(plans[t][(a - sa) * width + (b - sb)].clone())
    })?;
    Ok(AdaptedSolution { value, coupling })
}

type ChildPlan = Vec<(usize, usize, f64)>;

/// Optimal coupling of the children of two nodes for child-pair costs
/// `cost(child node of a, child node of b)`.
fn node_transport(
    a: &Node,
    b: &Node,
    cost: impl Fn(usize, usize) -> f64,
) -> Result<(f64, ChildPlan)> {
    let (m, n) = (a.children.len(), b.children.len());
    if m == 1 || n == 1 {
        let mut value = 0.0;
        let mut plan = Vec::with_capacity(m * n);
        for (i, ba) in a.children.iter().enumerate() {
            for (j, bb) in b.children.iter().enumerate() {
                let mass = if m == 1 { bb.prob } else { ba.prob };
                value += mass * cost(ba.node, bb.node);
                plan.push((i, j, mass));
            }
        }
        return Ok((value, plan));
    }
    let c = Array2::from_shape_fn((m, n), |(i, j)| {
        cost(a.children[i].node, b.children[j].node)
    });
    let problem = TransportProblem::new(
        c,
        a.children.iter().map(|x| x.prob).collect(),
        b.children.iter().map(|x| x.prob).collect(),
    )?;
    let solution = solve_transport(&problem)?;
    let plan = solution
        .plan
        .indexed_iter()
        .filter(|(_, &v)| v > 0.0)
        .map(|((i, j), &v)| (i, j, v))
        .collect();
    Ok((solution.value, plan))
}

/// `AW_p(μ, ν)` with cost `d(x,y)^p`, together with an optimal bicausal coupling.
pub fn nested_distance(
    mu: &ProcessLaw,
    nu: &ProcessLaw,
    metric: &PathMetric,
    p: f64,
) -> Result<(f64, Coupling)> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "p = {p} must be at least 1"
        )));
    }
    let (mu, nu) = ProcessLaw::aligned(mu, nu)?;
    let bound = metric.bind(mu.space())?;
    let solution = bicausal_optimum(&mu, &nu, ground_cost(&bound, p))?;
    Ok((solution.value.powf(1.0 / p), solution.coupling))
}

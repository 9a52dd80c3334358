//! Relative entropy, weighted total variation and exponential moments, plus
//! the right-hand sides of the transport-entropy bounds built from them.

use std::fmt;
use std::ops::{Add, Mul};

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::process_law::{PathMetric, ProcessLaw, WeightFunction};

/// A nonnegative real or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

/// Relative entropy value; `Infinite` exactly when absolute continuity fails.
pub type EntropyValue = ExtendedReal;

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::Infinite => None,
        }
    }

    pub fn sqrt(self) -> ExtendedReal {
        self.map(f64::sqrt)
    }

    pub fn map(self, f: impl FnOnce(f64) -> f64) -> ExtendedReal {
        match self {
            ExtendedReal::Finite(v) => ExtendedReal::Finite(f(v)),
            ExtendedReal::Infinite => ExtendedReal::Infinite,
        }
    }

    /// Lossy view for reporting; `+∞` becomes `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::Infinite,
        }
    }
}

/// Scaling by a nonnegative factor; `0 · ∞` stays `∞` only for positive factors.
impl Mul<f64> for ExtendedReal {
    type Output = ExtendedReal;

    fn mul(self, c: f64) -> ExtendedReal {
        match self {
            ExtendedReal::Finite(v) => ExtendedReal::Finite(v * c),
            ExtendedReal::Infinite if c == 0.0 => ExtendedReal::ZERO,
            ExtendedReal::Infinite => ExtendedReal::Infinite,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(v) => s.serialize_f64(*v),
            ExtendedReal::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Per-step entropy terms `h_1, …, h_T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainTerms {
    pub terms: Vec<ExtendedReal>,
}

impl ChainTerms {
    pub fn total(&self) -> ExtendedReal {
        self.terms
            .iter()
            .fold(ExtendedReal::ZERO, |acc, &h| acc + h)
    }
}

/// `H(ν|μ) = Σ ν(x) log(ν(x)/μ(x))` for two discrete distributions given as
/// `(atom, prob)` lists sorted by atom.
pub(crate) fn discrete_kl(nu: &[(usize, f64)], mu: &[(usize, f64)]) -> ExtendedReal {
    let mut total = 0.0;
    let mut j = 0;
    for &(a, q) in nu {
        while j < mu.len() && mu[j].0 < a {
            j += 1;
        }
        if q <= 0.0 {
            continue;
        }
        if j == mu.len() || mu[j].0 != a || mu[j].1 <= 0.0 {
            return ExtendedReal::Infinite;
        }
        total += q * (q / mu[j].1).ln();
    }
    ExtendedReal::Finite(total.max(0.0))
}

/// Relative entropy `H(ν|μ)` in nats.
pub fn relative_entropy(nu: &ProcessLaw, mu: &ProcessLaw) -> Result<EntropyValue> {
    let (nu, mu) = ProcessLaw::aligned(nu, mu)?;
    let mut total = 0.0;
    for (path, q) in nu.paths() {
        let p = mu.prefix_mass(path);
        if p <= 0.0 {
            return Ok(ExtendedReal::Infinite);
        }
        total += q * (q / p).ln();
    }
    Ok(ExtendedReal::Finite(total.max(0.0)))
}

/// `h_1 = 2H(ν_1|μ_1)` and `h_j = ∫ 2H(ν^{x_{1:j-1}}|μ^{x_{1:j-1}}) dν_{1:j-1}`.
///
/// A `ν`-charged prefix missing from `μ`'s tree contributes `+∞`.
pub fn entropy_chain_terms(nu: &ProcessLaw, mu: &ProcessLaw) -> Result<ChainTerms> {
    let (nu, mu) = ProcessLaw::aligned(nu, mu)?;
    let terms = (0..nu.horizon())
        .map(|depth| {
            let mut h = ExtendedReal::ZERO;
            for node in nu.nodes_at(depth) {
                let Some(mu_id) = mu.node_id_opt(&node.prefix) else {
                    return ExtendedReal::Infinite;
                };
                let nu_row: Vec<_> = node.children.iter().map(|b| (b.atom, b.prob)).collect();
                let mu_row: Vec<_> = mu
                    .node(mu_id)
                    .children
                    .iter()
                    .map(|b| (b.atom, b.prob))
                    .collect();
                h = h + discrete_kl(&nu_row, &mu_row) * (2.0 * node.mass);
                if !h.is_finite() {
                    return h;
                }
            }
            h
        })
        .collect();
    Ok(ChainTerms { terms })
}

/// `TV_φ(μ,ν) = Σ_x φ(x) |μ-ν|(x)`.
pub fn weighted_tv(mu: &ProcessLaw, nu: &ProcessLaw, phi: &WeightFunction) -> Result<f64> {
    let (mu, nu) = ProcessLaw::aligned(mu, nu)?;
    let phi = phi.bind(mu.space())?;
    let parts = mu.path_measure().residual_parts(&nu.path_measure())?;
    let mut total = 0.0;
    for (x, m) in parts.abs_diff.iter() {
        total += m * phi.value(x)?;
    }
    Ok(total)
}

/// `TV_φ` evaluated as the cost of the diagonal-plus-residual-product
/// coupling `(id,id)_#(μ∧ν) + (μ-ν)_+ ⊗ (ν-μ)_+ / (μ-ν)_+(X)` under
/// `(φ(x)+φ(y)) 1{x≠y}`.
pub fn weighted_tv_via_coupling(
    mu: &ProcessLaw,
    nu: &ProcessLaw,
    phi: &WeightFunction,
) -> Result<f64> {
    let (mu, nu) = ProcessLaw::aligned(mu, nu)?;
    let phi = phi.bind(mu.space())?;
    let parts = mu.path_measure().residual_parts(&nu.path_measure())?;
    let residual = parts.positive.total_mass();
    if residual <= 0.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (x, px) in parts.positive.iter() {
        let fx = phi.value(x)?;
        for (y, qy) in parts.negative.iter() {
            // supports of the two residuals are disjoint, so x != y here
            total += (fx + phi.value(y)?) * px * qy / residual;
        }
    }
    Ok(total)
}

/// `log Σ_x μ(x) exp(φ(x)²)`, computed with the largest exponent factored out.
pub fn log_exp_moment(mu: &ProcessLaw, phi: &WeightFunction) -> Result<f64> {
    let phi = phi.bind(mu.space())?;
    let mut exponents = Vec::with_capacity(mu.support_size());
    for (x, m) in mu.paths() {
        let v = phi.value(x)?;
        exponents.push((m, v * v));
    }
    Ok(log_sum_exp_weighted(&exponents))
}

/// `log Σ w_i exp(e_i)` for positive weights.
pub(crate) fn log_sum_exp_weighted(terms: &[(f64, f64)]) -> f64 {
    let shift = terms
        .iter()
        .map(|&(_, e)| e)
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return shift;
    }
    let s: f64 = terms.iter().map(|&(w, e)| w * (e - shift).exp()).sum();
    shift + s.ln()
}

/// `(1 + log ∫e^{φ²}dμ)^{1/2} √(2H(ν|μ))`.
pub fn bv_rhs(mu: &ProcessLaw, nu: &ProcessLaw, phi: &WeightFunction) -> Result<ExtendedReal> {
    let (mu, nu) = ProcessLaw::aligned(mu, nu)?;
    let moment = log_exp_moment(&mu, phi)?;
    let h = relative_entropy(&nu, &mu)?;
    Ok((h * 2.0).sqrt() * (1.0 + moment).sqrt())
}

/// `2√T + 1`.
pub fn adapted_prefactor(horizon: usize) -> f64 {
    2.0 * (horizon as f64).sqrt() + 1.0
}

/// `(2√T+1) · bv_rhs(μ, ν, φ)`.
pub fn adapted_rhs(mu: &ProcessLaw, nu: &ProcessLaw, phi: &WeightFunction) -> Result<ExtendedReal> {
    Ok(bv_rhs(mu, nu, phi)? * adapted_prefactor(mu.horizon()))
}

/// `2^{p-1}(2√T+1)/√α · (1 + log ∫e^{α d(x,x₀)^{2p}}dμ)^{1/2} √(2H(ν|μ))`.
///
/// `base` holds the atom ids of `x₀`; `None` picks the smallest-valued atom
/// of every coordinate.
pub fn corollary_rhs_p(
    mu: &ProcessLaw,
    nu: &ProcessLaw,
    alpha: f64,
    base: Option<Vec<String>>,
    p: f64,
    metric: &PathMetric,
) -> Result<ExtendedReal> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must be positive"
        )));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "p = {p} must be at least 1"
        )));
    }
    let phi = WeightFunction::Rule {
        alpha,
        p,
        base,
        metric: metric.clone(),
    };
    let factor = 2f64.powf(p - 1.0) / alpha.sqrt();
    Ok(adapted_rhs(mu, nu, &phi)? * factor)
}

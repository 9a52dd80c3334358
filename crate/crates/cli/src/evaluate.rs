//! Every quantity and inequality for one pair of laws.

use std::fmt;

use atvkit::adapted::{
    atv_weighted, build_gamma, check_bicausal, gamma_j_entropy_bound, nested_distance,
    psi_jensen_checks, split_bound_terms, Coupling,
};
use atvkit::divergences::{
    adapted_rhs, bv_rhs, corollary_rhs_p, entropy_chain_terms, log_exp_moment, relative_entropy,
    weighted_tv,
};
use atvkit::ot::wasserstein;
use atvkit::{ExtendedReal, PathMetric, ProcessLaw, WeightFunction};
use serde::Serialize;

use crate::args::{MetricArg, PhiSpec};
use crate::tolerance::Tolerances;

/// Largest horizon with its own `gamma_j` column.
pub const MAX_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "holds")]
    Holds,
    #[serde(rename = "holds-trivially-infinite-rhs")]
    TriviallyInfinite,
    #[serde(rename = "VIOLATED")]
    Violated,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Holds => "holds",
            Status::TriviallyInfinite => "holds-trivially-infinite-rhs",
            Status::Violated => "VIOLATED",
            Status::NotApplicable => "n/a",
        })
    }
}

/// One named inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: Option<ExtendedReal>,
    pub rhs: Option<ExtendedReal>,
    pub ratio: Option<ExtendedReal>,
    pub status: Status,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        lhs: ExtendedReal,
        rhs: ExtendedReal,
        tol: &Tolerances,
    ) -> Self {
        let status = match (lhs, rhs) {
            (_, ExtendedReal::Infinite) => Status::TriviallyInfinite,
            (ExtendedReal::Infinite, _) => Status::Violated,
            (ExtendedReal::Finite(l), ExtendedReal::Finite(r)) => {
                if l > r * tol.slack_factor() {
                    Status::Violated
                } else {
                    Status::Holds
                }
            }
        };
        let ratio = match (lhs, rhs) {
            (_, ExtendedReal::Infinite) => ExtendedReal::ZERO,
            (ExtendedReal::Infinite, _) => ExtendedReal::Infinite,
            (ExtendedReal::Finite(l), ExtendedReal::Finite(0.0)) => {
                if l == 0.0 {
                    ExtendedReal::ZERO
                } else {
                    ExtendedReal::Infinite
                }
            }
            (ExtendedReal::Finite(l), ExtendedReal::Finite(r)) => ExtendedReal::Finite(l / r),
        };
        Check {
            name: name.into(),
            lhs: Some(lhs),
            rhs: Some(rhs),
            ratio: Some(ratio),
            status,
        }
    }

    pub fn finite(name: impl Into<String>, lhs: f64, rhs: f64, tol: &Tolerances) -> Self {
        Self::new(
            name,
            ExtendedReal::Finite(lhs),
            ExtendedReal::Finite(rhs),
            tol,
        )
    }

    pub fn not_applicable(name: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            lhs: None,
            rhs: None,
            ratio: None,
            status: Status::NotApplicable,
        }
    }
}

/// Column order of the per-φ checks, followed by the instance checks.
pub fn check_names() -> Vec<String> {
    let mut names: Vec<String> = vec!["adapted_bv".into(), "classical_bv".into(), "tv_sum".into()];
    names.extend((1..=MAX_STEPS).map(|j| format!("gamma_{j}")));
    names.push("psi_jensen".into());
    names.extend(INSTANCE_CHECKS.iter().map(|s| s.to_string()));
    names
}

const INSTANCE_CHECKS: [&str; 10] = [
    "chain_rule",
    "w_le_aw",
    "adapted_pinsker",
    "atv_tv",
    "corollary_p1",
    "corollary_p",
    "bicausal_gamma",
    "bicausal_nested",
    "marginals_gamma",
    "marginals_nested",
];

#[derive(Debug, Clone)]
pub struct Settings {
    pub metric_arg: MetricArg,
    pub metric: PathMetric,
    pub phis: Vec<PhiSpec>,
    pub p: f64,
    pub alpha: f64,
    pub tol: Tolerances,
}

impl Settings {
    pub fn metric_name(&self) -> &'static str {
        match self.metric_arg {
            MetricArg::L1 => "l1",
            MetricArg::Max => "max",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiReport {
    pub phi: String,
    pub tv: f64,
    pub atv: f64,
    pub log_exp_moment: f64,
    pub bv_rhs: ExtendedReal,
    pub adapted_rhs: ExtendedReal,
    pub tv_term: f64,
    pub gamma_integrals: Vec<f64>,
    pub gamma_bounds: Vec<ExtendedReal>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Quantities {
    pub horizon: usize,
    pub metric: String,
    pub p: f64,
    pub alpha: f64,
    pub w_1: f64,
    pub aw_1: f64,
    pub w_p: f64,
    pub aw_p: f64,
    pub relative_entropy: ExtendedReal,
    pub chain_terms: Vec<ExtendedReal>,
    pub tv: f64,
    pub atv: f64,
    pub corollary_rhs_1: ExtendedReal,
    pub corollary_rhs_p: ExtendedReal,
    pub gamma_bicausal_violation: f64,
    pub nested_bicausal_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub quantities: Quantities,
    pub checks: Vec<Check>,
    pub per_phi: Vec<PhiReport>,
}

impl Evaluation {
    /// Checks of row `k`: the φ-specific ones then the instance ones.
    pub fn row(&self, k: usize) -> impl Iterator<Item = &Check> {
        self.per_phi[k].checks.iter().chain(self.checks.iter())
    }

    pub fn violations(&self) -> usize {
        (0..self.per_phi.len())
            .map(|k| self.row(k).filter(|c| c.status == Status::Violated).count())
            .sum()
    }
}

fn structural(name: &str, lhs: f64, rhs: f64, tol: &Tolerances) -> Check {
    Check::finite(name, lhs, rhs, tol)
}

fn coupling_checks(
    pi: &Coupling,
    mu: &ProcessLaw,
    nu: &ProcessLaw,
    tol: &Tolerances,
    which: &str,
) -> atvkit::Result<(f64, Check, Check)> {
    let marginal = pi.marginal_error(mu, nu)?;
    let violation = if marginal > tol.marginal {
        f64::INFINITY
    } else {
        check_bicausal(pi, mu, nu)?.worst_violation
    };
    let bicausal = if violation.is_finite() {
        structural(&format!("bicausal_{which}"), violation, tol.bicausal, tol)
    } else {
        Check::new(
            format!("bicausal_{which}"),
            ExtendedReal::Infinite,
            ExtendedReal::Finite(tol.bicausal),
            tol,
        )
    };
    Ok((
        violation,
        bicausal,
        structural(&format!("marginals_{which}"), marginal, tol.marginal, tol),
    ))
}

pub fn evaluate(
    mu: &ProcessLaw,
    nu: &ProcessLaw,
    settings: &Settings,
) -> atvkit::Result<Evaluation> {
    let (mu, nu) = ProcessLaw::aligned(mu, nu)?;
    let (mu, nu) = (mu.as_ref(), nu.as_ref());
    let tol = &settings.tol;
    let metric = &settings.metric;
    let horizon = mu.horizon();
    let t = horizon as f64;

    let h = relative_entropy(nu, mu)?;
    let chain = entropy_chain_terms(nu, mu)?;
    let w_1 = wasserstein(mu, nu, metric, 1.0)?;
    let (aw_1, nested) = nested_distance(mu, nu, metric, 1.0)?;
    let w_p = wasserstein(mu, nu, metric, settings.p)?;
    let (aw_p, _) = nested_distance(mu, nu, metric, settings.p)?;
    let one = WeightFunction::Constant(1.0);
    let tv = weighted_tv(mu, nu, &one)?;
    let atv = atv_weighted(mu, nu, &one)?;
    let corollary_rhs_1 = corollary_rhs_p(mu, nu, settings.alpha, None, 1.0, metric)?;
    let corollary_rhs = corollary_rhs_p(mu, nu, settings.alpha, None, settings.p, metric)?;
    let gamma = build_gamma(mu, nu)?;
    let (gamma_violation, bicausal_gamma, marginals_gamma) =
        coupling_checks(&gamma, mu, nu, tol, "gamma")?;
    let (nested_violation, bicausal_nested, marginals_nested) =
        coupling_checks(&nested, mu, nu, tol, "nested")?;

    let chain_gap = match (chain.total(), h) {
        (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => {
            ExtendedReal::Finite((a - 2.0 * b).abs())
        }
        (ExtendedReal::Infinite, ExtendedReal::Infinite) => ExtendedReal::ZERO,
        _ => ExtendedReal::Infinite,
    };
    let checks = vec![
        Check::new(
            "chain_rule",
            chain_gap,
            ExtendedReal::Finite(tol.equality),
            tol,
        ),
        Check::finite("w_le_aw", w_1, aw_1, tol),
        Check::new(
            "adapted_pinsker",
            ExtendedReal::Finite(atv),
            (h * 2.0).sqrt() * t.sqrt(),
            tol,
        ),
        Check::finite("atv_tv", atv, (2.0 * t - 1.0) * tv, tol),
        Check::new(
            "corollary_p1",
            ExtendedReal::Finite(aw_1),
            corollary_rhs_1,
            tol,
        ),
        Check::new(
            "corollary_p",
            ExtendedReal::Finite(aw_p.powf(settings.p)),
            corollary_rhs,
            tol,
        ),
        bicausal_gamma,
        bicausal_nested,
        marginals_gamma,
        marginals_nested,
    ];

    let mut per_phi = Vec::with_capacity(settings.phis.len());
    for spec in &settings.phis {
        let phi = spec.weight(metric);
        let tv = weighted_tv(mu, nu, &phi)?;
        let atv = atv_weighted(mu, nu, &phi)?;
        let bv = bv_rhs(mu, nu, &phi)?;
        let adapted = adapted_rhs(mu, nu, &phi)?;
        let split = split_bound_terms(mu, nu, &phi)?;
        let mut checks = vec![
            Check::new("adapted_bv", ExtendedReal::Finite(atv), adapted, tol),
            Check::new("classical_bv", ExtendedReal::Finite(tv), bv, tol),
            Check::finite("tv_sum", atv, split.rhs(), tol),
        ];
        let mut gamma_bounds = Vec::with_capacity(horizon);
        for j in 1..=MAX_STEPS {
            if j > horizon {
                checks.push(Check::not_applicable(format!("gamma_{j}")));
                continue;
            }
            let (lhs, rhs) = gamma_j_entropy_bound(mu, nu, &phi, j)?;
            gamma_bounds.push(rhs);
            checks.push(Check::new(
                format!("gamma_{j}"),
                ExtendedReal::Finite(lhs),
                rhs,
                tol,
            ));
        }
        let jensen = psi_jensen_checks(mu, &phi)?
            .iter()
            .map(|c| (c.log_lhs - c.log_rhs).exp())
            .fold(0.0, f64::max);
        checks.push(Check::finite("psi_jensen", jensen, 1.0, tol));
        per_phi.push(PhiReport {
            phi: phi.descriptor(),
            tv,
            atv,
            log_exp_moment: log_exp_moment(mu, &phi)?,
            bv_rhs: bv,
            adapted_rhs: adapted,
            tv_term: split.tv_term,
            gamma_integrals: split.gamma_integrals,
            gamma_bounds,
            checks,
        });
    }

    Ok(Evaluation {
        quantities: Quantities {
            horizon,
            metric: settings.metric_name().into(),
            p: settings.p,
            alpha: settings.alpha,
            w_1,
            aw_1,
            w_p,
            aw_p,
            relative_entropy: h,
            chain_terms: chain.terms,
            tv,
            atv,
            corollary_rhs_1,
            corollary_rhs_p: corollary_rhs,
            gamma_bicausal_violation: gamma_violation,
            nested_bicausal_violation: nested_violation,
        },
        checks,
        per_phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn statuses() {
        let t = tol();
        assert_eq!(Check::finite("a", 1.0, 1.0, &t).status, Status::Holds);
        assert_eq!(
            Check::finite("a", 1.0 + 1e-12, 1.0, &t).status,
            Status::Holds
        );
        assert_eq!(
            Check::finite("a", 1.0 + 1e-6, 1.0, &t).status,
            Status::Violated
        );
        let inf = Check::new("a", ExtendedReal::Finite(3.0), ExtendedReal::Infinite, &t);
        assert_eq!(inf.status, Status::TriviallyInfinite);
        assert_eq!(inf.ratio, Some(ExtendedReal::ZERO));
        assert_eq!(
            Check::finite("a", 0.0, 0.0, &t).ratio,
            Some(ExtendedReal::ZERO)
        );
        assert_eq!(Check::finite("a", 1.0, 0.0, &t).status, Status::Violated);
    }

    #[test]
    fn column_names_are_unique() {
        let names = check_names();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
    }
}

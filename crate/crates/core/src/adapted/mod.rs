//! Adapted optimal transport: bicausal couplings, the nested distance and
//! the adapted weighted total variation.

mod bicausal;
mod coupling;
mod gamma;
mod nested;

pub use bicausal::{
    check_bicausal, BicausalityReport, BicausalityWitness, Side, BICAUSAL_TOLERANCE,
    MARGINAL_TOLERANCE,
};
pub use coupling::Coupling;
pub use gamma::{
    atv_weighted, build_gamma, gamma_j, gamma_j_entropy_bound, psi_j, psi_jensen_checks,
    split_bound_terms, JensenCheck, SplitBound,
};
pub use nested::{bicausal_optimum, nested_distance, AdaptedSolution};

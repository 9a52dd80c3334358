//! Exact rational adjudicator for tiny instances.

mod bounds;
mod lp;
mod simplex;

pub use bounds::{certify_log_exp_moment, exp_interval, exp_moment_interval};
pub use lp::{bicausal_lp, classical_ot_lp, rational, to_f64, transport_lp, RationalLaw};
pub use simplex::{enumerate_basic_solutions, LpSolution, RationalLp, VARIABLE_CAP};

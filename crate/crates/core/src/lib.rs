//! Exact adapted optimal transport on finite-support process laws.

// `!(x >= 0.0)` style checks are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapted;
pub mod divergences;
pub mod error;
pub mod fixtures;
pub mod oracle;
pub mod ot;
pub mod process_law;

pub use divergences::{ChainTerms, EntropyValue, ExtendedReal};
pub use error::{Error, Result};
pub use process_law::{
    load_law, save_law, Atom, Path, PathMeasure, PathMetric, PathPrefix, PathSpace, ProcessLaw,
    WeightFunction,
};

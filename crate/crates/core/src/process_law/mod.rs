//! Finite-support process laws on `X_1 × … × X_T`, their disintegration
//! into kernels, and the lattice operations on path measures.

mod format;
mod law;
mod measure;
mod metric;
mod space;

pub use format::{load_law, parse_prefix, save_law};
pub use law::{ProcessLaw, MASS_TOLERANCE, ROW_SUM_TOLERANCE};
pub use measure::{PathMeasure, ResidualParts};
pub use metric::{
    default_base, BoundMetric, BoundWeight, Combine, GroundMetric, GroundTable, PathMetric,
    WeightFunction,
};
pub use space::{Atom, CoordinateSpace, Path, PathPrefix, PathSpace, SpaceUnion};

pub(crate) use law::Node;

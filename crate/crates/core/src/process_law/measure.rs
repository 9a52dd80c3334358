use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::space::{Path, PathSpace};
use crate::error::{Error, Result};

/// A nonnegative finite measure on paths covering coordinates
/// `offset..offset + len` of a [`PathSpace`].
///
/// Zero-mass entries are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMeasure {
    space: Arc<PathSpace>,
    offset: usize,
    len: usize,
    masses: BTreeMap<Path, f64>,
}

/// Jordan decomposition of `a - b` together with `|a - b|`.
#[derive(Debug, Clone)]
pub struct ResidualParts {
    pub positive: PathMeasure,
    pub negative: PathMeasure,
    pub abs_diff: PathMeasure,
}

impl PathMeasure {
    pub fn new(
        space: Arc<PathSpace>,
        offset: usize,
        len: usize,
        masses: impl IntoIterator<Item = (Path, f64)>,
    ) -> Result<Self> {
        if offset + len > space.horizon() {
            return Err(Error::InvalidHorizon(format!(
                "coordinates {}..{} exceed horizon {}",
                offset,
                offset + len,
                space.horizon()
            )));
        }
        let mut m = PathMeasure::zero(space, offset, len);
        for (path, mass) in masses {
            if path.len() != len {
                return Err(Error::SpaceMismatch(format!(
                    "path {path} has length {}, expected {len}",
                    path.len()
                )));
            }
            for (k, &a) in path.atoms().iter().enumerate() {
                if a >= m.space.coordinate(offset + k).len() {
                    return Err(Error::SpaceMismatch(format!("atom index {a} out of range")));
                }
            }
            if !(mass >= 0.0) || !mass.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "mass {mass} at {path} is not a nonnegative number"
                )));
            }
            m.add(path, mass);
        }
        Ok(m)
    }

    pub fn zero(space: Arc<PathSpace>, offset: usize, len: usize) -> Self {
        PathMeasure {
            space,
            offset,
            len,
            masses: BTreeMap::new(),
        }
    }

    /// Full-path measure (offset 0, length `T`).
    pub fn on_paths(
        space: Arc<PathSpace>,
        masses: impl IntoIterator<Item = (Path, f64)>,
    ) -> Result<Self> {
        let horizon = space.horizon();
        Self::new(space, 0, horizon, masses)
    }

    pub fn space(&self) -> &Arc<PathSpace> {
        &self.space
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Number of coordinates each path spans.
    pub fn path_len(&self) -> usize {
        self.len
    }

    pub fn get(&self, path: &Path) -> f64 {
        self.masses.get(path).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Path, f64)> + '_ {
        self.masses.iter().map(|(p, &m)| (p, m))
    }

    pub fn support_size(&self) -> usize {
        self.masses.len()
    }

    pub fn is_zero(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.values().sum()
    }

    /// `∫ f dm`.
    pub fn integrate(&self, mut f: impl FnMut(&Path) -> f64) -> f64 {
        self.masses.iter().map(|(p, &m)| m * f(p)).sum()
    }

    pub(crate) fn add(&mut self, path: Path, mass: f64) {
        if mass > 0.0 {
            *self.masses.entry(path).or_insert(0.0) += mass;
        }
    }

    pub fn scaled(&self, c: f64) -> PathMeasure {
        let mut out = PathMeasure::zero(self.space.clone(), self.offset, self.len);
        for (p, &m) in &self.masses {
            out.add(p.clone(), c * m);
        }
        out
    }

    pub fn sum(&self, other: &PathMeasure) -> Result<PathMeasure> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (p, &m) in &other.masses {
            out.add(p.clone(), m);
        }
        Ok(out)
    }

    /// Pointwise minimum `a ∧ b`.
    pub fn meet(&self, other: &PathMeasure) -> Result<PathMeasure> {
        self.check_compatible(other)?;
        let mut out = PathMeasure::zero(self.space.clone(), self.offset, self.len);
        for (p, &a) in &self.masses {
            let b = other.get(p);
            out.add(p.clone(), a.min(b));
        }
        Ok(out)
    }

    /// `(a-b)_+`, `(b-a)_+` and `|a-b|`.
    pub fn residual_parts(&self, other: &PathMeasure) -> Result<ResidualParts> {
        self.check_compatible(other)?;
        let mut positive = PathMeasure::zero(self.space.clone(), self.offset, self.len);
        let mut negative = positive.clone();
        let mut abs_diff = positive.clone();
        let keys: BTreeSet<&Path> = self.masses.keys().chain(other.masses.keys()).collect();
        for p in keys {
            let d = self.get(p) - other.get(p);
            if d > 0.0 {
                positive.add(p.clone(), d);
                abs_diff.add(p.clone(), d);
            } else if d < 0.0 {
                negative.add(p.clone(), -d);
                abs_diff.add(p.clone(), -d);
            }
        }
        Ok(ResidualParts {
            positive,
            negative,
            abs_diff,
        })
    }

    pub(crate) fn check_compatible(&self, other: &PathMeasure) -> Result<()> {
        if self.offset != other.offset || self.len != other.len {
            return Err(Error::SpaceMismatch(format!(
                "coordinate ranges differ: {}+{} vs {}+{}",
                self.offset, self.len, other.offset, other.len
            )));
        }
        if !Arc::ptr_eq(&self.space, &other.space) && *self.space != *other.space {
            return Err(Error::SpaceMismatch(
                "measures live on different path spaces".into(),
            ));
        }
        Ok(())
    }
}

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// A point of one coordinate space `X_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub id: String,
    /// Numeric coordinate used by value-based ground metrics.
    pub value: Option<f64>,
}

impl Atom {
    pub fn new(id: impl Into<String>) -> Self {
        Atom {
            id: id.into(),
            value: None,
        }
    }

    pub fn with_value(id: impl Into<String>, value: f64) -> Self {
        Atom {
            id: id.into(),
            value: Some(value),
        }
    }
}

/// The finite set of atoms available at one time step.
#[derive(Debug, Clone)]
pub struct CoordinateSpace {
    atoms: Vec<Atom>,
    index: HashMap<String, usize>,
}

impl PartialEq for CoordinateSpace {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms
    }
}

impl CoordinateSpace {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let mut index = HashMap::with_capacity(atoms.len());
        for (i, atom) in atoms.iter().enumerate() {
            if atom.id.is_empty() || atom.id.contains('/') {
                return Err(Error::SpaceMismatch(format!(
                    "atom id {:?} must be non-empty and must not contain '/'",
                    atom.id
                )));
            }
            if let Some(v) = atom.value {
                if !v.is_finite() {
                    return Err(Error::SpaceMismatch(format!(
                        "atom {:?} carries a non-finite value",
                        atom.id
                    )));
                }
            }
            if index.insert(atom.id.clone(), i).is_some() {
                return Err(Error::SpaceMismatch(format!(
                    "duplicate atom id {:?}",
                    atom.id
                )));
            }
        }
        Ok(CoordinateSpace { atoms, index })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

/// The product space `X_1 × … × X_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpace {
    coords: Vec<CoordinateSpace>,
}

/// Index maps produced when two spaces are merged into their union.
#[derive(Debug, Clone)]
pub struct SpaceUnion {
    pub space: PathSpace,
    pub left: Vec<Vec<usize>>,
    pub right: Vec<Vec<usize>>,
}

impl PathSpace {
    pub fn new(coords: Vec<Vec<Atom>>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidHorizon("horizon must be at least 1".into()));
        }
        let coords = coords
            .into_iter()
            .map(CoordinateSpace::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(PathSpace { coords })
    }

    /// `T` coordinates, each holding atoms `"0"..` with the matching integer values.
    pub fn grid(horizon: usize, branching: usize) -> Result<Self> {
        Self::new(
            (0..horizon)
                .map(|_| {
                    (0..branching)
                        .map(|k| Atom::with_value(k.to_string(), k as f64))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn horizon(&self) -> usize {
        self.coords.len()
    }

    /// Coordinate `t` in zero-based indexing (`X_{t+1}`).
    pub fn coordinate(&self, t: usize) -> &CoordinateSpace {
        &self.coords[t]
    }

    pub fn coordinates(&self) -> &[CoordinateSpace] {
        &self.coords
    }

    /// Resolves atom ids into a path starting at coordinate `offset`.
    pub fn path_from_ids<S: AsRef<str>>(&self, offset: usize, ids: &[S]) -> Result<Path> {
        if offset + ids.len() > self.horizon() {
            return Err(Error::InvalidHorizon(format!(
                "path of length {} at offset {} exceeds horizon {}",
                ids.len(),
                offset,
                self.horizon()
            )));
        }
        ids.iter()
            .enumerate()
            .map(|(k, id)| {
                let id = id.as_ref();
                self.coords[offset + k].index_of(id).ok_or_else(|| {
                    Error::SpaceMismatch(format!(
                        "unknown atom {:?} in coordinate {}",
                        id,
                        offset + k + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Path)
    }

    /// Atom ids of `path`, read from coordinate `offset` onwards.
    pub fn path_ids(&self, offset: usize, path: &Path) -> Vec<&str> {
        path.0
            .iter()
            .enumerate()
            .map(|(k, &a)| self.coords[offset + k].atoms[a].id.as_str())
            .collect()
    }

    /// `/`-joined atom ids; the root prefix renders as the empty string.
    pub fn render(&self, offset: usize, path: &Path) -> String {
        self.path_ids(offset, path).join("/")
    }

    /// Union of two spaces with the same horizon, unified by atom id.
    ///
    /// Atoms of `self` keep their order; atoms found only in `other` are
    /// appended. Conflicting numeric values for the same id are rejected.
    pub fn union(&self, other: &PathSpace) -> Result<SpaceUnion> {
        if self.horizon() != other.horizon() {
            return Err(Error::SpaceMismatch(format!(
                "horizons differ: {} vs {}",
                self.horizon(),
                other.horizon()
            )));
        }
        let mut coords = Vec::with_capacity(self.horizon());
        let mut left = Vec::with_capacity(self.horizon());
        let mut right = Vec::with_capacity(self.horizon());
        for (t, (a, b)) in self.coords.iter().zip(&other.coords).enumerate() {
            let mut atoms = a.atoms.clone();
            left.push((0..a.len()).collect());
            let mut map = Vec::with_capacity(b.len());
            for atom in &b.atoms {
                match a.index_of(&atom.id) {
                    Some(i) => {
                        let merged = &mut atoms[i];
                        match (merged.value, atom.value) {
                            (Some(x), Some(y)) if x != y => {
                                return Err(Error::SpaceMismatch(format!(
                                    "atom {:?} in coordinate {} has values {} and {}",
                                    atom.id,
                                    t + 1,
                                    x,
                                    y
                                )))
                            }
                            (None, Some(y)) => merged.value = Some(y),
                            _ => {}
                        }
                        map.push(i);
                    }
                    None => {
                        map.push(atoms.len());
                        atoms.push(atom.clone());
                    }
                }
            }
            right.push(map);
            coords.push(CoordinateSpace::new(atoms)?);
        }
        Ok(SpaceUnion {
            space: PathSpace { coords },
            left,
            right,
        })
    }
}

/// A path (or path prefix) as a sequence of atom indices.
///
/// A path does not know its offset; the measure or law holding it does.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(pub(crate) Vec<usize>);

/// Prefix `x_{1:t}` of a full path.
pub type PathPrefix = Path;

impl Path {
    pub fn root() -> Self {
        Path(Vec::new())
    }

    pub fn from_atoms(atoms: Vec<usize>) -> Self {
        Path(atoms)
    }

    pub fn atoms(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, atom: usize) -> Path {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(atom);
        Path(v)
    }

    /// First `t` atoms.
    pub fn prefix(&self, t: usize) -> Path {
        Path(self.0[..t].to_vec())
    }

    /// Atoms from position `t` on.
    pub fn suffix(&self, t: usize) -> Path {
        Path(self.0[t..].to_vec())
    }

    pub fn concat(&self, tail: &Path) -> Path {
        let mut v = Vec::with_capacity(self.0.len() + tail.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&tail.0);
        Path(v)
    }

    pub(crate) fn remap(&self, offset: usize, maps: &[Vec<usize>]) -> Path {
        Path(
            self.0
                .iter()
                .enumerate()
                .map(|(k, &a)| maps[offset + k][a])
                .collect(),
        )
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, a) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_ids() {
        let err = PathSpace::new(vec![vec![Atom::new("a"), Atom::new("a")]]).unwrap_err();
        assert!(matches!(err, Error::SpaceMismatch(_)));
    }

    #[test]
    fn rejects_slash_in_id() {
        assert!(PathSpace::new(vec![vec![Atom::new("a/b")]]).is_err());
    }

    #[test]
    fn union_appends_new_atoms() {
        let a = PathSpace::new(vec![vec![Atom::new("x"), Atom::new("y")]]).unwrap();
        let b = PathSpace::new(vec![vec![Atom::new("y"), Atom::new("z")]]).unwrap();
        let u = a.union(&b).unwrap();
        let ids: Vec<_> = u
            .space
            .coordinate(0)
            .atoms()
            .iter()
            .map(|a| a.id.as_str())
            .collect();
        assert_eq!(ids, ["x", "y", "z"]);
        assert_eq!(u.right[0], vec![1, 2]);
    }

    #[test]
    fn union_rejects_conflicting_values() {
        let a = PathSpace::new(vec![vec![Atom::with_value("x", 0.0)]]).unwrap();
        let b = PathSpace::new(vec![vec![Atom::with_value("x", 1.0)]]).unwrap();
        assert!(a.union(&b).is_err());
    }

    #[test]
    fn union_rejects_horizon_mismatch() {
        let a = PathSpace::grid(1, 2).unwrap();
        let b = PathSpace::grid(2, 2).unwrap();
        assert!(matches!(a.union(&b), Err(Error::SpaceMismatch(_))));
    }
}

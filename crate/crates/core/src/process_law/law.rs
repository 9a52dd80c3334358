use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::measure::PathMeasure;
use super::space::{Path, PathSpace};
use crate::error::{Error, Result};

/// Rows whose probabilities deviate from 1 by more than this are rejected.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Probability mass accepted as "one" when rebuilding a law from a measure.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct Branch {
    pub atom: usize,
    pub prob: f64,
    pub node: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub prefix: Path,
    /// `μ_{1:t}(prefix)`.
    pub mass: f64,
    pub children: Vec<Branch>,
}

/// Finite-support law of a `T`-step process stored as a probability tree.
///
/// Node 0 is the root; nodes are laid out breadth-first, so each depth is a
/// contiguous block. Only prefixes reachable with positive probability exist.
#[derive(Debug, Clone)]
pub struct ProcessLaw {
    space: Arc<PathSpace>,
    nodes: Vec<Node>,
    index: HashMap<Path, usize>,
    depth_start: Vec<usize>,
}

impl ProcessLaw {
    /// Builds a law from its kernels `prefix -> [(atom, prob)]`.
    ///
    /// Zero-probability children are pruned, kernels at unreachable prefixes
    /// are dropped, and rows within [`ROW_SUM_TOLERANCE`] of 1 are renormalized.
    pub fn from_kernels(
        space: Arc<PathSpace>,
        kernels: impl IntoIterator<Item = (Path, Vec<(usize, f64)>)>,
    ) -> Result<Self> {
        let table: HashMap<Path, Vec<(usize, f64)>> = kernels.into_iter().collect();
        let horizon = space.horizon();
        let mut nodes = vec![Node {
            prefix: Path::root(),
            mass: 1.0,
            children: Vec::new(),
        }];
        let mut depth_start = vec![0];
        let mut frontier = 0..1;
        for t in 0..horizon {
            depth_start.push(nodes.len());
            for id in frontier.clone() {
                let prefix = nodes[id].prefix.clone();
                let context = || format!("kernels[{:?}]", space.render(0, &prefix));
                let row = table
                    .get(&prefix)
                    .ok_or_else(|| Error::parse(context(), "reachable prefix has no kernel"))?;
                let coord = space.coordinate(t);
                let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
                for &(atom, p) in row {
                    if atom >= coord.len() {
                        return Err(Error::parse(
                            context(),
                            format!("atom index {atom} out of range"),
                        ));
                    }
                    if !p.is_finite() || p < 0.0 {
                        return Err(Error::parse(context(), format!("invalid probability {p}")));
                    }
                    *merged.entry(atom).or_insert(0.0) += p;
                }
                let total: f64 = merged.values().sum();
                if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::parse(
                        context(),
                        format!("probabilities sum to {total}, expected 1"),
                    ));
                }
                let parent_mass = nodes[id].mass;
                let mut children = Vec::with_capacity(merged.len());
                for (atom, p) in merged {
                    if p <= 0.0 {
                        continue;
                    }
                    let prob = p / total;
                    let child = nodes.len() + children.len();
                    children.push((atom, prob, child));
                }
                for &(atom, prob, _) in &children {
                    nodes.push(Node {
                        prefix: prefix.child(atom),
                        mass: parent_mass * prob,
                        children: Vec::new(),
                    });
                }
                nodes[id].children = children
                    .into_iter()
                    .map(|(atom, prob, node)| Branch { atom, prob, node })
                    .collect();
            }
            frontier = depth_start[t + 1]..nodes.len();
        }
        depth_start.push(nodes.len());
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.prefix.clone(), i))
            .collect();
        Ok(ProcessLaw {
            space,
            nodes,
            index,
            depth_start,
        })
    }

    /// Law whose coordinates are independent with the given marginals.
    pub fn product(space: Arc<PathSpace>, marginals: &[Vec<(usize, f64)>]) -> Result<Self> {
        if marginals.len() != space.horizon() {
            return Err(Error::InvalidHorizon(format!(
                "{} marginals for horizon {}",
                marginals.len(),
                space.horizon()
            )));
        }
        let mut kernels = Vec::new();
        let mut prefixes = vec![Path::root()];
        for marginal in marginals {
            let mut next = Vec::new();
            for prefix in prefixes {
                for &(a, p) in marginal {
                    if p > 0.0 {
                        next.push(prefix.child(a));
                    }
                }
                kernels.push((prefix, marginal.clone()));
            }
            prefixes = next;
        }
        Self::from_kernels(space, kernels)
    }

    /// Point mass on a single full path.
    pub fn dirac(space: Arc<PathSpace>, path: &Path) -> Result<Self> {
        if path.len() != space.horizon() {
            return Err(Error::InvalidHorizon(format!(
                "path of length {} for horizon {}",
                path.len(),
                space.horizon()
            )));
        }
        let kernels = (0..path.len()).map(|t| (path.prefix(t), vec![(path.atoms()[t], 1.0)]));
        Self::from_kernels(space, kernels)
    }

    /// Disintegrates a probability measure on full paths into its kernels.
    pub fn from_path_measure(m: &PathMeasure) -> Result<Self> {
        if m.offset() != 0 || m.path_len() != m.space().horizon() {
            return Err(Error::SpaceMismatch(
                "expected a measure on full paths".into(),
            ));
        }
        let total = m.total_mass();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::NotProbability(total));
        }
        let horizon = m.space().horizon();
        // prefix masses at every depth
        let mut prefix_mass: HashMap<Path, f64> = HashMap::new();
        for (path, mass) in m.iter() {
            for t in 0..horizon {
                *prefix_mass.entry(path.prefix(t)).or_insert(0.0) += mass;
            }
        }
        let mut kernels: HashMap<Path, BTreeMap<usize, f64>> = HashMap::new();
        for (path, mass) in m.iter() {
            for t in 0..horizon {
                let child_mass = if t + 1 == horizon {
                    mass
                } else {
                    prefix_mass[&path.prefix(t + 1)]
                };
                kernels
                    .entry(path.prefix(t))
                    .or_default()
                    .insert(path.atoms()[t], child_mass);
            }
        }
        let rows = kernels.into_iter().map(|(prefix, row)| {
            let parent = prefix_mass[&prefix];
            let row = row.into_iter().map(|(a, c)| (a, c / parent)).collect();
            (prefix, row)
        });
        Self::from_kernels(m.space().clone(), rows)
    }

    pub fn space(&self) -> &Arc<PathSpace> {
        &self.space
    }

    pub fn horizon(&self) -> usize {
        self.space.horizon()
    }

    /// `μ_{1:t}(prefix)`, zero when the prefix is not supported.
    pub fn prefix_mass(&self, prefix: &Path) -> f64 {
        self.index.get(prefix).map_or(0.0, |&i| self.nodes[i].mass)
    }

    pub fn supports(&self, prefix: &Path) -> bool {
        self.index.contains_key(prefix)
    }

    /// Conditional law `μ^{x_{1:t}}` of the next coordinate as `(atom, prob)` pairs.
    pub fn kernel(&self, prefix: &Path) -> Result<Vec<(usize, f64)>> {
        let id = self.node_id(prefix)?;
        if prefix.len() >= self.horizon() {
            return Err(Error::InvalidHorizon(format!(
                "prefix of length {} has no kernel at horizon {}",
                prefix.len(),
                self.horizon()
            )));
        }
        Ok(self.nodes[id]
            .children
            .iter()
            .map(|b| (b.atom, b.prob))
            .collect())
    }

    /// Conditional law of the remaining coordinates given `prefix`.
    pub fn tail_law(&self, prefix: &Path) -> Result<PathMeasure> {
        let id = self.node_id(prefix)?;
        let t = prefix.len();
        let mut out = PathMeasure::zero(self.space.clone(), t, self.horizon() - t);
        self.walk_tail(id, Path::root(), 1.0, &mut |suffix, mass| {
            out.add(suffix, mass)
        });
        Ok(out)
    }

    /// Marginal `μ_{1:t}` of the first `t` coordinates.
    pub fn projection(&self, t: usize) -> Result<PathMeasure> {
        if t == 0 || t > self.horizon() {
            return Err(Error::InvalidHorizon(format!(
                "projection index {t} outside 1..={}",
                self.horizon()
            )));
        }
        let mut out = PathMeasure::zero(self.space.clone(), 0, t);
        for node in &self.nodes[self.depth_range(t)] {
            out.add(node.prefix.clone(), node.mass);
        }
        Ok(out)
    }

    /// The law as a measure on full paths.
    pub fn path_measure(&self) -> PathMeasure {
        self.projection(self.horizon())
            .expect("horizon is a valid projection index")
    }

    /// Full paths in support with their masses, in breadth-first order.
    pub fn paths(&self) -> impl Iterator<Item = (&Path, f64)> + '_ {
        self.nodes[self.depth_range(self.horizon())]
            .iter()
            .map(|n| (&n.prefix, n.mass))
    }

    pub fn support_size(&self) -> usize {
        self.depth_range(self.horizon()).len()
    }

    /// Reindexes the law onto a superset space.
    pub(crate) fn reindexed(&self, space: Arc<PathSpace>, maps: &[Vec<usize>]) -> Result<Self> {
        let kernels = self.nodes[..self.depth_start[self.horizon()]]
            .iter()
            .map(|n| {
                let prefix = n.prefix.remap(0, maps);
                let t = n.prefix.len();
                let row = n
                    .children
                    .iter()
                    .map(|b| (maps[t][b.atom], b.prob))
                    .collect();
                (prefix, row)
            });
        Self::from_kernels(space, kernels)
    }

    /// Brings two laws onto a common space, unified by atom id.
    pub fn aligned<'a>(
        mu: &'a ProcessLaw,
        nu: &'a ProcessLaw,
    ) -> Result<(Cow<'a, ProcessLaw>, Cow<'a, ProcessLaw>)> {
        if Arc::ptr_eq(&mu.space, &nu.space) || mu.space == nu.space {
            return Ok((Cow::Borrowed(mu), Cow::Borrowed(nu)));
        }
        let union = mu.space.union(&nu.space)?;
        let space = Arc::new(union.space);
        let mu = mu.reindexed(space.clone(), &union.left)?;
        let nu = nu.reindexed(space, &union.right)?;
        Ok((Cow::Owned(mu), Cow::Owned(nu)))
    }

    pub(crate) fn node_id(&self, prefix: &Path) -> Result<usize> {
        self.index
            .get(prefix)
            .copied()
            .ok_or_else(|| Error::PrefixNotSupported(self.render_prefix(prefix)))
    }

    pub(crate) fn node_id_opt(&self, prefix: &Path) -> Option<usize> {
        self.index.get(prefix).copied()
    }

    pub(crate) fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    /// Node ids at depth `t` (prefixes of length `t`).
    pub(crate) fn depth_range(&self, t: usize) -> std::ops::Range<usize> {
        self.depth_start[t]..self.depth_start[t + 1]
    }

    pub(crate) fn nodes_at(&self, t: usize) -> &[Node] {
        &self.nodes[self.depth_range(t)]
    }

    /// Calls `f(suffix, conditional mass)` for every leaf below node `id`.
    pub(crate) fn walk_tail(
        &self,
        id: usize,
        suffix: Path,
        mass: f64,
        f: &mut impl FnMut(Path, f64),
    ) {
        let node = &self.nodes[id];
        if node.children.is_empty() {
            f(suffix, mass);
            return;
        }
        for b in &node.children {
            self.walk_tail(b.node, suffix.child(b.atom), mass * b.prob, f);
        }
    }

    fn render_prefix(&self, prefix: &Path) -> String {
        let valid = prefix.len() <= self.horizon()
            && prefix
                .atoms()
                .iter()
                .enumerate()
                .all(|(t, &a)| a < self.space.coordinate(t).len());
        if valid {
            format!("{:?}", self.space.render(0, prefix))
        } else {
            prefix.to_string()
        }
    }
}

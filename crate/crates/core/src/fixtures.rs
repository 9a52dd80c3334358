//! Seeded random pairs of process laws.
//!
//! Kernel probabilities are multiples of 1/1000 drawn from a symmetric
//! Dirichlet, so every fixture also has an exact rational form. Each fixture
//! lives on `PathSpace::grid(T, b + 1)`: the atoms `0..b` are used by `μ` and
//! the extra atom `b` is only ever charged by singular `ν`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::process_law::{Path, PathSpace, ProcessLaw, WeightFunction};

const UNITS: u32 = 1000;
const FLOOR_UNITS: u32 = 20;
const DROP_PROBABILITY: f64 = 0.25;

/// How `ν` is derived from `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NuMode {
    /// Exponential tilt of every kernel of `μ`; `ν ≪ μ`.
    Tilt,
    /// A fresh draw with its own sparsity pattern.
    Independent,
    /// A tilt with one kernel moved partly onto an atom `μ` never charges.
    Singular,
    /// One of the above, chosen per instance.
    Mixed,
}

impl fmt::Display for NuMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NuMode::Tilt => "tilt",
            NuMode::Independent => "independent",
            NuMode::Singular => "singular",
            NuMode::Mixed => "mixed",
        })
    }
}

impl FromStr for NuMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tilt" => Ok(NuMode::Tilt),
            "independent" => Ok(NuMode::Independent),
            "singular" => Ok(NuMode::Singular),
            "mixed" => Ok(NuMode::Mixed),
            _ => Err(Error::InvalidParameter(format!(
                "unknown nu mode {s:?} (expected tilt, independent, singular or mixed)"
            ))),
        }
    }
}

/// One generated pair.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub index: usize,
    pub seed: u64,
    pub horizon: usize,
    pub branching: usize,
    /// Resolved mode; never `Mixed`.
    pub mode: NuMode,
    pub mu: ProcessLaw,
    pub nu: ProcessLaw,
}

/// SplitMix64 finalizer applied to `master + (index + 1) · γ`.
pub fn instance_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Parameters of a suite of fixtures.
#[derive(Debug, Clone)]
pub struct SuiteSpec {
    pub master_seed: u64,
    pub horizons: Vec<usize>,
    pub branchings: Vec<usize>,
    pub mode: NuMode,
}

impl SuiteSpec {
    pub fn new(master_seed: u64, horizons: Vec<usize>, mode: NuMode) -> Self {
        SuiteSpec {
            master_seed,
            horizons,
            branchings: vec![2, 3],
            mode,
        }
    }

    /// Fixture number `index`; independent of every other index.
    pub fn fixture(&self, index: usize) -> Result<Fixture> {
        if self.horizons.is_empty() || self.branchings.is_empty() {
            return Err(Error::InvalidParameter(
                "suite needs at least one horizon and branching".into(),
            ));
        }
        let seed = instance_seed(self.master_seed, index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let horizon = self.horizons[rng.random_range(0..self.horizons.len())];
        let branching = self.branchings[rng.random_range(0..self.branchings.len())];
        let mode = match self.mode {
            NuMode::Mixed => match rng.random_range(0..4) {
                0 | 1 => NuMode::Tilt,
                2 => NuMode::Independent,
                _ => NuMode::Singular,
            },
            m => m,
        };
        let (mu, nu) = generate_pair(&mut rng, horizon, branching, mode)?;
        Ok(Fixture {
            index,
            seed,
            horizon,
            branching,
            mode,
            mu,
            nu,
        })
    }
}

type Kernels = Vec<(Path, Vec<(usize, f64)>)>;

/// Generates `(μ, ν)` on `grid(horizon, branching + 1)`.
pub fn generate_pair(
    rng: &mut impl Rng,
    horizon: usize,
    branching: usize,
    mode: NuMode,
) -> Result<(ProcessLaw, ProcessLaw)> {
    if !(1..=5).contains(&horizon) || !(2..=3).contains(&branching) {
        return Err(Error::InvalidParameter(format!(
            "generator supports T in 1..=5 and branching in 2..=3, got T={horizon}, b={branching}"
        )));
    }
    let space = Arc::new(PathSpace::grid(horizon, branching + 1)?);
    let mu_kernels = random_tree(rng, horizon, branching);
    let nu_kernels = match mode {
        NuMode::Tilt => tilt(rng, &mu_kernels),
        NuMode::Independent => random_tree(rng, horizon, branching),
        NuMode::Singular => {
            let mut k = tilt(rng, &mu_kernels);
            let victim = rng.random_range(0..k.len());
            // moving mass to the unused atom creates a new subtree
            let (prefix, row) = &mut k[victim];
            let prefix = prefix.clone();
            let moved = rng.random_range(100..=500u32) as f64 / UNITS as f64;
            scale_row(row, 1.0 - moved);
            row.push((branching, moved));
            let child = prefix.child(branching);
            let mut extra = Vec::new();
            grow(rng, &child, horizon, branching, &mut extra);
            k.extend(extra);
            k
        }
        NuMode::Mixed => unreachable!("resolved by the caller"),
    };
    let mu = ProcessLaw::from_kernels(space.clone(), mu_kernels)?;
    let nu = ProcessLaw::from_kernels(space, nu_kernels)?;
    Ok((mu, nu))
}

fn scale_row(row: &mut [(usize, f64)], factor: f64) {
    let weights: Vec<f64> = row.iter().map(|r| r.1).collect();
    let units = (factor * UNITS as f64).round() as u32;
    let q = quantize_to(&weights, FLOOR_UNITS.min(units / row.len() as u32), units);
    for (r, p) in row.iter_mut().zip(q) {
        r.1 = p;
    }
}

fn random_tree(rng: &mut impl Rng, horizon: usize, branching: usize) -> Kernels {
    let mut out = Vec::new();
    grow(rng, &Path::root(), horizon, branching, &mut out);
    out
}

fn grow(rng: &mut impl Rng, prefix: &Path, horizon: usize, branching: usize, out: &mut Kernels) {
    if prefix.len() == horizon {
        return;
    }
    let mut atoms: Vec<usize> = (0..branching)
        .filter(|_| !rng.random_bool(DROP_PROBABILITY))
        .collect();
    if atoms.is_empty() {
        atoms.push(rng.random_range(0..branching));
    }
    let weights: Vec<f64> = atoms.iter().map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let probs = quantize(&weights, FLOOR_UNITS);
    let row: Vec<(usize, f64)> = atoms.iter().copied().zip(probs).collect();
    out.push((prefix.clone(), row.clone()));
    for (a, _) in row {
        grow(rng, &prefix.child(a), horizon, branching, out);
    }
}

/// Tilts each kernel by `exp(λ·a)` with a fresh `λ` per node.
fn tilt(rng: &mut impl Rng, kernels: &Kernels) -> Kernels {
    kernels
        .iter()
        .map(|(prefix, row)| {
            let lambda: f64 = rng.random_range(-1.5..1.5);
            let weights: Vec<f64> = row
                .iter()
                .map(|&(a, p)| p * (lambda * a as f64).exp())
                .collect();
            let probs = quantize(&weights, 1);
            (prefix.clone(), row.iter().map(|r| r.0).zip(probs).collect())
        })
        .collect()
}

fn quantize(weights: &[f64], floor: u32) -> Vec<f64> {
    quantize_to(weights, floor, UNITS)
}

/// Integer units summing to `total`, each at least `floor`, apportioned by
/// largest remainder (ties to the lower index), returned as fractions of 1000.
fn quantize_to(weights: &[f64], floor: u32, total: u32) -> Vec<f64> {
    let k = weights.len() as u32;
    let floor = floor.min(total / k);
    let spare = total - floor * k;
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * spare as f64).collect();
    let mut units: Vec<u32> = exact.iter().map(|e| e.floor() as u32).collect();
    let mut left = spare - units.iter().sum::<u32>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| {
        let (ri, rj) = (exact[i] - exact[i].floor(), exact[j] - exact[j].floor());
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        units[i] += 1;
        left -= 1;
    }
    units
        .iter()
        .map(|&u| (u + floor) as f64 / UNITS as f64)
        .collect()
}

/// Seeded weight table on every path of `space`, values in `{0, 0.01, ..., 2}`.
pub fn random_weight_table(seed: u64, space: &PathSpace) -> WeightFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = BTreeMap::new();
    let mut paths = vec![Path::root()];
    for t in 0..space.horizon() {
        paths = paths
            .iter()
            .flat_map(|p| (0..space.coordinate(t).len()).map(move |a| p.child(a)))
            .collect();
    }
    for p in paths {
        let key = space
            .path_ids(0, &p)
            .into_iter()
            .map(str::to_owned)
            .collect();
        table.insert(key, rng.random_range(0..=200u32) as f64 / 100.0);
    }
    WeightFunction::Table(table)
}

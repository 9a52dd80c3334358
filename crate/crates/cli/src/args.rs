use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context};
use atvkit::fixtures::NuMode;
use atvkit::{PathMetric, WeightFunction};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "atvkit",
    version,
    about = "Adapted transport distances and entropy bounds on finite process laws"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute every quantity for one pair of laws and print a JSON report.
    Compute(ComputeArgs),
    /// Check all inequalities on a seeded suite and write one CSV row per (instance, phi).
    Verify(VerifyArgs),
    /// Compare the float solvers against the exact rational LP on tiny instances.
    OracleCheck(OracleArgs),
    /// Maximum observed lhs/rhs ratios per horizon.
    RatioScan(ScanArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    L1,
    Max,
}

impl MetricArg {
    pub fn metric(self) -> PathMetric {
        match self {
            MetricArg::L1 => PathMetric::l1(),
            MetricArg::Max => PathMetric::max(),
        }
    }
}

/// `--T 3`, `--T 1..4`, `--T 1..=4`, `--T 1-4` or `--T 1,3,5`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Horizons(pub Vec<usize>);

impl FromStr for Horizons {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let s = s.trim();
        let bounds = s
            .split_once("..=")
            .or_else(|| s.split_once(".."))
            .or_else(|| s.split_once('-'));
        let list: Vec<usize> = if let Some((a, b)) = bounds {
            let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
            if a > b {
                bail!("empty horizon range {s}");
            }
            (a..=b).collect()
        } else {
            s.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .with_context(|| format!("bad horizon {t:?}"))
                })
                .collect::<anyhow::Result<_>>()?
        };
        if let Some(&t) = list.iter().find(|&&t| !(1..=5).contains(&t)) {
            bail!("horizon {t} outside the generator range 1..=5");
        }
        Ok(Horizons(list))
    }
}

/// `const:C` or `rule:ALPHA,P`.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiSpec {
    Constant(f64),
    Rule { alpha: f64, p: f64 },
}

impl PhiSpec {
    pub fn weight(&self, metric: &PathMetric) -> WeightFunction {
        match *self {
            PhiSpec::Constant(c) => WeightFunction::Constant(c),
            PhiSpec::Rule { alpha, p } => WeightFunction::rule(alpha, p, metric.clone()),
        }
    }

    pub fn defaults() -> Vec<PhiSpec> {
        vec![PhiSpec::Constant(1.0), PhiSpec::Rule { alpha: 1.0, p: 1.0 }]
    }
}

impl FromStr for PhiSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        if let Some(c) = s.strip_prefix("const:") {
            let c: f64 = c
                .parse()
                .with_context(|| format!("bad constant in {s:?}"))?;
            if !(c >= 0.0) || !c.is_finite() {
                bail!("constant weight must be finite and nonnegative");
            }
            return Ok(PhiSpec::Constant(c));
        }
        if let Some(rest) = s.strip_prefix("rule:") {
            let (a, p) = rest
                .split_once(',')
                .with_context(|| format!("expected rule:ALPHA,P, got {s:?}"))?;
            let (alpha, p): (f64, f64) = (a.trim().parse()?, p.trim().parse()?);
            if !(alpha > 0.0) || !alpha.is_finite() || !(p >= 1.0) || !p.is_finite() {
                bail!("rule needs alpha > 0 and p >= 1");
            }
            return Ok(PhiSpec::Rule { alpha, p });
        }
        bail!("expected const:C or rule:ALPHA,P, got {s:?}")
    }
}

fn nu_mode(s: &str) -> anyhow::Result<NuMode> {
    Ok(s.parse()?)
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Weight functions; repeat the flag for several.
    #[arg(long = "phi", value_name = "const:C|rule:ALPHA,P")]
    pub phi: Vec<PhiSpec>,
    #[arg(long, value_enum, default_value = "l1")]
    pub metric: MetricArg,
    /// Exponent for W_p, AW_p and the general corollary.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Scale of the corollary weight sqrt(alpha) d(x, x0)^p.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

impl Common {
    pub fn phis(&self) -> Vec<PhiSpec> {
        if self.phi.is_empty() {
            PhiSpec::defaults()
        } else {
            self.phi.clone()
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.p >= 1.0) || !self.p.is_finite() {
            bail!("--p must be at least 1");
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            bail!("--alpha must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Args)]
pub struct ComputeArgs {
    #[arg(long, value_name = "FILE", requires = "nu", conflicts_with = "seed")]
    pub mu: Option<PathBuf>,
    #[arg(long, value_name = "FILE", requires = "mu")]
    pub nu: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "T", value_name = "N|RANGE", default_value = "2")]
    pub horizons: Horizons,
    #[arg(long = "nu-mode", value_parser = nu_mode, default_value = "tilt")]
    pub nu_mode: NuMode,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long = "T", value_name = "N|RANGE", default_value = "1..4")]
    pub horizons: Horizons,
    #[arg(long = "nu-mode", value_parser = nu_mode, default_value = "tilt")]
    pub nu_mode: NuMode,
    /// Worker threads; output does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    #[arg(long = "T", value_name = "N|RANGE", default_value = "2")]
    pub horizons: Horizons,
    /// Branching factors to draw from.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub branching: Vec<usize>,
    #[arg(long = "nu-mode", value_parser = nu_mode, default_value = "mixed")]
    pub nu_mode: NuMode,
    /// Instances with more path pairs than this are skipped.
    #[arg(long = "max-vars", default_value_t = atvkit::oracle::VARIABLE_CAP)]
    pub max_vars: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long = "phi", value_name = "const:C|rule:ALPHA,P")]
    pub phi: Vec<PhiSpec>,
    #[arg(long, value_enum, default_value = "l1")]
    pub metric: MetricArg,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Instances per horizon.
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long = "T", value_name = "N|RANGE", default_value = "1..5")]
    pub horizons: Horizons,
    #[arg(long = "nu-mode", value_parser = nu_mode, default_value = "tilt")]
    pub nu_mode: NuMode,
    /// Values of alpha for the constant weight sqrt(alpha).
    #[arg(long = "alphas", value_delimiter = ',', default_value = "1,100,10000")]
    pub alphas: Vec<f64>,
    #[arg(long, value_enum, default_value = "l1")]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_forms() {
        assert_eq!("3".parse::<Horizons>().unwrap().0, vec![3]);
        assert_eq!("1..4".parse::<Horizons>().unwrap().0, vec![1, 2, 3, 4]);
        assert_eq!("1..=2".parse::<Horizons>().unwrap().0, vec![1, 2]);
        assert_eq!("2-3".parse::<Horizons>().unwrap().0, vec![2, 3]);
        assert_eq!("1,5".parse::<Horizons>().unwrap().0, vec![1, 5]);
        assert!("0..2".parse::<Horizons>().is_err());
        assert!("4..2".parse::<Horizons>().is_err());
    }

    #[test]
    fn phi_forms() {
        assert_eq!(
            "const:1".parse::<PhiSpec>().unwrap(),
            PhiSpec::Constant(1.0)
        );
        assert_eq!(
            "rule:2,1.5".parse::<PhiSpec>().unwrap(),
            PhiSpec::Rule { alpha: 2.0, p: 1.5 }
        );
        assert!("rule:0,1".parse::<PhiSpec>().is_err());
        assert!("const:-1".parse::<PhiSpec>().is_err());
        assert!("table".parse::<PhiSpec>().is_err());
    }
}

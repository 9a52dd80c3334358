use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path as FsPath, PathBuf};

use anyhow::{bail, Context};
use atvkit::adapted::{atv_weighted, nested_distance};
use atvkit::divergences::{bv_rhs, log_exp_moment, relative_entropy, weighted_tv};
use atvkit::fixtures::{instance_seed, random_weight_table, Fixture, SuiteSpec};
use atvkit::oracle::{
    bicausal_lp, certify_log_exp_moment, classical_ot_lp, rational, to_f64, RationalLaw,
};
use atvkit::ot::wasserstein;
use atvkit::{load_law, save_law, ExtendedReal, Path, WeightFunction};
use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{ComputeArgs, OracleArgs, PhiSpec, ScanArgs, VerifyArgs};
use crate::evaluate::{check_names, evaluate, Evaluation, Settings};
use crate::tolerance::Tolerances;

pub const VERIFY_SCHEMA: &str = "# atvkit-verify-csv v1";
pub const ORACLE_SCHEMA: &str = "# atvkit-oracle-csv v1";
pub const SCAN_SCHEMA: &str = "# atvkit-ratio-scan-csv v1";

/// Whether a command found what it was asked to rule out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Failed,
}

/// Failure to read inputs or write outputs, kept apart from usage errors.
#[derive(Debug)]
pub struct IoFailure {
    pub path: Option<PathBuf>,
    pub source: io::Error,
}

impl fmt::Display for IoFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.path {
            Some(p) => write!(f, "{}: {}", p.display(), self.source),
            None => write!(f, "stdout: {}", self.source),
        }
    }
}

impl std::error::Error for IoFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

fn read_file(path: &FsPath) -> anyhow::Result<String> {
    fs::read_to_string(path).map_err(|source| {
        IoFailure {
            path: Some(path.to_owned()),
            source,
        }
        .into()
    })
}

fn emit(out: Option<&FsPath>, bytes: &[u8]) -> anyhow::Result<()> {
    let result = match out {
        Some(path) => fs::write(path, bytes),
        None => io::stdout().lock().write_all(bytes),
    };
    result.map_err(|source| {
        IoFailure {
            path: out.map(FsPath::to_owned),
            source,
        }
        .into()
    })
}

/// Shortest round-trip decimal; exponent form outside `[1e-4, 1e15)`.
pub fn fmt_num(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        return "inf".into();
    }
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn fmt_ext(v: Option<ExtendedReal>) -> String {
    match v {
        None => String::new(),
        Some(ExtendedReal::Infinite) => "inf".into(),
        Some(ExtendedReal::Finite(x)) => fmt_num(x),
    }
}

fn pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    if jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

fn csv_bytes(
    schema: &str,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> anyhow::Result<Vec<u8>> {
    let mut buf = format!("{schema}\n").into_bytes();
    {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(&mut buf);
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

#[derive(Serialize)]
struct Source {
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    instance_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    branching: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu_mode: Option<String>,
}

#[derive(Serialize)]
struct ComputeReport {
    source: Source,
    #[serde(flatten)]
    evaluation: Evaluation,
}

pub fn compute(args: &ComputeArgs, tol: Tolerances) -> anyhow::Result<Outcome> {
    args.common.validate()?;
    let settings = settings(&args.common, tol);
    let (mu, nu, source) = match (&args.mu, &args.nu) {
        (Some(m), Some(n)) => {
            let mu =
                load_law(&read_file(m)?).with_context(|| format!("loading {}", m.display()))?;
            let nu =
                load_law(&read_file(n)?).with_context(|| format!("loading {}", n.display()))?;
            let source = Source {
                kind: "files",
                mu: Some(m.display().to_string()),
                nu: Some(n.display().to_string()),
                seed: None,
                instance_seed: None,
                branching: None,
                nu_mode: None,
            };
            (mu, nu, source)
        }
        _ => {
            let seed = args
                .seed
                .context("either --mu/--nu or --seed is required")?;
            let f = SuiteSpec::new(seed, args.horizons.0.clone(), args.nu_mode).fixture(0)?;
            let source = Source {
                kind: "generated",
                mu: None,
                nu: None,
                seed: Some(seed),
                instance_seed: Some(f.seed),
                branching: Some(f.branching),
                nu_mode: Some(f.mode.to_string()),
            };
            (f.mu, f.nu, source)
        }
    };
    let evaluation = evaluate(&mu, &nu, &settings)?;
    let outcome = if evaluation.violations() > 0 {
        Outcome::Failed
    } else {
        Outcome::Clean
    };
    let mut text = serde_json::to_string_pretty(&ComputeReport { source, evaluation })?;
    text.push('\n');
    emit(args.common.out.as_deref(), text.as_bytes())?;
    Ok(outcome)
}

fn settings(common: &crate::args::Common, tol: Tolerances) -> Settings {
    Settings {
        metric_arg: common.metric,
        metric: common.metric.metric(),
        phis: common.phis(),
        p: common.p,
        alpha: common.alpha,
        tol,
    }
}

pub fn verify_header() -> Vec<String> {
    let mut header: Vec<String> = [
        "instance",
        "seed",
        "T",
        "branching",
        "nu_mode",
        "metric",
        "phi",
        "p",
        "alpha",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for name in check_names() {
        for part in ["lhs", "rhs", "ratio", "status"] {
            header.push(format!("{name}_{part}"));
        }
    }
    header
}

fn verify_rows(f: &Fixture, e: &Evaluation, s: &Settings) -> Vec<Vec<String>> {
    (0..e.per_phi.len())
        .map(|k| {
            let mut row = vec![
                f.index.to_string(),
                f.seed.to_string(),
                f.horizon.to_string(),
                f.branching.to_string(),
                f.mode.to_string(),
                s.metric_name().to_string(),
                e.per_phi[k].phi.clone(),
                fmt_num(s.p),
                fmt_num(s.alpha),
            ];
            for c in e.row(k) {
                row.extend([
                    fmt_ext(c.lhs),
                    fmt_ext(c.rhs),
                    fmt_ext(c.ratio),
                    c.status.to_string(),
                ]);
            }
            row
        })
        .collect()
}

pub fn verify(args: &VerifyArgs, tol: Tolerances) -> anyhow::Result<Outcome> {
    args.common.validate()?;
    let settings = settings(&args.common, tol);
    let suite = SuiteSpec::new(args.seed, args.horizons.0.clone(), args.nu_mode);
    let results: Vec<anyhow::Result<(Vec<Vec<String>>, usize)>> = pool(args.jobs)?.install(|| {
        (0..args.count)
            .into_par_iter()
            .map(|i| {
                let f = suite.fixture(i)?;
                let e = evaluate(&f.mu, &f.nu, &settings)
                    .with_context(|| format!("instance {i} (seed {})", f.seed))?;
                Ok((verify_rows(&f, &e, &settings), e.violations()))
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut violations = 0;
    for r in results {
        let (mut r, v) = r?;
        rows.append(&mut r);
        violations += v;
    }
    let n = rows.len();
    emit(
        args.common.out.as_deref(),
        &csv_bytes(VERIFY_SCHEMA, &verify_header(), rows)?,
    )?;
    eprintln!(
        "verify: {} instances, {n} rows, {violations} violations",
        args.count
    );
    Ok(if violations == 0 {
        Outcome::Clean
    } else {
        Outcome::Failed
    })
}

#[derive(Debug, Clone)]
struct Comparison {
    quantity: String,
    main: f64,
    oracle: Option<f64>,
    tolerance: f64,
    status: &'static str,
}

impl Comparison {
    fn against(quantity: String, main: f64, exact: &BigRational, tolerance: f64) -> Self {
        let oracle = to_f64(exact);
        let agree = (main - oracle).abs() <= tolerance;
        Comparison {
            quantity,
            main,
            oracle: Some(oracle),
            tolerance,
            status: if agree { "agree" } else { "DISAGREE" },
        }
    }
}

fn oracle_compare(
    f: &Fixture,
    args: &OracleArgs,
    phis: &[PhiSpec],
    tol: &Tolerances,
) -> anyhow::Result<Vec<Comparison>> {
    let size = f.mu.support_size() * f.nu.support_size();
    if size > args.max_vars {
        return Ok(vec![Comparison {
            quantity: "all".into(),
            main: f64::NAN,
            oracle: None,
            tolerance: 0.0,
            status: "skipped-too-large",
        }]);
    }
    let metric = args.metric.metric();
    let bound = metric.bind(f.mu.space())?;
    let (mu, nu) = (RationalLaw::from_law(&f.mu)?, RationalLaw::from_law(&f.nu)?);
    let dist = |x: &Path, y: &Path| rational(bound.distance(x, y));
    let mut out = vec![
        Comparison::against(
            "w_1".into(),
            wasserstein(&f.mu, &f.nu, &metric, 1.0)?,
            &classical_ot_lp(&mu, &nu, dist)?,
            tol.classical_oracle,
        ),
        Comparison::against(
            "aw_1".into(),
            nested_distance(&f.mu, &f.nu, &metric, 1.0)?.0,
            &bicausal_lp(&mu, &nu, dist)?,
            tol.oracle,
        ),
    ];
    let mut weights: Vec<WeightFunction> = phis.iter().map(|p| p.weight(&metric)).collect();
    weights.push(random_weight_table(f.seed, f.mu.space()));
    for phi in &weights {
        let w = phi.bind(f.mu.space())?;
        let cost = |x: &Path, y: &Path| {
            if x == y {
                rational(0.0)
            } else {
                rational(
                    w.value(x).expect("weight covers the space")
                        + w.value(y).expect("weight covers the space"),
                )
            }
        };
        out.push(Comparison::against(
            format!("atv[{}]", phi.descriptor()),
            atv_weighted(&f.mu, &f.nu, phi)?,
            &bicausal_lp(&mu, &nu, cost)?,
            tol.oracle,
        ));
        if !matches!(phi, WeightFunction::Table(_)) {
            let value = log_exp_moment(&f.mu, phi)?;
            let ok = certify_log_exp_moment(&mu, phi, value, tol.equality)?;
            out.push(Comparison {
                quantity: format!("log_exp_moment[{}]", phi.descriptor()),
                main: value,
                oracle: None,
                tolerance: tol.equality,
                status: if ok { "agree" } else { "DISAGREE" },
            });
        }
    }
    Ok(out)
}

pub fn oracle_check(args: &OracleArgs, tol: Tolerances) -> anyhow::Result<Outcome> {
    if args.max_vars > atvkit::oracle::VARIABLE_CAP {
        bail!(
            "--max-vars cannot exceed the oracle cap {}",
            atvkit::oracle::VARIABLE_CAP
        );
    }
    let phis = if args.phi.is_empty() {
        PhiSpec::defaults()
    } else {
        args.phi.clone()
    };
    let suite = SuiteSpec {
        master_seed: args.seed,
        horizons: args.horizons.0.clone(),
        branchings: args.branching.clone(),
        mode: args.nu_mode,
    };
    let results: Vec<anyhow::Result<(Fixture, Vec<Comparison>)>> = pool(args.jobs)?.install(|| {
        (0..args.count)
            .into_par_iter()
            .map(|i| {
                let f = suite.fixture(i)?;
                let c = oracle_compare(&f, args, &phis, &tol)
                    .with_context(|| format!("instance {i} (seed {})", f.seed))?;
                Ok((f, c))
            })
            .collect()
    });
    let header: Vec<String> = [
        "instance",
        "seed",
        "T",
        "branching",
        "nu_mode",
        "quantity",
        "main",
        "oracle",
        "abs_diff",
        "tolerance",
        "status",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut rows = Vec::new();
    let mut disagreements = 0;
    for r in results {
        let (f, comparisons) = r?;
        for c in comparisons {
            if c.status == "DISAGREE" {
                disagreements += 1;
                eprintln!(
                    "oracle-check: instance {} (seed {}) {}: main {} oracle {}\nmu = {}\nnu = {}",
                    f.index,
                    f.seed,
                    c.quantity,
                    fmt_num(c.main),
                    c.oracle
                        .map(fmt_num)
                        .unwrap_or_else(|| "uncertified".into()),
                    save_law(&f.mu),
                    save_law(&f.nu)
                );
            }
            let diff = c
                .oracle
                .map(|o| fmt_num((c.main - o).abs()))
                .unwrap_or_default();
            rows.push(vec![
                f.index.to_string(),
                f.seed.to_string(),
                f.horizon.to_string(),
                f.branching.to_string(),
                f.mode.to_string(),
                c.quantity,
                if c.main.is_nan() {
                    String::new()
                } else {
                    fmt_num(c.main)
                },
                c.oracle.map(fmt_num).unwrap_or_default(),
                diff,
                fmt_num(c.tolerance),
                c.status.to_string(),
            ]);
        }
    }
    emit(
        args.out.as_deref(),
        &csv_bytes(ORACLE_SCHEMA, &header, rows)?,
    )?;
    eprintln!(
        "oracle-check: {} instances, {disagreements} disagreements",
        args.count
    );
    Ok(if disagreements == 0 {
        Outcome::Clean
    } else {
        Outcome::Failed
    })
}

#[derive(Debug, Clone, Default)]
struct ScanStats {
    instances: usize,
    finite: usize,
    maxima: Vec<f64>,
}

fn ratio(lhs: f64, rhs: ExtendedReal) -> Option<f64> {
    match rhs {
        ExtendedReal::Finite(r) if r > 0.0 => Some(lhs / r),
        _ => None,
    }
}

pub fn ratio_scan(args: &ScanArgs) -> anyhow::Result<Outcome> {
    if let Some(a) = args.alphas.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
        bail!("--alphas entries must be positive, got {a}");
    }
    let metric = args.metric.metric();
    let constant = WeightFunction::Constant(1.0);
    let rule = WeightFunction::rule(1.0, 1.0, metric.clone());
    let scaled: Vec<WeightFunction> = args
        .alphas
        .iter()
        .map(|a| WeightFunction::Constant(a.sqrt()))
        .collect();
    let pool = pool(args.jobs)?;

    let mut header: Vec<String> = [
        "T",
        "instances",
        "positive_entropy",
        "sqrt_T",
        "prefactor",
        "pinsker_max",
        "adapted_bv_const_max",
        "adapted_bv_rule_max",
        "classical_bv_const_max",
        "classical_bv_rule_max",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(
        args.alphas
            .iter()
            .map(|a| format!("const_alpha_{}_max", fmt_num(*a))),
    );

    let mut rows = Vec::new();
    for &t in &args.horizons.0 {
        let suite = SuiteSpec::new(instance_seed(args.seed, t as u64), vec![t], args.nu_mode);
        let per_instance: Vec<anyhow::Result<Option<Vec<f64>>>> = pool.install(|| {
            (0..args.count)
                .into_par_iter()
                .map(|i| {
                    let f = suite.fixture(i)?;
                    let (mu, nu) = (&f.mu, &f.nu);
                    let h = relative_entropy(nu, mu)?;
                    let Some(root) = ratio(1.0, (h * 2.0).sqrt()) else {
                        return Ok(None);
                    };
                    let mut v = vec![atv_weighted(mu, nu, &constant)? * root];
                    for phi in [&constant, &rule] {
                        v.push(
                            ratio(atv_weighted(mu, nu, phi)?, bv_rhs(mu, nu, phi)?).unwrap_or(0.0),
                        );
                    }
                    for phi in [&constant, &rule] {
                        v.push(
                            ratio(weighted_tv(mu, nu, phi)?, bv_rhs(mu, nu, phi)?).unwrap_or(0.0),
                        );
                    }
                    for phi in &scaled {
                        v.push(
                            ratio(atv_weighted(mu, nu, phi)?, bv_rhs(mu, nu, phi)?).unwrap_or(0.0),
                        );
                    }
                    Ok(Some(v))
                })
                .collect()
        });
        let mut stats = ScanStats {
            maxima: vec![0.0; 5 + scaled.len()],
            ..Default::default()
        };
        for r in per_instance {
            stats.instances += 1;
            if let Some(v) = r? {
                stats.finite += 1;
                for (m, x) in stats.maxima.iter_mut().zip(v) {
                    *m = m.max(x);
                }
            }
        }
        let tf = t as f64;
        let mut row = vec![
            t.to_string(),
            stats.instances.to_string(),
            stats.finite.to_string(),
            fmt_num(tf.sqrt()),
            fmt_num(2.0 * tf.sqrt() + 1.0),
        ];
        row.extend(stats.maxima.iter().map(|&m| fmt_num(m)));
        rows.push(row);
    }
    emit(args.out.as_deref(), &csv_bytes(SCAN_SCHEMA, &header, rows)?)?;
    Ok(Outcome::Clean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for v in [0.0, 1.0, 0.1, 1e-10, 123456.789, 2.5e17, 1.0 / 3.0, 5e-324] {
            let s = fmt_num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        assert_eq!(fmt_num(1e-10), "1e-10");
        assert_eq!(fmt_num(0.25), "0.25");
    }

    #[test]
    fn verify_header_is_fixed() {
        let h = verify_header();
        assert_eq!(h[0], "instance");
        assert_eq!(h[9], "adapted_bv_lhs");
        assert_eq!(h.len(), 9 + 4 * check_names().len());
    }
}

use approx::assert_abs_diff_eq;
use ndarray::Array2;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use atvkit::adapted::{atv_weighted, nested_distance};
use atvkit::divergences::log_exp_moment;
use atvkit::fixtures::{random_weight_table, NuMode, SuiteSpec};
use atvkit::oracle::{
    bicausal_lp, certify_log_exp_moment, classical_ot_lp, enumerate_basic_solutions, rational,
    to_f64, transport_lp, RationalLaw,
};
use atvkit::ot::{solve_transport, wasserstein, TransportProblem};
use atvkit::{Path, PathMetric, WeightFunction};

fn marginal(rng: &mut impl Rng, n: usize) -> Vec<u32> {
    let mut units: Vec<u32> = (0..n).map(|_| rng.random_range(1..100)).collect();
    let total: u32 = units.iter().sum();
    let mut acc = 0;
    for u in units.iter_mut().take(n - 1) {
        *u = *u * 1000 / total;
        acc += *u;
    }
    units[n - 1] = 1000 - acc;
    units
}

fn to_float(units: &[u32]) -> Vec<f64> {
    units.iter().map(|&u| u as f64 / 1000.0).collect()
}

fn to_rational(units: &[u32]) -> Vec<BigRational> {
    units
        .iter()
        .map(|&u| BigRational::new(u.into(), 1000.into()))
        .collect()
}

#[test]
fn transport_simplex_matches_rational_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..60 {
        let (m, n) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let a = marginal(&mut rng, m);
        let b = marginal(&mut rng, n);
        let cost: Vec<Vec<u32>> = (0..m)
            .map(|_| (0..n).map(|_| rng.random_range(0..20)).collect())
            .collect();
        let c = Array2::from_shape_fn((m, n), |(i, j)| cost[i][j] as f64 / 4.0);
        let exact = transport_lp(
            &cost
                .iter()
                .map(|r| r.iter().map(|&v| rational(v as f64 / 4.0)).collect())
                .collect::<Vec<_>>(),
            &to_rational(&a),
            &to_rational(&b),
        )
        .solve()
        .unwrap();
        let plan = solve_transport(&TransportProblem::new(c, to_float(&a), to_float(&b)).unwrap())
            .unwrap();
        assert_abs_diff_eq!(plan.value, to_f64(&exact.value), epsilon = 1e-9);
    }
}

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let a = marginal(&mut rng, 3);
        let b = marginal(&mut rng, 3);
        let cost: Vec<Vec<BigRational>> = (0..3)
            .map(|_| {
                (0..3)
                    .map(|_| BigRational::from_integer(rng.random_range(0..10).into()))
                    .collect()
            })
            .collect();
        let lp = transport_lp(&cost, &to_rational(&a), &to_rational(&b));
        assert_eq!(
            lp.solve().unwrap().value,
            enumerate_basic_solutions(&lp).unwrap()
        );
    }
}

fn l1(x: &Path, y: &Path) -> BigRational {
    let d: i64 = x
        .atoms()
        .iter()
        .zip(y.atoms())
        .map(|(&a, &b)| (a as i64 - b as i64).abs())
        .sum();
    BigRational::from_integer(d.into())
}

#[test]
fn nested_distance_and_atv_match_bicausal_lp() {
    let spec = SuiteSpec {
        master_seed: 99,
        horizons: vec![2],
        branchings: vec![2],
        mode: NuMode::Mixed,
    };
    let metric = PathMetric::l1();
    for i in 0..25 {
        let f = spec.fixture(i).unwrap();
        let (mu, nu) = (
            RationalLaw::from_law(&f.mu).unwrap(),
            RationalLaw::from_law(&f.nu).unwrap(),
        );

        let (aw, _) = nested_distance(&f.mu, &f.nu, &metric, 1.0).unwrap();
        let exact = to_f64(&bicausal_lp(&mu, &nu, l1).unwrap());
        assert_abs_diff_eq!(aw, exact, epsilon = 1e-8);

        let w = wasserstein(&f.mu, &f.nu, &metric, 1.0).unwrap();
        assert_abs_diff_eq!(
            w,
            to_f64(&classical_ot_lp(&mu, &nu, l1).unwrap()),
            epsilon = 1e-9
        );
        assert!(w <= aw + 1e-12);

        let table = random_weight_table(f.seed, f.mu.space());
        for phi in [
            WeightFunction::Constant(1.0),
            WeightFunction::rule(1.0, 1.0, metric.clone()),
            table,
        ] {
            let bound = phi.bind(f.mu.space()).unwrap();
            let cost = |x: &Path, y: &Path| {
                if x == y {
                    BigRational::from_integer(0.into())
                } else {
                    rational(bound.value(x).unwrap()) + rational(bound.value(y).unwrap())
                }
            };
            let exact = to_f64(&bicausal_lp(&mu, &nu, cost).unwrap());
            let atv = atv_weighted(&f.mu, &f.nu, &phi).unwrap();
            assert_abs_diff_eq!(atv, exact, epsilon = 1e-8);
        }
    }
}

#[test]
fn one_step_bicausal_is_classical() {
    let spec = SuiteSpec::new(3, vec![1], NuMode::Mixed);
    for i in 0..10 {
        let f = spec.fixture(i).unwrap();
        let (mu, nu) = (
            RationalLaw::from_law(&f.mu).unwrap(),
            RationalLaw::from_law(&f.nu).unwrap(),
        );
        assert_eq!(
            bicausal_lp(&mu, &nu, l1).unwrap(),
            classical_ot_lp(&mu, &nu, l1).unwrap()
        );
        let ne = |x: &Path, y: &Path| BigRational::from_integer(((x != y) as i64).into());
        assert_eq!(
            bicausal_lp(&mu, &mu, ne).unwrap(),
            BigRational::from_integer(0.into())
        );
    }
}

#[test]
fn exponential_moments_are_certified() {
    let spec = SuiteSpec::new(17, vec![1, 2, 3], NuMode::Tilt);
    for i in 0..15 {
        let f = spec.fixture(i).unwrap();
        let mu = RationalLaw::from_law(&f.mu).unwrap();
        for phi in [
            WeightFunction::Constant(1.5),
            WeightFunction::rule(1.0, 1.0, PathMetric::l1()),
        ] {
            let value = log_exp_moment(&f.mu, &phi).unwrap();
            assert!(
                certify_log_exp_moment(&mu, &phi, value, 1e-12).unwrap(),
                "fixture {i}: {value}"
            );
            assert!(!certify_log_exp_moment(&mu, &phi, value + 1e-6, 1e-9).unwrap());
        }
    }
}

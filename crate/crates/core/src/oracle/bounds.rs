//! Rational enclosures of `exp`, used to certify exponential moments
//! without trusting floating-point `exp` or `ln`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::lp::{rational, RationalLaw};
use crate::error::Result;
use crate::process_law::{BoundWeight, WeightFunction};

const TAYLOR_TERMS: u32 = 24;
const PRECISION_BITS: usize = 256;

/// Rounds to a dyadic rational with `PRECISION_BITS` fractional bits, down or up.
fn round_dyadic(q: &BigRational, up: bool) -> BigRational {
    let scale = BigInt::one() << PRECISION_BITS;
    let scaled = q * BigRational::from_integer(scale.clone());
    let n = if up { scaled.ceil() } else { scaled.floor() };
    BigRational::new(n.to_integer(), scale)
}

/// `lo ≤ e^v ≤ hi` for rational `v`.
pub fn exp_interval(v: &BigRational) -> (BigRational, BigRational) {
    if v.is_negative() {
        let (lo, hi) = exp_interval(&-v);
        return (
            round_dyadic(&hi.recip(), false),
            round_dyadic(&lo.recip(), true),
        );
    }
    // halve until r ≤ 1/2, then e^v = (e^r)^(2^k)
    let mut k = 0u32;
    let mut r = v.clone();
    let half = BigRational::new(1.into(), 2.into());
    while r > half {
        r /= BigRational::from_integer(2.into());
        k += 1;
    }
    let mut term = BigRational::one();
    let mut sum = BigRational::one();
    for n in 1..=TAYLOR_TERMS {
        term = term * &r / BigRational::from_integer(n.into());
        sum += &term;
    }
    // tail ≤ r^{N+1}/(N+1)! · 2 for r ≤ 1/2
    let tail = &term * &r / BigRational::from_integer((TAYLOR_TERMS + 1).into())
        * BigRational::from_integer(2.into());
    let mut lo = round_dyadic(&sum, false);
    let mut hi = round_dyadic(&(sum + tail), true);
    for _ in 0..k {
        lo = round_dyadic(&(&lo * &lo), false);
        hi = round_dyadic(&(&hi * &hi), true);
    }
    (lo, hi)
}

/// Enclosure of `∫ e^{φ²} dμ` for a rational law and the exact squares of
/// the float weights.
pub fn exp_moment_interval(
    mu: &RationalLaw,
    phi: &WeightFunction,
) -> Result<(BigRational, BigRational)> {
    let bound: BoundWeight = phi.bind(mu.space())?;
    let mut lo = BigRational::zero();
    let mut hi = BigRational::zero();
    for (x, m) in mu.paths() {
        let v = rational(bound.value(x)?);
        let (l, h) = exp_interval(&(&v * &v));
        lo += m * l;
        hi += m * h;
    }
    Ok((lo, hi))
}

/// True when `claimed` is provably within `tol` of `log ∫ e^{φ²} dμ`.
pub fn certify_log_exp_moment(
    mu: &RationalLaw,
    phi: &WeightFunction,
    claimed: f64,
    tol: f64,
) -> Result<bool> {
    let (lo, hi) = exp_moment_interval(mu, phi)?;
    let (_, upper_of_lower) = exp_interval(&rational(claimed - tol));
    let (lower_of_upper, _) = exp_interval(&rational(claimed + tol));
    Ok(upper_of_lower <= lo && hi <= lower_of_upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::to_f64;

    #[test]
    fn exp_enclosures_are_tight() {
        for v in [0.0, 0.3, 1.0, -2.5, 10.0, 57.25] {
            let (lo, hi) = exp_interval(&rational(v));
            assert!(lo <= hi);
            let e = v.exp();
            assert!((to_f64(&lo) - e).abs() <= 1e-14 * e, "{v}");
            assert!((to_f64(&hi) - e).abs() <= 1e-14 * e, "{v}");
        }
        let (lo, hi) = exp_interval(&BigRational::zero());
        assert!(lo.is_one() && hi.is_one());
    }

    #[test]
    fn exp_of_one_brackets_e() {
        let (lo, hi) = exp_interval(&BigRational::one());
        let e = rational(std::f64::consts::E);
        let ulp = rational(f64::EPSILON * 4.0);
        assert!(lo <= &e + &ulp && &e - &ulp <= hi);
        assert!(&hi - &lo < rational(1e-30));
    }
}

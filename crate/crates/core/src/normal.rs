//! Standard normal primitives and the normalizing constants attached to a
//! dimension `p`.
//!
//! The cdf and its complement both go through `erfc`, so the upper tail
//! `Φ̄(x)` never suffers the cancellation of `1 - Φ(x)`. For `x ≥ 5` the
//! Mills ratio `Φ̄(x)/φ(x)` comes from its continued fraction, which keeps
//! `ln Φ̄` finite far past the point where `Φ̄` itself underflows.
//!
//! Quantiles start from Wichura's AS241 rational approximation and take two
//! Newton steps on `ln Φ̄`, which is well conditioned in the tail.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// Beyond this point the Mills ratio is taken from its continued fraction.
const MILLS_CF_START: f64 = 5.0;
const MILLS_CF_DEPTH: u32 = 120;

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `Φ(x)` without input validation.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `Φ̄(x) = 1 - Φ(x)` computed directly.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Mills ratio `Φ̄(x)/φ(x)`.
pub fn mills_ratio(x: f64) -> f64 {
    if x < MILLS_CF_START {
        return sf(x) / pdf(x);
    }
    // R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...)))), evaluated bottom-up.
    let mut t = x;
    for k in (1..=MILLS_CF_DEPTH).rev() {
        t = x + f64::from(k) / t;
    }
    1.0 / t
}

/// `ln Φ̄(x)`, finite for all finite `x`.
pub fn ln_sf(x: f64) -> f64 {
    if x < MILLS_CF_START {
        sf(x).ln()
    } else {
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio(x).ln()
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("expected a finite real, got {x}")))
    }
}

pub fn std_normal_cdf(x: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(cdf(x))
}

pub fn std_normal_sf(x: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(sf(x))
}

/// AS241 (PPND16) for the lower-tail probability `p`, given `r = min(p, 1-p)`
/// computed by the caller without rounding loss.
#[allow(clippy::excessive_precision)]
fn as241(q: f64, r: f64) -> f64 {
    if q.abs() <= 0.425 {
        let s = 0.180625 - q * q;
        let num = (((((((2.5090809287301226727e+3 * s + 3.3430575583588128105e+4) * s
            + 6.7265770927008700853e+4)
            * s
            + 4.5921953931549871457e+4)
            * s
            + 1.3731693765509461125e+4)
            * s
            + 1.9715909503065514427e+3)
            * s
            + 1.3314166789178437745e+2)
            * s
            + 3.3871328727963666080e+0)
            * q;
        let den = ((((((5.2264952788528545610e+3 * s + 2.8729085735721942674e+4) * s
            + 3.9307895800092710610e+4)
            * s
            + 2.1213794301586595867e+4)
            * s
            + 5.3941960214247511077e+3)
            * s
            + 6.8718700749205790830e+2)
            * s
            + 4.2313330701600911252e+1)
            * s
            + 1.0;
        return num / den;
    }
    let t = (-r.ln()).sqrt();
    let x = if t <= 5.0 {
        let t = t - 1.6;
        let num = ((((((7.74545014278341407640e-4 * t + 2.27238449892691845833e-2) * t
            + 2.41780725177450611770e-1)
            * t
            + 1.27045825245236838258e+0)
            * t
            + 3.64784832476320460504e+0)
            * t
            + 5.76949722146069140550e+0)
            * t
            + 4.63033784615654529590e+0)
            * t
            + 1.42343711074968357734e+0;
        let den = ((((((1.05075007164441684324e-9 * t + 5.47593808499534494600e-4) * t
            + 1.51986665636164571966e-2)
            * t
            + 1.48103976427480074590e-1)
            * t
            + 6.89767334985100004550e-1)
            * t
            + 1.67638483018380384940e+0)
            * t
            + 2.05319162663775882187e+0)
            * t
            + 1.0;
        num / den
    } else {
        let t = t - 5.0;
        let num = ((((((2.01033439929228813265e-7 * t + 2.71155556874348757815e-5) * t
            + 1.24266094738807843860e-3)
            * t
            + 2.65321895265761230930e-2)
            * t
            + 2.96560571828504891230e-1)
            * t
            + 1.78482653991729133580e+0)
            * t
            + 5.46378491116411436990e+0)
            * t
            + 6.65790464350110377720e+0;
        let den = ((((((2.04426310338993978564e-15 * t + 1.42151175831644588870e-7) * t
            + 1.84631831751005468180e-5)
            * t
            + 7.86869131145613259100e-4)
            * t
            + 1.48753612908506148525e-2)
            * t
            + 1.36929880922735805310e-1)
            * t
            + 5.99832206555887937690e-1)
            * t
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Rational-only inverse cdf for `u ∈ (0, 1)`. Relative accuracy is about
/// 1e-16, which is what the samplers use per variate.
#[inline]
pub(crate) fn fast_quantile(u: f64) -> f64 {
    let q = u - 0.5;
    let r = if q < 0.0 { u } else { 1.0 - u };
    as241(q, r)
}

/// Solves `Φ̄(x) = tail` for `tail ∈ (0, 1/2]`.
fn upper_quantile_half(tail: f64) -> f64 {
    let mut x = as241(0.5 - tail, tail);
    if tail == 0.5 {
        return 0.0;
    }
    let target = tail.ln();
    for _ in 0..2 {
        let f = ln_sf(x) - target;
        if f == 0.0 {
            break;
        }
        // d/dx ln Φ̄(x) = -1/R(x)
        x += f * mills_ratio(x);
    }
    x
}

/// Upper-tail quantile: the `x` with `Φ̄(x) = tail`.
pub fn upper_quantile(tail: f64) -> Result<f64> {
    if !(tail > 0.0 && tail < 1.0) {
        return Err(Error::domain(format!("tail probability must lie in (0,1), got {tail}")));
    }
    if tail <= 0.5 {
        Ok(upper_quantile_half(tail))
    } else {
        // 1 - tail is exact for tail in [1/2, 1).
        Ok(-upper_quantile_half(1.0 - tail))
    }
}

/// Inverse of `Φ`.
pub fn std_normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("probability must lie in (0,1), got {q}")));
    }
    if q < 0.5 {
        Ok(-upper_quantile_half(q))
    } else {
        Ok(upper_quantile_half(1.0 - q))
    }
}

/// `u_x = Φ^{-1}(1 - 1/x)` for a real argument `x > 1`.
pub fn u_at(x: f64) -> Result<f64> {
    if !(x > 1.0) || !x.is_finite() {
        return Err(Error::domain(format!("u_x needs a finite argument x > 1, got {x}")));
    }
    upper_quantile(1.0 / x)
}

/// `u_p` for an integer dimension `p ≥ 2`.
pub fn u_p(p: u64) -> Result<f64> {
    check_dimension(p, 2)?;
    u_at(p as f64)
}

fn check_dimension(p: u64, min: u64) -> Result<()> {
    if p < min {
        return Err(Error::domain(format!("dimension must be at least {min}, got {p}")));
    }
    if p > i64::MAX as u64 {
        return Err(Error::domain(format!("dimension {p} exceeds 2^63 - 1")));
    }
    Ok(())
}

/// Gumbel centering constant `√(2 log p)·(1 − (log log p + log 4π)/(4 log p))`.
pub fn u_star_of(p: f64) -> f64 {
    let l = p.ln();
    (2.0 * l).sqrt() * (1.0 - (l.ln() + (4.0 * PI).ln()) / (4.0 * l))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizingConstants {
    pub p: u64,
    /// The (1 − 1/p)-quantile of the standard normal.
    pub u_p: f64,
    /// Unavailable for `p = 2`.
    pub u_star: Option<f64>,
    pub sqrt_2_log_p: f64,
    /// `1/u_p²`; unavailable when `u_p = 0` (p = 2).
    pub delta_opt: Option<f64>,
}

pub fn constants_for(p: u64) -> Result<NormalizingConstants> {
    check_dimension(p, 2)?;
    let u = u_p(p)?;
    let pf = p as f64;
    Ok(NormalizingConstants {
        p,
        u_p: u,
        u_star: (p >= 3).then(|| u_star_of(pf)),
        sqrt_2_log_p: (2.0 * pf.ln()).sqrt(),
        delta_opt: (u > 0.0).then(|| 1.0 / (u * u)),
    })
}

/// `√(2 log p)·(u_p − u_p*)`, which vanishes as `p → ∞`.
pub fn up_gap(p: u64) -> Result<f64> {
    check_dimension(p, 3)?;
    let pf = p as f64;
    Ok((2.0 * pf.ln()).sqrt() * (u_p(p)? - u_star_of(pf)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MillsBounds {
    pub lower: f64,
    /// `Φ̄(u) / (φ(u)/u)`
    pub ratio: f64,
    pub upper: f64,
}

/// Sandwich `1 − 1/(1 ∨ u²) ≤ Φ̄(u)/(φ(u)/u) ≤ 1`.
pub fn mills_ratio_bounds(u: f64) -> Result<MillsBounds> {
    check_finite(u)?;
    if u <= 0.0 {
        return Err(Error::domain(format!("Mills ratio bounds need u > 0, got {u}")));
    }
    Ok(MillsBounds {
        lower: 1.0 - 1.0 / (u * u).max(1.0),
        ratio: u * mills_ratio(u),
        upper: 1.0,
    })
}

/// `1/a_p² + |b_p/a_p − 1|`.
pub fn delta_opt(a_p: f64, b_p: f64) -> Result<f64> {
    check_finite(a_p)?;
    check_finite(b_p)?;
    if a_p <= 0.0 {
        return Err(Error::domain(format!("a_p must be positive, got {a_p}")));
    }
    Ok(1.0 / (a_p * a_p) + (b_p / a_p - 1.0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    // Values frozen from a 50-digit mpmath evaluation.
    const PHI_1: f64 = 0.841_344_746_068_542_9;
    const Q_090: f64 = 1.281_551_565_544_600_4;
    const Q_099: f64 = 2.326_347_874_040_841;
    const U_STAR_100: f64 = 2.366_254_792_906_394;
    const GAP_1E4: f64 = -0.083_239_159_287_995_32;

    #[test]
    fn cdf_symmetry_and_reference_values() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
        for x in [0.5, 1.0, 3.0] {
            let lhs = std_normal_cdf(x).unwrap();
            let rhs = 1.0 - std_normal_cdf(-x).unwrap();
            assert!((lhs - rhs).abs() <= 2e-16, "x={x}");
        }
        assert!((std_normal_cdf(1.0).unwrap() - PHI_1).abs() <= 1e-15);
    }

    #[test]
    fn non_finite_input_is_a_domain_error() {
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_cdf(f64::INFINITY).is_err());
        assert!(std_normal_sf(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn mills_continued_fraction_matches_direct_ratio() {
        for i in 0..=60 {
            let x = 5.0 + 0.05 * f64::from(i);
            let direct = sf(x) / pdf(x);
            let cf = mills_ratio(x);
            assert!((direct / cf - 1.0).abs() < 1e-13, "x={x} direct={direct} cf={cf}");
        }
    }

    #[test]
    fn quantile_reference_values() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        assert!((std_normal_quantile(0.9).unwrap() - Q_090).abs() < 1e-13);
        assert!((std_normal_quantile(0.99).unwrap() - Q_099).abs() < 1e-13);
        assert!((std_normal_quantile(0.01).unwrap() + Q_099).abs() < 1e-13);
    }

    #[test]
    fn quantile_domain_errors() {
        for q in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(std_normal_quantile(q).is_err(), "q={q}");
        }
    }

    #[test]
    fn quantile_round_trip_across_tails() {
        for k in 1..300 {
            let q = f64::from(k) / 300.0;
            let x = std_normal_quantile(q).unwrap();
            assert!((cdf(x) - q).abs() <= 1e-12, "q={q}");
        }
        for e in [1e-5, 1e-10, 1e-20, 1e-50, 1e-100, 1e-200, 1e-300] {
            let x = upper_quantile(e).unwrap();
            assert!((ln_sf(x) - e.ln()).abs() < 1e-12, "tail={e}");
        }
    }

    #[test]
    fn constants_at_100() {
        let c = constants_for(100).unwrap();
        assert!((c.u_p - Q_099).abs() < 1e-13);
        assert!((c.u_star.unwrap() - U_STAR_100).abs() < 1e-13);
        assert_eq!(c.delta_opt.unwrap(), 1.0 / (c.u_p * c.u_p));
        let c10 = constants_for(10).unwrap();
        assert!((c10.sqrt_2_log_p - 2.145_966_026_289_347).abs() < 1e-14);
    }

    #[test]
    fn constants_edge_dimensions() {
        assert!(constants_for(0).is_err());
        assert!(constants_for(1).is_err());
        let c = constants_for(2).unwrap();
        assert_eq!(c.u_p, 0.0);
        assert!(c.u_star.is_none());
        assert!(c.delta_opt.is_none());
        assert!(constants_for(u64::MAX).is_err());
        assert!(constants_for(i64::MAX as u64).is_ok());
    }

    #[test]
    fn up_gap_regression() {
        assert!(up_gap(3).unwrap().is_finite());
        assert!(up_gap(2).is_err());
        assert!((up_gap(10_000).unwrap() - GAP_1E4).abs() < 1e-11);
        assert!(up_gap(1_000_000).unwrap().abs() < up_gap(1000).unwrap().abs());
    }

    #[test]
    fn mills_bounds_examples() {
        let b = mills_ratio_bounds(1.0).unwrap();
        assert_eq!(b.lower, 0.0);
        assert!((b.ratio - 0.655_679_542_418_798_5).abs() < 1e-14);
        let b = mills_ratio_bounds(2.0).unwrap();
        assert_eq!(b.lower, 0.75);
        assert!((b.ratio - 0.842_738_458_576_108_9).abs() < 1e-14);
        let b = mills_ratio_bounds(10.0).unwrap();
        assert!(b.ratio >= 0.99 && b.ratio <= 1.0);
        assert!(mills_ratio_bounds(0.0).is_err());
        assert!(mills_ratio_bounds(-1.0).is_err());
    }

    #[test]
    fn delta_opt_cases() {
        let u = u_p(100).unwrap();
        assert!((delta_opt(u, u).unwrap() - 0.184_778_179_386_101).abs() < 1e-13);
        assert_eq!(delta_opt(2.5, 2.5).unwrap(), 1.0 / 6.25);
        assert!(delta_opt(0.0, 1.0).is_err());

        // a = √(2 log p), b = u_p*: the second term is -g(p) = (log log p + log 4π)/(4 log p).
        let p = 1e4_f64;
        let a = (2.0 * p.ln()).sqrt();
        let b = u_star_of(p);
        let second = delta_opt(a, b).unwrap() - 1.0 / (a * a);
        let g = (p.ln().ln() + (4.0 * PI).ln()) / (4.0 * p.ln());
        assert!(second > 0.0);
        assert!((second - g).abs() < 1e-14);
    }
}

//! Packing numbers, the greedy packing and the expectation lower bound.
//!
//! `N_E(τ)` is the largest number of coordinates more than `τ`-correlated
//! with a single coordinate, the coordinate itself included (its variance is
//! 1 > τ). An iid array therefore has `N_E(τ) = 1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::{Base, CovarianceMatrix, CovarianceModel, Realized};
use crate::error::{Error, Result};
use crate::normal::u_at;

/// Read access to the covariance of a fixed-dimension array.
pub trait CovSource: Sync {
    fn dim(&self) -> usize;
    fn cov(&self, i: usize, j: usize) -> f64;
}

impl CovSource for CovarianceMatrix {
    fn dim(&self) -> usize {
        self.p
    }
    #[inline]
    fn cov(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }
}

impl CovSource for Realized {
    fn dim(&self) -> usize {
        Realized::dim(self)
    }
    #[inline]
    fn cov(&self, i: usize, j: usize) -> f64 {
        self.cov_unchecked(i, j)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("tau must lie in (0, 1), got {tau}")))
    }
}

/// `N_E(τ)` by scanning every row; rows are scanned in parallel.
pub fn n_tau<C: CovSource + ?Sized>(cov: &C, tau: f64) -> Result<usize> {
    check_tau(tau)?;
    let p = cov.dim();
    Ok((0..p)
        .into_par_iter()
        .map(|i| (0..p).filter(|&j| cov.cov(i, j) > tau).count())
        .max()
        .unwrap_or(0))
}

/// `N_E(τ)` of a model at dimension `p` without forming the matrix when the
/// model is stationary.
///
/// For a decreasing lag function with `K` lags above `τ`, the fullest row is
/// a central one and holds `1 + min(2K, p − 1)` entries. Permutations do not
/// change the count.
pub fn n_tau_model(model: &CovarianceModel, p: u64, tau: f64) -> Result<u64> {
    check_tau(tau)?;
    if p == 0 {
        return Err(Error::domain("dimension p must be at least 1"));
    }
    if model.is_iid() {
        return Ok(1);
    }
    if let Some(acf) = model.acf() {
        let k = acf.lags_above(tau, p - 1);
        return Ok(1 + (2 * k as u128).min(p as u128 - 1) as u64);
    }
    let p = usize::try_from(p).map_err(|_| Error::domain("p too large"))?;
    let law = model.at(p)?;
    Ok(n_tau(&law, tau)? as u64)
}

/// `α(p) = log n / log p`.
pub fn alpha_p(n: u64, p: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("packing number must be at least 1"));
    }
    if p < 2 {
        return Err(Error::domain(format!("alpha_p needs p >= 2, got {p}")));
    }
    Ok((n as f64).ln() / (p as f64).ln())
}

/// Greedy packing: take the lowest remaining index, discard everything more
/// than `τ`-correlated with it, repeat. Returned sorted.
///
/// Every pair in the result has covariance at most `τ`, and the result has
/// at least `⌈p / N_E(τ)⌉` elements.
pub fn greedy_packing<C: CovSource + ?Sized>(cov: &C, tau: f64) -> Result<Vec<usize>> {
    check_tau(tau)?;
    let p = cov.dim();
    let mut removed = vec![false; p];
    let mut gamma = Vec::new();
    for i in 0..p {
        if removed[i] {
            continue;
        }
        gamma.push(i);
        for (j, r) in removed.iter_mut().enumerate().skip(i + 1) {
            if !*r && cov.cov(i, j) > tau {
                *r = true;
            }
        }
    }
    Ok(gamma)
}

/// Pairs `(i, j)` in `set` whose covariance exceeds `τ`.
pub fn packing_violations<C: CovSource + ?Sized>(cov: &C, set: &[usize], tau: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (a, &i) in set.iter().enumerate() {
        for &j in &set[a + 1..] {
            if cov.cov(i, j) > tau {
                out.push((i, j));
            }
        }
    }
    out
}

const LN_UNDERFLOW: f64 = -690.775_527_898_213_7; // ln(1e-300)

/// `2^{-x}` evaluated in log space, flushed to 0 below 1e-300.
fn pow2_neg(x: f64) -> f64 {
    let l = -x * std::f64::consts::LN_2;
    if l < LN_UNDERFLOW {
        0.0
    } else {
        l.exp()
    }
}

/// Deficiency of the expectation lower bound,
/// `R_q = 1 − (u_{q/n+1}/u_q) √(1−τ) (1 − 2^{−q/n} − √(2/π) 2^{−q/n} / u_{q/n+1})`.
///
/// `u` is evaluated at the real argument `q/n + 1`.
pub fn r_q(q: u64, tau: f64, n: u64) -> Result<f64> {
    if q < 2 {
        return Err(Error::domain(format!("r_q needs q >= 2, got {q}")));
    }
    check_tau(tau)?;
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    r_q_real(q as f64, tau, n as f64)
}

pub(crate) fn r_q_real(q: f64, tau: f64, n: f64) -> Result<f64> {
    let m = q / n;
    if m + 1.0 <= 2.0 {
        return Err(Error::domain(format!(
            "r_q needs q/n + 1 > 2 so that u_(q/n+1) > 0, got q/n = {m}"
        )));
    }
    let u_m = u_at(m + 1.0)?;
    let u_q = u_at(q)?;
    let t = pow2_neg(m);
    let inner = 1.0 - t - (2.0 / std::f64::consts::PI).sqrt() * t / u_m;
    Ok(1.0 - (u_m / u_q) * (1.0 - tau).sqrt() * inner)
}

/// Lower bound for `E[max of p iid N(0,1)] / u_{p+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IidMaxLowerBound {
    pub value: f64,
    /// Set at `p = 1`, where `u_2 = 0` and only the first term is returned.
    pub degenerate: bool,
}

pub fn iid_expected_max_lower_bound(p: u64) -> Result<IidMaxLowerBound> {
    if p == 0 {
        return Err(Error::domain("p must be at least 1"));
    }
    let t = pow2_neg(p as f64);
    if p == 1 {
        return Ok(IidMaxLowerBound { value: 1.0 - t, degenerate: true });
    }
    let u = u_at(p as f64 + 1.0)?;
    Ok(IidMaxLowerBound {
        value: (1.0 - t) - (2.0 / std::f64::consts::PI).sqrt() / u * t,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackingReport {
    pub p: usize,
    pub tau: f64,
    pub n_tau: usize,
    pub alpha: f64,
    /// Sorted, 0-based.
    pub gamma_set: Vec<usize>,
    /// `⌈p / n_tau⌉`.
    pub gamma_lower_bound: usize,
    /// `R_q` at `q = p`, `n = n_tau`; absent when `p / n_tau + 1 ≤ 2`.
    pub r_q: Option<f64>,
}

pub fn packing_report<C: CovSource + ?Sized>(cov: &C, tau: f64) -> Result<PackingReport> {
    let p = cov.dim();
    if p < 2 {
        return Err(Error::domain(format!("packing report needs p >= 2, got {p}")));
    }
    let n = n_tau(cov, tau)?;
    let gamma_set = greedy_packing(cov, tau)?;
    Ok(PackingReport {
        p,
        tau,
        n_tau: n,
        alpha: alpha_p(n as u64, p as u64)?,
        gamma_set,
        gamma_lower_bound: p.div_ceil(n),
        r_q: r_q(p as u64, tau, n as u64).ok(),
    })
}

/// Greedy packing of a stationary law whose lag function exceeds `τ` on
/// exactly the first `k` lags. Same output as [`greedy_packing`] in
/// `O(p·k)` time.
fn greedy_packing_banded(law: &Realized, k: usize) -> Vec<usize> {
    let p = law.dim();
    let pos: Vec<usize> = (0..p).map(|i| law.permutation().map_or(i, |v| v[i])).collect();
    let mut at = vec![0usize; p];
    for (i, &s) in pos.iter().enumerate() {
        at[s] = i;
    }
    let mut removed = vec![false; p];
    let mut gamma = Vec::new();
    for i in 0..p {
        if removed[i] {
            continue;
        }
        gamma.push(i);
        let s = pos[i];
        for t in s.saturating_sub(k)..=(s + k).min(p - 1) {
            removed[at[t]] = true;
        }
    }
    gamma
}

/// Report for a model at dimension `p`, without materializing the matrix.
pub fn packing_report_model(model: &CovarianceModel, p: usize, tau: f64) -> Result<PackingReport> {
    check_tau(tau)?;
    if p < 2 {
        return Err(Error::domain(format!("packing report needs p >= 2, got {p}")));
    }
    let law = model.at(p)?;
    let k = match law.base() {
        Base::Iid => 0,
        Base::Stationary(acf) => acf.lags_above(tau, p as u64 - 1) as usize,
        Base::Explicit(_) => return packing_report(&law, tau),
    };
    let n = 1 + (2 * k).min(p - 1);
    Ok(PackingReport {
        p,
        tau,
        n_tau: n,
        alpha: alpha_p(n as u64, p as u64)?,
        gamma_set: greedy_packing_banded(&law, k),
        gamma_lower_bound: p.div_ceil(n),
        r_q: r_q(p as u64, tau, n as u64).ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{materialize, ExplicitMatrix};

    fn constant(p: usize, rho: f64) -> CovarianceMatrix {
        let mut e = vec![rho; p * p];
        for i in 0..p {
            e[i * p + i] = 1.0;
        }
        materialize(&CovarianceModel::explicit(ExplicitMatrix::new(p, e).unwrap()), p).unwrap()
    }

    #[test]
    fn iid_has_unit_packing_number() {
        let m = materialize(&CovarianceModel::Iid, 50).unwrap();
        for tau in [0.01, 0.5, 0.99] {
            assert_eq!(n_tau(&m, tau).unwrap(), 1);
        }
        assert_eq!(n_tau_model(&CovarianceModel::Iid, 1_000_000, 0.3).unwrap(), 1);
        assert_eq!(greedy_packing(&materialize(&CovarianceModel::Iid, 10).unwrap(), 0.5).unwrap(), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn constant_correlation() {
        let m = constant(30, 0.5);
        assert_eq!(n_tau(&m, 0.4).unwrap(), 30);
        let m = constant(30, 0.9);
        assert_eq!(greedy_packing(&m, 0.5).unwrap(), vec![0]);
    }

    #[test]
    fn tau_domain() {
        let m = materialize(&CovarianceModel::Iid, 3).unwrap();
        assert!(n_tau(&m, 0.0).is_err());
        assert!(n_tau(&m, 1.0).is_err());
        assert!(greedy_packing(&m, -0.1).is_err());
    }

    #[test]
    fn power_law_boundary_is_strict() {
        // ρ(1) = 0.25 exactly, so τ = 0.25 excludes every neighbour.
        let model = CovarianceModel::power_law(2.0, 1.0).unwrap();
        let m = materialize(&model, 100).unwrap();
        assert_eq!(n_tau(&m, 0.25).unwrap(), 1);
        assert_eq!(n_tau(&m, 0.2).unwrap(), 3);
        assert_eq!(n_tau_model(&model, 100, 0.25).unwrap(), 1);
        assert_eq!(n_tau_model(&model, 100, 0.2).unwrap(), 3);
    }

    #[test]
    fn analytic_count_matches_scan() {
        for model in [
            CovarianceModel::power_law(1.0, 1.0).unwrap(),
            CovarianceModel::power_law(0.3, 0.9).unwrap(),
            CovarianceModel::log_decay(1.0, 1.0).unwrap(),
            CovarianceModel::log_decay(0.5, 1.0).unwrap(),
        ] {
            for p in [2usize, 7, 64, 300] {
                let m = materialize(&model, p).unwrap();
                for tau in [0.05, 0.1, 0.2, 0.33, 0.6] {
                    assert_eq!(n_tau(&m, tau).unwrap() as u64, n_tau_model(&model, p as u64, tau).unwrap(), "{model:?} p={p} tau={tau}");
                }
            }
        }
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_p(1, 1000).unwrap(), 0.0);
        assert!((alpha_p(3, 1000).unwrap() - 0.159_040_418_239_887_48).abs() < 1e-6);
        assert!((alpha_p(3, 1000).unwrap() - 3f64.ln() / 1000f64.ln()).abs() < 1e-15);
        assert_eq!(alpha_p(1000, 1000).unwrap(), 1.0);
        assert!(alpha_p(0, 10).is_err());
    }

    #[test]
    fn r_q_examples() {
        // n = 1, τ tiny: only the quantile ratio survives.
        let r = r_q(1024, 1e-12, 1).unwrap();
        assert!(r.abs() < 1e-3, "{r}");
        let r = r_q(1_000_000, 0.5, 1).unwrap();
        assert!((r - (1.0 - 0.5f64.sqrt())).abs() < 1e-2, "{r}");
        assert!(r_q(4, 0.5, 4).is_err());
        assert!(r_q(3, 0.5, 3).is_err());
        assert!(r_q(3, 0.5, 2).is_ok());
        assert!(r_q(1, 0.5, 1).is_err());
    }

    #[test]
    fn iid_lower_bound() {
        let b = iid_expected_max_lower_bound(1).unwrap();
        assert!(b.degenerate);
        assert_eq!(b.value, 0.5);
        let b = iid_expected_max_lower_bound(20).unwrap();
        assert!(!b.degenerate);
        assert!((b.value - 0.999_998_590_244_390_5).abs() < 1e-12, "{}", b.value);
    }

    #[test]
    fn report_is_consistent() {
        let model = CovarianceModel::power_law(1.0, 1.0).unwrap();
        let m = materialize(&model, 200).unwrap();
        let r = packing_report(&m, 0.1).unwrap();
        assert!(r.gamma_set.len() >= r.gamma_lower_bound);
        assert!(packing_violations(&m, &r.gamma_set, 0.1).is_empty());
        let r2 = packing_report_model(&model, 200, 0.1).unwrap();
        assert_eq!(r, r2);
        let shuffled = model.permuted(crate::covariance::Permutation::Shuffle { seed: 4 });
        let m = materialize(&shuffled, 200).unwrap();
        for tau in [0.05, 0.1, 0.3] {
            assert_eq!(packing_report(&m, tau).unwrap(), packing_report_model(&shuffled, 200, tau).unwrap());
        }
        let big = packing_report_model(&CovarianceModel::Iid, 1_000_000, 0.5).unwrap();
        assert_eq!(big.gamma_set.len(), 1_000_000);
    }
}

//! Kolmogorov–Smirnov statistics and binomial intervals.

use crate::error::{Error, Result};

/// `c(α) = √(−ln(α/2) / 2)`, the asymptotic Kolmogorov critical value for
/// `√n · D`.
pub fn kolmogorov_c(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok((-(alpha / 2.0).ln() / 2.0).sqrt())
}

/// Critical value for a one-sample statistic on `n` points.
pub fn ks_critical_one_sample(alpha: f64, n: usize) -> Result<f64> {
    Ok(kolmogorov_c(alpha)? / (n as f64).sqrt())
}

/// Critical value for a two-sample statistic on `n` and `m` points.
pub fn ks_critical_two_sample(alpha: f64, n: usize, m: usize) -> Result<f64> {
    let (n, m) = (n as f64, m as f64);
    Ok(kolmogorov_c(alpha)? * ((n + m) / (n * m)).sqrt())
}

fn sorted(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::domain("KS statistic of an empty sample"));
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("KS statistic of a sample containing NaN"));
    }
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v)
}

/// `sup_x |F_n(x) − F(x)|`.
pub fn ks_one_sample(x: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let v = sorted(x)?;
    let n = v.len() as f64;
    Ok(v.iter().enumerate().fold(0.0, |d, (i, &xi)| {
        let f = cdf(xi);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    }))
}

/// `sup_x |F_n(x) − G_m(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Standard Gumbel cdf `Λ(x) = exp(−e^{−x})`.
pub fn gumbel_cdf(x: f64) -> f64 {
    (-(-x).exp()).exp()
}

/// Normal-approximation 95% half-width `1.96 √(q(1−q)/n)`.
pub fn binomial_half_width(q: f64, n: u64) -> f64 {
    1.96 * (q * (1.0 - q) / n as f64).sqrt()
}

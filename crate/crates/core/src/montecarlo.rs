//! Monte Carlo experiments.
//!
//! Replications run in parallel but are collected in index order and
//! reduced sequentially, so every result is a pure function of the inputs
//! and the seed, whatever the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::normal::{u_p, u_star_of, upper_quantile};
use crate::rates::{capstone_auto, g_beta, TransformSpec};
use crate::rng::{self, Domain};
use crate::sampler::{self, prepare, SamplerState};
use crate::stats;

/// Normalizer for the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    #[serde(rename = "u_p")]
    Up,
    #[serde(rename = "sqrt2logp")]
    Sqrt2LogP,
    #[serde(rename = "u_star")]
    UStar,
    /// `v_p = f(u_p)` for the transform in use.
    #[serde(rename = "f_of_up")]
    FOfUp,
}

impl NormKind {
    pub fn name(&self) -> &'static str {
        match self {
            NormKind::Up => "u_p",
            NormKind::Sqrt2LogP => "sqrt2logp",
            NormKind::UStar => "u_star",
            NormKind::FOfUp => "f_of_up",
        }
    }

    pub fn value(&self, p: u64, transform: &TransformSpec) -> Result<f64> {
        if !transform.is_identity() && *self != NormKind::FOfUp {
            return Err(Error::Inadmissible(format!(
                "transform {} must be normalized by f_of_up, not {}",
                transform.label(),
                self.name()
            )));
        }
        if p < 3 {
            return Err(Error::domain(format!("normalizers need p >= 3, got {p}")));
        }
        let v = match self {
            NormKind::Up => u_p(p)?,
            NormKind::Sqrt2LogP => (2.0 * (p as f64).ln()).sqrt(),
            NormKind::UStar => u_star_of(p as f64),
            NormKind::FOfUp => {
                transform.validate()?;
                transform.apply(u_p(p)?)
            }
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Inadmissible(format!("normalizer {} is {v} at p = {p}", self.name())));
        }
        Ok(v)
    }
}

/// How `δ_p` depends on `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeltaSchedule {
    /// `c / log p`.
    COverLogp { c: f64 },
    /// `c log log p / log p`.
    LoglogOverLog { c: f64 },
    /// `c` times the capstone bound with the model's optimal `τ(p)`.
    CapstoneAuto {
        #[serde(default = "one")]
        c: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl DeltaSchedule {
    pub fn delta(&self, p: u64, model: &CovarianceModel) -> Result<f64> {
        if p < 3 {
            return Err(Error::domain(format!("delta schedules need p >= 3, got {p}")));
        }
        let lp = (p as f64).ln();
        let d = match *self {
            DeltaSchedule::COverLogp { c } => c / lp,
            DeltaSchedule::LoglogOverLog { c } => c * lp.ln() / lp,
            DeltaSchedule::CapstoneAuto { c } => c * capstone_auto(model, p as f64)?.total,
        };
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Config(format!("delta schedule gives non-positive delta {d} at p = {p}")));
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationEstimate {
    pub p: u64,
    pub delta_p: f64,
    pub norm_kind: NormKind,
    pub norm: f64,
    /// `P(|max/norm − 1| > δ_p)`.
    pub prob: f64,
    /// Upper tail `max/norm − 1 > δ_p`.
    pub count_above: u64,
    /// Lower tail `max/norm − 1 < −δ_p`.
    pub count_below: u64,
    pub reps: u64,
    pub half_width: f64,
    /// Mean of `|max/norm − 1|`.
    pub mean_abs_dev: f64,
    pub method: String,
}

impl ConcentrationEstimate {
    pub fn prob_above(&self) -> f64 {
        self.count_above as f64 / self.reps as f64
    }

    pub fn prob_below(&self) -> f64 {
        self.count_below as f64 / self.reps as f64
    }
}

/// `max f(x)` for each replication of a prepared sampler, in replication order.
pub fn simulate_maxima(state: &SamplerState, reps: u64, transform: &TransformSpec) -> Vec<f64> {
    (0..reps)
        .into_par_iter()
        .map_init(
            || vec![0.0; state.dim()],
            |buf, r| {
                state.sample_row_into(r, buf);
                sampler::transformed_max(buf, transform)
            },
        )
        .collect()
}

/// Minimum number of replications for a concentration estimate.
pub const MIN_REPS: u64 = 100;

/// Counts exceedances of `|max/norm − 1| > δ` in a list of maxima.
pub fn summarize(p: u64, maxima: &[f64], norm: f64, delta_p: f64, norm_kind: NormKind, method: &str) -> ConcentrationEstimate {
    let (mut above, mut below, mut abs_sum) = (0u64, 0u64, 0.0f64);
    for &m in maxima {
        let z = m / norm - 1.0;
        if z > delta_p {
            above += 1;
        } else if z < -delta_p {
            below += 1;
        }
        abs_sum += z.abs();
    }
    let reps = maxima.len() as u64;
    // Summed per tail so that the split is exact in floating point.
    let prob = above as f64 / reps as f64 + below as f64 / reps as f64;
    ConcentrationEstimate {
        p,
        delta_p,
        norm_kind,
        norm,
        prob,
        count_above: above,
        count_below: below,
        reps,
        half_width: stats::binomial_half_width(prob, reps),
        mean_abs_dev: abs_sum / reps as f64,
        method: method.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationConfig {
    pub p_grid: Vec<u64>,
    pub schedule: DeltaSchedule,
    pub norm_kind: NormKind,
    pub reps: u64,
    pub seed: u64,
}

/// Estimates `P(|max f(ε)/norm − 1| > δ_p)` at every `p` in the grid. Grid
/// position `k` uses random cell `k`.
pub fn estimate_concentration(
    model: &CovarianceModel,
    transform: &TransformSpec,
    cfg: &ConcentrationConfig,
) -> Result<Vec<ConcentrationEstimate>> {
    if cfg.reps < MIN_REPS {
        return Err(Error::Config(format!("reps must be at least {MIN_REPS}, got {}", cfg.reps)));
    }
    transform.validate()?;
    cfg.p_grid
        .iter()
        .enumerate()
        .map(|(cell, &p)| {
            let norm = cfg.norm_kind.value(p, transform)?;
            let delta = cfg.schedule.delta(p, model)?;
            let pu = usize::try_from(p).map_err(|_| Error::domain("p too large"))?;
            let state = prepare(model, pu, cfg.seed, cell as u64)?;
            for n in &state.notices {
                eprintln!("warning: p = {p}: {n}");
            }
            let maxima = simulate_maxima(&state, cfg.reps, transform);
            Ok(summarize(p, &maxima, norm, delta, cfg.norm_kind, state.method().name()))
        })
        .collect()
}

/// Least-squares comparison of `mean_abs_dev · log p` against a constant
/// (rate `1/log p`) and against `b · log log p` (rate `log log p / log p`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub p: Vec<u64>,
    /// `mean_abs_dev · log p`.
    pub scaled_inverse_log: Vec<f64>,
    /// `mean_abs_dev · log p / log log p`.
    pub scaled_loglog: Vec<f64>,
    pub const_level: f64,
    pub const_residual: f64,
    pub loglog_slope: f64,
    pub loglog_residual: f64,
    /// Max/min ratio of `scaled_inverse_log`.
    pub inverse_log_band: f64,
    /// Max/min ratio of `scaled_loglog`.
    pub loglog_band: f64,
    /// `"inverse_log"` or `"loglog_over_log"`, whichever fits better.
    pub preferred: String,
}

fn band(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    hi / lo
}

pub fn empirical_rate_fit(estimates: &[ConcentrationEstimate]) -> Result<RateFit> {
    let mut ps: Vec<u64> = estimates.iter().map(|e| e.p).collect();
    ps.sort_unstable();
    ps.dedup();
    if ps.len() < 4 {
        return Err(Error::domain(format!("rate fit needs at least 4 distinct p values, got {}", ps.len())));
    }
    if (ps[ps.len() - 1] as f64) < 100.0 * ps[0] as f64 {
        return Err(Error::domain("rate fit needs a p grid spanning at least two decades"));
    }
    let lp: Vec<f64> = estimates.iter().map(|e| (e.p as f64).ln()).collect();
    let y: Vec<f64> = estimates.iter().zip(&lp).map(|(e, l)| e.mean_abs_dev * l).collect();
    let ll: Vec<f64> = lp.iter().map(|l| l.ln()).collect();
    let n = y.len() as f64;
    let level = y.iter().sum::<f64>() / n;
    let const_residual = y.iter().map(|v| (v - level).powi(2)).sum::<f64>();
    let slope = y.iter().zip(&ll).map(|(a, b)| a * b).sum::<f64>() / ll.iter().map(|b| b * b).sum::<f64>();
    let loglog_residual = y.iter().zip(&ll).map(|(a, b)| (a - slope * b).powi(2)).sum::<f64>();
    let scaled_loglog: Vec<f64> = y.iter().zip(&ll).map(|(a, b)| a / b).collect();
    Ok(RateFit {
        p: estimates.iter().map(|e| e.p).collect(),
        inverse_log_band: band(&y),
        loglog_band: band(&scaled_loglog),
        scaled_inverse_log: y,
        scaled_loglog,
        const_level: level,
        const_residual,
        loglog_slope: slope,
        loglog_residual,
        preferred: if const_residual <= loglog_residual { "inverse_log" } else { "loglog_over_log" }.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GumbelCheck {
    pub p: u64,
    pub reps: u64,
    pub b_p: f64,
    /// KS distance of `b_p (M_p − b_p)` to the standard Gumbel law.
    pub ks: f64,
    /// One-sample 1% critical value at this sample size.
    pub critical_1pct: f64,
}

pub const GUMBEL_MIN_REPS: u64 = 1000;

/// KS distance between `u_p (M_p − u_p)` for iid maxima and `Λ`.
pub fn gumbel_check(p: u64, reps: u64, seed: u64) -> Result<GumbelCheck> {
    gumbel_check_cell(p, reps, seed, 0)
}

pub fn gumbel_check_cell(p: u64, reps: u64, seed: u64, cell: u64) -> Result<GumbelCheck> {
    if reps < GUMBEL_MIN_REPS {
        return Err(Error::Config(format!("gumbel check needs reps >= {GUMBEL_MIN_REPS}, got {reps}")));
    }
    let b = u_p(p)?;
    let pu = usize::try_from(p).map_err(|_| Error::domain("p too large"))?;
    let state = prepare(&CovarianceModel::Iid, pu, seed, cell)?;
    let z: Vec<f64> = simulate_maxima(&state, reps, &TransformSpec::IDENTITY)
        .into_iter()
        .map(|m| b * (m - b))
        .collect();
    Ok(GumbelCheck {
        p,
        reps,
        b_p: b,
        ks: stats::ks_one_sample(&z, stats::gumbel_cdf)?,
        critical_1pct: stats::ks_critical_one_sample(0.01, reps as usize)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsSelfTest {
    pub reps: u64,
    pub ks: f64,
    pub critical: f64,
    pub pass: bool,
}

/// KS distance of exact Gumbel draws `−ln(−ln U)` to `Λ`, compared with the
/// critical value at level `alpha`.
pub fn gumbel_self_test(reps: u64, seed: u64, alpha: f64) -> Result<KsSelfTest> {
    let mut r = rng::stream(seed, 0, Domain::Gumbel, 0);
    let z: Vec<f64> = (0..reps).map(|_| -(-rng::uniform_open(&mut r).ln()).ln()).collect();
    let ks = stats::ks_one_sample(&z, stats::gumbel_cdf)?;
    let critical = stats::ks_critical_one_sample(alpha, reps as usize)?;
    Ok(KsSelfTest { reps, ks, critical, pass: ks <= critical })
}

/// Threshold used by the support estimator `{i : x(i) > t_p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdRule {
    /// `t_p = √(2 q log p)`.
    Power { q: f64 },
    /// `t_p = Φ̄^{-1}(fwer / p)`, a Bonferroni bound on false inclusions.
    Bonferroni { fwer: f64 },
}

/// `√(2 log p)` alone lets noise through with probability near
/// `1/√(4π log p)`, which caps exact recovery below 1 for every signal size;
/// the default holds that chance to 0.1%.
impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule::Bonferroni { fwer: 0.001 }
    }
}

impl ThresholdRule {
    pub fn threshold(&self, p: u64) -> Result<f64> {
        match *self {
            ThresholdRule::Power { q } => {
                if !(q > 0.0) {
                    return Err(Error::Config(format!("threshold exponent must be positive, got {q}")));
                }
                Ok((2.0 * q * (p as f64).ln()).sqrt())
            }
            ThresholdRule::Bonferroni { fwer } => {
                if !(fwer > 0.0 && fwer < 1.0) {
                    return Err(Error::Config(format!("fwer must lie in (0, 1), got {fwer}")));
                }
                upper_quantile(fwer / p as f64)
            }
        }
    }
}

/// Signal size `μ = √(2 r log p)`.
pub fn signal_strength(p: u64, r: f64) -> f64 {
    (2.0 * r * (p as f64).ln()).sqrt()
}

/// `⌈p^{1−β}⌉`.
pub fn support_size(p: u64, beta: f64) -> Result<usize> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    let s = (p as f64).powf(1.0 - beta).ceil() as u64;
    if s >= p {
        return Err(Error::domain(format!("support size {s} must be below p = {p}")));
    }
    Ok(s.max(1) as usize)
}

/// Support of replication `rep`: the first `s` entries of a seeded shuffle,
/// drawn by a partial Fisher–Yates pass.
fn draw_support(p: usize, s: usize, seed: u64, cell: u64, rep: u64) -> Vec<usize> {
    let mut r = rng::stream(seed, cell, Domain::Support, rep);
    let mut idx: Vec<usize> = (0..p).collect();
    for i in 0..s {
        let j = i + rng::index_below(&mut r, p - i);
        idx.swap(i, j);
    }
    idx.truncate(s);
    idx
}

/// The two numbers that decide exact recovery for every signal strength:
/// the largest noise value off the support and the smallest on it.
fn recovery_margins(noise: &[f64], support: &[usize]) -> (f64, f64) {
    let mut on = vec![false; noise.len()];
    for &i in support {
        on[i] = true;
    }
    let mut max_off = f64::NEG_INFINITY;
    let mut min_on = f64::INFINITY;
    for (x, &s) in noise.iter().zip(&on) {
        if s {
            min_on = min_on.min(*x);
        } else {
            max_off = max_off.max(*x);
        }
    }
    (max_off, min_on)
}

/// One exact-recovery trial: signal `μ` on a random support of size
/// `⌈p^{1−β}⌉`, noise from `noise`, estimator `{i : x(i) > t_p}`.
///
/// The support is drawn from the sampler's seed and cell, so the trial matches
/// the corresponding replication of [`phase_diagram`].
pub fn support_recovery_trial(noise: &SamplerState, beta: f64, r: f64, rule: &ThresholdRule, replication: u64) -> Result<bool> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("signal strength r must be nonnegative, got {r}")));
    }
    let p = noise.dim();
    let s = support_size(p as u64, beta)?;
    let t = rule.threshold(p as u64)?;
    let mu = signal_strength(p as u64, r);
    let support = draw_support(p, s, noise.seed(), noise.cell(), replication);
    let mut x = noise.sample_row(replication);
    for &i in &support {
        x[i] += mu;
    }
    let mut in_support = vec![false; p];
    for &i in &support {
        in_support[i] = true;
    }
    Ok(x.iter().zip(&in_support).all(|(&v, &s)| (v > t) == s))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseDiagramCell {
    pub beta: f64,
    pub r: f64,
    pub r_over_g: f64,
    pub p: u64,
    pub successes: u64,
    pub reps: u64,
    pub recovery_freq: f64,
    pub support_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub beta: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseDiagram {
    pub cells: Vec<PhaseDiagramCell>,
    pub boundary: Vec<BoundaryPoint>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub p: u64,
    pub beta_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    /// Read `r_grid` as multiples of `g(β)`.
    #[serde(default)]
    pub r_relative: bool,
    pub reps: u64,
    pub seed: u64,
    #[serde(default)]
    pub rule: ThresholdRule,
}

pub const PHASE_MIN_REPS: u64 = 50;

/// Exact-recovery frequencies over a `(β, r)` grid.
///
/// Within a `β` row every `r` sees the same noise and the same supports, so
/// frequencies are monotone in `r` without Monte Carlo slack.
pub fn phase_diagram(model: &CovarianceModel, cfg: &PhaseConfig) -> Result<PhaseDiagram> {
    if cfg.beta_grid.is_empty() || cfg.r_grid.is_empty() {
        return Err(Error::Config("beta_grid and r_grid must be nonempty".into()));
    }
    if cfg.reps < PHASE_MIN_REPS {
        return Err(Error::Config(format!("phase diagram needs reps >= {PHASE_MIN_REPS}, got {}", cfg.reps)));
    }
    if let Some(r) = cfg.r_grid.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
        return Err(Error::Config(format!("r values must be nonnegative, got {r}")));
    }
    let p = cfg.p;
    let pu = usize::try_from(p).map_err(|_| Error::domain("p too large"))?;
    let t = cfg.rule.threshold(p)?;
    let mut cells = Vec::new();
    let mut boundary = Vec::new();
    for (bi, &beta) in cfg.beta_grid.iter().enumerate() {
        let g = g_beta(beta)?;
        let s = support_size(p, beta)?;
        let state = prepare(model, pu, cfg.seed, bi as u64)?;
        for n in &state.notices {
            eprintln!("warning: beta = {beta}: {n}");
        }
        let margins: Vec<(f64, f64)> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                let noise = state.sample_row(rep);
                let support = draw_support(pu, s, cfg.seed, bi as u64, rep);
                recovery_margins(&noise, &support)
            })
            .collect();
        boundary.push(BoundaryPoint { beta, g });
        for &rv in &cfg.r_grid {
            let r = if cfg.r_relative { rv * g } else { rv };
            let mu = signal_strength(p, r);
            let successes = margins.iter().filter(|(max_off, min_on)| *max_off <= t && mu + min_on > t).count() as u64;
            cells.push(PhaseDiagramCell {
                beta,
                r,
                r_over_g: r / g,
                p,
                successes,
                reps: cfg.reps,
                recovery_freq: successes as f64 / cfg.reps as f64,
                support_size: s,
            });
        }
    }
    Ok(PhaseDiagram { cells, boundary, threshold: t })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub p: u64,
    pub c: f64,
    pub delta_p: f64,
    pub prob: f64,
    pub reps: u64,
    pub half_width: f64,
}

/// `P(|M_p/u_p − 1| > c/log p)` over a grid of `p` and `c`. Exploratory.
pub fn conjecture_probe(model: &CovarianceModel, p_grid: &[u64], c_grid: &[f64], reps: u64, seed: u64) -> Result<Vec<ProbeRow>> {
    if reps < MIN_REPS {
        return Err(Error::Config(format!("reps must be at least {MIN_REPS}, got {reps}")));
    }
    let mut rows = Vec::new();
    for (cell, &p) in p_grid.iter().enumerate() {
        let norm = u_p(p)?;
        if p < 3 {
            return Err(Error::domain("conjecture probe needs p >= 3"));
        }
        let pu = usize::try_from(p).map_err(|_| Error::domain("p too large"))?;
        let state = prepare(model, pu, seed, cell as u64)?;
        let maxima = simulate_maxima(&state, reps, &TransformSpec::IDENTITY);
        for &c in c_grid {
            if !(c > 0.0) {
                return Err(Error::Config(format!("c values must be positive, got {c}")));
            }
            let delta = c / (p as f64).ln();
            let e = summarize(p, &maxima, norm, delta, NormKind::Up, state.method().name());
            rows.push(ProbeRow { p, c, delta_p: delta, prob: e.prob, reps, half_width: e.half_width });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_formula() {
        assert!((signal_strength(10_000, 4.0) - 8.583_864_105_157_389).abs() < 1e-12);
    }

    #[test]
    fn support_size_rules() {
        assert_eq!(support_size(4096, 0.5).unwrap(), 64);
        assert!(support_size(10, 0.5).unwrap() >= 1);
        assert!(support_size(2, 0.01).is_err());
        assert!(support_size(100, 1.0).is_err());
    }

    #[test]
    fn thresholds() {
        let t = ThresholdRule::Power { q: 1.0 }.threshold(1000).unwrap();
        assert!((t - (2.0 * 1000f64.ln()).sqrt()).abs() < 1e-15);
        let t = ThresholdRule::Bonferroni { fwer: 0.05 }.threshold(1000).unwrap();
        assert!((crate::normal::sf(t) * 1000.0 - 0.05).abs() < 1e-12);
        assert!(ThresholdRule::Bonferroni { fwer: 1.5 }.threshold(10).is_err());
    }

    #[test]
    fn supports_are_distinct() {
        let s = draw_support(1000, 100, 3, 0, 9);
        let mut v = s.clone();
        v.sort_unstable();
        v.dedup();
        assert_eq!(v.len(), 100);
        assert_eq!(s, draw_support(1000, 100, 3, 0, 9));
    }

    #[test]
    fn trial_agrees_with_margin_reduction() {
        let state = prepare(&CovarianceModel::Iid, 512, 5, 0).unwrap();
        let rule = ThresholdRule::default();
        let t = rule.threshold(512).unwrap();
        for rep in 0..40 {
            let noise = state.sample_row(rep);
            let s = support_size(512, 0.5).unwrap();
            let support = draw_support(512, s, 5, 0, rep);
            let (max_off, min_on) = recovery_margins(&noise, &support);
            for r in [0.0, 1.0, 3.0, 6.0, 20.0] {
                let mu = signal_strength(512, r);
                let fast = max_off <= t && mu + min_on > t;
                assert_eq!(fast, support_recovery_trial(&state, 0.5, r, &rule, rep).unwrap());
            }
        }
    }

    #[test]
    fn summarize_counts() {
        let e = summarize(100, &[1.0, 2.0, 3.0, 0.2], 2.0, 0.4, NormKind::Up, "x");
        assert_eq!((e.count_above, e.count_below), (1, 2));
        assert_eq!(e.prob, 0.75);
        assert_eq!(e.prob, e.prob_above() + e.prob_below());
        assert!((e.mean_abs_dev - (0.5 + 0.0 + 0.5 + 0.9) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn norm_pairing() {
        assert!(matches!(NormKind::Up.value(100, &TransformSpec::EXP), Err(Error::Inadmissible(_))));
        let v = NormKind::FOfUp.value(100, &TransformSpec::EXP).unwrap();
        assert!((v - u_p(100).unwrap().exp()).abs() < 1e-12);
        assert_eq!(NormKind::FOfUp.value(100, &TransformSpec::IDENTITY).unwrap(), u_p(100).unwrap());
    }

    #[test]
    fn rate_fit_on_constant_input() {
        let ps = [1u64 << 10, 1 << 12, 1 << 14, 1 << 16, 1 << 18];
        let es: Vec<_> = ps
            .iter()
            .map(|&p| {
                let mut e = summarize(p, &[1.0; 10], 1.0, 0.1, NormKind::Up, "x");
                e.mean_abs_dev = 0.7 / (p as f64).ln();
                e
            })
            .collect();
        let f = empirical_rate_fit(&es).unwrap();
        assert!(f.const_residual < 1e-24);
        assert!((f.inverse_log_band - 1.0).abs() < 1e-12);
        assert_eq!(f.preferred, "inverse_log");
        assert!(empirical_rate_fit(&es[..3]).is_err());
    }

    #[test]
    fn schedules() {
        let m = CovarianceModel::Iid;
        let d = DeltaSchedule::COverLogp { c: 2.0 }.delta(1000, &m).unwrap();
        assert_eq!(d, 2.0 / 1000f64.ln());
        let d = DeltaSchedule::CapstoneAuto { c: 5.0 }.delta(1000, &m).unwrap();
        assert_eq!(d, 5.0 / 1000f64.ln());
        let s: DeltaSchedule = serde_json::from_str(r#"{"kind":"loglog_over_log","c":1.5}"#).unwrap();
        assert_eq!(s, DeltaSchedule::LoglogOverLog { c: 1.5 });
    }
}

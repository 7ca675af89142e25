//! Closed-form rate bounds.
//!
//! Dimensions are taken as `f64` here so that purely analytic evaluations
//! (say `p = e^100`) need no integer representation.

use serde::{Deserialize, Serialize};

use crate::covariance::{materialize, Acf, CovarianceModel};
use crate::error::{Error, Result};
use crate::normal::u_at;
use crate::packing::n_tau;

/// The capstone bound `α(p) + τ(p) + 1/log p` and its parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateBound {
    pub p: f64,
    pub tau_p: f64,
    pub n_tau: f64,
    pub alpha_p: f64,
    pub term_alpha: f64,
    pub term_tau: f64,
    pub term_log: f64,
    pub total: f64,
    pub model_tag: String,
    /// `Some(false)` when the log-decay validity guard fails at this `p`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guard_ok: Option<bool>,
}

fn check_p(p: f64) -> Result<f64> {
    if !(p >= 3.0 && p.is_finite()) {
        return Err(Error::domain(format!("rate bounds need p >= 3, got {p}")));
    }
    Ok(p.ln())
}

/// `log(n)/log(p) + τ + 1/log(p)`.
///
/// `τ = 0` is accepted so that the iid bound `1/log p` is expressible.
pub fn capstone_bound(p: f64, tau_p: f64, n_tau: f64) -> Result<RateBound> {
    let lp = check_p(p)?;
    if !(0.0..1.0).contains(&tau_p) {
        return Err(Error::domain(format!("tau_p must lie in [0, 1), got {tau_p}")));
    }
    if !(n_tau >= 1.0 && n_tau.is_finite()) {
        return Err(Error::domain(format!("n_tau must be at least 1, got {n_tau}")));
    }
    let term_alpha = n_tau.ln() / lp;
    let term_log = 1.0 / lp;
    Ok(RateBound {
        p,
        tau_p,
        n_tau,
        alpha_p: term_alpha,
        term_alpha,
        term_tau: tau_p,
        term_log,
        total: term_alpha + tau_p + term_log,
        model_tag: String::new(),
        guard_ok: None,
    })
}

/// `N_E(τ)` of a stationary lag function at a possibly huge dimension.
fn stationary_count(acf: &Acf, p: f64, tau: f64) -> f64 {
    let max_lag = if p - 1.0 >= u64::MAX as f64 { u64::MAX } else { (p - 1.0) as u64 };
    let k = acf.lags_above(tau, max_lag) as f64;
    1.0 + (2.0 * k).min(p - 1.0)
}

/// Power-law decay: `τ(p) = 1/log p`, giving a bound of order
/// `log log p / log p`.
pub fn optimize_tau_powerlaw(p: f64, gamma: f64, c: f64) -> Result<RateBound> {
    let lp = check_p(p)?;
    let CovarianceModel::PowerLaw { gamma, c } = CovarianceModel::power_law(gamma, c)? else {
        unreachable!()
    };
    let acf = Acf::PowerLaw { gamma, c };
    let tau = 1.0 / lp;
    let mut b = capstone_bound(p, tau, stationary_count(&acf, p, tau))?;
    b.model_tag = acf.tag();
    Ok(b)
}

/// Logarithmic decay: `τ(p) = (ν log p)^{−ν/(ν+1)}`, giving a bound of order
/// `(log p)^{−ν/(ν+1)}`.
///
/// The guard `p ≥ c̃ exp(τ^{−1/ν})` is reported in `guard_ok`, never raised.
pub fn optimize_tau_logdecay(p: f64, nu: f64, c: f64, c_tilde: f64) -> Result<RateBound> {
    let lp = check_p(p)?;
    let CovarianceModel::LogDecay { nu, c } = CovarianceModel::log_decay(nu, c)? else {
        unreachable!()
    };
    if !(c_tilde > 0.0) {
        return Err(Error::domain(format!("guard constant must be positive, got {c_tilde}")));
    }
    let acf = Acf::LogDecay { nu, c };
    let tau = (nu * lp).powf(-nu / (nu + 1.0));
    let mut b = capstone_bound(p, tau, stationary_count(&acf, p, tau))?;
    b.model_tag = acf.tag();
    b.guard_ok = Some(lp >= c_tilde.ln() + tau.powf(-1.0 / nu));
    Ok(b)
}

/// Number of `τ` grid points tried for models without a closed-form optimum.
const TAU_GRID: usize = 199;

/// The capstone bound with `τ(p)` chosen for the model.
///
/// Iid uses `N = 1, τ = 0`; stationary models use their closed-form `τ(p)`;
/// explicit matrices minimize over a grid of `τ`.
pub fn capstone_auto(model: &CovarianceModel, p: f64) -> Result<RateBound> {
    check_p(p)?;
    let mut b = if model.is_iid() {
        capstone_bound(p, 0.0, 1.0)?
    } else {
        match model.acf() {
            Some(Acf::PowerLaw { gamma, c }) => optimize_tau_powerlaw(p, gamma, c)?,
            Some(Acf::LogDecay { nu, c }) => optimize_tau_logdecay(p, nu, c, 1.0)?,
            None => {
                let pi = p as usize;
                if pi as f64 != p {
                    return Err(Error::domain("explicit models need an integer p"));
                }
                let m = materialize(model, pi)?;
                let mut best: Option<RateBound> = None;
                for k in 1..=TAU_GRID {
                    let tau = k as f64 / (TAU_GRID + 1) as f64;
                    let cand = capstone_bound(p, tau, n_tau(&m, tau)? as f64)?;
                    if best.as_ref().is_none_or(|b| cand.total < b.total) {
                        best = Some(cand);
                    }
                }
                best.expect("nonempty grid")
            }
        }
    };
    b.model_tag = model.tag();
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Identity,
    Exp,
    Square,
    AbsPower,
    SignedPower,
    ExpAbsPower,
    ExpSignedPower,
}

/// The entrywise function `f` applied to a Gaussian array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    pub kind: TransformKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl Default for TransformSpec {
    fn default() -> Self {
        TransformSpec::IDENTITY
    }
}

impl TransformSpec {
    pub const IDENTITY: TransformSpec = TransformSpec { kind: TransformKind::Identity, lambda: None };
    pub const EXP: TransformSpec = TransformSpec { kind: TransformKind::Exp, lambda: None };
    pub const SQUARE: TransformSpec = TransformSpec { kind: TransformKind::Square, lambda: None };

    pub fn with_lambda(kind: TransformKind, lambda: f64) -> Result<Self> {
        let s = TransformSpec { kind, lambda: Some(lambda) };
        s.validate()?;
        Ok(s)
    }

    fn needs_lambda(&self) -> bool {
        matches!(
            self.kind,
            TransformKind::AbsPower | TransformKind::SignedPower | TransformKind::ExpAbsPower | TransformKind::ExpSignedPower
        )
    }

    /// Exponent, 1 for kinds without one (2 for `Square`).
    pub fn lambda(&self) -> f64 {
        match self.kind {
            TransformKind::Square => 2.0,
            _ if self.needs_lambda() => self.lambda.unwrap_or(f64::NAN),
            _ => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.needs_lambda() {
            let l = self
                .lambda
                .ok_or_else(|| Error::Config(format!("transform {:?} requires `lambda`", self.kind)))?;
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Inadmissible(format!("lambda must be positive, got {l}")));
            }
            if self.is_exp() && l >= 2.0 {
                return Err(Error::Inadmissible(format!(
                    "exponential power transforms need lambda < 2 (got {l}); heavier ones are not relatively stable"
                )));
            }
        } else if self.lambda.is_some() {
            return Err(Error::Config(format!("transform {:?} takes no `lambda`", self.kind)));
        }
        Ok(())
    }

    pub fn is_exp(&self) -> bool {
        matches!(self.kind, TransformKind::Exp | TransformKind::ExpAbsPower | TransformKind::ExpSignedPower)
    }

    /// Even transforms, for which the maximum is attained at the max or min.
    pub fn is_even(&self) -> bool {
        matches!(self.kind, TransformKind::Square | TransformKind::AbsPower | TransformKind::ExpAbsPower)
    }

    pub fn is_identity(&self) -> bool {
        self.kind == TransformKind::Identity
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        let l = self.lambda();
        match self.kind {
            TransformKind::Identity => x,
            TransformKind::Exp => x.exp(),
            TransformKind::Square => x * x,
            TransformKind::AbsPower => x.abs().powf(l),
            TransformKind::SignedPower => x.signum() * x.abs().powf(l),
            TransformKind::ExpAbsPower => x.abs().powf(l).exp(),
            TransformKind::ExpSignedPower => (x.signum() * x.abs().powf(l)).exp(),
        }
    }

    /// `ln |f′(x) / f(u)|` for `x, u > 0`, kept in log space so exponential
    /// kinds do not overflow.
    fn ln_derivative_ratio(&self, x: f64, u: f64) -> f64 {
        let l = self.lambda();
        match self.kind {
            TransformKind::Identity => -u.ln(),
            TransformKind::Exp => x - u,
            TransformKind::Square | TransformKind::AbsPower | TransformKind::SignedPower => {
                l.ln() + (l - 1.0) * x.ln() - l * u.ln()
            }
            TransformKind::ExpAbsPower | TransformKind::ExpSignedPower => {
                l.ln() + (l - 1.0) * x.ln() + x.powf(l) - u.powf(l)
            }
        }
    }

    pub fn label(&self) -> String {
        match self.lambda {
            Some(l) => format!("{}({l})", self.kind_name()),
            None => self.kind_name().to_string(),
        }
    }

    fn kind_name(&self) -> &'static str {
        match self.kind {
            TransformKind::Identity => "identity",
            TransformKind::Exp => "exp",
            TransformKind::Square => "square",
            TransformKind::AbsPower => "abs_power",
            TransformKind::SignedPower => "signed_power",
            TransformKind::ExpAbsPower => "exp_abs_power",
            TransformKind::ExpSignedPower => "exp_signed_power",
        }
    }
}

/// Smallest `p` for power transforms, keeping `u_p(1 ± δ)` away from 0.
pub const POWER_MIN_P: f64 = 8.0;

/// `d_p* = u_p δ_p max{|f′(u_p(1−δ_p))|, |f′(u_p(1+δ_p))|} / |f(u_p)|`.
pub fn transform_rate(spec: &TransformSpec, p: f64, delta_p: f64) -> Result<f64> {
    spec.validate()?;
    check_p(p)?;
    if !(delta_p > 0.0 && delta_p < 1.0) {
        return Err(Error::domain(format!("delta_p must lie in (0, 1), got {delta_p}")));
    }
    if spec.is_identity() {
        return Ok(delta_p);
    }
    if matches!(spec.kind, TransformKind::AbsPower | TransformKind::SignedPower) && p < POWER_MIN_P {
        return Err(Error::Inadmissible(format!(
            "power transforms need p >= {POWER_MIN_P}, got {p}"
        )));
    }
    let u = u_at(p)?;
    if spec.is_exp() {
        let g = u.powf(spec.lambda()) * delta_p;
        if g >= 1.0 {
            return Err(Error::Inadmissible(format!(
                "u_p^lambda * delta_p = {g} must be below 1"
            )));
        }
    }
    let lo = spec.ln_derivative_ratio(u * (1.0 - delta_p), u);
    let hi = spec.ln_derivative_ratio(u * (1.0 + delta_p), u);
    Ok(u * delta_p * lo.max(hi).exp())
}

/// The closed forms quoted for each family, for comparison with the
/// literal rule in [`transform_rate`].
pub fn transform_rate_closed_form(spec: &TransformSpec, u: f64, delta: f64) -> f64 {
    let l = spec.lambda();
    let side = if l >= 1.0 { 1.0 + delta } else { 1.0 - delta };
    match spec.kind {
        TransformKind::Identity => delta,
        TransformKind::Exp => u * delta * (u * delta).exp(),
        TransformKind::Square => 2.0 * delta * (1.0 + delta),
        TransformKind::AbsPower | TransformKind::SignedPower => l * delta * side.powf(l - 1.0),
        TransformKind::ExpAbsPower | TransformKind::ExpSignedPower => {
            let ul = u.powf(l);
            l * ul * delta * side.powf(l - 1.0) * (ul * (side.powf(l) - 1.0)).exp()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LognormalCheck {
    pub nu: f64,
    /// True iff `ν > 1/3`.
    pub urs: bool,
    /// Constant in the implied bound on the underlying Gaussian covariances.
    pub gaussian_c: f64,
}

/// Whether a lognormal array with `|Cov(η)| ≤ c (log lag)^{−ν}` is URS.
///
/// `Cov(η) = e (e^x − 1)` with `x = Cov(ε)` and `|x| ≤ e |e^x − 1|` on
/// `[−1, 1]`, so the Gaussian covariances obey the same bound with constant
/// `c`.
pub fn lognormal_urs_check(nu: f64, c: f64) -> Result<LognormalCheck> {
    if !(nu > 0.0) {
        return Err(Error::domain(format!("nu must be positive, got {nu}")));
    }
    if !(c > 0.0) {
        return Err(Error::domain(format!("c must be positive, got {c}")));
    }
    Ok(LognormalCheck { nu, urs: nu > 1.0 / 3.0, gaussian_c: c })
}

/// `g(β) = (1 + √(1−β))²`, the support-recovery boundary.
pub fn g_beta(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    let s = 1.0 + (1.0 - beta).sqrt();
    Ok(s * s)
}

/// One row of a rate table: the capstone bound at `p` and `d_p*` for each
/// transform evaluated at `δ_p = total`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub bound: RateBound,
    /// `(label, d_star)`; `None` where the transform is inadmissible.
    pub d_star: Vec<(String, Option<f64>)>,
}

pub fn rate_table(model: &CovarianceModel, p_grid: &[f64], transforms: &[TransformSpec]) -> Result<Vec<RateRow>> {
    p_grid
        .iter()
        .map(|&p| {
            let bound = capstone_auto(model, p)?;
            let d_star = transforms
                .iter()
                .map(|t| {
                    let d = if bound.total < 1.0 { transform_rate(t, p, bound.total).ok() } else { None };
                    (t.label(), d)
                })
                .collect();
            Ok(RateRow { bound, d_star })
        })
        .collect()
}

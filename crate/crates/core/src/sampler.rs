//! Exact sampling of Gaussian array rows.
//!
//! Three engines are used:
//! - iid models draw independent normals;
//! - stationary models, permuted or not, use circulant embedding and an FFT,
//!   costing `O(p log p)` per row;
//! - everything else uses a Cholesky factor of the materialized matrix.
//!
//! A row depends only on `(seed, cell, replication)`, so rows may be drawn in
//! any order and on any number of threads.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::covariance::{materialize, Acf, Base, CholeskyFactor, CovarianceModel, MAX_MATERIALIZE_DIM};
use crate::error::{Error, Result};
use crate::rates::TransformSpec;
use crate::rng::{self, Domain};

/// Embedding eigenvalues down to this value are clipped to 0.
pub const EMBEDDING_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    IidFast,
    CholeskyGeneral,
    CirculantFft,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::IidFast => "iid_fast",
            Method::CholeskyGeneral => "cholesky_general",
            Method::CirculantFft => "circulant_fft",
        }
    }
}

struct Circulant {
    m: usize,
    /// `√(λ_k / m)` for the embedding eigenvalues `λ_k`.
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Circulant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Circulant").field("m", &self.m).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Iid,
    Cholesky(Arc<CholeskyFactor>),
    Circulant(Arc<Circulant>),
}

/// A prepared sampler; immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct SamplerState {
    p: usize,
    seed: u64,
    cell: u64,
    method: Method,
    engine: Engine,
    perm: Option<Arc<Vec<usize>>>,
    /// Total magnitude of negative embedding eigenvalues clipped to 0.
    pub clipped_mass: f64,
    /// Human-readable notes (fallbacks, repairs) for stderr and manifests.
    pub notices: Vec<String>,
}

/// Prepares a sampler choosing the engine from the model.
pub fn prepare(model: &CovarianceModel, p: usize, seed: u64, cell: u64) -> Result<SamplerState> {
    prepare_with(model, p, seed, cell, None)
}

/// Like [`prepare`], optionally forcing an engine. Forcing the FFT engine on
/// a non-stationary model is an error; forcing Cholesky always works when the
/// matrix fits.
pub fn prepare_with(
    model: &CovarianceModel,
    p: usize,
    seed: u64,
    cell: u64,
    force: Option<Method>,
) -> Result<SamplerState> {
    let law = model.at(p)?;
    let perm = law.permutation().map(|v| Arc::new(v.to_vec()));
    let mut state = SamplerState {
        p,
        seed,
        cell,
        method: Method::IidFast,
        engine: Engine::Iid,
        perm,
        clipped_mass: 0.0,
        notices: Vec::new(),
    };
    let method = match (force, law.base()) {
        (Some(m), _) => m,
        (None, Base::Iid) => Method::IidFast,
        (None, Base::Stationary(_)) => Method::CirculantFft,
        (None, Base::Explicit(_)) => Method::CholeskyGeneral,
    };
    match (method, law.base()) {
        (Method::IidFast, Base::Iid) => {
            // Permuting iid coordinates changes nothing.
            state.perm = None;
        }
        (Method::IidFast, _) => {
            return Err(Error::Config(format!("iid sampling requested for non-iid model {}", model.tag())));
        }
        (Method::CirculantFft, Base::Stationary(acf)) => match circulant(acf, p)? {
            Ok((c, clipped)) => {
                state.method = Method::CirculantFft;
                state.engine = Engine::Circulant(Arc::new(c));
                state.clipped_mass = clipped;
                if clipped > 0.0 {
                    state.notices.push(format!("circulant embedding: clipped negative eigenvalue mass {clipped:e}"));
                }
            }
            Err(min) => {
                state.notices.push(format!(
                    "circulant embedding has eigenvalue {min:e} below -{EMBEDDING_TOLERANCE:e}; falling back to Cholesky"
                ));
                set_cholesky(&mut state, model)?;
            }
        },
        (Method::CirculantFft, _) => {
            return Err(Error::Config(format!("FFT sampling needs a stationary model, got {}", model.tag())));
        }
        (Method::CholeskyGeneral, _) => set_cholesky(&mut state, model)?,
    }
    Ok(state)
}

fn set_cholesky(state: &mut SamplerState, model: &CovarianceModel) -> Result<()> {
    if state.p > MAX_MATERIALIZE_DIM {
        return Err(Error::domain(format!(
            "Cholesky sampling is capped at p = {MAX_MATERIALIZE_DIM}, got {}",
            state.p
        )));
    }
    let m = materialize(model, state.p)?;
    if m.repaired {
        state.notices.push(format!("covariance repaired (max entry change {:e})", m.max_repair_change));
    }
    state.method = Method::CholeskyGeneral;
    state.engine = Engine::Cholesky(Arc::new(m.cholesky()?));
    // The materialized matrix already carries the permutation.
    state.perm = None;
    Ok(())
}

/// Builds the circulant embedding of size `m = 2^⌈log2 2p⌉`. Returns the
/// most negative eigenvalue instead when it is below tolerance.
fn circulant(acf: &Acf, p: usize) -> Result<std::result::Result<(Circulant, f64), f64>> {
    let m = (2 * p).next_power_of_two().max(2);
    let fft = FftPlanner::new().plan_fft_forward(m);
    let mut c: Vec<Complex<f64>> = (0..m).map(|k| Complex::new(acf.rho(k.min(m - k) as u64), 0.0)).collect();
    fft.process(&mut c);
    let min = c.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if min < -EMBEDDING_TOLERANCE {
        return Ok(Err(min));
    }
    let mut clipped = 0.0;
    let scale = c
        .iter()
        .map(|z| {
            if z.re < 0.0 {
                clipped -= z.re;
                0.0
            } else {
                (z.re / m as f64).sqrt()
            }
        })
        .collect();
    Ok(Ok((Circulant { m, scale, fft }, clipped)))
}

impl SamplerState {
    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cell(&self) -> u64 {
        self.cell
    }

    /// Embedding length for the FFT engine.
    pub fn embedding_size(&self) -> Option<usize> {
        match &self.engine {
            Engine::Circulant(c) => Some(c.m),
            _ => None,
        }
    }

    /// Row number `replication`, identical on every call.
    pub fn sample_row(&self, replication: u64) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        self.sample_row_into(replication, &mut out);
        out
    }

    pub fn sample_row_into(&self, replication: u64, out: &mut [f64]) {
        assert_eq!(out.len(), self.p, "output buffer has the wrong length");
        let mut rng = rng::stream(self.seed, self.cell, Domain::Noise, replication);
        match &self.engine {
            Engine::Iid => rng::fill_normal(&mut rng, out),
            Engine::Cholesky(l) => {
                let mut z = vec![0.0; self.p];
                rng::fill_normal(&mut rng, &mut z);
                l.mul_vec(&z, out);
            }
            Engine::Circulant(c) => {
                let mut w: Vec<Complex<f64>> = c
                    .scale
                    .iter()
                    .map(|&s| {
                        let a = rng::standard_normal(&mut rng);
                        let b = rng::standard_normal(&mut rng);
                        Complex::new(s * a, s * b)
                    })
                    .collect();
                c.fft.process(&mut w);
                match &self.perm {
                    Some(pi) => out.iter_mut().zip(pi.iter()).for_each(|(o, &k)| *o = w[k].re),
                    None => out.iter_mut().zip(&w).for_each(|(o, z)| *o = z.re),
                }
            }
        }
    }
}

/// `f` applied entrywise.
pub fn apply_transform(x: &[f64], spec: &TransformSpec) -> Vec<f64> {
    x.iter().map(|&v| spec.apply(v)).collect()
}

/// Largest entry, propagating NaN as an error-free `NaN`.
pub fn max_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `max(f(x_i))` without allocating.
pub fn transformed_max(x: &[f64], spec: &TransformSpec) -> f64 {
    if spec.is_identity() {
        return max_of(x);
    }
    x.iter().map(|&v| spec.apply(v)).fold(f64::NEG_INFINITY, f64::max)
}

/// `max(x) / norm`.
pub fn normalized_max(x: &[f64], norm: f64) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::domain("normalized_max of an empty vector"));
    }
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::domain(format!("normalizer must be finite and nonzero, got {norm}")));
    }
    Ok(max_of(x) / norm)
}

//! Covariance models for Gaussian triangular arrays.
//!
//! A [`CovarianceModel`] is a recipe that can be evaluated at any dimension.
//! [`CovarianceModel::at`] fixes the dimension and resolves permutations,
//! giving a [`Realized`] law whose entries can be read one at a time or
//! written out as a [`CovarianceMatrix`].
//!
//! Indices are 0-based throughout.

use std::io::BufRead;
use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Largest dimension that [`materialize`] will allocate (512 MiB of entries).
pub const MAX_MATERIALIZE_DIM: usize = 8192;

/// Negative eigenvalues down to this magnitude are repaired, not rejected.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Above this dimension the minimum eigenvalue is estimated from a Cholesky
/// factor by shift-invert Lanczos instead of a full eigendecomposition.
const EXACT_EIGEN_MAX_DIM: usize = 1024;

const UNIT_TOL: f64 = 1e-12;

const LANCZOS_STEPS: usize = 120;

/// Autocovariance of a stationary model, as a function of the lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Acf {
    /// `ρ(k) = c (1 + k)^{-γ}` for `k ≥ 1`.
    PowerLaw { gamma: f64, c: f64 },
    /// `ρ(k) = c (1 + ln(1 + k))^{-ν}` for `k ≥ 1`.
    LogDecay { nu: f64, c: f64 },
}

impl Acf {
    #[inline]
    pub fn rho(&self, k: u64) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.rho_real(k as f64)
        }
    }

    #[inline]
    fn rho_real(&self, k: f64) -> f64 {
        match *self {
            Acf::PowerLaw { gamma, c } => c * (1.0 + k).powf(-gamma),
            Acf::LogDecay { nu, c } => c * (1.0 + k.ln_1p()).powf(-nu),
        }
    }

    /// Real `b` such that `ρ(k) > τ` exactly when `k < b`, up to rounding.
    fn crossing(&self, tau: f64) -> f64 {
        match *self {
            Acf::PowerLaw { gamma, c } => (c / tau).powf(1.0 / gamma) - 1.0,
            Acf::LogDecay { nu, c } => ((c / tau).powf(1.0 / nu) - 1.0).exp() - 1.0,
        }
    }

    /// Number of lags `k ∈ [1, max_lag]` with `ρ(k) > τ`.
    ///
    /// Starts from the closed-form crossing point and then walks to the exact
    /// boundary on the formula values, so the answer agrees with a direct scan.
    pub fn lags_above(&self, tau: f64, max_lag: u64) -> u64 {
        let b = self.crossing(tau);
        let mut k = if b.is_nan() || b <= 1.0 {
            0
        } else if b >= max_lag as f64 {
            max_lag
        } else {
            (b.ceil() as u64).saturating_sub(1).min(max_lag)
        };
        while k < max_lag && self.rho(k + 1) > tau {
            k += 1;
        }
        while k > 0 && self.rho(k) <= tau {
            k -= 1;
        }
        k
    }

    pub fn tag(&self) -> String {
        match *self {
            Acf::PowerLaw { gamma, c } => format!("powerlaw(gamma={gamma},c={c})"),
            Acf::LogDecay { nu, c } => format!("logdecay(nu={nu},c={c},form=log1p)"),
        }
    }
}

/// How a permuted model reorders coordinates at a given dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PermutationRepr", into = "PermutationRepr")]
pub enum Permutation {
    Identity,
    /// `π(i) = indices[i]`; only usable at `p = indices.len()`.
    Indices(Arc<Vec<usize>>),
    /// A uniformly random permutation of `[p]` drawn from `seed`.
    Shuffle { seed: u64 },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PermutationRepr {
    Named(String),
    Indices(Vec<usize>),
    Shuffle { shuffle: u64 },
}

impl TryFrom<PermutationRepr> for Permutation {
    type Error = String;
    fn try_from(r: PermutationRepr) -> std::result::Result<Self, String> {
        match r {
            PermutationRepr::Named(s) if s == "identity" => Ok(Permutation::Identity),
            PermutationRepr::Named(s) => Err(format!("unknown permutation `{s}`")),
            PermutationRepr::Indices(v) => {
                check_bijection(&v).map_err(|e| e.to_string())?;
                Ok(Permutation::Indices(Arc::new(v)))
            }
            PermutationRepr::Shuffle { shuffle } => Ok(Permutation::Shuffle { seed: shuffle }),
        }
    }
}

impl From<Permutation> for PermutationRepr {
    fn from(p: Permutation) -> Self {
        match p {
            Permutation::Identity => PermutationRepr::Named("identity".into()),
            Permutation::Indices(v) => PermutationRepr::Indices(v.as_ref().clone()),
            Permutation::Shuffle { seed } => PermutationRepr::Shuffle { shuffle: seed },
        }
    }
}

fn check_bijection(v: &[usize]) -> Result<()> {
    let mut seen = vec![false; v.len()];
    for &x in v {
        if x >= v.len() || std::mem::replace(&mut seen[x], true) {
            return Err(Error::domain(format!(
                "permutation of length {} is not a bijection on 0..{}",
                v.len(),
                v.len()
            )));
        }
    }
    Ok(())
}

impl Permutation {
    fn resolve(&self, p: usize) -> Result<Option<Vec<usize>>> {
        match self {
            Permutation::Identity => Ok(None),
            Permutation::Indices(v) => {
                if v.len() != p {
                    return Err(Error::domain(format!(
                        "permutation has length {} but p = {p}",
                        v.len()
                    )));
                }
                Ok(Some(v.as_ref().clone()))
            }
            Permutation::Shuffle { seed } => {
                let mut r = rng::stream(*seed, p as u64, Domain::Permutation, 0);
                Ok(Some(rng::shuffled_indices(&mut r, p)))
            }
        }
    }

    fn tag(&self) -> String {
        match self {
            Permutation::Identity => "identity".into(),
            Permutation::Indices(v) => format!("indices[{}]", v.len()),
            Permutation::Shuffle { seed } => format!("shuffle({seed})"),
        }
    }
}

/// A fixed symmetric matrix supplied by the user.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitMatrix {
    n: usize,
    data: Vec<f64>,
}

impl ExplicitMatrix {
    /// Row-major square matrix. Entries must be finite and symmetric; unit
    /// diagonal and `|entry| ≤ 1` are checked when the matrix is materialized.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(Error::model(format!(
                "explicit matrix needs {n}x{n} = {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::model(format!("non-finite entry at ({}, {})", k / n, k % n)));
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if (a - b).abs() > UNIT_TOL {
                    return Err(Error::model(format!("not symmetric at ({i}, {j}): {a} vs {b}")));
                }
            }
        }
        Ok(ExplicitMatrix { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Header-free, comma-separated, one row per line. Blank lines are skipped.
    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Config(format!("matrix csv line {}: {e}", lineno + 1)))?;
            rows.push(row);
        }
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Config(format!(
                "matrix csv is not square: row {} has {} entries, expected {n}",
                i + 1,
                r.len()
            )));
        }
        Self::new(n, rows.into_iter().flatten().collect())
    }
}

/// Dependence structure of a Gaussian triangular array.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceModel {
    Iid,
    PowerLaw { gamma: f64, c: f64 },
    LogDecay { nu: f64, c: f64 },
    /// `Cov(i, j) = inner(π(i), π(j))`.
    Permuted { permutation: Permutation, inner: Box<CovarianceModel> },
    Explicit(Arc<ExplicitMatrix>),
}

impl CovarianceModel {
    /// Power-law decay. `c` above 1 is capped at 1.
    pub fn power_law(gamma: f64, c: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::domain(format!("gamma must be positive, got {gamma}")));
        }
        Ok(CovarianceModel::PowerLaw { gamma, c: check_scale(c)? })
    }

    /// Logarithmic decay. `c` above 1 is capped at 1.
    pub fn log_decay(nu: f64, c: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::domain(format!("nu must be positive, got {nu}")));
        }
        Ok(CovarianceModel::LogDecay { nu, c: check_scale(c)? })
    }

    pub fn permuted(self, permutation: Permutation) -> Self {
        match permutation {
            Permutation::Identity => self,
            permutation => CovarianceModel::Permuted { permutation, inner: Box::new(self) },
        }
    }

    pub fn explicit(m: ExplicitMatrix) -> Self {
        CovarianceModel::Explicit(Arc::new(m))
    }

    /// The lag function when the model is stationary up to a permutation.
    pub fn acf(&self) -> Option<Acf> {
        match self {
            CovarianceModel::PowerLaw { gamma, c } => Some(Acf::PowerLaw { gamma: *gamma, c: *c }),
            CovarianceModel::LogDecay { nu, c } => Some(Acf::LogDecay { nu: *nu, c: *c }),
            CovarianceModel::Permuted { inner, .. } => inner.acf(),
            _ => None,
        }
    }

    /// True when the model reduces to independent coordinates.
    pub fn is_iid(&self) -> bool {
        match self {
            CovarianceModel::Iid => true,
            CovarianceModel::Permuted { inner, .. } => inner.is_iid(),
            _ => false,
        }
    }

    pub fn tag(&self) -> String {
        match self {
            CovarianceModel::Iid => "iid".into(),
            CovarianceModel::PowerLaw { gamma, c } => Acf::PowerLaw { gamma: *gamma, c: *c }.tag(),
            CovarianceModel::LogDecay { nu, c } => Acf::LogDecay { nu: *nu, c: *c }.tag(),
            CovarianceModel::Permuted { permutation, inner } => {
                format!("permuted({},{})", permutation.tag(), inner.tag())
            }
            CovarianceModel::Explicit(m) => format!("explicit({}x{})", m.n, m.n),
        }
    }

    /// Fixes the dimension and resolves any permutations.
    pub fn at(&self, p: usize) -> Result<Realized> {
        if p == 0 {
            return Err(Error::domain("dimension p must be at least 1"));
        }
        let (base, perm) = self.resolve(p)?;
        Ok(Realized { p, base, perm: perm.map(Arc::new) })
    }

    fn resolve(&self, p: usize) -> Result<(Base, Option<Vec<usize>>)> {
        Ok(match self {
            CovarianceModel::Iid => (Base::Iid, None),
            CovarianceModel::PowerLaw { .. } | CovarianceModel::LogDecay { .. } => {
                (Base::Stationary(self.acf().expect("stationary")), None)
            }
            CovarianceModel::Explicit(m) => {
                if m.n != p {
                    return Err(Error::domain(format!(
                        "explicit matrix is {}x{} but p = {p}",
                        m.n, m.n
                    )));
                }
                (Base::Explicit(m.clone()), None)
            }
            CovarianceModel::Permuted { permutation, inner } => {
                let (base, sigma) = inner.resolve(p)?;
                let outer = permutation.resolve(p)?;
                let perm = match (outer, sigma) {
                    (None, s) => s,
                    (Some(pi), None) => Some(pi),
                    (Some(pi), Some(s)) => Some(pi.iter().map(|&k| s[k]).collect()),
                };
                (base, perm)
            }
        })
    }
}

fn check_scale(c: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::domain(format!("scale c must be positive, got {c}")));
    }
    Ok(c.min(1.0))
}

#[derive(Debug, Clone)]
pub enum Base {
    Iid,
    Stationary(Acf),
    Explicit(Arc<ExplicitMatrix>),
}

/// A covariance model at a fixed dimension with its permutation resolved.
#[derive(Debug, Clone)]
pub struct Realized {
    p: usize,
    base: Base,
    perm: Option<Arc<Vec<usize>>>,
}

impl Realized {
    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn base(&self) -> &Base {
        &self.base
    }

    /// `π` as a lookup table, or `None` for the identity.
    pub fn permutation(&self) -> Option<&[usize]> {
        self.perm.as_deref().map(|v| v.as_slice())
    }

    #[inline]
    fn index(&self, i: usize) -> usize {
        match &self.perm {
            Some(v) => v[i],
            None => i,
        }
    }

    /// Covariance of coordinates `i` and `j`.
    pub fn cov(&self, i: usize, j: usize) -> Result<f64> {
        if i >= self.p || j >= self.p {
            return Err(Error::domain(format!("index ({i}, {j}) out of range for p = {}", self.p)));
        }
        Ok(self.cov_unchecked(i, j))
    }

    #[inline]
    pub(crate) fn cov_unchecked(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.index(i), self.index(j));
        match &self.base {
            Base::Iid => {
                if a == b {
                    1.0
                } else {
                    0.0
                }
            }
            Base::Stationary(acf) => acf.rho(a.abs_diff(b) as u64),
            Base::Explicit(m) => m.get(a, b),
        }
    }
}

/// Covariance of coordinates `i` and `j` (0-based) of `model` at dimension `p`.
pub fn cov_at(model: &CovarianceModel, i: usize, j: usize, p: usize) -> Result<f64> {
    model.at(p)?.cov(i, j)
}

/// A validated correlation matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceMatrix {
    pub p: usize,
    /// Row-major entries.
    #[serde(skip)]
    pub entries: Vec<f64>,
    pub min_eigenvalue: f64,
    pub repaired: bool,
    /// Largest entrywise change made by repair, 0 if none.
    pub max_repair_change: f64,
}

impl CovarianceMatrix {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.p + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.p..(i + 1) * self.p]
    }

    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        cholesky(self.p, &self.entries)
    }
}

/// Writes the covariance of `model` at dimension `p` and validates it.
///
/// Matrices with smallest eigenvalue in `[-1e-8, 0)` are repaired by
/// [`psd_repair`]; anything more negative is rejected.
pub fn materialize(model: &CovarianceModel, p: usize) -> Result<CovarianceMatrix> {
    if p == 0 {
        return Err(Error::domain("dimension p must be at least 1"));
    }
    if p > MAX_MATERIALIZE_DIM {
        return Err(Error::domain(format!(
            "p = {p} exceeds the materialization cap {MAX_MATERIALIZE_DIM}"
        )));
    }
    let law = model.at(p)?;
    let mut entries = vec![0.0; p * p];
    match law.base() {
        Base::Stationary(acf) => {
            let lags: Vec<f64> = (0..p as u64).map(|k| acf.rho(k)).collect();
            let idx: Vec<usize> = (0..p).map(|i| law.index(i)).collect();
            for (i, row) in entries.chunks_mut(p).enumerate() {
                for (j, e) in row.iter_mut().enumerate() {
                    *e = lags[idx[i].abs_diff(idx[j])];
                }
            }
        }
        _ => {
            for (i, row) in entries.chunks_mut(p).enumerate() {
                for (j, e) in row.iter_mut().enumerate() {
                    *e = law.cov_unchecked(i, j);
                }
            }
        }
    }
    if let Base::Explicit(_) = law.base() {
        for i in 0..p {
            let d = entries[i * p + i];
            if (d - 1.0).abs() > UNIT_TOL {
                return Err(Error::model(format!("diagonal entry ({i}, {i}) is {d}, expected 1")));
            }
            entries[i * p + i] = 1.0;
        }
        if let Some(k) = entries.iter().position(|x| x.abs() > 1.0 + UNIT_TOL) {
            return Err(Error::model(format!(
                "entry ({}, {}) = {} violates |cov| <= 1",
                k / p,
                k % p,
                entries[k]
            )));
        }
    }
    let lambda = min_eigenvalue(p, &entries);
    let m = CovarianceMatrix { p, entries, min_eigenvalue: lambda, repaired: false, max_repair_change: 0.0 };
    if lambda >= 0.0 {
        Ok(m)
    } else if lambda >= -PSD_TOLERANCE {
        psd_repair(&m, PSD_TOLERANCE)
    } else {
        Err(Error::ModelInvalid {
            reason: format!("{} is indefinite at p = {p}: min eigenvalue {lambda:e}", model.tag()),
            min_eigenvalue: Some(lambda),
        })
    }
}

/// Smallest eigenvalue of a symmetric row-major matrix.
///
/// Exact up to `EXACT_EIGEN_MAX_DIM`. Beyond that, a successful Cholesky
/// factorization certifies positivity and shift-invert Lanczos gives an
/// estimate from above; a failed one falls back to the full decomposition.
pub fn min_eigenvalue(p: usize, entries: &[f64]) -> f64 {
    if p > EXACT_EIGEN_MAX_DIM {
        if let Ok(l) = cholesky(p, entries) {
            return lanczos_min(p, &l);
        }
    }
    DMatrix::from_row_slice(p, p, entries)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn lanczos_min(p: usize, l: &CholeskyFactor) -> f64 {
    // Lanczos on Σ^{-1} with full reorthogonalization; the largest Ritz value
    // of the inverse converges quickly even when the bottom of the spectrum of
    // Σ is crowded.
    let steps = p.min(LANCZOS_STEPS);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut q = vec![0.0; p];
    rng::fill_normal(&mut rng::stream(0, p as u64, Domain::Matrix, 0), &mut q);
    let n0 = norm(&q);
    q.iter_mut().for_each(|v| *v /= n0);
    let mut w = vec![0.0; p];
    for _ in 0..steps {
        l.solve_in_place(&q, &mut w);
        let a = dot(&w, &q);
        alpha.push(a);
        basis.push(q.clone());
        for _ in 0..2 {
            for b in &basis {
                let h = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= h * y);
            }
        }
        let b = norm(&w);
        if b <= 1e-12 * a.abs() {
            break;
        }
        beta.push(b);
        q.iter_mut().zip(&w).for_each(|(x, y)| *x = y / b);
    }
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i.abs_diff(j) == 1 {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    let theta = t.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    1.0 / theta
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Clips negative eigenvalues and renormalizes to unit diagonal.
///
/// A positive semidefinite input is returned unchanged. Clipped eigenvalues
/// are lifted to a small positive floor so the result factors by Cholesky.
pub fn psd_repair(matrix: &CovarianceMatrix, tol: f64) -> Result<CovarianceMatrix> {
    let p = matrix.p;
    let a = DMatrix::from_row_slice(p, p, &matrix.entries);
    let eig = a.symmetric_eigen();
    let lambda_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if lambda_min >= 0.0 {
        return Ok(CovarianceMatrix { min_eigenvalue: lambda_min, ..matrix.clone() });
    }
    if lambda_min < -tol {
        return Err(Error::ModelInvalid {
            reason: format!("min eigenvalue {lambda_min:e} is below the repair tolerance -{tol:e}"),
            min_eigenvalue: Some(lambda_min),
        });
    }
    let floor = 1e-3 * tol;
    let clipped = eig.eigenvalues.map(|l| l.max(floor));
    let v = &eig.eigenvectors;
    let b = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    let d: Vec<f64> = (0..p).map(|i| b[(i, i)].sqrt()).collect();
    let mut entries = vec![0.0; p * p];
    let mut max_change = 0.0f64;
    for i in 0..p {
        for j in 0..p {
            let e = if i == j {
                1.0
            } else {
                0.5 * (b[(i, j)] + b[(j, i)]) / (d[i] * d[j])
            };
            entries[i * p + j] = e;
            max_change = max_change.max((e - matrix.entries[i * p + j]).abs());
        }
    }
    let min_eigenvalue = min_eigenvalue(p, &entries);
    Ok(CovarianceMatrix {
        p,
        entries,
        min_eigenvalue,
        repaired: true,
        max_repair_change: max_change.max(matrix.max_repair_change),
    })
}

/// Lower-triangular Cholesky factor in packed row-major storage.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    data: Vec<f64>,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        let off = i * (i + 1) / 2;
        &self.data[off..off + i + 1]
    }

    /// `out = L z`.
    pub fn mul_vec(&self, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = dot(self.row(i), &z[..=i]);
        }
    }

    /// `out = (L Lᵀ)^{-1} b`.
    fn solve_in_place(&self, b: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let r = self.row(i);
            out[i] = (b[i] - dot(&r[..i], &out[..i])) / r[i];
        }
        for i in (0..n).rev() {
            out[i] /= self.row(i)[i];
            let xi = out[i];
            for (k, o) in out.iter_mut().enumerate().take(i) {
                *o -= self.row(i)[k] * xi;
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, ra) = a.split_at(a.len() - a.len() % 4);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Cholesky factorization of a symmetric positive definite row-major matrix.
pub fn cholesky(n: usize, a: &[f64]) -> Result<CholeskyFactor> {
    let mut data = vec![0.0; n * (n + 1) / 2];
    for i in 0..n {
        let off_i = i * (i + 1) / 2;
        for j in 0..=i {
            let off_j = j * (j + 1) / 2;
            let s = a[i * n + j] - dot(&data[off_i..off_i + j], &data[off_j..off_j + j]);
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::ModelInvalid {
                        reason: format!("Cholesky factorization failed at pivot {i} (value {s:e})"),
                        min_eigenvalue: None,
                    });
                }
                data[off_i + i] = s.sqrt();
            } else {
                data[off_i + j] = s / data[off_j + j];
            }
        }
    }
    Ok(CholeskyFactor { n, data })
}

/// Serializable model descriptor used by configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default = "identity", skip_serializing_if = "is_identity")]
    pub permutation: Permutation,
    /// CSV file for explicit matrices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<PathBuf>,
}

fn identity() -> Permutation {
    Permutation::Identity
}

fn is_identity(p: &Permutation) -> bool {
    *p == Permutation::Identity
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Iid,
    Powerlaw,
    Logdecay,
    Explicit,
}

impl ModelSpec {
    pub fn iid() -> Self {
        ModelSpec { kind: ModelKind::Iid, gamma: None, nu: None, c: None, permutation: Permutation::Identity, matrix: None }
    }

    pub fn power_law(gamma: f64) -> Self {
        ModelSpec { kind: ModelKind::Powerlaw, gamma: Some(gamma), ..Self::iid() }
    }

    pub fn log_decay(nu: f64) -> Self {
        ModelSpec { kind: ModelKind::Logdecay, nu: Some(nu), ..Self::iid() }
    }

    pub fn build(&self) -> Result<CovarianceModel> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("model kind {:?} requires `{name}`", self.kind)))
        };
        let c = self.c.unwrap_or(1.0);
        let base = match self.kind {
            ModelKind::Iid => CovarianceModel::Iid,
            ModelKind::Powerlaw => CovarianceModel::power_law(need(self.gamma, "gamma")?, c)?,
            ModelKind::Logdecay => CovarianceModel::log_decay(need(self.nu, "nu")?, c)?,
            ModelKind::Explicit => {
                let path = self
                    .matrix
                    .as_ref()
                    .ok_or_else(|| Error::Config("explicit model requires `matrix` (a CSV path)".into()))?;
                let f = std::fs::File::open(path)
                    .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
                CovarianceModel::explicit(ExplicitMatrix::from_csv(std::io::BufReader::new(f))?)
            }
        };
        Ok(base.permuted(self.permutation.clone()))
    }
}

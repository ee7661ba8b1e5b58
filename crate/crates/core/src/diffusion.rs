//! Graph filters, diffused signal synthesis and covariance-based template estimation.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::ShiftMatrix;
use crate::spectral::{eig_symmetric, SpectralTemplates, TemplateSource};

/// Tolerated negative eigenvalue of a covariance, relative to `max(1, |C|_max)`.
pub const PSD_TOL: f64 = 1e-8;

/// Polynomial graph filter `H = Σ_l h_l S^l`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    coeffs: Vec<f64>,
}

impl FilterSpec {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter("filter needs at least one coefficient".into()));
        }
        if coeffs.iter().any(|h| !h.is_finite()) {
            return Err(Error::InvalidParameter("filter coefficients must be finite".into()));
        }
        if coeffs.iter().all(|&h| h == 0.0) {
            return Err(Error::InvalidParameter("filter coefficients are all zero".into()));
        }
        Ok(FilterSpec { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Dense `H`, for analytic checks only.
    pub fn matrix(&self, s: &ShiftMatrix) -> DMatrix<f64> {
        let n = s.n();
        let mut h = DMatrix::zeros(n, n);
        let mut power = DMatrix::identity(n, n);
        for (l, &c) in self.coeffs.iter().enumerate() {
            if l > 0 {
                power = s.matrix() * power;
            }
            h += &power * c;
        }
        h
    }
}

/// `M` signals stored as the columns of an `N × M` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBatch {
    data: DMatrix<f64>,
}

impl SignalBatch {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(Error::InvalidParameter("signal batch is empty".into()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("signal batch has non-finite entries".into()));
        }
        Ok(SignalBatch { data })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn m(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }
}

/// `y = Σ_l h_l S^l x` via repeated shifting.
pub fn apply_filter(s: &ShiftMatrix, h: &FilterSpec, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != s.n() {
        return Err(Error::DimensionMismatch {
            expected: s.n(),
            found: x.len(),
        });
    }
    // Horner: y = h_0 x + S(h_1 x + S(h_2 x + ...))
    let mut y = x * *h.coeffs.last().unwrap();
    for &c in h.coeffs.iter().rev().skip(1) {
        y = s.matrix() * y + x * c;
    }
    Ok(y)
}

/// Column `m` is the filter applied to a standard normal seed drawn from ChaCha8 stream `m`
/// of the generator keyed by `seed`, so the batch does not depend on evaluation order.
pub fn synthesize_diffused(s: &ShiftMatrix, h: &FilterSpec, m: usize, seed: u64) -> Result<SignalBatch> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one signal".into()));
    }
    let n = s.n();
    let columns: Vec<DVector<f64>> = (0..m)
        .into_par_iter()
        .map(|col| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(col as u64);
            let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
            apply_filter(s, h, &z)
        })
        .collect::<Result<_>>()?;
    SignalBatch::new(DMatrix::from_columns(&columns))
}

/// `Ĉ = (1/M) Σ_m x_m x_mᵀ` (no mean removal; seeds are zero mean).
pub fn sample_covariance(batch: &SignalBatch) -> DMatrix<f64> {
    let x = batch.data();
    let mut c = x * x.transpose() / batch.m() as f64;
    // exact symmetry
    let ct = c.transpose();
    c += ct;
    c * 0.5
}

/// Eigenvectors of a covariance matrix, used as estimated templates.
pub fn templates_from_covariance(c: &DMatrix<f64>, eps: f64) -> Result<SpectralTemplates> {
    let eig = eig_symmetric(c)?;
    let min = eig.values.min();
    if min < -PSD_TOL * c.amax().max(1.0) {
        return Err(Error::NotPositiveSemidefinite(min));
    }
    let degenerate = eig.has_degenerate_gap(c.amax());
    Ok(SpectralTemplates::new(eig.vectors, TemplateSource::SampleCovariance)?
        .with_noise(eps)
        .with_degenerate(degenerate))
}

/// Greedy column matching by largest `|⟨â_i, b_j⟩|`. Returns, for each column of `estimate`,
/// the matched column of `reference` and the sign that aligns them.
pub fn match_columns(estimate: &DMatrix<f64>, reference: &DMatrix<f64>) -> Vec<(usize, f64)> {
    let n = estimate.ncols();
    let gram = estimate.transpose() * reference;
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    pairs.sort_by(|&(a, b), &(c, d)| gram[(c, d)].abs().total_cmp(&gram[(a, b)].abs()));
    let mut out = vec![(usize::MAX, 1.0); n];
    let mut used = vec![false; n];
    for (i, j) in pairs {
        if out[i].0 == usize::MAX && !used[j] {
            out[i] = (j, gram[(i, j)].signum());
            used[j] = true;
        }
    }
    out
}

//! Symmetric eigendecomposition, graph Fourier transform and the rank analysis of
//! squared-eigenvector matrices used by the identifiability tests.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ShiftKind;

/// Input symmetry tolerance, relative to `max(1, |m|_max)`.
pub const EIG_SYMMETRY_TOL: f64 = 1e-10;
/// Jacobi stops once the off-diagonal Frobenius norm falls below this fraction of `|S|_F`.
pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Consecutive eigenvalues closer than this fraction of `|S|_max` mark a degenerate spectrum.
pub const DEGENERATE_GAP: f64 = 1e-6;
/// Entries at or below this magnitude are ignored by the same-sign test.
pub const SIGN_TEST_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Ascending.
    pub values: DVector<f64>,
    /// Orthonormal columns, each normalized so its largest-magnitude entry is positive.
    pub vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.values) * self.vectors.transpose()
    }

    /// True when two consecutive eigenvalues are closer than `DEGENERATE_GAP * scale`.
    pub fn has_degenerate_gap(&self, scale: f64) -> bool {
        self.values
            .as_slice()
            .windows(2)
            .any(|w| (w[1] - w[0]).abs() < DEGENERATE_GAP * scale)
    }
}

/// Cyclic Jacobi eigensolver for real symmetric matrices.
pub fn eig_symmetric(m: &DMatrix<f64>) -> Result<EigenDecomposition> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let n = m.nrows();
    let scale = m.amax().max(1.0);
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > EIG_SYMMETRY_TOL * scale {
        return Err(Error::Asymmetric(asym));
    }

    // work on the exactly symmetrized copy
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let target = JACOBI_TOL * a.norm();

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > target {
        return Err(Error::NumericalFailure(format!(
            "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let mut vectors = v.select_columns(&order);
    for mut col in vectors.column_iter_mut() {
        let max = col.amax();
        let lead = col.iter().position(|x| x.abs() >= max - 1e-14).unwrap_or(0);
        if col[lead] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateSource {
    Exact,
    SampleCovariance,
    OperatorEigenbasis,
}

/// Eigenvector matrix of an unknown shift. Column signs are a free gauge.
#[derive(Debug, Clone)]
pub struct SpectralTemplates {
    v: DMatrix<f64>,
    noisy: bool,
    epsilon: f64,
    source: TemplateSource,
    degenerate: bool,
}

impl SpectralTemplates {
    /// Orthonormality tolerance (`|VᵀV − I|_max`) for exactly computed templates.
    pub const EXACT_TOL: f64 = 1e-9;
    /// Orthonormality tolerance for estimated templates.
    pub const ESTIMATED_TOL: f64 = 1e-6;

    pub fn new(v: DMatrix<f64>, source: TemplateSource) -> Result<Self> {
        if !v.is_square() {
            return Err(Error::DimensionMismatch {
                expected: v.nrows(),
                found: v.ncols(),
            });
        }
        let tol = match source {
            TemplateSource::Exact => Self::EXACT_TOL,
            _ => Self::ESTIMATED_TOL,
        };
        let err = (v.transpose() * &v - DMatrix::identity(v.ncols(), v.ncols())).amax();
        if err > tol {
            return Err(Error::Degenerate(format!(
                "template columns are not orthonormal (|VᵀV − I|_max = {err:e})"
            )));
        }
        Ok(SpectralTemplates {
            v,
            noisy: false,
            epsilon: 0.0,
            source,
            degenerate: false,
        })
    }

    pub fn exact(v: DMatrix<f64>) -> Result<Self> {
        Self::new(v, TemplateSource::Exact)
    }

    /// Templates are the eigenvectors of `s`.
    pub fn from_shift(s: &DMatrix<f64>) -> Result<Self> {
        let eig = eig_symmetric(s)?;
        let degenerate = eig.has_degenerate_gap(s.amax());
        Ok(Self::exact(eig.vectors)?.with_degenerate(degenerate))
    }

    pub fn with_noise(mut self, epsilon: f64) -> Self {
        self.noisy = epsilon > 0.0;
        self.epsilon = epsilon.max(0.0);
        self
    }

    pub fn with_degenerate(mut self, degenerate: bool) -> Self {
        self.degenerate = degenerate;
        self
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    pub fn is_noisy(&self) -> bool {
        self.noisy
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn source(&self) -> TemplateSource {
        self.source
    }

    /// Repeated eigenvalues were detected; the basis inside those eigenspaces is arbitrary.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Same templates with the columns permuted (`order[k]` is the old index of new column k).
    pub fn permuted(&self, order: &[usize]) -> Self {
        SpectralTemplates {
            v: self.v.select_columns(order),
            ..self.clone()
        }
    }

    /// Same templates with column `k` multiplied by `signs[k]`.
    pub fn sign_flipped(&self, signs: &[f64]) -> Self {
        let mut v = self.v.clone();
        for (k, &s) in signs.iter().enumerate() {
            v.column_mut(k).scale_mut(s);
        }
        SpectralTemplates { v, ..self.clone() }
    }
}

/// Graph Fourier transform `x̂ = Vᵀx`.
pub fn gft(templates: &SpectralTemplates, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != templates.n() {
        return Err(Error::DimensionMismatch {
            expected: templates.n(),
            found: x.len(),
        });
    }
    Ok(templates.v().tr_mul(x))
}

/// Frequency response `ĥ_k = Σ_l h_l λ_k^l`.
pub fn freq_response(h: &[f64], values: &DVector<f64>) -> DVector<f64> {
    values.map(|lambda| h.iter().rev().fold(0.0, |acc, &hl| acc * lambda + hl))
}

/// Index of the unique column whose significant entries all share one strict sign.
pub fn find_degree_eigenvector(templates: &SpectralTemplates) -> Result<usize> {
    let candidates: Vec<usize> = templates
        .v()
        .column_iter()
        .enumerate()
        .filter(|(_, col)| {
            let mut pos = false;
            let mut neg = false;
            for &x in col.iter() {
                if x > SIGN_TEST_TOL {
                    pos = true;
                } else if x < -SIGN_TEST_TOL {
                    neg = true;
                }
            }
            pos != neg
        })
        .map(|(k, _)| k)
        .collect();
    match candidates.as_slice() {
        [k] => Ok(*k),
        other => Err(Error::AmbiguousDegreeEigenvector(other.len())),
    }
}

/// Column order that moves the degree eigenvector to the front and keeps the rest in place.
pub fn degree_first_order(templates: &SpectralTemplates) -> Result<Vec<usize>> {
    let k = find_degree_eigenvector(templates)?;
    Ok(std::iter::once(k)
        .chain((0..templates.n()).filter(|&j| j != k))
        .collect())
}

/// Entrywise squares of the templates (`W = V⊙V`), or the modified matrix used by the
/// Laplacian modes: the degree eigenvector moves to column 0, which is then replaced by the
/// diagonal the shift must attain (all ones for the normalized Laplacian, `d` for the
/// combinatorial one).
pub fn build_w(templates: &SpectralTemplates, kind: ShiftKind, d: Option<&DVector<f64>>) -> Result<DMatrix<f64>> {
    let v = templates.v();
    let n = templates.n();
    match kind {
        ShiftKind::Adjacency => Ok(v.component_mul(v)),
        ShiftKind::NormalizedLaplacian | ShiftKind::CombinatorialLaplacian => {
            let first = match kind {
                ShiftKind::NormalizedLaplacian => DVector::from_element(n, 1.0),
                _ => {
                    let d = d.ok_or(Error::MissingInput("degree vector for claplacian"))?;
                    if d.len() != n {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            found: d.len(),
                        });
                    }
                    d.clone()
                }
            };
            let order = degree_first_order(templates)?;
            let mut w = v.select_columns(&order);
            w.component_mul_assign(&v.select_columns(&order));
            w.set_column(0, &first);
            Ok(w)
        }
        ShiftKind::GenericSymmetric => Err(Error::InvalidParameter(
            "no uniqueness structure for a generic symmetric shift".into(),
        )),
    }
}

/// Default relative rank tolerance for an `n`-column matrix.
pub fn default_rank_tol(n: usize) -> f64 {
    1e-8 * n as f64
}

/// Singular values (descending) and the left singular vectors above the rank cutoff.
#[derive(Debug, Clone)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
    pub rank: usize,
    /// `rows × rank`, orthonormal columns spanning the numerical range.
    pub range: DMatrix<f64>,
    /// `cols × rank`, the matching right singular vectors (a basis of the row space).
    pub corange: DMatrix<f64>,
}

impl SingularSpectrum {
    /// Orthonormal basis of the numerical nullspace, `cols × (cols − rank)`.
    ///
    /// Taken as the unit eigenspace of the projector `I − V_r V_rᵀ`, which stays accurate when
    /// the vanishing singular values are clustered at zero.
    pub fn null_basis(&self) -> Result<DMatrix<f64>> {
        let c = self.corange.nrows();
        let q = c - self.rank;
        if q == 0 {
            return Ok(DMatrix::zeros(c, 0));
        }
        let proj = DMatrix::identity(c, c) - &self.corange * self.corange.transpose();
        let eig = eig_symmetric(&proj)?;
        Ok(eig.vectors.columns(c - q, q).into_owned())
    }
}

/// Singular values through the symmetric eigenproblem of `[[0, M], [Mᵀ, 0]]`, whose eigenvalues
/// are `±σ_i`. This keeps absolute accuracy `O(ε σ_max)` for the small singular values, which
/// the Gram matrix `MᵀM` would square away.
pub fn singular_spectrum(m: &DMatrix<f64>, tol_rel: f64) -> Result<SingularSpectrum> {
    let (r, c) = m.shape();
    if m.amax() == 0.0 {
        return Err(Error::Degenerate("all-zero matrix has no rank structure".into()));
    }
    let mut j = DMatrix::zeros(r + c, r + c);
    j.view_mut((0, r), (r, c)).copy_from(m);
    j.view_mut((r, 0), (c, r)).copy_from(&m.transpose());
    let eig = eig_symmetric(&j)?;
    let total = r + c;
    let k = r.min(c);
    let values: Vec<f64> = (0..k).map(|i| eig.values[total - 1 - i].max(0.0)).collect();
    let cutoff = tol_rel * values[0];
    let rank = values.iter().filter(|&&s| s > cutoff).count();
    let mut range = DMatrix::zeros(r, rank);
    let mut corange = DMatrix::zeros(c, rank);
    let unit = |mut x: DVector<f64>| {
        let norm = x.norm();
        if norm > 0.0 {
            x /= norm;
        }
        x
    };
    for i in 0..rank {
        let col = eig.vectors.column(total - 1 - i);
        range.set_column(i, &unit(col.rows(0, r).into_owned()));
        corange.set_column(i, &unit(col.rows(r, c).into_owned()));
    }
    Ok(SingularSpectrum {
        values,
        rank,
        range,
        corange,
    })
}

/// Number of columns minus numerical rank, i.e. the count `Q` of vanishing singular values of a
/// square matrix.
pub fn nullspace_dim(m: &DMatrix<f64>, tol_rel: f64) -> Result<usize> {
    let spec = singular_spectrum(m, tol_rel)?;
    Ok(m.ncols() - spec.rank)
}

pub fn templates_from_operator(b: &DMatrix<f64>) -> Result<SpectralTemplates> {
    let eig = eig_symmetric(b)?;
    let degenerate = eig.has_degenerate_gap(b.amax());
    Ok(SpectralTemplates::new(eig.vectors, TemplateSource::OperatorEigenbasis)?.with_degenerate(degenerate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_shift, erdos_renyi, Graph};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn a_p3() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 1., 0., 1., 0.])
    }

    #[test]
    fn eig_k2_laplacian() {
        let e = eig_symmetric(&DMatrix::from_row_slice(2, 2, &[1., -1., -1., 1.])).unwrap();
        assert_abs_diff_eq!(e.values[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 2.0, epsilon = 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(e.vectors[(0, 0)].abs(), s, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors[(0, 0)], e.vectors[(1, 0)], epsilon = 1e-14);
    }

    #[test]
    fn eig_path_graph() {
        // characteristic polynomial of A(P3): -x^3 + 2x
        let e = eig_symmetric(&a_p3()).unwrap();
        let r2 = 2f64.sqrt();
        for (got, want) in e.values.iter().zip([-r2, 0.0, r2]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-13);
            assert_abs_diff_eq!(-got.powi(3) + 2.0 * got, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn eig_identity() {
        let e = eig_symmetric(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 1.0, 1.0]);
        assert_abs_diff_eq!((e.vectors.transpose() * &e.vectors), DMatrix::identity(3, 3));
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1., 2., 0., 1.]);
        assert!(matches!(eig_symmetric(&m), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn eig_sign_convention() {
        let e = eig_symmetric(&a_p3()).unwrap();
        for col in e.vectors.column_iter() {
            let max = col.amax();
            let lead = col.iter().position(|x| x.abs() >= max - 1e-14).unwrap();
            assert!(col[lead] > 0.0);
        }
    }

    #[test]
    fn eig_round_trip_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.random_range(1..=50);
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let x: f64 = rng.random_range(-1.0..1.0);
                    m[(i, j)] = x;
                    m[(j, i)] = x;
                }
            }
            let e = eig_symmetric(&m).unwrap();
            let err = (e.reconstruct() - &m).amax();
            assert!(err <= 1e-8 * m.amax(), "n={n} err={err:e}");
            assert!(e.values.as_slice().windows(2).all(|w| w[0] <= w[1]));
            for k in 0..n {
                let r = (&m * e.vectors.column(k) - e.vectors.column(k) * e.values[k]).amax();
                assert!(r <= 1e-8 * m.amax());
            }
        }
    }

    #[test]
    fn gft_examples() {
        let t = SpectralTemplates::exact(DMatrix::identity(2, 2)).unwrap();
        let x = DVector::from_vec(vec![3.0, 1.0]);
        assert_eq!(gft(&t, &x).unwrap(), x);
        assert!(gft(&t, &DVector::zeros(3)).is_err());

        let t = SpectralTemplates::from_shift(&a_p3()).unwrap();
        let xh = gft(&t, &t.v().column(1).into_owned()).unwrap();
        assert_abs_diff_eq!(xh, DVector::from_vec(vec![0.0, 1.0, 0.0]), epsilon = 1e-12);
    }

    #[test]
    fn freq_response_examples() {
        let r2 = 2f64.sqrt();
        let lam = DVector::from_vec(vec![-r2, 0.0, r2]);
        assert_eq!(freq_response(&[1.0], &lam), DVector::from_element(3, 1.0));
        assert_eq!(freq_response(&[0.0, 1.0], &lam), lam);
        assert_eq!(
            freq_response(&[1.0, 0.0, 1.0], &DVector::from_vec(vec![2.0])),
            DVector::from_vec(vec![5.0])
        );
    }

    #[test]
    fn w_of_path_graph() {
        let t = SpectralTemplates::from_shift(&a_p3()).unwrap();
        let w = build_w(&t, ShiftKind::Adjacency, None).unwrap();
        // eigenvectors (1,∓√2,1)/2 and (1,0,−1)/√2, squared
        let want = DMatrix::from_row_slice(3, 3, &[0.25, 0.5, 0.25, 0.5, 0.0, 0.5, 0.25, 0.5, 0.25]);
        assert_abs_diff_eq!(w, want, epsilon = 1e-12);
        assert_eq!(nullspace_dim(&w, default_rank_tol(3)).unwrap(), 1);
        let lam = eig_symmetric(&a_p3()).unwrap().values;
        assert!((&w * lam).amax() < 1e-12);
    }

    #[test]
    fn w_of_identity() {
        let t = SpectralTemplates::exact(DMatrix::identity(4, 4)).unwrap();
        assert_eq!(
            build_w(&t, ShiftKind::Adjacency, None).unwrap(),
            DMatrix::identity(4, 4)
        );
        assert_eq!(nullspace_dim(&DMatrix::identity(4, 4), 1e-8).unwrap(), 0);
    }

    #[test]
    fn claplacian_w_needs_degrees() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let l = build_shift(&g, ShiftKind::CombinatorialLaplacian).unwrap();
        let t = SpectralTemplates::from_shift(l.matrix()).unwrap();
        assert!(matches!(
            build_w(&t, ShiftKind::CombinatorialLaplacian, None),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn nullspace_of_rank_one() {
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        assert_eq!(nullspace_dim(&(&u * u.transpose()), 1e-8).unwrap(), 3);
        assert!(matches!(
            nullspace_dim(&DMatrix::zeros(3, 3), 1e-8),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn singular_values_match_reference() {
        let m = DMatrix::from_row_slice(3, 2, &[3., 0., 0., 4., 0., 0.]);
        let s = singular_spectrum(&m, 1e-8).unwrap();
        assert_abs_diff_eq!(s.values[0], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.values[1], 3.0, epsilon = 1e-12);
        assert_eq!(s.rank, 2);
        assert_abs_diff_eq!(s.range.transpose() * &s.range, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn null_basis_is_annihilated() {
        let g = erdos_renyi(12, 0.3, 5).unwrap();
        let a = build_shift(&g, ShiftKind::Adjacency).unwrap();
        let t = SpectralTemplates::from_shift(a.matrix()).unwrap();
        let w = build_w(&t, ShiftKind::Adjacency, None).unwrap();
        let spec = singular_spectrum(&w, default_rank_tol(12)).unwrap();
        let basis = spec.null_basis().unwrap();
        assert_eq!(basis.ncols(), 12 - spec.rank);
        assert!(basis.ncols() >= 1);
        assert!((&w * &basis).amax() < 1e-12);
        let q = basis.ncols();
        assert_abs_diff_eq!(basis.transpose() * &basis, DMatrix::identity(q, q), epsilon = 1e-12);
        assert!((basis.transpose() * &spec.corange).amax() < 1e-12);
    }

    #[test]
    fn degree_eigenvector_of_path_laplacian() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let l = build_shift(&g, ShiftKind::NormalizedLaplacian).unwrap();
        let t = SpectralTemplates::from_shift(l.matrix()).unwrap();
        let k = find_degree_eigenvector(&t).unwrap();
        let want = DVector::from_vec(vec![0.5, 2f64.sqrt() / 2.0, 0.5]);
        assert_abs_diff_eq!(t.v().column(k).abs(), want, epsilon = 1e-12);
        // smallest eigenvalue is zero with eigenvector √d
        let e = eig_symmetric(l.matrix()).unwrap();
        assert_abs_diff_eq!(e.values[0], 0.0, epsilon = 1e-12);
        assert_eq!(k, 0);
    }

    #[test]
    fn degree_eigenvector_simple_and_ambiguous() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = DMatrix::from_row_slice(2, 2, &[s, s, s, -s]);
        assert_eq!(
            find_degree_eigenvector(&SpectralTemplates::exact(v).unwrap()).unwrap(),
            0
        );
        let id = SpectralTemplates::exact(DMatrix::identity(3, 3)).unwrap();
        assert!(matches!(
            find_degree_eigenvector(&id),
            Err(Error::AmbiguousDegreeEigenvector(3))
        ));
    }

    #[test]
    fn normalized_laplacian_null_vector_random() {
        for seed in 0..40 {
            let g = erdos_renyi(15, 0.3, seed).unwrap();
            if !g.is_connected() {
                continue;
            }
            let l = build_shift(&g, ShiftKind::NormalizedLaplacian).unwrap();
            let e = eig_symmetric(l.matrix()).unwrap();
            assert!(e.values[0].abs() < 1e-9);
            let sqrt_d = DVector::from_iterator(15, g.degrees().iter().map(|&d| (d as f64).sqrt()));
            let sqrt_d = &sqrt_d / sqrt_d.norm();
            assert!((e.vectors.column(0) - &sqrt_d).amax() < 1e-9);
        }
    }

    #[test]
    fn operator_templates() {
        let id = templates_from_operator(&DMatrix::identity(3, 3)).unwrap();
        assert!(id.is_degenerate());
        assert_eq!(id.source(), TemplateSource::OperatorEigenbasis);

        let a = templates_from_operator(&a_p3()).unwrap();
        let direct = eig_symmetric(&a_p3()).unwrap();
        assert_eq!(a.v(), &direct.vectors);

        let b = a_p3() * 2.0 + DMatrix::identity(3, 3) * 3.0;
        let tb = templates_from_operator(&b).unwrap();
        for k in 0..3 {
            let dot = tb.v().column(k).dot(&a.v().column(k));
            assert_abs_diff_eq!(dot.abs(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn adjacency_w_annihilates_true_eigenvalues() {
        for seed in 0..50 {
            let g = erdos_renyi(12, 0.4, seed).unwrap();
            let a = build_shift(&g, ShiftKind::Adjacency).unwrap();
            let e = eig_symmetric(a.matrix()).unwrap();
            let t = SpectralTemplates::exact(e.vectors.clone()).unwrap();
            let w = build_w(&t, ShiftKind::Adjacency, None).unwrap();
            assert!((&w * &e.values).amax() < 1e-9);
        }
    }

    #[test]
    fn laplacian_w_annihilates_true_eigenvalues() {
        for seed in 0..50 {
            let g = erdos_renyi(12, 0.4, seed).unwrap();
            if !g.is_connected() {
                continue;
            }
            for kind in [ShiftKind::NormalizedLaplacian, ShiftKind::CombinatorialLaplacian] {
                let s = build_shift(&g, kind).unwrap();
                let e = eig_symmetric(s.matrix()).unwrap();
                let t = SpectralTemplates::exact(e.vectors.clone()).unwrap();
                let d = crate::graph::degree_vector(&g);
                let w = build_w(&t, kind, Some(&d)).unwrap();
                let order = degree_first_order(&t).unwrap();
                let mut lam = DVector::from_iterator(12, order.iter().map(|&k| e.values[k]));
                lam[0] = -1.0;
                assert!((&w * lam).amax() < 1e-9, "{kind}");
            }
        }
    }

    proptest! {
        #[test]
        fn sign_flips_leave_w_unchanged(seed in 0u64..500, mask in 0u32..(1 << 10)) {
            let g = erdos_renyi(10, 0.4, seed).unwrap();
            prop_assume!(g.is_connected());
            let l = build_shift(&g, ShiftKind::NormalizedLaplacian).unwrap();
            let t = SpectralTemplates::from_shift(l.matrix()).unwrap();
            let signs: Vec<f64> = (0..10).map(|k| if mask >> k & 1 == 1 { -1.0 } else { 1.0 }).collect();
            let f = t.sign_flipped(&signs);
            for kind in [ShiftKind::Adjacency, ShiftKind::NormalizedLaplacian] {
                let w0 = build_w(&t, kind, None).unwrap();
                let w1 = build_w(&f, kind, None).unwrap();
                prop_assert_eq!(&w0, &w1);
                prop_assert_eq!(nullspace_dim(&w0, 1e-7).unwrap(), nullspace_dim(&w1, 1e-7).unwrap());
            }
            prop_assert_eq!(find_degree_eigenvector(&t).unwrap(), find_degree_eigenvector(&f).unwrap());
        }

        #[test]
        fn filter_in_frequency_domain(seed in 0u64..200, coeffs in proptest::collection::vec(-1.0f64..1.0, 1..=5)) {
            let g = erdos_renyi(9, 0.4, seed).unwrap();
            let s = build_shift(&g, ShiftKind::Adjacency).unwrap();
            let e = eig_symmetric(s.matrix()).unwrap();
            let x = DVector::from_fn(9, |i, _| ((i as f64 + seed as f64) * 0.7).sin());
            let mut y = DVector::zeros(9);
            let mut p = x.clone();
            for &h in &coeffs {
                y += &p * h;
                p = s.matrix() * p;
            }
            let hh = freq_response(&coeffs, &e.values);
            let t = SpectralTemplates::exact(e.vectors.clone()).unwrap();
            let yf = t.v() * gft(&t, &x).unwrap().component_mul(&hh);
            prop_assert!((y - yf).norm() <= 1e-8);
        }
    }
}

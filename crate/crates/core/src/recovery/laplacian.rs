//! Laplacian recovery: nonpositive off-diagonal entries, a prescribed diagonal, and
//! nonnegative eigenvalues with the degree eigenvector pinned at zero.
//!
//! Because `V` is orthonormal, `V diag(λ) Vᵀ` is positive semidefinite exactly when `λ >= 0`,
//! so the semidefinite constraint reduces to sign constraints on `λ`.

use nalgebra::{DMatrix, DVector};

use super::program::{assemble, band_formulation, min_band, pair_products, reweighted, BandSpec, Formulation};
use super::{
    analyze, in_canonical_order, resolve_epsilon, support_adjacency, synthesize, RecoveryConfig, RecoveryResult,
    ShiftRecovery,
};
use crate::error::{Error, Result};
use crate::graph::{ShiftKind, ShiftMatrix};
use crate::spectral::{degree_first_order, eig_symmetric, SpectralTemplates};

/// Below this norm the nullspace of `W̃` has no component along the diagonal constraint.
const DIAGONAL_REACH_TOL: f64 = 1e-9;

pub struct NormalizedLaplacianRecovery;

pub struct CombinatorialLaplacianRecovery;

impl ShiftRecovery for NormalizedLaplacianRecovery {
    fn name(&self) -> &'static str {
        "nlaplacian"
    }

    fn kind(&self) -> ShiftKind {
        ShiftKind::NormalizedLaplacian
    }

    fn recover(
        &self,
        templates: &SpectralTemplates,
        cfg: &RecoveryConfig,
        _d: Option<&DVector<f64>>,
    ) -> Result<RecoveryResult> {
        recover_laplacian(templates, ShiftKind::NormalizedLaplacian, cfg, None)
    }
}

impl ShiftRecovery for CombinatorialLaplacianRecovery {
    fn name(&self) -> &'static str {
        "claplacian"
    }

    fn kind(&self) -> ShiftKind {
        ShiftKind::CombinatorialLaplacian
    }

    fn recover(
        &self,
        templates: &SpectralTemplates,
        cfg: &RecoveryConfig,
        d: Option<&DVector<f64>>,
    ) -> Result<RecoveryResult> {
        recover_laplacian(templates, ShiftKind::CombinatorialLaplacian, cfg, d)
    }
}

/// Columns `n−q+1..n` of the eigenbasis of `I − â âᵀ`: an orthonormal complement of `a`.
fn complement(a: &DVector<f64>) -> Result<DMatrix<f64>> {
    let q = a.len();
    let unit = a / a.norm();
    let proj = DMatrix::identity(q, q) - &unit * unit.transpose();
    let eig = eig_symmetric(&proj)?;
    Ok(eig.vectors.columns(1, q - 1).into_owned())
}

struct Setup<'a> {
    kind: ShiftKind,
    /// templates with the degree eigenvector moved to column 0
    v: DMatrix<f64>,
    order: Vec<usize>,
    diag: DVector<f64>,
    bound: f64,
    cfg: &'a RecoveryConfig,
}

impl Setup<'_> {
    fn band_spec(&self, epsilon: Option<f64>) -> BandSpec<'_> {
        BandSpec {
            v: &self.v,
            lam_cols: (1..self.v.ncols()).collect(),
            lam_lower: 0.0,
            entry_range: (-self.bound, 0.0),
            diag: self.diag.clone(),
            row_sums: false,
            sign: -1.0,
            epsilon,
            eta: self.cfg.eta,
        }
    }

    /// Noise-free program over `μ = Ñ s` with `μ_0 = −1`, where `Ñ` spans the nullspace of
    /// `W̃`; then `μ_k` (k ≥ 1) are the eigenvalues and the diagonal is attained exactly.
    fn exact_formulation(&self, null_basis: &DMatrix<f64>) -> Result<Formulation> {
        let n = self.v.ncols();
        let with_min = self.cfg.eta > 0.0;
        let nx = n + usize::from(with_min);
        let cols: Vec<usize> = (0..n).collect();
        let mut b = pair_products(&self.v, &cols);
        b.column_mut(0).fill(0.0);
        let np = b.nrows();
        let mut pair_rows = DMatrix::zeros(np, nx);
        pair_rows.view_mut((0, 0), (np, n)).copy_from(&b);
        let mut f = Formulation::new(pair_rows.clone(), -1.0);

        // −bound <= S_ij <= 0
        let mut g = DMatrix::zeros(2 * np, nx);
        let mut h = DVector::zeros(2 * np);
        g.view_mut((0, 0), (np, nx)).copy_from(&pair_rows);
        g.view_mut((np, 0), (np, nx)).copy_from(&(-&pair_rows));
        h.rows_mut(np, np).fill(self.bound);
        f.push_rows(&g, &h);
        for k in 1..n {
            f.lower[k] = 0.0;
        }
        if with_min {
            let mut g = DMatrix::zeros(n - 1, nx);
            for k in 1..n {
                g[(k - 1, n)] = 1.0;
                g[(k - 1, k)] = -1.0;
            }
            f.push_rows(&g, &DVector::zeros(n - 1));
            f.extra_cost[n] = -self.cfg.eta;
        }

        let q = null_basis.ncols();
        if q == 0 {
            return Err(Error::InfeasibleTemplates);
        }
        let a = null_basis.row(0).transpose();
        if a.norm() < DIAGONAL_REACH_TOL {
            return Err(Error::InfeasibleTemplates);
        }
        let mu0 = null_basis * (&a * (-1.0 / a.norm_squared()));
        let dirs = if q > 1 {
            null_basis * complement(&a)?
        } else {
            DMatrix::zeros(n, 0)
        };
        let nu = dirs.ncols() + usize::from(with_min);
        let mut x0 = DVector::zeros(nx);
        x0.rows_mut(0, n).copy_from(&mu0);
        let mut basis = DMatrix::zeros(nx, nu);
        basis.view_mut((0, 0), (n, dirs.ncols())).copy_from(&dirs);
        if with_min {
            basis[(n, nu - 1)] = 1.0;
        }
        f.affine = Some((x0, basis));
        Ok(f)
    }

    /// Eigenvalues in the caller's column order from the values of columns `1..n` of `v`.
    fn lambda(&self, tail: impl Iterator<Item = f64>) -> DVector<f64> {
        let mut lambda = DVector::zeros(self.order.len());
        for (k, value) in tail.enumerate() {
            lambda[self.order[k + 1]] = value;
        }
        lambda
    }
}

/// Reweighted ℓ1 recovery of a normalized or combinatorial Laplacian.
///
/// The degree eigenvector (the only template column of constant sign) gets eigenvalue zero.
/// The combinatorial kind needs the degree vector `d`, which fixes the diagonal and bounds the
/// off-diagonal entries below by `−max d`. With `eta > 0` the objective also rewards a large
/// `min_{k≥2} λ_k`.
pub fn recover_laplacian(
    templates: &SpectralTemplates,
    kind: ShiftKind,
    cfg: &RecoveryConfig,
    d: Option<&DVector<f64>>,
) -> Result<RecoveryResult> {
    in_canonical_order(templates, |t| recover_ordered(t, kind, cfg, d))
}

fn recover_ordered(
    templates: &SpectralTemplates,
    kind: ShiftKind,
    cfg: &RecoveryConfig,
    d: Option<&DVector<f64>>,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    let n = templates.n();
    if n < 2 {
        return Err(Error::InvalidParameter("recovery needs at least two nodes".into()));
    }
    let (diag, bound) = match kind {
        ShiftKind::NormalizedLaplacian => (DVector::from_element(n, 1.0), 1.0),
        ShiftKind::CombinatorialLaplacian => {
            let d = d.ok_or(Error::MissingInput("degree vector for claplacian"))?;
            if d.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: d.len(),
                });
            }
            if d.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::InvalidParameter("degrees must be positive".into()));
            }
            (d.clone(), d.max())
        }
        other => {
            return Err(Error::InvalidParameter(format!("{other} is not a Laplacian kind")));
        }
    };
    let d_for_w = (kind == ShiftKind::CombinatorialLaplacian).then_some(&diag);
    let analysis = analyze(templates, kind, d_for_w, cfg.rank_tol_for(n))?;
    let order = degree_first_order(templates)?;
    let setup = Setup {
        kind,
        v: templates.v().select_columns(&order),
        order,
        diag,
        bound,
        cfg,
    };
    let epsilon = resolve_epsilon(templates, cfg, || {
        let (f, _) = band_formulation(&setup.band_spec(None));
        min_band(f, cfg)
    })?;

    let (s, lambda, lambda_min, run) = if epsilon > 0.0 {
        let (f, layout) = band_formulation(&setup.band_spec(Some(epsilon)));
        let run = reweighted(f, cfg)?;
        let lambda = setup.lambda(run.x.rows(0, n - 1).iter().copied());
        let s = assemble(&setup.diag, &layout.entries(&run.x));
        let lambda_min = layout.lambda_min.map(|m| run.x[m]);
        (s, lambda, lambda_min, run)
    } else {
        let f = setup.exact_formulation(&analysis.null_basis)?;
        let run = reweighted(f, cfg)?;
        let lambda = setup.lambda(run.x.rows(1, n - 1).iter().copied());
        let lambda_min = (cfg.eta > 0.0).then(|| run.x[n]);
        (synthesize(templates.v(), &lambda), lambda, lambda_min, run)
    };

    let s_hat = ShiftMatrix::new(setup.kind, s)?;
    let adjacency = support_adjacency(&s_hat, cfg.support_tol)?;
    Ok(RecoveryResult {
        mode: kind,
        s_hat,
        adjacency,
        lambda_hat: lambda,
        lambda_min,
        q: analysis.uniqueness.q,
        rank: analysis.uniqueness.rank,
        unique: analysis.uniqueness.unique,
        reweight_trace: run.trace,
        support_trace: run.support,
        d_min_estimate: None,
        epsilon,
        degenerate_spectrum: templates.is_degenerate(),
        lp_iterations: run.lp_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_shift, degree_vector, Graph};
    use crate::recovery::EpsilonMode;
    use approx::assert_abs_diff_eq;

    fn laplacian(n: usize, edges: &[(usize, usize)], kind: ShiftKind) -> (Graph, ShiftMatrix, SpectralTemplates) {
        let g = Graph::from_edges(n, edges.iter().copied()).unwrap();
        let l = build_shift(&g, kind).unwrap();
        let t = SpectralTemplates::from_shift(l.matrix()).unwrap();
        (g, l, t)
    }

    #[test]
    fn two_node_laplacian_is_forced() {
        let (_, _, t) = laplacian(2, &[(0, 1)], ShiftKind::NormalizedLaplacian);
        let r = recover_laplacian(&t, ShiftKind::NormalizedLaplacian, &RecoveryConfig::default(), None).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1., -1., -1., 1.]);
        assert_abs_diff_eq!(r.s_hat.matrix(), &want, epsilon = 1e-9);
        let mut lambda: Vec<f64> = r.lambda_hat.iter().copied().collect();
        lambda.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(lambda[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(lambda[1], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn path_laplacian_is_recovered() {
        let (g, l, t) = laplacian(3, &[(0, 1), (1, 2)], ShiftKind::NormalizedLaplacian);
        let r = recover_laplacian(&t, ShiftKind::NormalizedLaplacian, &RecoveryConfig::default(), None).unwrap();
        assert!((r.s_hat.matrix() - l.matrix()).amax() < 1e-6);
        assert_eq!(r.graph(), g);
        let k = crate::spectral::find_degree_eigenvector(&t).unwrap();
        assert_eq!(r.lambda_hat[k], 0.0);
    }

    #[test]
    fn combinatorial_laplacian_needs_degrees() {
        let edges = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)];
        let (g, l, t) = laplacian(4, &edges, ShiftKind::CombinatorialLaplacian);
        assert!(matches!(
            recover_laplacian(&t, ShiftKind::CombinatorialLaplacian, &RecoveryConfig::default(), None),
            Err(Error::MissingInput(_))
        ));
        let d = degree_vector(&g);
        let r = recover_laplacian(
            &t,
            ShiftKind::CombinatorialLaplacian,
            &RecoveryConfig::default(),
            Some(&d),
        )
        .unwrap();
        if r.unique {
            assert!((r.s_hat.matrix() - l.matrix()).amax() < 1e-6);
        }
        for i in 0..4 {
            assert_abs_diff_eq!(r.s_hat.matrix()[(i, i)], d[i], epsilon = 1e-8);
        }
        assert!(r.lambda_hat.iter().all(|&x| x >= -1e-9));
    }

    #[test]
    fn noisy_mode_on_exact_templates() {
        let (g, _, t) = laplacian(
            5,
            &[(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)],
            ShiftKind::NormalizedLaplacian,
        );
        let cfg = RecoveryConfig {
            epsilon: EpsilonMode::Auto,
            ..Default::default()
        };
        let r = recover_laplacian(&t, ShiftKind::NormalizedLaplacian, &cfg, None).unwrap();
        assert!(r.epsilon < 1e-6);
        if r.unique {
            assert_eq!(r.graph(), g);
        }
    }

    #[test]
    fn mixing_term_reports_smallest_nonzero_eigenvalue() {
        let (_, _, t) = laplacian(4, &[(0, 1), (1, 2), (2, 3)], ShiftKind::NormalizedLaplacian);
        let cfg = RecoveryConfig {
            eta: 0.1,
            ..Default::default()
        };
        let r = recover_laplacian(&t, ShiftKind::NormalizedLaplacian, &cfg, None).unwrap();
        let k = crate::spectral::find_degree_eigenvector(&t).unwrap();
        let smallest = (0..4)
            .filter(|&j| j != k)
            .map(|j| r.lambda_hat[j])
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(r.lambda_min.unwrap(), smallest, epsilon = 1e-6);
    }

    #[test]
    fn generic_kind_is_rejected() {
        let (_, _, t) = laplacian(3, &[(0, 1), (1, 2)], ShiftKind::NormalizedLaplacian);
        assert!(recover_laplacian(&t, ShiftKind::Adjacency, &RecoveryConfig::default(), None).is_err());
    }
}

//! Adjacency recovery: hollow `S` with entries in `[0, 1]` and every row sum at least one.

use nalgebra::{DMatrix, DVector};

use super::program::{assemble, band_formulation, min_band, pair_products, reweighted, BandSpec, Formulation};
use super::{
    analyze, in_canonical_order, rescale_and_binarize, resolve_epsilon, synthesize, RecoveryConfig, RecoveryResult,
    ShiftRecovery,
};
use crate::error::{Error, Result};
use crate::graph::{ShiftKind, ShiftMatrix};
use crate::spectral::SpectralTemplates;

pub struct AdjacencyRecovery;

impl ShiftRecovery for AdjacencyRecovery {
    fn name(&self) -> &'static str {
        "adjacency"
    }

    fn kind(&self) -> ShiftKind {
        ShiftKind::Adjacency
    }

    fn recover(
        &self,
        templates: &SpectralTemplates,
        cfg: &RecoveryConfig,
        _d: Option<&DVector<f64>>,
    ) -> Result<RecoveryResult> {
        recover_adjacency(templates, cfg)
    }
}

fn band_spec(v: &DMatrix<f64>, epsilon: Option<f64>) -> BandSpec<'_> {
    let n = v.nrows();
    BandSpec {
        v,
        lam_cols: (0..n).collect(),
        lam_lower: f64::NEG_INFINITY,
        entry_range: (0.0, 1.0),
        diag: DVector::zeros(n),
        row_sums: true,
        sign: 1.0,
        epsilon,
        eta: 0.0,
    }
}

/// Noise-free program over `λ = N t`, where `N` spans the nullspace of `W = V⊙V`, so the
/// diagonal of `V diag(λ) Vᵀ` vanishes identically.
fn exact_formulation(v: &DMatrix<f64>, null_basis: DMatrix<f64>) -> Formulation {
    let n = v.nrows();
    let cols: Vec<usize> = (0..n).collect();
    let b = pair_products(v, &cols);
    let np = b.nrows();
    let mut f = Formulation::new(b.clone(), 1.0);
    // 0 <= S_ij <= 1
    let mut g = DMatrix::zeros(2 * np + n, n);
    let mut h = DVector::zeros(2 * np + n);
    g.view_mut((0, 0), (np, n)).copy_from(&(-&b));
    g.view_mut((np, 0), (np, n)).copy_from(&b);
    h.rows_mut(np, np).fill(1.0);
    // (S1)_i = Σ_k V_ik (Vᵀ1)_k λ_k >= 1
    let v1 = v.row_sum().transpose();
    for i in 0..n {
        for k in 0..n {
            g[(2 * np + i, k)] = -v[(i, k)] * v1[k];
        }
        h[2 * np + i] = -1.0;
    }
    f.push_rows(&g, &h);
    f.affine = Some((DVector::zeros(n), null_basis));
    f
}

/// Reweighted ℓ1 recovery of an adjacency matrix from its eigenvectors.
///
/// With exact templates the search runs over `λ` in the nullspace of `V⊙V`. With a band
/// half-width `ε > 0` the entries become free variables within `ε` of `V diag(λ) Vᵀ`.
/// The continuous optimum of a singleton instance is `A / d_min`; the returned binarized copy
/// thresholds at `binarize_threshold · max S_ij`.
pub fn recover_adjacency(templates: &SpectralTemplates, cfg: &RecoveryConfig) -> Result<RecoveryResult> {
    in_canonical_order(templates, |t| recover_ordered(t, cfg))
}

fn recover_ordered(templates: &SpectralTemplates, cfg: &RecoveryConfig) -> Result<RecoveryResult> {
    cfg.validate()?;
    let n = templates.n();
    if n < 2 {
        return Err(Error::InvalidParameter("recovery needs at least two nodes".into()));
    }
    let v = templates.v();
    let analysis = analyze(templates, ShiftKind::Adjacency, None, cfg.rank_tol_for(n))?;
    let epsilon = resolve_epsilon(templates, cfg, || {
        let (f, _) = band_formulation(&band_spec(v, None));
        min_band(f, cfg)
    })?;

    let (s, lambda, run) = if epsilon > 0.0 {
        let (f, layout) = band_formulation(&band_spec(v, Some(epsilon)));
        let run = reweighted(f, cfg)?;
        let lambda = run.x.rows(0, n).into_owned();
        let s = assemble(&DVector::zeros(n), &layout.entries(&run.x));
        (s, lambda, run)
    } else {
        if analysis.uniqueness.q == 0 {
            // only λ = 0 keeps the diagonal at zero, and then S1 >= 1 fails
            return Err(Error::InfeasibleTemplates);
        }
        let run = reweighted(exact_formulation(v, analysis.null_basis), cfg)?;
        let lambda = run.x.clone();
        (synthesize(v, &lambda), lambda, run)
    };

    let s_hat = ShiftMatrix::new(ShiftKind::Adjacency, s)?;
    let (adjacency, d_min) = rescale_and_binarize(&s_hat, cfg.binarize_threshold)?;
    Ok(RecoveryResult {
        mode: ShiftKind::Adjacency,
        s_hat,
        adjacency,
        lambda_hat: lambda,
        lambda_min: None,
        q: analysis.uniqueness.q,
        rank: analysis.uniqueness.rank,
        unique: analysis.uniqueness.unique,
        reweight_trace: run.trace,
        support_trace: run.support,
        d_min_estimate: Some(d_min),
        epsilon,
        degenerate_spectrum: templates.is_degenerate(),
        lp_iterations: run.lp_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_shift, Graph};
    use crate::recovery::EpsilonMode;

    fn templates_of(n: usize, edges: &[(usize, usize)]) -> (ShiftMatrix, SpectralTemplates) {
        let g = Graph::from_edges(n, edges.iter().copied()).unwrap();
        let a = build_shift(&g, ShiftKind::Adjacency).unwrap();
        let t = SpectralTemplates::from_shift(a.matrix()).unwrap();
        (a, t)
    }

    #[test]
    fn path_is_recovered_exactly() {
        let (a, t) = templates_of(3, &[(0, 1), (1, 2)]);
        let r = recover_adjacency(&t, &RecoveryConfig::default()).unwrap();
        assert_eq!(r.q, 1);
        assert!(r.unique);
        assert_eq!(r.adjacency, a);
        assert_eq!(r.d_min_estimate, Some(1));
        assert!((r.s_hat.matrix() - a.matrix()).amax() < 1e-6);
    }

    #[test]
    fn cycle_comes_back_scaled_by_min_degree() {
        let (a, t) = templates_of(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        let r = recover_adjacency(&t, &RecoveryConfig::default()).unwrap();
        assert!(
            (r.s_hat.matrix() - a.matrix() * 0.5).amax() < 1e-6,
            "{}",
            r.s_hat.matrix()
        );
        assert_eq!(r.adjacency, a);
        assert_eq!(r.d_min_estimate, Some(2));
    }

    #[test]
    fn identity_templates_are_infeasible() {
        let t = SpectralTemplates::exact(DMatrix::identity(4, 4)).unwrap();
        assert!(matches!(
            recover_adjacency(&t, &RecoveryConfig::default()),
            Err(Error::InfeasibleTemplates)
        ));
        let cfg = RecoveryConfig {
            epsilon: EpsilonMode::Fixed(1e-3),
            ..Default::default()
        };
        assert!(matches!(recover_adjacency(&t, &cfg), Err(Error::InfeasibleTemplates)));
    }

    #[test]
    fn noisy_band_on_exact_templates_still_recovers() {
        let (a, t) = templates_of(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 2)]);
        let cfg = RecoveryConfig {
            epsilon: EpsilonMode::Auto,
            ..Default::default()
        };
        let r = recover_adjacency(&t, &cfg).unwrap();
        assert!(r.epsilon < 1e-6, "{}", r.epsilon);
        assert_eq!(r.adjacency, a);
    }

    #[test]
    fn reweighted_solution_reproduces_eigen_expansion() {
        let (_, t) = templates_of(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)]);
        let r = recover_adjacency(&t, &RecoveryConfig::default()).unwrap();
        let back = synthesize(t.v(), &r.lambda_hat);
        assert!((back - r.s_hat.matrix()).amax() < 1e-6);
        assert!(!r.reweight_trace.is_empty() && r.reweight_trace.len() <= 10);
    }
}

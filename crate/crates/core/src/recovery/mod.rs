//! Shift identification from spectral templates.
//!
//! Given the eigenvectors `V` of an unknown shift, the recovered shift is the sparsest
//! `S = V diag(λ) Vᵀ` meeting the structural constraints of the requested kind. Sparsity is
//! promoted by iteratively reweighted ℓ1 minimization over `λ`, which keeps every subproblem
//! a linear program.
//!
//! Strategies for the three supported kinds implement [`ShiftRecovery`] and are looked up by
//! name in a [`Registry`].

mod adjacency;
mod laplacian;
mod program;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, ShiftKind, ShiftMatrix};
use crate::lp::LpOptions;
use crate::spectral::{build_w, default_rank_tol, singular_spectrum, SpectralTemplates};

pub use adjacency::{recover_adjacency, AdjacencyRecovery};
pub use laplacian::{recover_laplacian, CombinatorialLaplacianRecovery, NormalizedLaplacianRecovery};

/// Smallest band half-width used when the automatic choice comes out at zero.
pub const EPSILON_FLOOR: f64 = 1e-9;
/// Margin applied to the smallest feasible band half-width in automatic mode.
pub const EPSILON_MARGIN: f64 = 1.05;
/// Largest entry below which a recovered adjacency counts as all-zero.
pub const ZERO_RECOVERY_TOL: f64 = 1e-9;

/// How the band half-width `ε` of the noisy programs is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonMode {
    /// Whatever the templates carry; exact templates give the noise-free program.
    #[default]
    FromTemplates,
    Fixed(f64),
    /// `1.05 ×` the smallest feasible `ε` (at least [`EPSILON_FLOOR`]).
    Auto,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryConfig {
    /// Reweighting constant δ in `ω = 1 / (|S_ij| + δ)`.
    pub delta: f64,
    /// Number of weighted solves (the first uses unit weights).
    pub max_reweight: usize,
    /// Relative singular-value cutoff for `Q`; `None` uses `1e-8 · N`.
    pub rank_tol: Option<f64>,
    pub epsilon: EpsilonMode,
    /// Weight of the `−η · min_{k≥2} λ_k` term in the Laplacian modes (0 disables it).
    pub eta: f64,
    /// Adjacency entries at or above this fraction of the largest entry become edges.
    pub binarize_threshold: f64,
    /// Magnitude above which an entry counts as part of the support.
    pub support_tol: f64,
    /// Stop reweighting once successive off-diagonal entries agree to this.
    pub early_stop: f64,
    #[serde(skip)]
    pub lp: LpOptions,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            delta: 1e-3,
            max_reweight: 10,
            rank_tol: None,
            epsilon: EpsilonMode::FromTemplates,
            eta: 0.0,
            binarize_threshold: 0.5,
            support_tol: 1e-6,
            early_stop: 1e-8,
            lp: LpOptions::default(),
        }
    }
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta must be positive");
        }
        if self.max_reweight == 0 {
            return bad("max_reweight must be at least 1");
        }
        if let Some(tol) = self.rank_tol {
            if !(tol > 0.0 && tol < 1.0) {
                return bad("rank_tol must lie in (0, 1)");
            }
        }
        if let EpsilonMode::Fixed(e) = self.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return bad("epsilon must be nonnegative");
            }
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad("eta must be nonnegative");
        }
        if !(self.binarize_threshold > 0.0 && self.binarize_threshold < 1.0) {
            return bad("binarize_threshold must lie in (0, 1)");
        }
        if !(self.support_tol > 0.0) || !(self.early_stop > 0.0) {
            return bad("support_tol and early_stop must be positive");
        }
        Ok(())
    }

    fn rank_tol_for(&self, n: usize) -> f64 {
        self.rank_tol.unwrap_or_else(|| default_rank_tol(n))
    }
}

/// Nullspace dimension of `W` (or `W̃`) and the singleton verdict `Q = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Uniqueness {
    pub q: usize,
    pub rank: usize,
    pub unique: bool,
}

pub(crate) struct Analysis {
    pub uniqueness: Uniqueness,
    pub null_basis: DMatrix<f64>,
}

pub(crate) fn analyze(
    templates: &SpectralTemplates,
    kind: ShiftKind,
    d: Option<&DVector<f64>>,
    rank_tol: f64,
) -> Result<Analysis> {
    let w = build_w(templates, kind, d)?;
    let spec = singular_spectrum(&w, rank_tol)?;
    let q = w.ncols() - spec.rank;
    Ok(Analysis {
        uniqueness: Uniqueness {
            q,
            rank: spec.rank,
            unique: q == 1,
        },
        null_basis: spec.null_basis()?,
    })
}

/// Nullspace dimension of `W = V⊙V` (adjacency) or of `W̃` (Laplacian kinds).
pub fn check_uniqueness(
    templates: &SpectralTemplates,
    kind: ShiftKind,
    d: Option<&DVector<f64>>,
    rank_tol: Option<f64>,
) -> Result<Uniqueness> {
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(templates.n()));
    Ok(analyze(templates, kind, d, tol)?.uniqueness)
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub mode: ShiftKind,
    /// Continuous solution before binarization.
    pub s_hat: ShiftMatrix,
    /// Binarized support of `s_hat`.
    pub adjacency: ShiftMatrix,
    /// Eigenvalues in template column order.
    pub lambda_hat: DVector<f64>,
    /// `min_{k≥2} λ_k` when the mixing regularizer is active.
    pub lambda_min: Option<f64>,
    pub q: usize,
    pub rank: usize,
    pub unique: bool,
    /// Weighted objective after each solve.
    pub reweight_trace: Vec<f64>,
    /// Number of off-diagonal entries above `support_tol` after each solve.
    pub support_trace: Vec<usize>,
    /// `round(1 / max S_ij)` for adjacency recoveries.
    pub d_min_estimate: Option<usize>,
    pub epsilon: f64,
    pub degenerate_spectrum: bool,
    pub lp_iterations: usize,
}

impl RecoveryResult {
    pub fn graph(&self) -> Graph {
        Graph::from_support(self.adjacency.matrix(), 0.5)
    }

    pub fn report(&self, truth: Option<&ShiftMatrix>) -> Result<RecoveryReport> {
        let edge_error = truth.map(|t| edge_error(t, &self.adjacency)).transpose()?;
        Ok(RecoveryReport {
            mode: self.mode,
            n: self.s_hat.n(),
            lambda_hat: self.lambda_hat.iter().copied().collect(),
            lambda_min: self.lambda_min,
            q: self.q,
            unique: self.unique,
            d_min_estimate: self.d_min_estimate,
            edges: self.graph().edges().collect(),
            reweight_trace: self.reweight_trace.clone(),
            epsilon: self.epsilon,
            degenerate_spectrum: self.degenerate_spectrum,
            edge_error,
        })
    }
}

/// Serializable summary of a [`RecoveryResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub mode: ShiftKind,
    pub n: usize,
    pub lambda_hat: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_min: Option<f64>,
    pub q: usize,
    pub unique: bool,
    pub d_min_estimate: Option<usize>,
    pub edges: Vec<(usize, usize)>,
    pub reweight_trace: Vec<f64>,
    pub epsilon: f64,
    pub degenerate_spectrum: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub edge_error: Option<f64>,
}

fn largest_off_diagonal(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Thresholds a continuous adjacency estimate at `theta · max_ij S_ij` and reads the minimum
/// degree off the scale: the relaxed solution equals `A / d_min`, so `d_min = round(1 / max)`.
pub fn rescale_and_binarize(s_hat: &ShiftMatrix, theta: f64) -> Result<(ShiftMatrix, usize)> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter("binarize threshold must lie in (0, 1)".into()));
    }
    let m = s_hat.matrix();
    let n = m.nrows();
    let s_max = largest_off_diagonal(m);
    if n < 2 || s_max <= ZERO_RECOVERY_TOL {
        return Err(Error::AllZeroRecovery);
    }
    let cut = theta * s_max;
    let a = DMatrix::from_fn(n, n, |i, j| {
        let (lo, hi) = (i.min(j), i.max(j));
        if i != j && m[(lo, hi)] >= cut {
            1.0
        } else {
            0.0
        }
    });
    let d_min = (1.0 / s_max).round() as usize;
    Ok((ShiftMatrix::new(ShiftKind::Adjacency, a)?, d_min))
}

/// Unweighted adjacency of the entries with `|S_ij| > tol`, `i ≠ j`.
pub fn support_adjacency(s_hat: &ShiftMatrix, tol: f64) -> Result<ShiftMatrix> {
    let m = s_hat.matrix();
    let n = m.nrows();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let (lo, hi) = (i.min(j), i.max(j));
        if i != j && m[(lo, hi)].abs() > tol {
            1.0
        } else {
            0.0
        }
    });
    ShiftMatrix::new(ShiftKind::Adjacency, a)
}

/// Fraction of misidentified entries `‖A − Â‖₀ / ‖A‖₀`, counted over the full matrices.
pub fn edge_error(a_true: &ShiftMatrix, a_hat: &ShiftMatrix) -> Result<f64> {
    if a_true.kind() != ShiftKind::Adjacency || a_hat.kind() != ShiftKind::Adjacency {
        return Err(Error::InvalidParameter("edge error compares adjacency matrices".into()));
    }
    if a_true.n() != a_hat.n() {
        return Err(Error::DimensionMismatch {
            expected: a_true.n(),
            found: a_hat.n(),
        });
    }
    let nnz = a_true.matrix().iter().filter(|&&v| v != 0.0).count();
    if nnz == 0 {
        return Err(Error::Degenerate("true adjacency has no edges".into()));
    }
    let diff = a_true
        .matrix()
        .iter()
        .zip(a_hat.matrix().iter())
        .filter(|(a, b)| a != b)
        .count();
    Ok(diff as f64 / nnz as f64)
}

/// `V diag(λ) Vᵀ`, symmetrized exactly.
pub(crate) fn synthesize(v: &DMatrix<f64>, lambda: &DVector<f64>) -> DMatrix<f64> {
    let mut vl = v.clone();
    for (k, mut col) in vl.column_iter_mut().enumerate() {
        col *= lambda[k];
    }
    let s = vl * v.transpose();
    (&s + s.transpose()) * 0.5
}

/// Runs `solve` on the templates reordered by [`canonical_order`] and maps the eigenvalues
/// back to the caller's column order.
///
/// When an optimal face is not a single point, the interior-point limit inside it depends on
/// the coordinates of the problem, and reweighting amplifies the difference. Solving in a fixed
/// order makes the result independent of how the templates were ordered or signed.
pub(crate) fn in_canonical_order(
    templates: &SpectralTemplates,
    solve: impl FnOnce(&SpectralTemplates) -> Result<RecoveryResult>,
) -> Result<RecoveryResult> {
    let order = canonical_order(templates.v());
    let mut r = solve(&templates.permuted(&order))?;
    let mut lambda = DVector::zeros(order.len());
    for (k, &old) in order.iter().enumerate() {
        lambda[old] = r.lambda_hat[k];
    }
    r.lambda_hat = lambda;
    Ok(r)
}

/// Column order sorted lexicographically by the squared entries, which ignore column signs.
pub(crate) fn canonical_order(v: &DMatrix<f64>) -> Vec<usize> {
    let w = v.component_mul(v);
    let mut order: Vec<usize> = (0..v.ncols()).collect();
    order.sort_by(|&a, &b| {
        w.column(a)
            .iter()
            .zip(w.column(b).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

/// Band half-width to use, or 0 for the noise-free program.
pub(crate) fn resolve_epsilon(
    templates: &SpectralTemplates,
    cfg: &RecoveryConfig,
    min_feasible: impl FnOnce() -> Result<f64>,
) -> Result<f64> {
    Ok(match cfg.epsilon {
        EpsilonMode::FromTemplates => templates.epsilon(),
        EpsilonMode::Fixed(e) => e,
        EpsilonMode::Auto => (EPSILON_MARGIN * min_feasible()?).max(EPSILON_FLOOR),
    })
}

/// One recovery algorithm, selected by name at runtime.
pub trait ShiftRecovery: Send + Sync {
    /// Registry key, also the CLI `--mode` value.
    fn name(&self) -> &'static str;

    fn kind(&self) -> ShiftKind;

    fn uniqueness(
        &self,
        templates: &SpectralTemplates,
        cfg: &RecoveryConfig,
        d: Option<&DVector<f64>>,
    ) -> Result<Uniqueness> {
        check_uniqueness(templates, self.kind(), d, cfg.rank_tol)
    }

    fn recover(
        &self,
        templates: &SpectralTemplates,
        cfg: &RecoveryConfig,
        d: Option<&DVector<f64>>,
    ) -> Result<RecoveryResult>;
}

/// Named recovery strategies.
pub struct Registry {
    strategies: BTreeMap<&'static str, Box<dyn ShiftRecovery>>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            strategies: BTreeMap::new(),
        }
    }

    /// Adjacency, normalized Laplacian and combinatorial Laplacian recovery.
    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(AdjacencyRecovery));
        r.register(Box::new(NormalizedLaplacianRecovery));
        r.register(Box::new(CombinatorialLaplacianRecovery));
        r
    }

    /// Adds a strategy, replacing any previous one with the same name.
    pub fn register(&mut self, strategy: Box<dyn ShiftRecovery>) {
        self.strategies.insert(strategy.name(), strategy);
    }

    pub fn get(&self, name: &str) -> Result<&dyn ShiftRecovery> {
        self.strategies
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownMode(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.strategies.keys().copied()
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adj(n: usize, edges: &[(usize, usize)]) -> ShiftMatrix {
        let g = Graph::from_edges(n, edges.iter().copied()).unwrap();
        crate::graph::build_shift(&g, ShiftKind::Adjacency).unwrap()
    }

    #[test]
    fn binarize_scaled_cycle() {
        let c4 = adj(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        let half = ShiftMatrix::new(ShiftKind::Adjacency, c4.matrix() * 0.5).unwrap();
        let (a, d_min) = rescale_and_binarize(&half, 0.5).unwrap();
        assert_eq!(a, c4);
        assert_eq!(d_min, 2);
    }

    #[test]
    fn binarize_fixed_point_and_zero() {
        let p3 = adj(3, &[(0, 1), (1, 2)]);
        let (a, d_min) = rescale_and_binarize(&p3, 0.5).unwrap();
        assert_eq!(a, p3);
        assert_eq!(d_min, 1);
        let zero = ShiftMatrix::new(ShiftKind::Adjacency, DMatrix::zeros(3, 3)).unwrap();
        assert!(matches!(rescale_and_binarize(&zero, 0.5), Err(Error::AllZeroRecovery)));
    }

    #[test]
    fn edge_error_examples() {
        let p3 = adj(3, &[(0, 1), (1, 2)]);
        assert_eq!(edge_error(&p3, &p3).unwrap(), 0.0);
        assert_eq!(edge_error(&p3, &adj(3, &[(1, 2)])).unwrap(), 0.5);
        assert_eq!(edge_error(&p3, &adj(3, &[])).unwrap(), 1.0);
        assert!(edge_error(&adj(3, &[]), &p3).is_err());
    }

    #[test]
    fn canonical_order_ignores_gauge() {
        let v = DMatrix::from_row_slice(3, 3, &[0.6, -0.8, 0.0, 0.8, 0.6, 0.0, 0.0, 0.0, 1.0]);
        let base = canonical_order(&v);
        let moved = v.select_columns(&[2, 0, 1]) * DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, -1.0]));
        let order = canonical_order(&moved);
        assert_eq!(moved.select_columns(&order).abs(), v.select_columns(&base).abs());
    }

    #[test]
    fn registry_lookup() {
        let r = Registry::with_defaults();
        assert_eq!(r.names().collect::<Vec<_>>(), ["adjacency", "claplacian", "nlaplacian"]);
        assert_eq!(r.get("nlaplacian").unwrap().kind(), ShiftKind::NormalizedLaplacian);
        assert!(matches!(r.get("randomwalk"), Err(Error::UnknownMode(_))));
    }

    #[test]
    fn config_validation() {
        assert!(RecoveryConfig::default().validate().is_ok());
        let bad = RecoveryConfig {
            delta: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RecoveryConfig {
            binarize_threshold: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let json = serde_json::to_string(&RecoveryConfig::default()).unwrap();
        let back: RecoveryConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.delta, 1e-3);
        let partial: RecoveryConfig = serde_json::from_str(r#"{"epsilon":{"fixed":0.1}}"#).unwrap();
        assert_eq!(partial.epsilon, EpsilonMode::Fixed(0.1));
    }
}

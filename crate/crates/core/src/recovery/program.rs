//! Linear programs behind the recovery modes and the reweighted ℓ1 loop that drives them.

use log::warn;
use nalgebra::{DMatrix, DVector};

use super::RecoveryConfig;
use crate::error::{Error, Result};
use crate::lp::{lp_solve_with, LinearProgram, LpStatus};

/// A constraint row whose restriction to the search space has norm below this fraction of its
/// full norm is treated as constant.
const CONSTANT_ROW_TOL: f64 = 1e-9;
/// Slack allowed on constant rows before the instance is declared infeasible.
const CONSTANT_ROW_SLACK: f64 = 1e-7;

/// Upper-triangle index pairs `(i, j)`, `i < j`, in row-major order.
pub(crate) fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// `row[k] = V_ik V_jk` for every pair, restricted to the given template columns.
pub(crate) fn pair_products(v: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let pairs = pairs(v.nrows());
    DMatrix::from_fn(pairs.len(), cols.len(), |p, k| {
        let (i, j) = pairs[p];
        v[(i, cols[k])] * v[(j, cols[k])]
    })
}

/// A recovery problem over a variable vector `x`.
///
/// Off-diagonal shift entries are linear in `x` (`S_ij = pair_rows[p] · x`). The weighted ℓ1
/// objective is `Σ_{i≠j} ω_ij |S_ij| = 2 · sign · Σ_p ω_p S_p`, where `sign` records which
/// side of zero the entries are confined to.
pub(crate) struct Formulation {
    pub pair_rows: DMatrix<f64>,
    pub sign: f64,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub extra_cost: DVector<f64>,
    /// Search space `x = x0 + basis · u`. `None` searches over all of `x`.
    pub affine: Option<(DVector<f64>, DMatrix<f64>)>,
}

impl Formulation {
    pub fn new(pair_rows: DMatrix<f64>, sign: f64) -> Self {
        let n = pair_rows.ncols();
        Formulation {
            pair_rows,
            sign,
            g: DMatrix::zeros(0, n),
            h: DVector::zeros(0),
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
            extra_cost: DVector::zeros(n),
            affine: None,
        }
    }

    pub fn n_x(&self) -> usize {
        self.pair_rows.ncols()
    }

    /// Appends rows `a x <= b`.
    pub fn push_rows(&mut self, a: &DMatrix<f64>, b: &DVector<f64>) {
        let (m0, n) = self.g.shape();
        let mut g = DMatrix::zeros(m0 + a.nrows(), n);
        g.view_mut((0, 0), (m0, n)).copy_from(&self.g);
        g.view_mut((m0, 0), (a.nrows(), n)).copy_from(a);
        self.g = g;
        let mut h = DVector::zeros(m0 + b.len());
        h.rows_mut(0, m0).copy_from(&self.h);
        h.rows_mut(m0, b.len()).copy_from(b);
        self.h = h;
    }

    /// Restricts the search space and folds everything into the reduced variables.
    pub fn prepare(mut self) -> Result<Prepared> {
        let Some((x0, basis)) = self.affine.take() else {
            return Ok(Prepared {
                c_pairs: self.pair_rows.clone(),
                form: self,
                x0: None,
            });
        };
        // bounds become rows so they can be restricted like everything else
        let n = self.n_x();
        let mut bound_rows = Vec::new();
        let mut bound_rhs = Vec::new();
        for j in 0..n {
            if self.lower[j].is_finite() {
                bound_rows.push((j, -1.0));
                bound_rhs.push(-self.lower[j]);
            }
            if self.upper[j].is_finite() {
                bound_rows.push((j, 1.0));
                bound_rhs.push(self.upper[j]);
            }
        }
        if !bound_rows.is_empty() {
            let mut a = DMatrix::zeros(bound_rows.len(), n);
            for (r, &(j, s)) in bound_rows.iter().enumerate() {
                a[(r, j)] = s;
            }
            self.push_rows(&a, &DVector::from_vec(bound_rhs));
        }

        let g_u = &self.g * &basis;
        let h_u = &self.h - &self.g * &x0;
        let mut keep = Vec::new();
        for r in 0..g_u.nrows() {
            let full = self.g.row(r).norm();
            if g_u.row(r).norm() > CONSTANT_ROW_TOL * full {
                keep.push(r);
            } else if h_u[r] < -CONSTANT_ROW_SLACK * (1.0 + self.h[r].abs()) {
                return Err(Error::InfeasibleTemplates);
            }
        }
        let nu = basis.ncols();
        let reduced = Formulation {
            pair_rows: &self.pair_rows * &basis,
            sign: self.sign,
            g: g_u.select_rows(&keep),
            h: DVector::from_iterator(keep.len(), keep.iter().map(|&r| h_u[r])),
            lower: DVector::from_element(nu, f64::NEG_INFINITY),
            upper: DVector::from_element(nu, f64::INFINITY),
            extra_cost: basis.tr_mul(&self.extra_cost),
            affine: None,
        };
        Ok(Prepared {
            c_pairs: reduced.pair_rows.clone(),
            form: reduced,
            x0: Some((x0, basis)),
        })
    }
}

pub(crate) struct Prepared {
    form: Formulation,
    c_pairs: DMatrix<f64>,
    x0: Option<(DVector<f64>, DMatrix<f64>)>,
}

/// Minimizer of one weighted program.
pub(crate) struct Solved {
    pub x: DVector<f64>,
    pub iterations: usize,
}

impl Prepared {
    fn lift(&self, u: &DVector<f64>) -> DVector<f64> {
        match &self.x0 {
            Some((x0, basis)) => x0 + basis * u,
            None => u.clone(),
        }
    }

    /// Solves with pair weights `w`; `w = None` drops the ℓ1 term entirely.
    pub fn solve(&self, w: Option<&DVector<f64>>, cfg: &RecoveryConfig) -> Result<Solved> {
        let f = &self.form;
        let nu = f.n_x();
        if nu == 0 {
            return Ok(Solved {
                x: self.lift(&DVector::zeros(0)),
                iterations: 0,
            });
        }
        let mut c = f.extra_cost.clone();
        if let Some(w) = w {
            c += self.c_pairs.tr_mul(w) * (2.0 * f.sign);
        }
        let lp = LinearProgram::new(c)
            .with_inequalities(f.g.clone(), f.h.clone())
            .with_bounds(f.lower.clone(), f.upper.clone());
        let sol = lp_solve_with(&lp, &cfg.lp)?;
        match sol.status {
            LpStatus::Optimal => Ok(Solved {
                x: self.lift(&sol.x),
                iterations: sol.iterations,
            }),
            LpStatus::Infeasible => Err(Error::InfeasibleTemplates),
            LpStatus::Unbounded => Err(Error::NumericalFailure("recovery program is unbounded".into())),
            LpStatus::NumericalFailure => Err(Error::NumericalFailure(format!(
                "interior-point solver stalled after {} iterations",
                sol.iterations
            ))),
        }
    }
}

/// Outcome of the reweighted ℓ1 loop.
pub(crate) struct Reweighted {
    pub x: DVector<f64>,
    pub trace: Vec<f64>,
    pub support: Vec<usize>,
    pub lp_iterations: usize,
}

/// Iteratively reweighted ℓ1: start from unit weights, then `ω_ij = 1 / (|S_ij| + δ)` with
/// `S` from the previous solve. Stops after `max_reweight` solves or once successive
/// off-diagonal entries agree to `early_stop`.
pub(crate) fn reweighted(form: Formulation, cfg: &RecoveryConfig) -> Result<Reweighted> {
    let pair_rows = form.pair_rows.clone();
    let prepared = form.prepare()?;
    let mut w = DVector::from_element(pair_rows.nrows(), 1.0);
    let mut trace = Vec::new();
    let mut support = Vec::new();
    let mut lp_iterations = 0;
    let mut prev: Option<DVector<f64>> = None;
    let mut x = DVector::zeros(pair_rows.ncols());
    for round in 0..cfg.max_reweight {
        let solved = match prepared.solve(Some(&w), cfg) {
            Ok(solved) => solved,
            // a later round only refines a feasible point, so keep the last one
            Err(Error::NumericalFailure(msg)) if round > 0 => {
                warn!("reweighting stopped after {round} solves: {msg}");
                break;
            }
            Err(e) => return Err(e),
        };
        lp_iterations += solved.iterations;
        x = solved.x;
        let s = &pair_rows * &x;
        trace.push(2.0 * w.iter().zip(s.iter()).map(|(wi, si)| wi * si.abs()).sum::<f64>());
        support.push(2 * s.iter().filter(|v| v.abs() > cfg.support_tol).count());
        let settled = prev.as_ref().is_some_and(|p| (p - &s).amax() < cfg.early_stop);
        if settled {
            break;
        }
        w = s.map(|v| 1.0 / (v.abs() + cfg.delta));
        prev = Some(s);
    }
    Ok(Reweighted {
        x,
        trace,
        support,
        lp_iterations,
    })
}

/// Smallest value of the last variable (the band half-width) for which the program is
/// feasible, with all other costs zero.
pub(crate) fn min_band(form: Formulation, cfg: &RecoveryConfig) -> Result<f64> {
    let n = form.n_x();
    let prepared = form.prepare()?;
    let x = prepared.solve(None, cfg)?.x;
    Ok(x[n - 1].max(0.0))
}

/// Noisy-template program: the off-diagonal entries of `S` are variables of their own, tied to
/// `V diag(λ) Vᵀ` only through the element-wise band `|S − V diag(λ) Vᵀ| <= ε`.
///
/// Variable layout: `λ` over `lam_cols`, then one entry per pair, then `λ_min` when `eta > 0`,
/// then `ε` itself when `epsilon` is `None` (the minimum-band program).
pub(crate) struct BandSpec<'a> {
    pub v: &'a DMatrix<f64>,
    pub lam_cols: Vec<usize>,
    pub lam_lower: f64,
    pub entry_range: (f64, f64),
    /// Required diagonal of `S`.
    pub diag: DVector<f64>,
    /// Impose `S1 >= 1` on the off-diagonal entries.
    pub row_sums: bool,
    pub sign: f64,
    pub epsilon: Option<f64>,
    pub eta: f64,
}

pub(crate) struct BandLayout {
    pub n_lam: usize,
    pub n_pairs: usize,
    pub lambda_min: Option<usize>,
}

impl BandLayout {
    pub fn entries(&self, x: &DVector<f64>) -> DVector<f64> {
        x.rows(self.n_lam, self.n_pairs).into_owned()
    }
}

pub(crate) fn band_formulation(spec: &BandSpec) -> (Formulation, BandLayout) {
    let v = spec.v;
    let n = v.nrows();
    let pairs = pairs(n);
    let (nl, np) = (spec.lam_cols.len(), pairs.len());
    let with_min = spec.eta > 0.0 && spec.epsilon.is_some();
    let lambda_min = with_min.then_some(nl + np);
    let eps_col = spec.epsilon.is_none().then_some(nl + np + usize::from(with_min));
    let nx = nl + np + usize::from(with_min) + usize::from(eps_col.is_some());
    let fixed_eps = spec.epsilon.unwrap_or(0.0);

    let mut pair_rows = DMatrix::zeros(np, nx);
    for p in 0..np {
        pair_rows[(p, nl + p)] = 1.0;
    }
    let mut f = Formulation::new(pair_rows, spec.sign);

    let b = pair_products(v, &spec.lam_cols);
    let n_rows = 2 * np + 2 * n + if spec.row_sums { n } else { 0 } + if with_min { nl } else { 0 };
    let mut g = DMatrix::zeros(n_rows, nx);
    let mut h = DVector::zeros(n_rows);
    let mut r = 0;
    for p in 0..np {
        for s in [1.0, -1.0] {
            g[(r, nl + p)] = s;
            for k in 0..nl {
                g[(r, k)] = -s * b[(p, k)];
            }
            if let Some(e) = eps_col {
                g[(r, e)] = -1.0;
            }
            h[r] = fixed_eps;
            r += 1;
        }
    }
    for i in 0..n {
        for s in [1.0, -1.0] {
            for (k, &col) in spec.lam_cols.iter().enumerate() {
                g[(r, k)] = s * v[(i, col)] * v[(i, col)];
            }
            if let Some(e) = eps_col {
                g[(r, e)] = -1.0;
            }
            h[r] = s * spec.diag[i] + fixed_eps;
            r += 1;
        }
    }
    if spec.row_sums {
        for (p, &(i, j)) in pairs.iter().enumerate() {
            g[(r + i, nl + p)] = -1.0;
            g[(r + j, nl + p)] = -1.0;
        }
        for i in 0..n {
            h[r + i] = -1.0;
        }
        r += n;
    }
    if let Some(m) = lambda_min {
        for k in 0..nl {
            g[(r, m)] = 1.0;
            g[(r, k)] = -1.0;
            r += 1;
        }
        f.extra_cost[m] = -spec.eta;
    }
    debug_assert_eq!(r, n_rows);
    f.push_rows(&g, &h);

    for k in 0..nl {
        f.lower[k] = spec.lam_lower;
    }
    for p in 0..np {
        f.lower[nl + p] = spec.entry_range.0;
        f.upper[nl + p] = spec.entry_range.1;
    }
    if let Some(e) = eps_col {
        f.lower[e] = 0.0;
        f.upper[e] = 1.0;
        f.extra_cost[e] = 1.0;
    }
    (
        f,
        BandLayout {
            n_lam: nl,
            n_pairs: np,
            lambda_min,
        },
    )
}

/// Symmetric matrix with the given diagonal and upper-triangle entries in [`pairs`] order.
pub(crate) fn assemble(diag: &DVector<f64>, entries: &DVector<f64>) -> DMatrix<f64> {
    let n = diag.len();
    let mut s = DMatrix::from_diagonal(diag);
    for (p, (i, j)) in pairs(n).into_iter().enumerate() {
        s[(i, j)] = entries[p];
        s[(j, i)] = entries[p];
    }
    s
}

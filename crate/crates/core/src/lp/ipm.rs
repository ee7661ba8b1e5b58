//! Homogeneous self-dual interior-point method with Mehrotra predictor-corrector steps.
//!
//! The solver core works on the inequality form
//!
//! ```text
//!     minimize cᵀx  subject to  Gx + s = h, s >= 0,  Ax = b
//! ```
//!
//! with free `x`. Variable bounds become rows of `G`; fixed variables become rows of `A`.
//! Equality rows are orthonormalized (dropping dependent ones) before the iteration starts,
//! and every row of `G` is scaled to unit norm.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{Certificate, LinearProgram, LpResiduals, LpSolution, LpStatus};

#[derive(Debug, Clone, Copy)]
pub struct IpmSettings {
    pub max_iterations: usize,
    /// Primal/dual feasibility tolerance (relative).
    pub feas_tol: f64,
    /// Duality gap tolerance, relative to `1 + |cᵀx|`.
    pub gap_tol: f64,
    /// Tolerance for accepting an infeasibility certificate.
    pub infeas_tol: f64,
    /// Fraction of the distance to the boundary taken per step.
    pub step_fraction: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        IpmSettings {
            max_iterations: 200,
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            infeas_tol: 1e-8,
            step_fraction: 0.99,
        }
    }
}

/// Accepted accuracy when the iteration stalls before reaching the nominal tolerances.
const FALLBACK_TOL: f64 = 1e-7;
/// Relative residual under which an equality row counts as dependent on earlier rows.
const DEPENDENT_ROW_TOL: f64 = 1e-10;

struct SparseRows {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| r.iter().map(|&(j, v)| v * x[j]).sum::<f64>()),
        )
    }

    fn tr_mul(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (r, row) in self.rows.iter().enumerate() {
            let zr = z[r];
            if zr != 0.0 {
                for &(j, v) in row {
                    out[j] += v * zr;
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
enum RowOrigin {
    Ineq(usize),
    Lower(usize),
    Upper(usize),
}

struct Standardized {
    /// original column index of each kept column
    cols: Vec<usize>,
    c: DVector<f64>,
    c_scale: f64,
    g: SparseRows,
    h: DVector<f64>,
    origin: Vec<RowOrigin>,
    row_scale: Vec<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    /// `a = t · a_full`, where `a_full` stacks `a_eq` and one unit row per fixed variable
    t: DMatrix<f64>,
    fixed: Vec<usize>,
    /// unused free columns with nonzero cost
    unbounded_cols: Vec<usize>,
}

enum Presolved {
    Ready(Standardized),
    Infeasible {
        y_full: DVector<f64>,
        z_rows: Vec<(RowOrigin, f64)>,
        fixed: Vec<usize>,
    },
}

fn presolve(p: &LinearProgram) -> Presolved {
    let n = p.n_vars();
    let fixed: Vec<usize> = (0..n).filter(|&j| p.lower[j] == p.upper[j]).collect();

    // columns that no constraint touches
    let used = |j: usize| {
        p.a_eq.column(j).iter().any(|&v| v != 0.0)
            || p.a_in.column(j).iter().any(|&v| v != 0.0)
            || p.lower[j].is_finite()
            || p.upper[j].is_finite()
    };
    let cols: Vec<usize> = (0..n).filter(|&j| used(j)).collect();
    let unbounded_cols: Vec<usize> = (0..n).filter(|&j| !used(j) && p.c[j] != 0.0).collect();
    let mut col_pos = vec![usize::MAX; n];
    for (k, &j) in cols.iter().enumerate() {
        col_pos[j] = k;
    }
    let nk = cols.len();

    // inequality rows
    let mut rows = Vec::new();
    let mut h = Vec::new();
    let mut origin = Vec::new();
    let mut row_scale = Vec::new();
    let mut zero_row_violations = Vec::new();
    let mut push = |entries: Vec<(usize, f64)>, rhs: f64, o: RowOrigin| {
        let norm = entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            if rhs < 0.0 {
                zero_row_violations.push((o, 1.0));
            }
            return;
        }
        rows.push(entries.into_iter().map(|(j, v)| (j, v / norm)).collect::<Vec<_>>());
        h.push(rhs / norm);
        origin.push(o);
        row_scale.push(norm);
    };
    for (r, row) in p.a_in.row_iter().enumerate() {
        let entries: Vec<(usize, f64)> = row
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (col_pos[j], v))
            .collect();
        push(entries, p.b_in[r], RowOrigin::Ineq(r));
    }
    for j in 0..n {
        if p.lower[j] == p.upper[j] {
            continue;
        }
        if p.lower[j].is_finite() {
            push(vec![(col_pos[j], -1.0)], -p.lower[j], RowOrigin::Lower(j));
        }
        if p.upper[j].is_finite() {
            push(vec![(col_pos[j], 1.0)], p.upper[j], RowOrigin::Upper(j));
        }
    }
    let p_full = p.a_eq.nrows() + fixed.len();
    if let Some(&(o, w)) = zero_row_violations.first() {
        return Presolved::Infeasible {
            y_full: DVector::zeros(p_full),
            z_rows: vec![(o, w)],
            fixed,
        };
    }
    // an infeasible bound pair
    for j in 0..n {
        if p.lower[j] > p.upper[j] {
            return Presolved::Infeasible {
                y_full: DVector::zeros(p_full),
                z_rows: vec![(RowOrigin::Lower(j), 1.0), (RowOrigin::Upper(j), 1.0)],
                fixed,
            };
        }
    }

    // equality rows: orthonormalize with two Gram-Schmidt passes, dropping dependent rows
    let mut a_full = DMatrix::zeros(p_full, nk);
    let mut b_full = DVector::zeros(p_full);
    for r in 0..p.a_eq.nrows() {
        for (k, &j) in cols.iter().enumerate() {
            a_full[(r, k)] = p.a_eq[(r, j)];
        }
        b_full[r] = p.b_eq[r];
    }
    for (i, &j) in fixed.iter().enumerate() {
        a_full[(p.a_eq.nrows() + i, col_pos[j])] = 1.0;
        b_full[p.a_eq.nrows() + i] = p.lower[j];
    }
    let b_scale = b_full.amax().max(1.0);
    let mut q_rows: Vec<DVector<f64>> = Vec::new();
    let mut t_rows: Vec<DVector<f64>> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    for i in 0..p_full {
        let mut a = a_full.row(i).transpose();
        let mut t = DVector::zeros(p_full);
        t[i] = 1.0;
        let mut beta = b_full[i];
        let norm0 = a.norm();
        for _ in 0..2 {
            for k in 0..q_rows.len() {
                let coef = q_rows[k].dot(&a);
                a.axpy(-coef, &q_rows[k], 1.0);
                t.axpy(-coef, &t_rows[k], 1.0);
                beta -= coef * betas[k];
            }
        }
        let norm = a.norm();
        if norm <= DEPENDENT_ROW_TOL * norm0.max(f64::MIN_POSITIVE) || norm0 == 0.0 {
            if beta.abs() > 1e-9 * b_scale * t.lp_norm(1) {
                // tᵀa_full ≈ 0 while tᵀb ≠ 0
                let y = t * (-beta.signum());
                return Presolved::Infeasible {
                    y_full: y,
                    z_rows: Vec::new(),
                    fixed,
                };
            }
            continue;
        }
        q_rows.push(a / norm);
        t_rows.push(t / norm);
        betas.push(beta / norm);
    }
    let pk = q_rows.len();
    let mut a = DMatrix::zeros(pk, nk);
    let mut t = DMatrix::zeros(pk, p_full);
    for k in 0..pk {
        a.set_row(k, &q_rows[k].transpose());
        t.set_row(k, &t_rows[k].transpose());
    }
    let b = DVector::from_vec(betas);

    let c_raw = DVector::from_iterator(nk, cols.iter().map(|&j| p.c[j]));
    let c_scale = match c_raw.amax() {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    Presolved::Ready(Standardized {
        cols,
        c: c_raw / c_scale,
        c_scale,
        g: SparseRows { n: nk, rows },
        h: DVector::from_vec(h),
        origin,
        row_scale,
        a,
        b,
        t,
        fixed,
        unbounded_cols,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CoreStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    Failed,
}

struct CoreOutcome {
    status: CoreStatus,
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    iterations: usize,
}

struct Kkt<'a> {
    g: &'a SparseRows,
    a: &'a DMatrix<f64>,
    /// `s/z`
    d: DVector<f64>,
    chol_k: Cholesky<f64, Dyn>,
    kinv_at: DMatrix<f64>,
    chol_s: Option<Cholesky<f64, Dyn>>,
}

impl<'a> Kkt<'a> {
    /// Factors `M = [0 Aᵀ Gᵀ; −A 0 0; −G 0 D]` through `K = GᵀD⁻¹G + AᵀA` and the Schur
    /// complement `A K⁻¹ Aᵀ`. Falls back to growing diagonal regularization when `K` is singular.
    fn factor(g: &'a SparseRows, a: &'a DMatrix<f64>, d: DVector<f64>) -> Option<Self> {
        let n = g.n;
        let mut k = a.tr_mul(a);
        for (r, row) in g.rows.iter().enumerate() {
            let w = 1.0 / d[r];
            for &(i, vi) in row {
                let wi = w * vi;
                for &(j, vj) in row {
                    k[(i, j)] += wi * vj;
                }
            }
        }
        let scale = (0..n).map(|i| k[(i, i)]).fold(0.0, f64::max).max(1.0);
        if !scale.is_finite() {
            return None;
        }
        let mut reg = 0.0;
        let chol_k = loop {
            let mut kr = k.clone();
            for i in 0..n {
                kr[(i, i)] += reg;
            }
            if let Some(ch) = Cholesky::new(kr) {
                break ch;
            }
            reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
            if !(reg <= 1e-4 * scale) {
                return None;
            }
        };
        let kinv_at = chol_k.solve(&a.transpose());
        let chol_s = if a.nrows() > 0 {
            let s = a * &kinv_at;
            let s_scale = s.diagonal().amax().max(f64::MIN_POSITIVE);
            if !s_scale.is_finite() {
                return None;
            }
            let mut reg = 0.0;
            loop {
                let mut sr = s.clone();
                for i in 0..s.nrows() {
                    sr[(i, i)] += reg;
                }
                if let Some(ch) = Cholesky::new(sr) {
                    break Some(ch);
                }
                reg = if reg == 0.0 { 1e-14 * s_scale } else { reg * 100.0 };
                if !(reg <= 1e-4 * s_scale) {
                    return None;
                }
            }
        } else {
            None
        };
        Some(Kkt {
            g,
            a,
            d,
            chol_k,
            kinv_at,
            chol_s,
        })
    }

    fn solve_once(&self, f1: &DVector<f64>, f2: &DVector<f64>, f3: &DVector<f64>) -> [DVector<f64>; 3] {
        let dinv_f3 = f3.component_div(&self.d);
        let g1 = f1 - self.g.tr_mul(&dinv_f3);
        let g2 = -f2;
        let rhs = &g1 + self.a.tr_mul(&g2);
        let t = self.chol_k.solve(&rhs);
        let (wx, wy) = match &self.chol_s {
            Some(cs) => {
                let wy = cs.solve(&(self.a * &t - &g2));
                (t - &self.kinv_at * &wy, wy)
            }
            None => (t, DVector::zeros(0)),
        };
        let wz = (f3 + self.g.mul(&wx)).component_div(&self.d);
        [wx, wy, wz]
    }

    fn apply(&self, w: &[DVector<f64>; 3]) -> [DVector<f64>; 3] {
        let [wx, wy, wz] = w;
        [
            self.a.tr_mul(wy) + self.g.tr_mul(wz),
            -(self.a * wx),
            -self.g.mul(wx) + wz.component_mul(&self.d),
        ]
    }

    /// Solves `M w = f` with two rounds of iterative refinement.
    fn solve(&self, f1: &DVector<f64>, f2: &DVector<f64>, f3: &DVector<f64>) -> [DVector<f64>; 3] {
        let mut w = self.solve_once(f1, f2, f3);
        for _ in 0..2 {
            let mw = self.apply(&w);
            let r1 = f1 - &mw[0];
            let r2 = f2 - &mw[1];
            let r3 = f3 - &mw[2];
            let dw = self.solve_once(&r1, &r2, &r3);
            for (wi, di) in w.iter_mut().zip(dw.iter()) {
                *wi += di;
            }
        }
        w
    }
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&x, &d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

fn scalar_step(v: f64, dv: f64) -> f64 {
    if dv < 0.0 {
        -v / dv
    } else {
        f64::INFINITY
    }
}

fn norm_inf(v: &DVector<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.amax()
    }
}

fn shift_positive(v: &mut DVector<f64>) {
    if v.is_empty() {
        return;
    }
    let alpha = -v.min();
    if alpha >= 0.0 {
        v.add_scalar_mut(1.0 + alpha);
    }
}

fn core_solve(
    c: &DVector<f64>,
    g: &SparseRows,
    h: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    settings: &IpmSettings,
) -> CoreOutcome {
    let n = c.len();
    let m = g.len();
    let p = a.nrows();
    let failed = |iterations| CoreOutcome {
        status: CoreStatus::Failed,
        x: DVector::zeros(n),
        y: DVector::zeros(p),
        z: DVector::zeros(m),
        iterations,
    };

    // starting point from two least-squares solves with D = I
    let Some(kkt0) = Kkt::factor(g, a, DVector::from_element(m, 1.0)) else {
        return failed(0);
    };
    let [mut x, _, wz] = kkt0.solve(&DVector::zeros(n), &(-b), &(-h));
    let mut s = -wz;
    shift_positive(&mut s);
    let [_, mut y, mut z] = kkt0.solve(&(-c), &DVector::zeros(p), &DVector::zeros(m));
    shift_positive(&mut z);
    let mut tau = 1.0;
    let mut kappa = 1.0;
    drop(kkt0);

    let b_norm = norm_inf(b).max(norm_inf(h));
    let c_norm = norm_inf(c);
    let mut best_fallback: Option<(f64, DVector<f64>, DVector<f64>, DVector<f64>)> = None;
    let mut iterations = 0;

    loop {
        let gx = g.mul(&x);
        let f1 = a.tr_mul(&y) + g.tr_mul(&z) + c * tau;
        let f2 = b * tau - a * &x;
        let f3 = h * tau - &gx - &s;
        let cx = c.dot(&x);
        let by_hz = b.dot(&y) + h.dot(&z);
        let f4 = -cx - by_hz - kappa;

        let pres = norm_inf(&f2).max(norm_inf(&f3)) / tau / (1.0 + b_norm);
        let dres = norm_inf(&f1) / tau / (1.0 + c_norm);
        let pcost = cx / tau;
        let gap = s.dot(&z) / (tau * tau);
        let gap_ok = gap <= settings.gap_tol * (1.0 + pcost.abs());
        if pres <= settings.feas_tol && dres <= settings.feas_tol && gap_ok {
            return CoreOutcome {
                status: CoreStatus::Optimal,
                x: x / tau,
                y: y / tau,
                z: z / tau,
                iterations,
            };
        }
        let measure = pres.max(dres).max(gap / (1.0 + pcost.abs()));
        if measure <= FALLBACK_TOL && best_fallback.as_ref().is_none_or(|(b, ..)| measure < *b) {
            best_fallback = Some((measure, &x / tau, &y / tau, &z / tau));
        }
        if by_hz < 0.0 {
            let resid = norm_inf(&(a.tr_mul(&y) + g.tr_mul(&z)));
            if resid <= settings.infeas_tol * -by_hz {
                return CoreOutcome {
                    status: CoreStatus::PrimalInfeasible,
                    x,
                    y: y / -by_hz,
                    z: z / -by_hz,
                    iterations,
                };
            }
        }
        if cx < 0.0 {
            let resid = norm_inf(&(a * &x)).max(norm_inf(&(&gx + &s)));
            if resid <= settings.infeas_tol * -cx {
                return CoreOutcome {
                    status: CoreStatus::DualInfeasible,
                    x: x / -cx,
                    y,
                    z,
                    iterations,
                };
            }
        }
        if iterations >= settings.max_iterations {
            break;
        }
        iterations += 1;

        let d = s.component_div(&z);
        let Some(kkt) = Kkt::factor(g, a, d) else {
            break;
        };
        let [vx, vy, vz] = kkt.solve(c, b, h);
        let qv = c.dot(&vx) + b.dot(&vy) + h.dot(&vz) + kappa / tau;

        let mu = (s.dot(&z) + tau * kappa) / (m as f64 + 1.0);
        let direction = |eta: f64, ds: &DVector<f64>, dk: f64| {
            let r1 = &f1 * -eta;
            let r2 = &f2 * -eta;
            let r3 = &f3 * -eta + ds.component_div(&z);
            let r4 = -eta * f4 + dk / tau;
            let [ux, uy, uz] = kkt.solve(&r1, &r2, &r3);
            let dtau = (r4 + c.dot(&ux) + b.dot(&uy) + h.dot(&uz)) / qv;
            let dx = ux - &vx * dtau;
            let dy = uy - &vy * dtau;
            let dz = uz - &vz * dtau;
            let dsv = (ds - s.component_mul(&dz)).component_div(&z);
            let dkappa = (dk - kappa * dtau) / tau;
            (dx, dy, dz, dsv, dtau, dkappa)
        };
        let step_to_boundary = |dz: &DVector<f64>, ds: &DVector<f64>, dtau: f64, dkappa: f64| {
            max_step(&s, ds)
                .min(max_step(&z, dz))
                .min(scalar_step(tau, dtau))
                .min(scalar_step(kappa, dkappa))
        };

        // predictor
        let ds_aff = -s.component_mul(&z);
        let dk_aff = -tau * kappa;
        let (_, _, dz_a, ds_a, dtau_a, dkappa_a) = direction(1.0, &ds_aff, dk_aff);
        let alpha_aff = step_to_boundary(&dz_a, &ds_a, dtau_a, dkappa_a).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // corrector
        let ds_c = &ds_aff - ds_a.component_mul(&dz_a) + DVector::from_element(m, sigma * mu);
        let dk_c = dk_aff - dtau_a * dkappa_a + sigma * mu;
        let (dx, dy, dz, dsv, dtau, dkappa) = direction(1.0 - sigma, &ds_c, dk_c);
        let alpha = (settings.step_fraction * step_to_boundary(&dz, &dsv, dtau, dkappa)).min(1.0);
        if !alpha.is_finite() || alpha <= 1e-12 {
            break;
        }

        x.axpy(alpha, &dx, 1.0);
        y.axpy(alpha, &dy, 1.0);
        z.axpy(alpha, &dz, 1.0);
        s.axpy(alpha, &dsv, 1.0);
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        if !(tau.is_finite() && x.iter().all(|v| v.is_finite())) {
            break;
        }
    }

    match best_fallback {
        Some((_, x, y, z)) => CoreOutcome {
            status: CoreStatus::Optimal,
            x,
            y,
            z,
            iterations,
        },
        None => failed(iterations),
    }
}

pub(super) fn solve(p: &LinearProgram, settings: &IpmSettings) -> LpSolution {
    let n = p.n_vars();
    let std = match presolve(p) {
        Presolved::Ready(std) => std,
        Presolved::Infeasible { y_full, z_rows, fixed } => {
            let cert = farkas(p, &fixed, &y_full, &z_rows);
            return finish(p, LpStatus::Infeasible, DVector::zeros(n), 0, None, Some(cert));
        }
    };
    let out = core_solve(&std.c, &std.g, &std.h, &std.a, &std.b, settings);

    let expand = |xk: &DVector<f64>| {
        let mut x = DVector::zeros(n);
        for (k, &j) in std.cols.iter().enumerate() {
            x[j] = xk[k];
        }
        x
    };
    // dual values in terms of the caller's rows
    let unscale_rows = |z: &DVector<f64>, factor: f64| -> Vec<(RowOrigin, f64)> {
        std.origin
            .iter()
            .zip(std.row_scale.iter())
            .zip(z.iter())
            .map(|((&o, &nu), &zr)| (o, zr / nu * factor))
            .collect()
    };

    match out.status {
        CoreStatus::Optimal if !std.unbounded_cols.is_empty() => {
            let mut d = DVector::zeros(n);
            for &j in &std.unbounded_cols {
                d[j] = -p.c[j].signum();
            }
            finish(
                p,
                LpStatus::Unbounded,
                expand(&out.x),
                out.iterations,
                None,
                Some(Certificate::Ray(d)),
            )
        }
        CoreStatus::Optimal => {
            let y_full = std.t.tr_mul(&out.y) * std.c_scale;
            let z_rows = unscale_rows(&out.z, std.c_scale);
            let duals = split_duals(p, &std.fixed, &y_full, &z_rows);
            finish(p, LpStatus::Optimal, expand(&out.x), out.iterations, Some(duals), None)
        }
        CoreStatus::PrimalInfeasible => {
            let y_full = std.t.tr_mul(&out.y);
            let z_rows = unscale_rows(&out.z, 1.0);
            let cert = farkas(p, &std.fixed, &y_full, &z_rows);
            finish(
                p,
                LpStatus::Infeasible,
                DVector::zeros(n),
                out.iterations,
                None,
                Some(cert),
            )
        }
        CoreStatus::DualInfeasible => {
            let d = expand(&out.x);
            let d = &d / d.amax().max(f64::MIN_POSITIVE);
            finish(
                p,
                LpStatus::Unbounded,
                DVector::zeros(n),
                out.iterations,
                None,
                Some(Certificate::Ray(d)),
            )
        }
        CoreStatus::Failed => finish(
            p,
            LpStatus::NumericalFailure,
            expand(&out.x),
            out.iterations,
            None,
            None,
        ),
    }
}

struct Duals {
    y_eq: DVector<f64>,
    z_in: DVector<f64>,
    z_lower: DVector<f64>,
    z_upper: DVector<f64>,
}

fn split_duals(p: &LinearProgram, fixed: &[usize], y_full: &DVector<f64>, z_rows: &[(RowOrigin, f64)]) -> Duals {
    let n = p.n_vars();
    let p_eq = p.a_eq.nrows();
    let mut d = Duals {
        y_eq: y_full.rows(0, p_eq).into_owned(),
        z_in: DVector::zeros(p.a_in.nrows()),
        z_lower: DVector::zeros(n),
        z_upper: DVector::zeros(n),
    };
    for (i, &j) in fixed.iter().enumerate() {
        let yj = y_full[p_eq + i];
        if yj > 0.0 {
            d.z_upper[j] += yj;
        } else {
            d.z_lower[j] -= yj;
        }
    }
    for &(o, z) in z_rows {
        match o {
            RowOrigin::Ineq(r) => d.z_in[r] += z,
            RowOrigin::Lower(j) => d.z_lower[j] += z,
            RowOrigin::Upper(j) => d.z_upper[j] += z,
        }
    }
    d
}

fn farkas(p: &LinearProgram, fixed: &[usize], y_full: &DVector<f64>, z_rows: &[(RowOrigin, f64)]) -> Certificate {
    let d = split_duals(p, fixed, y_full, z_rows);
    Certificate::Farkas {
        y_eq: d.y_eq,
        z_in: d.z_in,
        z_lower: d.z_lower,
        z_upper: d.z_upper,
    }
}

fn bound_term(bound: &DVector<f64>, z: &DVector<f64>) -> f64 {
    bound
        .iter()
        .zip(z.iter())
        .filter(|(_, &zj)| zj != 0.0)
        .map(|(&bj, &zj)| bj * zj)
        .sum()
}

fn finish(
    p: &LinearProgram,
    status: LpStatus,
    x: DVector<f64>,
    iterations: usize,
    duals: Option<Duals>,
    certificate: Option<Certificate>,
) -> LpSolution {
    let n = p.n_vars();
    let objective = p.c.dot(&x);
    let mut residuals = LpResiduals::default();
    let duals = duals.unwrap_or_else(|| Duals {
        y_eq: DVector::zeros(p.a_eq.nrows()),
        z_in: DVector::zeros(p.a_in.nrows()),
        z_lower: DVector::zeros(n),
        z_upper: DVector::zeros(n),
    });
    if status == LpStatus::Optimal {
        let eq = norm_inf(&(&p.b_eq - &p.a_eq * &x));
        let ineq = (&p.a_in * &x - &p.b_in).iter().fold(0.0f64, |acc, &v| acc.max(v));
        let bounds = (0..n).fold(0.0f64, |acc, j| acc.max(p.lower[j] - x[j]).max(x[j] - p.upper[j]));
        residuals.primal = eq.max(ineq).max(bounds);
        let grad = &p.c + p.a_eq.tr_mul(&duals.y_eq) + p.a_in.tr_mul(&duals.z_in) - &duals.z_lower + &duals.z_upper;
        residuals.dual = norm_inf(&grad);
        residuals.dual_objective = -(p.b_eq.dot(&duals.y_eq) + p.b_in.dot(&duals.z_in)
            - bound_term(&p.lower, &duals.z_lower)
            + bound_term(&p.upper, &duals.z_upper));
        residuals.gap = objective - residuals.dual_objective;
    }
    LpSolution {
        status,
        x,
        objective,
        iterations,
        residuals,
        y_eq: duals.y_eq,
        z_in: duals.z_in,
        certificate,
    }
}

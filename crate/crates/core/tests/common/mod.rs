//! Test-only oracles. Nothing here calls the interior-point solver or the Jacobi eigensolver.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectemp::lp::{LinearProgram, LpStatus};

const TOL: f64 = 1e-9;

/// Orthonormal basis of the nullspace of `a` and one solution of `a x = b`, or `None` when
/// the system is inconsistent.
fn affine_hull(a: &DMatrix<f64>, b: &DVector<f64>, n: usize) -> Option<(DVector<f64>, DMatrix<f64>)> {
    if a.nrows() == 0 {
        return Some((DVector::zeros(n), DMatrix::identity(n, n)));
    }
    // pad to at least n rows so the thin SVD exposes every right singular vector
    let rows = a.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let mut rhs = DVector::zeros(rows);
    rhs.rows_mut(0, a.nrows()).copy_from(b);
    let svd = padded.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let x0 = svd.solve(&rhs, 1e-12 * smax.max(1.0)).ok()?;
    if (&padded * &x0 - &rhs).amax() > 1e-8 * (1.0 + rhs.amax()) {
        return None;
    }
    let vt = svd.v_t.unwrap();
    let null: Vec<DVector<f64>> = (0..n)
        .filter(|&k| svd.singular_values[k] <= 1e-10 * smax.max(1.0))
        .map(|k| vt.row(k).transpose())
        .collect();
    let basis = if null.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&null)
    };
    Some((x0, basis))
}

fn subsets(m: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..m {
            if m - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, m, k, cur, f);
            cur.pop();
        }
    }
    rec(0, m, k, &mut Vec::with_capacity(k), f);
}

/// All vertices of `{x : a x = b, g x <= h}` by solving every square active set.
/// Requires the polyhedron to be pointed.
pub fn enumerate_vertices(a: &DMatrix<f64>, b: &DVector<f64>, g: &DMatrix<f64>, h: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = g.ncols().max(a.ncols());
    let Some((x0, basis)) = affine_hull(a, b, n) else {
        return Vec::new();
    };
    let k = basis.ncols();
    let gr = g * &basis;
    let hr = h - g * &x0;
    let feasible = |x: &DVector<f64>| (g * x - h).iter().all(|&v| v <= TOL * (1.0 + h.amax()));
    let mut out = Vec::new();
    if k == 0 {
        if feasible(&x0) {
            out.push(x0);
        }
        return out;
    }
    subsets(g.nrows(), k, &mut |active| {
        let ga = gr.select_rows(active);
        let ha = DVector::from_iterator(k, active.iter().map(|&i| hr[i]));
        let svd = ga.svd(true, true);
        if svd.singular_values.min() <= 1e-10 * svd.singular_values.max().max(1.0) {
            return;
        }
        let t = svd.solve(&ha, 0.0).unwrap();
        let x = &x0 + &basis * t;
        if feasible(&x) {
            out.push(x);
        }
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Oracle {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

impl Oracle {
    pub fn status(self) -> LpStatus {
        match self {
            Oracle::Optimal(_) => LpStatus::Optimal,
            Oracle::Infeasible => LpStatus::Infeasible,
            Oracle::Unbounded => LpStatus::Unbounded,
        }
    }
}

/// Brute-force optimum of a program whose variables all carry a finite lower bound.
pub fn brute_force(lp: &LinearProgram) -> Oracle {
    let n = lp.n_vars();
    assert!(
        lp.lower.iter().all(|l| l.is_finite()),
        "oracle needs a pointed polyhedron"
    );
    let mut rows: Vec<DVector<f64>> = lp.a_in.row_iter().map(|r| r.transpose()).collect();
    let mut rhs: Vec<f64> = lp.b_in.iter().copied().collect();
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = -1.0;
        rows.push(e.clone());
        rhs.push(-lp.lower[j]);
        if lp.upper[j].is_finite() {
            rows.push(-e);
            rhs.push(lp.upper[j]);
        }
    }
    let g = DMatrix::from_rows(&rows.iter().map(|r| r.transpose()).collect::<Vec<_>>());
    let h = DVector::from_vec(rhs);
    let vertices = enumerate_vertices(&lp.a_eq, &lp.b_eq, &g, &h);
    if vertices.is_empty() {
        return Oracle::Infeasible;
    }
    // extreme rays of the recession cone, normalized by 1ᵀd = 1
    let mut a_dir = DMatrix::zeros(lp.a_eq.nrows() + 1, n);
    a_dir.view_mut((0, 0), (lp.a_eq.nrows(), n)).copy_from(&lp.a_eq);
    a_dir.row_mut(lp.a_eq.nrows()).fill(1.0);
    let mut b_dir = DVector::zeros(lp.a_eq.nrows() + 1);
    b_dir[lp.a_eq.nrows()] = 1.0;
    let rays = enumerate_vertices(&a_dir, &b_dir, &g, &DVector::zeros(g.nrows()));
    if rays.iter().any(|d| lp.c.dot(d) < -1e-9) {
        return Oracle::Unbounded;
    }
    Oracle::Optimal(vertices.iter().map(|v| lp.c.dot(v)).fold(f64::INFINITY, f64::min))
}

/// Random program with at most 6 variables and 8 general constraints, all variables
/// nonnegative and some boxed.
pub fn random_lp(seed: u64) -> LinearProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=6);
    let m = rng.random_range(1..=8);
    let m_eq = rng.random_range(0..=m.min(n - 1).min(2));
    let m_in = m - m_eq;
    let unif = |rng: &mut ChaCha8Rng, k: usize| DVector::from_iterator(k, (0..k).map(|_| rng.random_range(-1.0..1.0)));
    let c = unif(&mut rng, n);
    let a_eq = DMatrix::from_fn(m_eq, n, |_, _| rng.random_range(-1.0..1.0));
    let a_in = DMatrix::from_fn(m_in, n, |_, _| rng.random_range(-1.0..1.0));
    // plant a feasible point most of the time
    let (b_eq, b_in) = if rng.random_bool(0.7) {
        let x = DVector::from_iterator(n, (0..n).map(|_| rng.random_range(0.0..1.0)));
        let slack = DVector::from_iterator(m_in, (0..m_in).map(|_| rng.random_range(0.0..0.5)));
        (&a_eq * &x, &a_in * &x + slack)
    } else {
        (unif(&mut rng, m_eq), unif(&mut rng, m_in))
    };
    let upper = DVector::from_iterator(
        n,
        (0..n).map(|_| {
            if rng.random_bool(0.3) {
                rng.random_range(1.0..3.0)
            } else {
                f64::INFINITY
            }
        }),
    );
    LinearProgram::new(c)
        .with_equalities(a_eq, b_eq)
        .with_inequalities(a_in, b_in)
        .with_bounds(DVector::zeros(n), upper)
}

//! Dense linear programming.
//!
//! Problems are stated as
//!
//! ```text
//!     minimize    cᵀx
//!     subject to  a_eq x  = b_eq
//!                 a_in x <= b_in
//!                 lower <= x <= upper      (±∞ allowed)
//! ```
//!
//! and solved by a primal-dual interior-point method on the homogeneous self-dual embedding,
//! which either returns an optimal pair or a certificate of primal or dual infeasibility.
//! On problems with a non-unique optimum the iterates follow the central path, so the returned
//! point approaches the analytic center of the optimal face.

mod ipm;

use std::io::{self, Write};
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use ipm::IpmSettings;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub c: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl LinearProgram {
    /// Unconstrained program over free variables.
    pub fn new(c: DVector<f64>) -> Self {
        let n = c.len();
        LinearProgram {
            c,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, n),
            b_in: DVector::zeros(0),
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_in = a;
        self.b_in = b;
        self
    }

    pub fn with_bounds(mut self, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        let check = |expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected, found })
            }
        };
        check(n, self.a_eq.ncols())?;
        check(self.a_eq.nrows(), self.b_eq.len())?;
        check(n, self.a_in.ncols())?;
        check(self.a_in.nrows(), self.b_in.len())?;
        check(n, self.lower.len())?;
        check(n, self.upper.len())?;
        if self.c.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("objective has non-finite coefficients".into()));
        }
        let finite = |m: &DMatrix<f64>| m.iter().all(|x| x.is_finite());
        if !finite(&self.a_eq) || !finite(&self.a_in) {
            return Err(Error::InvalidParameter(
                "constraint matrix has non-finite entries".into(),
            ));
        }
        if self.b_eq.iter().chain(self.b_in.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("right-hand side has non-finite entries".into()));
        }
        if self.lower.iter().any(|&l| l == f64::INFINITY) || self.upper.iter().any(|&u| u == f64::NEG_INFINITY) {
            return Err(Error::InvalidParameter(
                "bounds must not exclude every real value".into(),
            ));
        }
        Ok(())
    }

    /// Writes the program in a fixed-column text layout: a header, then one `SECTION` per
    /// array with every value right-aligned in a 24-character `%.16e` field. Matrices are
    /// written row-major, one row per line. Infinite bounds print as `inf`/`-inf`.
    pub fn dump(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(
            w,
            "# spectemp LP v1: minimize c'x s.t. A_EQ x = B_EQ, A_IN x <= B_IN, LOWER <= x <= UPPER"
        )?;
        writeln!(w, "N_VARS {}", self.n_vars())?;
        writeln!(w, "N_EQ {}", self.a_eq.nrows())?;
        writeln!(w, "N_IN {}", self.a_in.nrows())?;
        let field = |x: f64| {
            if x.is_infinite() {
                format!("{:>24}", if x > 0.0 { "inf" } else { "-inf" })
            } else {
                format!("{x:>24.16e}")
            }
        };
        let vector = |w: &mut dyn Write, name: &str, v: &DVector<f64>| -> io::Result<()> {
            writeln!(w, "SECTION {name}")?;
            let line: String = v.iter().map(|&x| field(x)).collect();
            writeln!(w, "{line}")
        };
        vector(&mut w, "C", &self.c)?;
        vector(&mut w, "B_EQ", &self.b_eq)?;
        vector(&mut w, "B_IN", &self.b_in)?;
        vector(&mut w, "LOWER", &self.lower)?;
        vector(&mut w, "UPPER", &self.upper)?;
        for (name, m) in [("A_EQ", &self.a_eq), ("A_IN", &self.a_in)] {
            writeln!(w, "SECTION {name}")?;
            for row in m.row_iter() {
                let line: String = row.iter().map(|&x| field(x)).collect();
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Evidence attached to non-optimal exits.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// Multipliers `(y_eq, z_in, z_lower, z_upper)`, nonnegative except `y_eq`, with
    /// `a_eqᵀy + a_inᵀz_in − z_lower + z_upper ≈ 0` and
    /// `b_eqᵀy + b_inᵀz_in − lowerᵀz_lower + upperᵀz_upper < 0`.
    Farkas {
        y_eq: DVector<f64>,
        z_in: DVector<f64>,
        z_lower: DVector<f64>,
        z_upper: DVector<f64>,
    },
    /// Direction `d` with `cᵀd < 0` that keeps every constraint satisfied.
    Ray(DVector<f64>),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpResiduals {
    /// `max(|b_eq − a_eq x|_∞, max(a_in x − b_in)_+, bound violation)`.
    pub primal: f64,
    /// `|c + a_eqᵀy + a_inᵀz_in − z_lower + z_upper|_∞`.
    pub dual: f64,
    /// `cᵀx − dual_objective`.
    pub gap: f64,
    pub dual_objective: f64,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub residuals: LpResiduals,
    /// Multipliers of the equality rows (sign convention of [`Certificate::Farkas`]).
    pub y_eq: DVector<f64>,
    pub z_in: DVector<f64>,
    pub certificate: Option<Certificate>,
}

#[derive(Debug, Clone, Default)]
pub struct LpOptions {
    pub settings: IpmSettings,
    /// Write every solved program to this file (appending) in the [`LinearProgram::dump`] layout.
    pub dump_path: Option<PathBuf>,
}

pub fn lp_solve(prob: &LinearProgram) -> Result<LpSolution> {
    lp_solve_with(prob, &LpOptions::default())
}

pub fn lp_solve_with(prob: &LinearProgram, opts: &LpOptions) -> Result<LpSolution> {
    prob.validate()?;
    if let Some(path) = &opts.dump_path {
        let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        prob.dump(io::BufWriter::new(file))?;
    }
    Ok(ipm::solve(prob, &opts.settings))
}

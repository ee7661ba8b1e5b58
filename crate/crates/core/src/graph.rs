//! Undirected unweighted graphs and the shift operators built from them.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute per-entry tolerance for symmetry of a shift matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Undirected graph on nodes `0..n` with each edge stored once as `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            edges: BTreeSet::new(),
        }
    }

    /// Builds a graph from unordered pairs. Duplicate pairs (in either orientation) collapse.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Graph::empty(n);
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::InvalidParameter(format!("self-loop at node {i}")));
        }
        if i >= self.n || j >= self.n {
            return Err(Error::InvalidParameter(format!(
                "edge ({i}, {j}) out of range for {} nodes",
                self.n
            )));
        }
        self.edges.insert((i.min(j), i.max(j)));
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    pub fn min_degree(&self) -> usize {
        self.degrees().into_iter().min().unwrap_or(0)
    }

    pub fn is_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = self.n;
        for &(i, j) in &self.edges {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri] = rj;
                components -= 1;
            }
        }
        components == 1
    }

    /// Graph whose edges are the nonzero off-diagonal entries of `m` (|entry| > `tol`).
    pub fn from_support(m: &DMatrix<f64>, tol: f64) -> Self {
        let n = m.nrows();
        let mut g = Graph::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if m[(i, j)].abs() > tol {
                    g.edges.insert((i, j));
                }
            }
        }
        g
    }
}

/// Each unordered pair is included independently with probability `p`.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 nodes, got {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("edge probability {p} not in [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                g.edges.insert((i, j));
            }
        }
    }
    Ok(g)
}

/// Degree vector `d = A·1`.
pub fn degrees(g: &Graph) -> Vec<usize> {
    g.degrees()
}

pub fn is_connected(g: &Graph) -> bool {
    g.is_connected()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShiftKind {
    #[serde(rename = "adjacency")]
    Adjacency,
    #[serde(rename = "nlaplacian")]
    NormalizedLaplacian,
    #[serde(rename = "claplacian")]
    CombinatorialLaplacian,
    #[serde(rename = "symmetric")]
    GenericSymmetric,
}

impl ShiftKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ShiftKind::Adjacency => "adjacency",
            ShiftKind::NormalizedLaplacian => "nlaplacian",
            ShiftKind::CombinatorialLaplacian => "claplacian",
            ShiftKind::GenericSymmetric => "symmetric",
        }
    }
}

impl fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShiftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjacency" => Ok(ShiftKind::Adjacency),
            "nlaplacian" => Ok(ShiftKind::NormalizedLaplacian),
            "claplacian" => Ok(ShiftKind::CombinatorialLaplacian),
            "symmetric" => Ok(ShiftKind::GenericSymmetric),
            other => Err(Error::UnknownMode(other.to_string())),
        }
    }
}

/// Dense symmetric shift operator tagged with its kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftMatrix {
    kind: ShiftKind,
    data: DMatrix<f64>,
}

impl ShiftMatrix {
    /// Wraps a matrix after checking squareness and symmetry. Kind-specific structure is not
    /// enforced here; see [`ShiftMatrix::check_structure`].
    pub fn new(kind: ShiftKind, data: DMatrix<f64>) -> Result<Self> {
        if !data.is_square() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                found: data.ncols(),
            });
        }
        let asym = max_asymmetry(&data);
        if asym > SYMMETRY_TOL * data.amax().max(1.0) {
            return Err(Error::Asymmetric(asym));
        }
        Ok(ShiftMatrix { kind, data })
    }

    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Verifies the kind-specific invariants to within `tol` per entry.
    pub fn check_structure(&self, tol: f64) -> Result<()> {
        let m = &self.data;
        let n = m.nrows();
        let fail = |what: &str| Err(Error::Degenerate(format!("{} violates {what}", self.kind)));
        match self.kind {
            ShiftKind::Adjacency => {
                for i in 0..n {
                    if m[(i, i)].abs() > tol {
                        return fail("zero diagonal");
                    }
                    for j in 0..n {
                        let v = m[(i, j)];
                        if v.abs() > tol && (v - 1.0).abs() > tol {
                            return fail("binary entries");
                        }
                    }
                }
            }
            ShiftKind::NormalizedLaplacian => {
                for i in 0..n {
                    if (m[(i, i)] - 1.0).abs() > tol {
                        return fail("unit diagonal");
                    }
                    for j in 0..n {
                        if i != j && (m[(i, j)] > tol || m[(i, j)] < -1.0 - tol) {
                            return fail("off-diagonal range [-1, 0]");
                        }
                    }
                }
            }
            ShiftKind::CombinatorialLaplacian => {
                for i in 0..n {
                    if m.row(i).sum().abs() > tol * n as f64 {
                        return fail("zero row sums");
                    }
                }
            }
            ShiftKind::GenericSymmetric => {}
        }
        Ok(())
    }
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn adjacency_matrix(g: &Graph) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(g.n, g.n);
    for (i, j) in g.edges() {
        a[(i, j)] = 1.0;
        a[(j, i)] = 1.0;
    }
    a
}

pub fn build_shift(g: &Graph, kind: ShiftKind) -> Result<ShiftMatrix> {
    let a = adjacency_matrix(g);
    let d = g.degrees();
    let data = match kind {
        ShiftKind::Adjacency | ShiftKind::GenericSymmetric => a,
        ShiftKind::CombinatorialLaplacian => {
            let mut l = -a;
            for (i, &di) in d.iter().enumerate() {
                l[(i, i)] = di as f64;
            }
            l
        }
        ShiftKind::NormalizedLaplacian => {
            if let Some(node) = d.iter().position(|&di| di == 0) {
                return Err(Error::DegenerateDegree { node });
            }
            let inv_sqrt: Vec<f64> = d.iter().map(|&di| 1.0 / (di as f64).sqrt()).collect();
            let mut l = DMatrix::identity(g.n, g.n);
            for (i, j) in g.edges() {
                let v = -inv_sqrt[i] * inv_sqrt[j];
                l[(i, j)] = v;
                l[(j, i)] = v;
            }
            l
        }
    };
    Ok(ShiftMatrix { kind, data })
}

pub fn degree_vector(g: &Graph) -> DVector<f64> {
    DVector::from_iterator(g.n, g.degrees().into_iter().map(|d| d as f64))
}

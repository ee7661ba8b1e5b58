//! Batch experiments over random graphs: uniqueness and recovery phase diagrams, rank
//! histograms of `W̃`, and recovery error as a function of the number of observed signals.
//!
//! Every random draw is seeded from the master seed through [`derive_seed`], and trials are
//! collected in a fixed order, so runs are reproducible regardless of thread scheduling.

mod experiments;
pub mod io;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{erdos_renyi, Graph, ShiftKind};
use crate::recovery::{EpsilonMode, RecoveryConfig};

pub use experiments::{
    noisy_graph, run_noisy, run_phase, run_rankhist, run_trials, NoisyRow, PhaseCell, RankBucket, TrialOutcome,
};

/// Draws allowed per trial when looking for a connected graph.
pub const DEFAULT_RESAMPLE_CAP: usize = 1000;

/// Describes how disconnected samples are handled; written into every manifest.
pub const RESAMPLING_POLICY: &str =
    "disconnected Erdos-Renyi samples are redrawn with fresh derived seeds, up to resample_cap draws per trial";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// `(N, p)` cells.
    pub grid: Vec<GridPoint>,
    /// Graphs per cell, or repetitions per sample size in the noisy experiment.
    pub trials: usize,
    pub mode: ShiftKind,
    /// Filter coefficients `h_0, h_1, …` of the diffusion `H = Σ h_l S^l`.
    pub filter: Vec<f64>,
    /// Sample sizes `M` of the noisy experiment.
    pub samples: Vec<usize>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub resample_cap: usize,
    pub recovery: RecoveryConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::phase_defaults()
    }
}

impl ExperimentConfig {
    /// `N ∈ {10, 20, 30}`, `p ∈ {0.1, …, 0.9}`, 50 trials per cell.
    pub fn phase_defaults() -> Self {
        let grid = [10, 20, 30]
            .into_iter()
            .flat_map(|n| (1..=9).map(move |k| GridPoint { n, p: k as f64 / 10.0 }))
            .collect();
        ExperimentConfig {
            grid,
            trials: 50,
            mode: ShiftKind::NormalizedLaplacian,
            filter: vec![1.0, 0.5],
            samples: vec![100, 1000, 10000],
            seed: 0,
            out_dir: PathBuf::from("out"),
            resample_cap: DEFAULT_RESAMPLE_CAP,
            recovery: RecoveryConfig::default(),
        }
    }

    /// `N = 10`, `p = 0.2`, 100 trials, normalized Laplacian.
    pub fn rankhist_defaults() -> Self {
        ExperimentConfig {
            grid: vec![GridPoint { n: 10, p: 0.2 }],
            trials: 100,
            ..Self::phase_defaults()
        }
    }

    /// `N = 20`, `p = 0.3`, `h = [1, 0.5]`, `M ∈ {10², 10³, 10⁴}`, 50 repetitions, adjacency
    /// recovery with an automatically chosen band.
    pub fn noisy_defaults() -> Self {
        ExperimentConfig {
            grid: vec![GridPoint { n: 20, p: 0.3 }],
            trials: 50,
            mode: ShiftKind::Adjacency,
            recovery: RecoveryConfig {
                epsilon: EpsilonMode::Auto,
                ..RecoveryConfig::default()
            },
            ..Self::phase_defaults()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidParameter(what));
        if self.grid.is_empty() {
            return bad("grid is empty".into());
        }
        for c in &self.grid {
            if c.n < 2 {
                return bad(format!("N must be at least 2 (got {})", c.n));
            }
            if !(0.0..=1.0).contains(&c.p) {
                return bad(format!("p must lie in [0, 1] (got {})", c.p));
            }
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.samples.contains(&0) {
            return bad("sample sizes must be positive".into());
        }
        if self.resample_cap == 0 {
            return bad("resample_cap must be at least 1".into());
        }
        if self.mode == ShiftKind::GenericSymmetric {
            return bad("mode must be adjacency, nlaplacian or claplacian".into());
        }
        self.recovery.validate()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one random draw, mixed from the master seed and the draw's coordinates.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// A connected graph drawn for one trial.
#[derive(Debug, Clone)]
pub struct ConnectedSample {
    pub graph: Graph,
    /// Number of draws made, including the accepted one.
    pub attempts: usize,
}

/// First connected `G(n, p)` sample among up to `cap` draws seeded by `derive_seed(seed, [k])`.
pub fn sample_connected(n: usize, p: f64, seed: u64, cap: usize) -> Result<Option<ConnectedSample>> {
    for k in 0..cap {
        let graph = erdos_renyi(n, p, derive_seed(seed, &[k as u64]))?;
        if graph.is_connected() {
            return Ok(Some(ConnectedSample { graph, attempts: k + 1 }));
        }
    }
    Ok(None)
}

use std::collections::BTreeMap;

use log::{debug, warn};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, sample_connected, ExperimentConfig, GridPoint};
use crate::diffusion::{sample_covariance, synthesize_diffused, templates_from_covariance, FilterSpec};
use crate::error::{Error, Result};
use crate::graph::{build_shift, degree_vector, Graph, ShiftKind};
use crate::recovery::{edge_error, Registry, ShiftRecovery};
use crate::spectral::SpectralTemplates;

/// One row of the phase table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub n: usize,
    pub p: f64,
    /// Trials that produced a connected graph.
    pub trials: usize,
    pub unique_fraction: f64,
    pub recovery_fraction: f64,
    pub mean_rank: f64,
    /// Some trial hit the resampling cap without finding a connected graph.
    pub degenerate: bool,
}

/// One row of the rank histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankBucket {
    pub n: usize,
    pub p: f64,
    pub rank: usize,
    pub count: usize,
    pub frequency: f64,
    pub unique: usize,
    pub recovered: usize,
}

/// One row of the noisy-template error curve. `samples = 0` marks the exact covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyRow {
    pub n: usize,
    pub p: f64,
    pub samples: usize,
    pub repetitions: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub mean_epsilon: f64,
    /// Recoveries that returned an error; each counts as the empty estimate (error 1).
    pub failures: usize,
}

/// Result of recovering one random graph from its exact templates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub graph: Graph,
    pub rank: usize,
    pub q: usize,
    pub unique: bool,
    pub recovered: bool,
    pub edge_error: f64,
}

fn strategy(registry: &Registry, kind: ShiftKind) -> Result<&dyn ShiftRecovery> {
    registry.get(kind.as_str())
}

fn p_bits(p: f64) -> u64 {
    p.to_bits()
}

fn trial(cfg: &ExperimentConfig, registry: &Registry, cell: GridPoint, t: usize) -> Result<Option<TrialOutcome>> {
    let seed = derive_seed(cfg.seed, &[cell.n as u64, p_bits(cell.p), t as u64]);
    let Some(sample) = sample_connected(cell.n, cell.p, seed, cfg.resample_cap)? else {
        warn!(
            "N={} p={} trial {t}: no connected graph in {} draws",
            cell.n, cell.p, cfg.resample_cap
        );
        return Ok(None);
    };
    let g = sample.graph;
    let shift = build_shift(&g, cfg.mode)?;
    let truth = build_shift(&g, ShiftKind::Adjacency)?;
    let templates = SpectralTemplates::from_shift(shift.matrix())?;
    let d = degree_vector(&g);
    let strat = strategy(registry, cfg.mode)?;
    let u = strat.uniqueness(&templates, &cfg.recovery, Some(&d))?;
    let edge_error = match strat.recover(&templates, &cfg.recovery, Some(&d)) {
        Ok(r) => edge_error(&truth, &r.adjacency)?,
        Err(e) => {
            warn!("N={} p={} trial {t}: recovery failed: {e}", cell.n, cell.p);
            1.0
        }
    };
    Ok(Some(TrialOutcome {
        graph: g,
        rank: u.rank,
        q: u.q,
        unique: u.unique,
        recovered: edge_error == 0.0,
        edge_error,
    }))
}

/// All trials of one cell in trial order; `None` marks a trial without a connected sample.
pub fn run_trials(cfg: &ExperimentConfig, cell: GridPoint) -> Result<Vec<Option<TrialOutcome>>> {
    cfg.validate()?;
    let registry = Registry::with_defaults();
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| trial(cfg, &registry, cell, t))
        .collect()
}

/// Fraction of connected trials with `Q = 1` and with exact recovery, per `(N, p)` cell.
///
/// Every singleton instance must be recovered; a cell where the recovery fraction falls below
/// the unique fraction is reported as an error.
pub fn run_phase(cfg: &ExperimentConfig) -> Result<Vec<PhaseCell>> {
    cfg.validate()?;
    cfg.grid
        .par_iter()
        .map(|&cell| {
            let outcomes = run_trials(cfg, cell)?;
            let degenerate = outcomes.iter().any(Option::is_none);
            let done: Vec<&TrialOutcome> = outcomes.iter().flatten().collect();
            let k = done.len();
            let frac = |f: &dyn Fn(&TrialOutcome) -> bool| {
                if k == 0 {
                    0.0
                } else {
                    done.iter().filter(|o| f(o)).count() as f64 / k as f64
                }
            };
            let unique_fraction = frac(&|o| o.unique);
            let recovery_fraction = frac(&|o| o.recovered);
            let mean_rank = if k == 0 {
                0.0
            } else {
                done.iter().map(|o| o.rank as f64).sum::<f64>() / k as f64
            };
            if recovery_fraction < unique_fraction {
                return Err(Error::NumericalFailure(format!(
                    "N={} p={}: recovery fraction {recovery_fraction} below unique fraction {unique_fraction}",
                    cell.n, cell.p
                )));
            }
            debug!(
                "N={} p={}: unique {unique_fraction}, recovered {recovery_fraction}",
                cell.n, cell.p
            );
            Ok(PhaseCell {
                n: cell.n,
                p: cell.p,
                trials: k,
                unique_fraction,
                recovery_fraction,
                mean_rank,
                degenerate,
            })
        })
        .collect()
}

/// Histogram of `rank(W)` (or `rank(W̃)`) with uniqueness and recovery counts per rank.
pub fn run_rankhist(cfg: &ExperimentConfig) -> Result<Vec<RankBucket>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &cell in &cfg.grid {
        let outcomes = run_trials(cfg, cell)?;
        let done: Vec<&TrialOutcome> = outcomes.iter().flatten().collect();
        let mut buckets: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
        for o in &done {
            let b = buckets.entry(o.rank).or_default();
            b.0 += 1;
            b.1 += usize::from(o.unique);
            b.2 += usize::from(o.recovered);
        }
        for (rank, (count, unique, recovered)) in buckets {
            rows.push(RankBucket {
                n: cell.n,
                p: cell.p,
                rank,
                count,
                frequency: count as f64 / done.len() as f64,
                unique,
                recovered,
            });
        }
    }
    Ok(rows)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// The fixed graph of a noisy-template experiment cell.
pub fn noisy_graph(cfg: &ExperimentConfig, cell: GridPoint) -> Result<Graph> {
    let seed = derive_seed(cfg.seed, &[cell.n as u64, p_bits(cell.p)]);
    sample_connected(cell.n, cell.p, seed, cfg.resample_cap)?
        .map(|s| s.graph)
        .ok_or_else(|| Error::Degenerate(format!("no connected G({}, {}) sample", cell.n, cell.p)))
}

/// Recovery error from templates estimated with `M` diffused signals, averaged over
/// `trials` repetitions per `M`, followed by one row for the exact covariance `HHᵀ`.
pub fn run_noisy(cfg: &ExperimentConfig) -> Result<Vec<NoisyRow>> {
    cfg.validate()?;
    let registry = Registry::with_defaults();
    let strat = strategy(&registry, cfg.mode)?;
    let filter = FilterSpec::new(cfg.filter.clone())?;
    let mut rows = Vec::new();
    for &cell in &cfg.grid {
        let g = noisy_graph(cfg, cell)?;
        let shift = build_shift(&g, cfg.mode)?;
        let truth = build_shift(&g, ShiftKind::Adjacency)?;
        let d = degree_vector(&g);
        let recover = |c: &DMatrix<f64>| -> Result<(f64, f64, bool)> {
            let t = templates_from_covariance(c, 0.0)?;
            match strat.recover(&t, &cfg.recovery, Some(&d)) {
                Ok(r) => Ok((edge_error(&truth, &r.adjacency)?, r.epsilon, false)),
                Err(e) => {
                    debug!("recovery failed: {e}");
                    Ok((1.0, f64::NAN, true))
                }
            }
        };
        let summarize = |samples: usize, runs: Vec<(f64, f64, bool)>| {
            let errors: Vec<f64> = runs.iter().map(|r| r.0).collect();
            let eps: Vec<f64> = runs.iter().filter(|r| !r.2).map(|r| r.1).collect();
            let (mean_error, std_error) = mean_std(&errors);
            NoisyRow {
                n: cell.n,
                p: cell.p,
                samples,
                repetitions: runs.len(),
                mean_error,
                std_error,
                mean_epsilon: if eps.is_empty() { 0.0 } else { mean_std(&eps).0 },
                failures: runs.iter().filter(|r| r.2).count(),
            }
        };
        for &m in &cfg.samples {
            let runs: Vec<(f64, f64, bool)> = (0..cfg.trials)
                .into_par_iter()
                .map(|r| {
                    let seed = derive_seed(cfg.seed, &[cell.n as u64, p_bits(cell.p), m as u64, r as u64]);
                    let batch = synthesize_diffused(&shift, &filter, m, seed)?;
                    recover(&sample_covariance(&batch))
                })
                .collect::<Result<_>>()?;
            rows.push(summarize(m, runs));
        }
        let h = filter.matrix(&shift);
        let exact = &h * h.transpose();
        rows.push(summarize(0, vec![recover(&exact)?]));
    }
    Ok(rows)
}

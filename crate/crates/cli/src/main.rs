use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use nalgebra::DVector;
use spectemp::diffusion::{sample_covariance, synthesize_diffused, templates_from_covariance, FilterSpec, SignalBatch};
use spectemp::graph::{build_shift, degree_vector, erdos_renyi, Graph, ShiftKind};
use spectemp::harness::io::{
    create_file, read_edge_list, read_json, read_matrix_csv, read_vector, write_edge_list, write_json,
    write_matrix_csv, write_table, Manifest,
};
use spectemp::harness::{run_noisy, run_phase, run_rankhist, ExperimentConfig, GridPoint};
use spectemp::recovery::{EpsilonMode, RecoveryConfig, Registry};
use spectemp::spectral::{SpectralTemplates, TemplateSource};
use spectemp::Error;

const EXIT_ARGS: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "spectemp",
    version,
    about = "Network topology identification from spectral templates"
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an Erdős–Rényi graph and optionally diffused signals on it.
    Gen(GenArgs),
    /// Recover a shift from templates, signals or a graph and report it as JSON.
    Recover(RecoverArgs),
    /// Unique and recovered fractions over an (N, p) grid.
    Phase(ExperimentArgs),
    /// Histogram of rank(W) with per-rank uniqueness and recovery counts.
    Rankhist(ExperimentArgs),
    /// Recovery error against the number of observed signals.
    Noisy(ExperimentArgs),
}

fn parse_epsilon(s: &str) -> Result<EpsilonMode, String> {
    if s == "auto" {
        return Ok(EpsilonMode::Auto);
    }
    match s.parse::<f64>() {
        Ok(e) if e >= 0.0 && e.is_finite() => Ok(EpsilonMode::Fixed(e)),
        _ => Err(format!("expected `auto` or a nonnegative number, got {s:?}")),
    }
}

fn parse_mode(s: &str) -> Result<ShiftKind, String> {
    match s.parse::<ShiftKind>() {
        Ok(ShiftKind::GenericSymmetric) | Err(_) => {
            Err(format!("expected adjacency, nlaplacian or claplacian, got {s:?}"))
        }
        Ok(kind) => Ok(kind),
    }
}

#[derive(Args)]
struct RecoveryFlags {
    /// Band half-width for noisy templates: a number, or `auto`.
    #[arg(long, value_parser = parse_epsilon)]
    epsilon: Option<EpsilonMode>,
    /// Weight of the -eta * min eigenvalue term (Laplacian modes).
    #[arg(long)]
    eta: Option<f64>,
    /// Reweighting constant delta.
    #[arg(long)]
    delta: Option<f64>,
    /// Number of reweighted solves.
    #[arg(long)]
    max_reweight: Option<usize>,
    /// Relative singular-value cutoff for the nullspace dimension.
    #[arg(long)]
    rank_tol: Option<f64>,
}

impl RecoveryFlags {
    fn apply(&self, cfg: &mut RecoveryConfig) {
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if let Some(eta) = self.eta {
            cfg.eta = eta;
        }
        if let Some(delta) = self.delta {
            cfg.delta = delta;
        }
        if let Some(p) = self.max_reweight {
            cfg.max_reweight = p;
        }
        if let Some(t) = self.rank_tol {
            cfg.rank_tol = Some(t);
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write this many diffused signals (columns) to signals.csv.
    #[arg(long)]
    signals: Option<usize>,
    /// Filter coefficients h0,h1,... of the diffusion.
    #[arg(long, value_delimiter = ',', default_value = "1,0.5")]
    h: Vec<f64>,
    /// Shift the signals diffuse over.
    #[arg(long, value_parser = parse_mode, default_value = "adjacency")]
    mode: ShiftKind,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
#[group(id = "input", required = true, multiple = false, args = ["templates", "signals", "graph"])]
struct RecoverArgs {
    /// CSV of template columns V (N x N).
    #[arg(long)]
    templates: Option<PathBuf>,
    /// CSV of observed signals (N x M); templates are the sample covariance eigenvectors.
    #[arg(long)]
    signals: Option<PathBuf>,
    /// Edge list; templates are the exact eigenvectors of its shift.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode, default_value = "adjacency")]
    mode: ShiftKind,
    /// Edge list of the true graph, for the edge error in the report.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Degree vector (CSV row or column), needed by claplacian when no graph is given.
    #[arg(long)]
    degrees: Option<PathBuf>,
    #[command(flatten)]
    recovery: RecoveryFlags,
    /// Append every solved linear program to this file.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Graph sizes (comma separated).
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Edge probabilities (comma separated).
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ShiftKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Filter coefficients h0,h1,...
    #[arg(long, value_delimiter = ',')]
    h: Vec<f64>,
    /// Sample sizes M (comma separated).
    #[arg(long, value_delimiter = ',')]
    signals: Vec<usize>,
    #[command(flatten)]
    recovery: RecoveryFlags,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Replaces the entries of `base` present in `patch`, descending into nested objects.
fn overlay(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl ExperimentArgs {
    fn config(&self, defaults: ExperimentConfig) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let mut base = serde_json::to_value(&defaults)?;
                overlay(&mut base, read_json(path)?);
                serde_json::from_value(base)?
            }
            None => defaults,
        };
        if !self.n.is_empty() || !self.p.is_empty() {
            let mut ns: Vec<usize> = cfg.grid.iter().map(|c| c.n).collect();
            let mut ps: Vec<f64> = cfg.grid.iter().map(|c| c.p).collect();
            ns.sort_unstable();
            ns.dedup();
            ps.sort_by(f64::total_cmp);
            ps.dedup();
            if !self.n.is_empty() {
                ns = self.n.clone();
            }
            if !self.p.is_empty() {
                ps = self.p.clone();
            }
            cfg.grid = ns
                .iter()
                .flat_map(|&n| ps.iter().map(move |&p| GridPoint { n, p }))
                .collect();
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if !self.h.is_empty() {
            cfg.filter = self.h.clone();
        }
        if !self.signals.is_empty() {
            cfg.samples = self.signals.clone();
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        self.recovery.apply(&mut cfg.recovery);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Error> {
    Ok(BufReader::new(File::open(path).map_err(|e| {
        Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?))
}

fn cmd_gen(args: &GenArgs) -> Result<(), Error> {
    let g = erdos_renyi(args.n, args.p, args.seed)?;
    let edges = args.out.join("graph.edges");
    let mut w = create_file(&edges)?;
    write_edge_list(&mut w, &g)?;
    w.flush()?;
    info!("wrote {}", edges.display());
    if let Some(m) = args.signals {
        if m == 0 {
            return Err(Error::InvalidParameter("--signals must be positive".into()));
        }
        let shift = build_shift(&g, args.mode)?;
        let batch = synthesize_diffused(&shift, &FilterSpec::new(args.h.clone())?, m, args.seed)?;
        let path = args.out.join("signals.csv");
        let mut w = create_file(&path)?;
        write_matrix_csv(&mut w, batch.data())?;
        w.flush()?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_recover(args: &RecoverArgs) -> Result<(), Error> {
    let mut cfg = RecoveryConfig::default();
    let graph = args.graph.as_deref().map(|p| read_edge_list(open(p)?)).transpose()?;
    let templates = if let Some(path) = &args.templates {
        let v = read_matrix_csv(open(path)?)?;
        SpectralTemplates::new(v.clone(), TemplateSource::Exact)
            .or_else(|_| SpectralTemplates::new(v, TemplateSource::OperatorEigenbasis))?
    } else if let Some(path) = &args.signals {
        let batch = SignalBatch::new(read_matrix_csv(open(path)?)?)?;
        cfg.epsilon = EpsilonMode::Auto;
        templates_from_covariance(&sample_covariance(&batch), 0.0)?
    } else {
        let g = graph
            .as_ref()
            .ok_or(Error::MissingInput("templates, signals or graph"))?;
        SpectralTemplates::from_shift(build_shift(g, args.mode)?.matrix())?
    };
    args.recovery.apply(&mut cfg);
    if let Some(path) = &args.dump_lp {
        cfg.lp.dump_path = Some(path.clone());
    }

    let truth: Option<Graph> = match &args.truth {
        Some(path) => Some(read_edge_list(open(path)?)?),
        None => graph,
    };
    let degrees: Option<DVector<f64>> = match &args.degrees {
        Some(path) => Some(read_vector(open(path)?)?),
        None => truth.as_ref().map(degree_vector),
    };
    let registry = Registry::with_defaults();
    let strategy = registry.get(args.mode.as_str())?;
    let result = strategy.recover(&templates, &cfg, degrees.as_ref())?;
    let truth_adj = truth
        .as_ref()
        .map(|g| build_shift(g, ShiftKind::Adjacency))
        .transpose()?;
    let report = result.report(truth_adj.as_ref())?;
    match &args.out {
        Some(path) => write_json(path, &report)?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, &report)?;
            writeln!(lock)?;
        }
    }
    Ok(())
}

fn write_outputs<T: serde::Serialize>(
    command: &str,
    cfg: &ExperimentConfig,
    file: &str,
    rows: &[T],
) -> Result<(), Error> {
    let path = cfg.out_dir.join(file);
    let mut w = create_file(&path)?;
    write_table(&mut w, rows)?;
    w.flush()?;
    write_json(
        &cfg.out_dir.join("manifest.json"),
        &Manifest::new(command, cfg, &[file])?,
    )?;
    info!("wrote {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Recover(args) => cmd_recover(args),
        Command::Phase(args) => {
            let cfg = args.config(ExperimentConfig::phase_defaults())?;
            write_outputs("phase", &cfg, "phase.csv", &run_phase(&cfg)?)
        }
        Command::Rankhist(args) => {
            let cfg = args.config(ExperimentConfig::rankhist_defaults())?;
            write_outputs("rankhist", &cfg, "rankhist.csv", &run_rankhist(&cfg)?)
        }
        Command::Noisy(args) => {
            let cfg = args.config(ExperimentConfig::noisy_defaults())?;
            write_outputs("noisy", &cfg, "noisy.csv", &run_noisy(&cfg)?)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Parse { .. } => EXIT_IO,
        Error::InvalidParameter(_)
        | Error::DimensionMismatch { .. }
        | Error::MissingInput(_)
        | Error::UnknownMode(_)
        | Error::Asymmetric(_) => EXIT_ARGS,
        _ => EXIT_INFEASIBLE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

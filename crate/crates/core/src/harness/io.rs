//! File formats.
//!
//! * Edge lists: a `# nodes N` header, then one `i j` pair (0-based, `i < j`) per line.
//!   Blank lines and other `#` lines are ignored.
//! * Dense matrices: headerless CSV, one matrix row per line. Values are written in the
//!   shortest form that parses back to the same `f64`.
//! * Tables: CSV with a header row, one serialized record per line.
//! * Manifests: pretty-printed JSON.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, RESAMPLING_POLICY};
use crate::error::{Error, Result};
use crate::graph::Graph;

pub fn write_edge_list(mut w: impl Write, g: &Graph) -> Result<()> {
    writeln!(w, "# nodes {}", g.n())?;
    for (i, j) in g.edges() {
        writeln!(w, "{i} {j}")?;
    }
    Ok(())
}

pub fn read_edge_list(r: impl Read) -> Result<Graph> {
    let mut n = None;
    let mut edges = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        let ctx = || format!("edge list line {}", lineno + 1);
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(count) = rest.trim().strip_prefix("nodes") {
                let count = count.trim();
                n = Some(
                    count
                        .parse::<usize>()
                        .map_err(|e| Error::parse(ctx(), format!("{count:?}: {e}")))?,
                );
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let mut index = || -> Result<usize> {
            let tok = parts
                .next()
                .ok_or_else(|| Error::parse(ctx(), "expected two node indices"))?;
            tok.parse().map_err(|e| Error::parse(ctx(), format!("{tok:?}: {e}")))
        };
        let (i, j) = (index()?, index()?);
        if parts.next().is_some() {
            return Err(Error::parse(ctx(), "expected two node indices"));
        }
        edges.push((i, j));
    }
    let n = n.ok_or_else(|| Error::parse("edge list", "missing `# nodes N` header"))?;
    Graph::from_edges(n, edges)
}

pub fn write_matrix_csv(w: impl Write, m: &DMatrix<f64>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in m.row_iter() {
        wtr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_matrix_csv(r: impl Read) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::parse(format!("matrix row {}", k + 1), format!("{s:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch {
            expected: ncols,
            found: bad.len(),
        });
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.into_iter().flatten()))
}

/// A vector stored as a single CSV row or a single column.
pub fn read_vector(r: impl Read) -> Result<DVector<f64>> {
    let m = read_matrix_csv(r)?;
    match m.shape() {
        (1, n) => Ok(DVector::from_iterator(n, m.iter().copied())),
        (_, 1) => Ok(m.column(0).into_owned()),
        (r, c) => Err(Error::parse(
            "vector",
            format!("expected one row or one column, found {r}×{c}"),
        )),
    }
}

pub fn write_table<T: Serialize>(w: impl Write, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_table<T: DeserializeOwned>(r: impl Read) -> Result<Vec<T>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Run description written next to experiment outputs. Contains no timestamps, so repeated
/// runs produce identical files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub master_seed: u64,
    pub seed_derivation: String,
    pub resampling: String,
    pub outputs: Vec<String>,
    pub config: serde_json::Value,
}

impl Manifest {
    /// The output directory is left out of the recorded configuration so that identical runs
    /// into different directories produce identical manifests.
    pub fn new(command: &str, cfg: &ExperimentConfig, outputs: &[&str]) -> Result<Self> {
        let mut config = serde_json::to_value(cfg)?;
        if let Some(obj) = config.as_object_mut() {
            obj.remove("out_dir");
        }
        Ok(Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: cfg.seed,
            seed_derivation: "splitmix64 chain over (master, N, bits(p), trial or M, repetition, draw)".into(),
            resampling: RESAMPLING_POLICY.to_string(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            config,
        })
    }
}

pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create_file(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

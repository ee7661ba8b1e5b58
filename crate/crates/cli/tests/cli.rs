use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spectemp::diffusion::{synthesize_diffused, FilterSpec};
use spectemp::graph::{build_shift, erdos_renyi, Graph, ShiftKind};
use spectemp::harness::io::{read_matrix_csv, read_table, write_edge_list, write_matrix_csv};
use spectemp::harness::{NoisyRow, PhaseCell};
use spectemp::recovery::check_uniqueness;
use spectemp::spectral::SpectralTemplates;

fn spectemp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectemp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = spectemp(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_graph(path: &Path, g: &Graph) {
    let mut buf = Vec::new();
    write_edge_list(&mut buf, g).unwrap();
    fs::write(path, buf).unwrap();
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["gen", "--n", "10", "--p", "0.2", "--seed", "7", "--out", s(d)]);
    }
    let first = fs::read(a.join("graph.edges")).unwrap();
    assert!(first.starts_with(b"# nodes 10\n"));
    assert_eq!(first, fs::read(b.join("graph.edges")).unwrap());
}

#[test]
fn gen_rejects_single_node() {
    let dir = tempfile::tempdir().unwrap();
    let out = spectemp(&["gen", "--n", "1", "--p", "0.5", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn gen_writes_signal_matrix() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "gen",
        "--n",
        "10",
        "--p",
        "0.2",
        "--signals",
        "1000",
        "--h",
        "1,0.5",
        "--out",
        s(dir.path()),
    ]);
    let m = read_matrix_csv(fs::File::open(dir.path().join("signals.csv")).unwrap()).unwrap();
    assert_eq!(m.shape(), (10, 1000));
}

#[test]
fn recover_path_graph_from_templates() {
    let dir = tempfile::tempdir().unwrap();
    let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
    let shift = build_shift(&g, ShiftKind::Adjacency).unwrap();
    let t = SpectralTemplates::from_shift(shift.matrix()).unwrap();
    let tpath = dir.path().join("v.csv");
    let mut buf = Vec::new();
    write_matrix_csv(&mut buf, t.v()).unwrap();
    fs::write(&tpath, buf).unwrap();
    let gpath = dir.path().join("truth.edges");
    write_graph(&gpath, &g);

    let out = ok(&[
        "recover",
        "--templates",
        s(&tpath),
        "--truth",
        s(&gpath),
        "--mode",
        "adjacency",
    ]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["unique"], true);
    assert_eq!(report["edge_error"], 0.0);
    assert_eq!(report["n"], 3);
}

#[test]
fn recover_missing_file_fails() {
    let out = spectemp(&["recover", "--templates", "/nonexistent/v.csv"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));
}

#[test]
fn recover_infeasible_templates_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let tpath = dir.path().join("eye.csv");
    fs::write(&tpath, "1,0,0\n0,1,0\n0,0,1\n").unwrap();
    let out = spectemp(&["recover", "--templates", s(&tpath)]);
    assert_eq!(out.status.code(), Some(3));
}

/// Connected graph with a singleton feasible set, so the error has a clear limit.
fn singleton_graph(n: usize, p: f64) -> Graph {
    (0..)
        .map(|seed| erdos_renyi(n, p, seed).unwrap())
        .filter(Graph::is_connected)
        .find(|g| {
            let s = build_shift(g, ShiftKind::Adjacency).unwrap();
            let t = SpectralTemplates::from_shift(s.matrix()).unwrap();
            check_uniqueness(&t, ShiftKind::Adjacency, None, None).unwrap().unique
        })
        .unwrap()
}

#[test]
fn more_signals_give_no_larger_error() {
    let dir = tempfile::tempdir().unwrap();
    let g = singleton_graph(10, 0.4);
    let gpath = dir.path().join("g.edges");
    write_graph(&gpath, &g);
    let shift = build_shift(&g, ShiftKind::Adjacency).unwrap();
    let h = FilterSpec::new(vec![1.0, 0.5]).unwrap();
    let error = |m: usize, seed: u64| -> f64 {
        let batch = synthesize_diffused(&shift, &h, m, seed).unwrap();
        let path = dir.path().join(format!("x_{m}_{seed}.csv"));
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, batch.data()).unwrap();
        fs::write(&path, buf).unwrap();
        let out = spectemp(&["recover", "--signals", s(&path), "--truth", s(&gpath)]);
        if !out.status.success() {
            return 1.0;
        }
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        report["edge_error"].as_f64().unwrap()
    };
    let seeds = 50;
    let wins = (0..seeds)
        .filter(|&seed| error(10_000, seed) <= error(100, seed))
        .count();
    assert!(wins * 5 >= seeds as usize * 4, "{wins}/{seeds}");
}

#[test]
fn phase_single_trial_emits_one_row() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "phase",
        "--n",
        "8",
        "--p",
        "0.4",
        "--trials",
        "1",
        "--out",
        s(dir.path()),
    ]);
    let rows: Vec<PhaseCell> = read_table(fs::File::open(dir.path().join("phase.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].recovery_fraction >= rows[0].unique_fraction);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "phase");
    assert_eq!(manifest["config"]["trials"], 1);
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn experiments_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in [
        vec!["phase", "--n", "8,10", "--p", "0.3,0.5", "--trials", "4", "--seed", "5"],
        vec!["rankhist", "--n", "10", "--p", "0.2", "--trials", "10", "--seed", "5"],
        vec![
            "noisy",
            "--n",
            "10",
            "--p",
            "0.4",
            "--trials",
            "1",
            "--signals",
            "100,1000",
            "--seed",
            "5",
        ],
    ] {
        let (a, b) = (
            dir.path().join(format!("{}_a", cmd[0])),
            dir.path().join(format!("{}_b", cmd[0])),
        );
        for d in [&a, &b] {
            let mut args = cmd.clone();
            args.extend(["--out", s(d)]);
            ok(&args);
        }
        assert_eq!(dir_contents(&a), dir_contents(&b), "{}", cmd[0]);
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"grid": [{"n": 10, "p": 0.4}], "trials": 2, "samples": [100, 300], "recovery": {"max_reweight": 3}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&["noisy", "--config", s(&cfg), "--signals", "200", "--out", s(&out)]);
    let rows: Vec<NoisyRow> = read_table(fs::File::open(out.join("noisy.csv")).unwrap()).unwrap();
    let samples: Vec<usize> = rows.iter().map(|r| r.samples).collect();
    assert_eq!(samples, vec![200, 0]);
    assert!(rows.iter().all(|r| r.n == 10 && r.p == 0.4));
    assert_eq!(rows[0].repetitions, 2);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["recovery"]["max_reweight"], 3);
    assert_eq!(manifest["config"]["recovery"]["epsilon"], "auto");
}

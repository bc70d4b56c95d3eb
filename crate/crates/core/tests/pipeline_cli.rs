use std::path::Path;
use std::process::Command;

use sigcomm::community::{brute_force_partition, gain_from_adjacency};
use sigcomm::ingest::compute_log_returns;
use sigcomm::pipeline::{self, Algorithm, FilterKind, Method, RunConfig};
use sigcomm::similarity::correlation_matrix;
use sigcomm::spectral::{suggest_threshold, threshold_filter};
use sigcomm::Error;

fn sigcomm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sigcomm")).args(args).output().unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn synth_data(dir: &Path) -> (String, String) {
    let out = sigcomm(&[
        "synth", "--n-series", "12", "--n-obs", "400", "--blocks", "3", "--rho", "0.7", "--seed", "3", "--out",
        &s(dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (s(&dir.join("prices.csv")), s(&dir.join("sectors.csv")))
}

#[test]
fn run_writes_every_report_file() {
    let tmp = tempfile::tempdir().unwrap();
    let (prices, sectors) = synth_data(&tmp.path().join("data"));
    let out = tmp.path().join("report");
    let res = sigcomm(&["run", "--prices", &prices, "--sectors", &sectors, "--out", &s(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert!(grid.starts_with("method,filter,algorithm,status,modularity,clusters"));
    // 4 methods x 2 filters x 2 algorithms
    assert_eq!(grid.lines().count(), 1 + 16);
    assert!(out.join("partition_sig-ed_rmt_louvain.csv").exists());
    assert!(out.join("spectrum_correlation_rmt.json").exists());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("grid.json")).unwrap()).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 16);
    assert!(json["cells"][0]["sectors"].is_object());
    // no staging leftovers
    assert!(std::fs::read_dir(&out).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().starts_with('.')));
}

#[test]
fn stability_curve_uses_requested_windows() {
    let tmp = tempfile::tempdir().unwrap();
    let (prices, _) = synth_data(&tmp.path().join("data"));
    let out = tmp.path().join("stab");
    let res = sigcomm(&[
        "stability", "--prices", &prices, "--methods", "correlation,sig-ed", "--filters", "rmt", "--algos", "louvain",
        "--step", "133", "--out", &s(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(out.join("stability.csv")).unwrap();
    let windows: Vec<usize> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    // 399 returns, start ⌈399/3⌉ = 133
    let mut distinct = windows.clone();
    distinct.dedup();
    assert_eq!(distinct, vec![133, 266, 399]);
    assert_eq!(windows.len(), 3 * 2);
}

#[test]
fn spectrum_and_toml_config() {
    let tmp = tempfile::tempdir().unwrap();
    let (prices, _) = synth_data(&tmp.path().join("data"));
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, format!("prices = {prices:?}\nmethods = [\"sig-rbf\"]\ngamma = 0.5\ndepth = 2\n")).unwrap();
    let out = tmp.path().join("spectra");
    let res = sigcomm(&["spectrum", "--config", &s(&cfg), "--out", &s(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("spectrum_sig-rbf.json")).unwrap()).unwrap();
    assert_eq!(report["kind"], "similarity-rbf");
    assert_eq!(report["eigenvalues"].as_array().unwrap().len(), 12);
    assert!(out.join("matrix_sig-rbf.csv").exists());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let (prices, _) = synth_data(&tmp.path().join("data"));
    let out = s(&tmp.path().join("x"));

    let bad_method = sigcomm(&["run", "--prices", &prices, "--methods", "pearson", "--out", &out]);
    assert_eq!(bad_method.status.code(), Some(1));
    let both = sigcomm(&["run", "--prices", &prices, "--threshold", "0.3", "--target-density", "0.2"]);
    assert_eq!(both.status.code(), Some(1));
    let no_prices = sigcomm(&["run", "--out", &out]);
    assert_eq!(no_prices.status.code(), Some(1));
    let missing = sigcomm(&["run", "--prices", &s(&tmp.path().join("nope.csv")), "--out", &out]);
    assert_eq!(missing.status.code(), Some(2));

    let garbage = tmp.path().join("bad.csv");
    std::fs::write(&garbage, "date,A\n2020-01-01,1.0\n2020-01-02,abc\n").unwrap();
    let parse = sigcomm(&["run", "--prices", &s(&garbage), "--out", &out]);
    assert_eq!(parse.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&parse.stderr);
    assert!(stderr.contains("row 3"), "{stderr}");

    assert_eq!(sigcomm(&["--help"]).status.code(), Some(0));
}

#[test]
fn unwritable_directory_fails_before_writing() {
    let synth = pipeline::synth_panel(8, 200, 2, 0.6, 1).unwrap();
    let returns = compute_log_returns(&synth.prices).unwrap();
    let cfg = RunConfig {
        methods: vec![Method::Correlation],
        filters: vec![FilterKind::Threshold],
        algos: vec![Algorithm::Greedy],
        ..RunConfig::default()
    };
    let results = pipeline::run_grid_on(&returns, None, &cfg).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let err = pipeline::emit_report(&results, &blocker.join("out")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.exit_code(), 2);
    assert_eq!(std::fs::read(&blocker).unwrap(), b"x");
}

#[test]
fn failed_cells_do_not_abort_the_grid() {
    // T <= N makes every RMT cell fail while threshold cells proceed
    let synth = pipeline::synth_panel(12, 10, 2, 0.5, 4).unwrap();
    let returns = compute_log_returns(&synth.prices).unwrap();
    let cfg = RunConfig { methods: vec![Method::Correlation], ..RunConfig::default() };
    let grid = pipeline::run_grid_on(&returns, None, &cfg).unwrap();
    for cell in &grid.cells {
        match cell.filter {
            FilterKind::Rmt => assert!(!cell.is_ok() && cell.reason.as_deref().unwrap().contains("T > N")),
            FilterKind::Threshold => assert!(cell.is_ok(), "{:?}", cell.reason),
        }
    }
}

#[test]
fn independent_blocks_have_small_sample_correlation() {
    let t = 2000;
    let synth = pipeline::synth_panel(20, t + 1, 4, 0.0, 8).unwrap();
    let c = correlation_matrix(&compute_log_returns(&synth.prices).unwrap()).unwrap();
    let bound = 3.0 / (t as f64).sqrt();
    let pairs: Vec<f64> = c.upper_entries().filter(|(i, j, _)| i != j).map(|(_, _, v)| v).collect();
    let small = pairs.iter().filter(|v| v.abs() < bound).count();
    assert!(small as f64 >= 0.95 * pairs.len() as f64, "{small}/{}", pairs.len());
}

#[test]
fn single_block_is_one_community_on_the_complete_graph() {
    for seed in 0..5 {
        let synth = pipeline::synth_panel(10, 500, 1, 0.5, seed).unwrap();
        let c = correlation_matrix(&compute_log_returns(&synth.prices).unwrap()).unwrap();
        let choice = suggest_threshold(&c, 1.0).unwrap();
        let adj = threshold_filter(&c, choice.theta);
        assert_eq!(adj.density(), 1.0);
        let best = brute_force_partition(&gain_from_adjacency(&adj).unwrap()).unwrap();
        assert_eq!(best.k, 1);
    }
}

#[test]
fn library_runs_are_deterministic_under_shuffle() {
    let synth = pipeline::synth_panel(16, 300, 4, 0.6, 5).unwrap();
    let returns = compute_log_returns(&synth.prices).unwrap();
    let cfg = RunConfig { shuffle: true, seed: 42, ..RunConfig::default() };
    let a = pipeline::grid_files(&pipeline::run_grid_on(&returns, None, &cfg).unwrap()).unwrap();
    let b = pipeline::grid_files(&pipeline::run_grid_on(&returns, None, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

use std::path::Path;
use std::process::Command;

use credit_fbp::cli::{cmd_solve, cmd_tw};
use credit_fbp::config::RunConfig;
use credit_fbp::output::read_csv;

const BIN: &str = env!("CARGO_BIN_EXE_credit-fbp");

fn short_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(
        &path,
        "[grid]\nt_final = 3.0\n[mc]\nn_paths = 500\n[output]\ntw_samples = 101\n",
    )
    .unwrap();
    path
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr),
    )
}

#[test]
fn tw_writes_table_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let out = dir.path().join("o");
    let (code, _) = run(&["tw", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (header, rows) = read_csv(&out.join("tw.csv")).unwrap();
    assert_eq!(header, ["xi", "K", "u_tw", "dK"]);
    assert_eq!(rows.len(), 101);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("tw_meta.json")).unwrap()).unwrap();
    let kappa = meta["kappa_star"].as_f64().unwrap();
    let eta = meta["eta_star"].as_f64().unwrap();
    assert!((eta + 0.218).abs() < 1e-3);
    assert!((kappa + 1.919).abs() < 1e-3);
    for row in &rows {
        let (xi, k, u) = (row[0], row[1], row[2]);
        if xi <= kappa {
            assert_eq!(k, 1.0);
        }
        assert!((u - xi.exp() * k).abs() < 1e-12);
    }
}

#[test]
fn solve_outputs_round_trip_and_start_at_the_payoff() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.grid.t_final = 3.0;
    cfg.output.snapshot_times = Some(vec![0.0, 1.5]);
    let out = cmd_solve(&cfg, dir.path()).unwrap();
    let field = &out.field;

    let (h, snaps) = read_csv(&dir.path().join("snapshots.csv")).unwrap();
    assert_eq!(h, ["t", "xi", "u"]);
    let n = field.grid.n_points();
    assert_eq!(snaps.len(), n * field.snapshots.len());
    for (j, row) in snaps[..n].iter().enumerate() {
        assert_eq!(row[0], 0.0);
        assert_eq!(row[1], field.grid.xi(j));
        assert_eq!(row[2], row[1].exp().min(1.0));
    }
    let restored: Vec<f64> = snaps[snaps.len() - n..].iter().map(|r| r[2]).collect();
    assert_eq!(restored, field.final_values());

    let (_, err) = read_csv(&dir.path().join("error.csv")).unwrap();
    let series: Vec<f64> = err.iter().map(|r| r[1]).collect();
    assert_eq!(series, field.sup_error);
    assert!(series.windows(2).all(|w| w[1] <= w[0] + 1e-6));

    let (_, b) = read_csv(&dir.path().join("boundaries.csv")).unwrap();
    assert_eq!(b.len(), field.trace.len());
    let dxi = field.grid.dxi;
    assert_eq!(b[0][0], 0.0);
    assert!(b[0][1].abs() <= dxi);
    assert!((b[0][2] - (1.0f64 / 0.6).ln()).abs() <= dxi);
    assert_eq!(b.iter().map(|r| r[1]).collect::<Vec<_>>(), field.trace.kappa_hat);

    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("diagnostics.json")).unwrap()).unwrap();
    let checks = diag["report"]["checks"].as_array().unwrap();
    assert!(checks.iter().all(|c| c["passed"] == true));
    assert_eq!(diag["report"]["newton"]["steps"], 300);
}

#[test]
fn trace_stride_keeps_the_last_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.grid.t_final = 1.0;
    cfg.output.trace_every = 30;
    cmd_solve(&cfg, dir.path()).unwrap();
    let (_, rows) = read_csv(&dir.path().join("error.csv")).unwrap();
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(times.len(), 5);
    assert_eq!(times[0], 0.0);
    assert_eq!(*times.last().unwrap(), 1.0);
}

#[test]
fn mc_is_reproducible_and_reports_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let read = |sub: &str| {
        let out = dir.path().join(sub);
        let (code, _) = run(&[
            "mc",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "--seed",
            "11",
        ]);
        assert_eq!(code, 0);
        std::fs::read_to_string(out.join("mc.json")).unwrap()
    };
    let (a, b) = (read("a"), read("b"));
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["config"]["seed"], 11);
    assert!(v["result"]["n_default"].as_u64().unwrap() <= 500);
    assert_eq!(v["start_regime"], "high");
}

#[test]
fn exit_codes_separate_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let bad_sigma = write("sigma.toml", "[model]\ndelta = 0.01\n");
    let (code, msg) = run(&["check", "--config", bad_sigma.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(msg.contains("main_sigma"), "{msg}");

    let bad_tol = write("tol.toml", "[solver]\ntol_newton = 0.0\n");
    assert_eq!(run(&["check", "--config", bad_tol.to_str().unwrap()]).0, 3);

    let unknown = write("unknown.toml", "[grid]\nspacing = 0.1\n");
    assert_eq!(run(&["solve", "--config", unknown.to_str().unwrap()]).0, 3);

    // A single Newton iteration cannot satisfy the stop rule.
    let starved = write("newton.toml", "[grid]\nt_final = 0.5\n[solver]\nmax_newton_iters = 2\ntol_newton = 1e-300\n");
    let (code, msg) = run(&["check", "--config", starved.to_str().unwrap()]);
    assert_eq!(code, 4, "{msg}");
    assert!(msg.contains("step 1"), "{msg}");

    let missing = dir.path().join("nope.toml");
    assert_eq!(run(&["tw", "--config", missing.to_str().unwrap()]).0, 3);

    let ok = write("ok.toml", "[grid]\nt_final = 0.5\n");
    let (code, table) = run(&["check", "--config", ok.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(table.contains("m_matrix") && !table.contains("FAIL"));
}

#[test]
fn snapshot_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let out = dir.path().join("o");
    let (code, _) = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--snapshots",
        "0.5,1,2",
    ]);
    assert_eq!(code, 0);
    let (_, rows) = read_csv(&out.join("snapshots.csv")).unwrap();
    let mut times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    times.dedup();
    assert_eq!(times, [0.0, 0.5, 1.0, 2.0, 3.0]);
    let late = run(&["solve", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--snapshots", "9"]);
    assert_eq!(late.0, 3);
}

#[test]
fn library_and_binary_tables_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.output.tw_samples = 101;
    let tw = cmd_tw(&cfg, &dir.path().join("lib")).unwrap();
    let (code, _) = run(&["tw", "--out-dir", dir.path().join("bin").to_str().unwrap()]);
    assert_eq!(code, 0);
    let meta = std::fs::read_to_string(dir.path().join("bin/tw_meta.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&meta).unwrap();
    assert_eq!(v["kappa_star"].as_f64().unwrap(), tw.kappa_star);
    assert_eq!(v["samples"], 2001);
}

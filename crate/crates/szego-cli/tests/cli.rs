//! End-to-end tests of the `szego` binary: frozen CSV schema, exit
//! codes, determinism, cache reuse, and artifact round-trips.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_szego")
}

fn run_with_env(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    // Keep cache behavior hermetic unless a test opts in.
    cmd.env_remove("SZEGO_CACHE_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary should spawn")
}

fn run(args: &[&str]) -> Output {
    run_with_env(args, &[])
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

/// Free one-dimensional model on [-1, 1] with a fast 8-point grid.
fn free_config(out_dir: &Path, experiment: &str, threads: usize) -> String {
    format!(
        r#"experiment = "{experiment}"
test_functions = ["renyi:1:nats", "s:1"]
s_list = [0.6, 1.0]
output_dir = "{out}"
threads = {threads}

[grid]
kind = "geometric"
min = 5.0
max = 14.0
points = 8

[model]
energy = 4.0
convention = "weyl"
engine = "continuum-kernel"

[model.domain]
scale = 1.0

[model.domain.shape]
shape = "interval"
left = -1.0
right = 1.0

[model.potential]
dimension = 1

[model.potential.kind]
kind = "zero"
"#,
        out = out_dir.display()
    )
}

/// Square-well lattice model; pinning the box makes every row reuse one
/// eigendecomposition, leaving it unpinned lets the box grow with L.
fn lattice_config(
    out_dir: &Path,
    experiment: &str,
    box_halfwidth: Option<f64>,
    site_cap: usize,
) -> String {
    let box_line = match box_halfwidth {
        Some(r) => format!("box_halfwidth = {r}\n"),
        None => String::new(),
    };
    format!(
        r#"experiment = "{experiment}"
test_functions = ["renyi:1:nats", "s:1"]
s_list = [1.0]
output_dir = "{out}"

[grid]
kind = "geometric"
min = 3.0
max = 8.0
points = 8

[model]
energy = 4.0
convention = "weyl"
engine = "lattice"

[model.domain]
scale = 1.0

[model.domain.shape]
shape = "interval"
left = -1.0
right = 1.0

[model.potential]
dimension = 1

[model.potential.kind]
kind = "square_well"
amplitude = -5.0
half_width = 1.0

[model.lattice]
spacing = 0.05
{box_line}site_cap = {site_cap}
"#,
        out = out_dir.display()
    )
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

/// A cell is either NaN or the canonical 17-significant-digit form of
/// the float it encodes.
fn assert_canonical_cell(cell: &str) {
    if cell == "NaN" {
        return;
    }
    let x: f64 = cell.parse().unwrap_or_else(|_| panic!("bad cell {cell:?}"));
    assert_eq!(cell, format!("{x:.16e}"), "cell not in canonical form");
}

const FREE_HEADER: &str =
    "L,trace_renyi:1:nats,trace_s:1,q2,qdiff2s_0.6,qdiff2s_1,pdiff2,trdiff,phi";

#[test]
fn sweep_writes_the_frozen_schema_and_its_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = write_config(tmp.path(), "free.toml", &free_config(&out, "golden", 1));

    let res = run(&["sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&res), 0, "stderr: {}", stderr(&res));

    let csv = fs::read_to_string(out.join("golden.csv")).unwrap();
    assert!(!csv.contains('\r'), "CSV must use LF only");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], FREE_HEADER);
    assert_eq!(lines.len(), 9, "header plus one line per grid point");
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 9);
        for cell in &cells {
            assert_canonical_cell(cell);
        }
        // Continuum rows have no lattice norm columns.
        assert!(cells[3..].iter().all(|c| *c == "NaN"));
    }

    // The scale column is the declared geometric grid.
    let ls: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(ls[0], 5.0);
    assert_eq!(ls[7], 14.0);
    for w in ls.windows(2) {
        let ratio = w[1] / w[0];
        assert!((ratio / (14.0f64 / 5.0).powf(1.0 / 7.0) - 1.0).abs() < 1e-12);
    }

    // No partial files survive a successful run.
    assert!(!out.join("golden.csv.partial").exists());
    assert!(!out.join("golden.json.partial").exists());

    // Sidecar: config snapshot, engine tag, one timing per row.
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("golden.json")).unwrap()).unwrap();
    assert_eq!(sidecar["engine_tag"], "nystrom-free");
    assert_eq!(sidecar["config"]["experiment"], "golden");
    assert_eq!(sidecar["config"]["model"]["energy"], 4.0);
    assert_eq!(sidecar["rows"].as_array().unwrap().len(), 8);
    assert!(sidecar["total_wall_s"].as_f64().unwrap() > 0.0);
    assert!(sidecar.get("error").is_none());

    // The emitted config echo is itself a valid, equivalent config:
    // re-running from it reproduces the CSV byte for byte.
    let first = fs::read(out.join("golden.csv")).unwrap();
    let echo = out.join("golden_config.toml");
    assert!(echo.exists());
    let res2 = run(&["sweep", "--config", echo.to_str().unwrap()]);
    assert_eq!(exit_code(&res2), 0, "stderr: {}", stderr(&res2));
    assert_eq!(first, fs::read(out.join("golden.csv")).unwrap());
}

#[test]
fn sweeps_are_deterministic_and_thread_count_does_not_change_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let out_c = tmp.path().join("c");
    let a = write_config(tmp.path(), "a.toml", &free_config(&out_a, "det", 1));
    let b = write_config(tmp.path(), "b.toml", &free_config(&out_b, "det", 1));
    let c = write_config(tmp.path(), "c.toml", &free_config(&out_c, "det", 8));

    for cfg in [&a, &b, &c] {
        let res = run(&["sweep", "--config", cfg.to_str().unwrap()]);
        assert_eq!(exit_code(&res), 0, "stderr: {}", stderr(&res));
    }
    let bytes_a = fs::read(out_a.join("det.csv")).unwrap();
    let bytes_b = fs::read(out_b.join("det.csv")).unwrap();
    let bytes_c = fs::read(out_c.join("det.csv")).unwrap();
    assert_eq!(bytes_a, bytes_b, "repeat runs must agree to the byte");
    assert_eq!(bytes_a, bytes_c, "thread count must not change results");
}

#[test]
fn predict_reports_the_closed_form_boundary_coefficients() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = write_config(tmp.path(), "free.toml", &free_config(&out, "pred", 1));

    let res = run(&["predict", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&res), 0, "stderr: {}", stderr(&res));
    let preds: serde_json::Value = serde_json::from_str(&stdout(&res)).unwrap();
    let preds = preds.as_array().unwrap();
    assert_eq!(preds.len(), 2);

    let by_label = |label: &str| -> &serde_json::Value {
        preds
            .iter()
            .find(|p| p["test_function"] == label)
            .unwrap_or_else(|| panic!("missing prediction for {label}"))
    };
    let entropy = by_label("renyi:1:nats");
    assert!((entropy["boundary_coeff"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-9);
    assert_eq!(entropy["volume_coeff"].as_f64().unwrap(), 0.0);

    let s1 = by_label("s:1");
    assert!((s1["boundary_coeff"].as_f64().unwrap() - 0.1013212).abs() < 5e-7);
    assert_eq!(s1["volume_coeff"].as_f64().unwrap(), 0.0);
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");

    // Unknown test-function name: rejected by name, before any numerics.
    let bad = free_config(&out, "bad", 1).replace("renyi:1:nats", "renyi:oops:nats");
    let bad = write_config(tmp.path(), "bad.toml", &bad);
    for sub in ["sweep", "predict", "verify"] {
        let res = run(&[sub, "--config", bad.to_str().unwrap()]);
        assert_eq!(exit_code(&res), 2, "{sub} should reject the config");
        assert!(
            stderr(&res).contains("renyi:oops:nats"),
            "{sub} must name the offending function: {}",
            stderr(&res)
        );
    }

    // Missing config file.
    let res = run(&["sweep", "--config", "/nonexistent/nope.toml"]);
    assert_eq!(exit_code(&res), 2);

    // Unknown keys are config errors, not silent.
    let cfg = format!("bogus_key = 1\n{}", free_config(&out, "k", 1));
    let cfg = write_config(tmp.path(), "unknown.toml", &cfg);
    let res = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&res), 2);

    // plotdata on a sweep file that does not exist.
    let good = write_config(tmp.path(), "good.toml", &free_config(&out, "g", 1));
    let res = run(&[
        "plotdata",
        "--config",
        good.to_str().unwrap(),
        "--sweep",
        "/nonexistent/sweep.csv",
    ]);
    assert_eq!(exit_code(&res), 2);

    // Usage errors from the argument parser share the config exit code.
    let res = run(&["sweep"]);
    assert_eq!(exit_code(&res), 2);
}

#[test]
fn aborted_sweeps_leave_partial_files_with_completed_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    // The derived box outgrows this cap partway through the grid.
    let cfg = lattice_config(&out, "abort", None, 400);
    let cfg = write_config(tmp.path(), "abort.toml", &cfg);

    let res = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&res), 2, "site-cap violations are config errors");
    assert!(stderr(&res).contains("cap"), "stderr: {}", stderr(&res));

    assert!(!out.join("abort.csv").exists());
    let partial = fs::read_to_string(out.join("abort.csv.partial")).unwrap();
    let lines: Vec<&str> = partial.lines().collect();
    assert!(lines.len() >= 2, "at least the header and one finished row");
    assert!(lines.len() < 9, "the sweep must not have finished");
    assert!(lines[0].starts_with("L,trace_"));

    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("abort.json.partial")).unwrap())
            .unwrap();
    assert!(sidecar["error"].as_str().unwrap().contains("cap"));
    assert_eq!(
        sidecar["rows"].as_array().unwrap().len(),
        lines.len() - 1,
        "sidecar timings must match the completed rows"
    );
}

#[test]
fn warm_cache_reruns_are_byte_identical_and_faster() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cache = tmp.path().join("cache");
    let cfg = write_config(
        tmp.path(),
        "lat.toml",
        &lattice_config(&out, "lat", Some(100.0), 13_000),
    );
    let envs = [("SZEGO_CACHE_DIR", cache.to_str().unwrap())];

    let t0 = Instant::now();
    let cold = run_with_env(&["sweep", "--config", cfg.to_str().unwrap()], &envs);
    let cold_elapsed = t0.elapsed();
    assert_eq!(exit_code(&cold), 0, "stderr: {}", stderr(&cold));
    let cold_csv = fs::read(out.join("lat.csv")).unwrap();
    assert!(
        fs::read_dir(&cache).unwrap().count() > 0,
        "cache directory should be populated"
    );

    let t1 = Instant::now();
    let warm = run_with_env(&["sweep", "--config", cfg.to_str().unwrap()], &envs);
    let warm_elapsed = t1.elapsed();
    assert_eq!(exit_code(&warm), 0, "stderr: {}", stderr(&warm));
    let warm_csv = fs::read(out.join("lat.csv")).unwrap();

    assert_eq!(cold_csv, warm_csv, "cache reuse must not change results");
    assert!(
        warm_elapsed < cold_elapsed,
        "warm run ({warm_elapsed:?}) should beat the cold run ({cold_elapsed:?})"
    );

    // Lattice rows fill the norm columns with finite values.
    let text = String::from_utf8(warm_csv).unwrap();
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 1 + 2 + 1 + 1 + 3);
        assert!(cells.iter().all(|c| *c != "NaN"));
    }
}

#[test]
fn plotdata_emits_reproducible_fit_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "free.toml", &free_config(&out, "plot", 1));
    let res = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&res), 0, "stderr: {}", stderr(&res));

    let res = run(&["plotdata", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&res), 0, "stderr: {}", stderr(&res));

    let files = [
        out.join("plot_renyi-1-nats.dat"),
        out.join("plot_s-1.dat"),
        out.join("plot_fit.dat"),
    ];
    let first: Vec<Vec<u8>> = files
        .iter()
        .map(|f| fs::read(f).unwrap_or_else(|_| panic!("missing {}", f.display())))
        .collect();

    // Curve files: comment header then L / trace / fit / residual rows,
    // with traces byte-identical to the sweep CSV column.
    let csv = fs::read_to_string(out.join("plot.csv")).unwrap();
    let csv_traces: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    let s1 = String::from_utf8(first[1].clone()).unwrap();
    let rows: Vec<&str> = s1.lines().collect();
    assert_eq!(rows[0], "# L trace fit residual");
    assert_eq!(rows.len(), 9);
    for (row, trace) in rows[1..].iter().zip(&csv_traces) {
        let cols: Vec<&str> = row.split(' ').collect();
        assert_eq!(cols.len(), 4);
        assert_eq!(&cols[1], trace, "plot trace must mirror the CSV");
        let residual: f64 = cols[3].parse().unwrap();
        assert!(residual.abs() < 1e-3, "fit should track the free traces");
    }

    // The fit table names both test functions.
    let table = String::from_utf8(first[2].clone()).unwrap();
    assert!(table.lines().count() == 3);
    assert!(table.contains("renyi:1:nats") && table.contains("s:1"));

    // Bitwise reproducibility of every emitted file.
    let res = run(&["plotdata", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&res), 0);
    for (f, bytes) in files.iter().zip(&first) {
        assert_eq!(&fs::read(f).unwrap(), bytes, "{} changed", f.display());
    }
}

#[test]
fn membership_reports_cover_requested_dimensions() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "free.toml", &free_config(&out, "m", 1));

    let res = run(&["check-testfn", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&res), 0, "stderr: {}", stderr(&res));
    let entries: serde_json::Value = serde_json::from_str(&stdout(&res)).unwrap();
    let entries = entries.as_array().unwrap();
    assert_eq!(entries.len(), 6, "two functions across three dimensions");

    let in_class = |label: &str, dim: u64| -> bool {
        entries
            .iter()
            .find(|e| e["label"] == label && e["dimension"] == dim)
            .unwrap()["in_class"]
            .as_bool()
            .unwrap()
    };
    // The first Rényi entropy sits exactly on the admissibility edge in
    // one dimension and inside it above.
    assert!(!in_class("renyi:1:nats", 1));
    assert!(in_class("renyi:1:nats", 2));
    assert!(in_class("renyi:1:nats", 3));
    // Smooth polynomials are admissible everywhere.
    for d in 1..=3 {
        assert!(in_class("s:1", d));
    }

    // Explicit dimension selection narrows the report.
    let res = run(&["check-testfn", "--config", cfg.to_str().unwrap(), "--dim", "2"]);
    assert_eq!(exit_code(&res), 0);
    let entries: serde_json::Value = serde_json::from_str(&stdout(&res)).unwrap();
    assert_eq!(entries.as_array().unwrap().len(), 2);
}

#[test]
fn verify_passes_every_check_for_the_free_model() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "free.toml", &free_config(&out, "v", 1));

    let res = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&res), 0, "stderr: {}", stderr(&res));
    let text = stdout(&res);
    assert!(text.contains("stability(renyi:1:nats)"));
    assert!(text.contains("purity-identity"));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("v_verify.json")).unwrap()).unwrap();
    assert_eq!(report["failures"], 0);
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 6, "two stability checks plus four battery checks");
    for check in checks {
        assert_eq!(
            check["status"], "pass",
            "check {} did not pass: {}",
            check["name"], check["detail"]
        );
    }
}

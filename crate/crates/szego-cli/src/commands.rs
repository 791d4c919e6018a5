//! Subcommand implementations: predict, sweep, verify, plotdata,
//! check-testfn.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use szego_core::asymptotics::{run_sweep, run_sweep_with, stability_report, SweepTable};
use szego_core::lattice::{arbitrate_convention, fermi_projection, FermiProjection};
use szego_core::model::{Domain, Engine, ModelConfig};
use szego_core::schatten::{
    interpolation_check, q_block_singular_values, schatten_qnorm, telescope_bound_check, trace_h,
};
use szego_core::testfn::{check_membership, poly_basis, MembershipReport, PolyKind};
use szego_core::widom::{predict_trace, N0Convention};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{
    csv_header, csv_row, parse_sweep_csv, write_plot_files, write_sidecar, RowTiming, Sidecar,
    SweepWriter,
};

/// Print the two-term trace predictions for every configured test
/// function as a JSON array.
pub fn cmd_predict(config: &Path) -> CliResult<()> {
    let cfg = ExperimentConfig::load(config)?;
    let hs = cfg.resolve_test_functions()?;
    let mut predictions = Vec::with_capacity(hs.len());
    for h in &hs {
        predictions.push(predict_trace(
            h,
            cfg.model.energy,
            &cfg.model.domain,
            cfg.model.convention,
        )?);
    }
    let text = serde_json::to_string_pretty(&predictions)
        .map_err(|e| CliError::numerical(format!("serialize predictions: {e}")))?;
    println!("{text}");
    Ok(())
}

/// Engine tag used in sidecars when a sweep aborts before producing a
/// table (mirrors the tag the sweep itself reports).
fn engine_tag_for(model: &ModelConfig) -> String {
    match model.engine {
        Engine::Lattice => "lattice".to_string(),
        Engine::ContinuumKernel => {
            if model.potential.is_zero() {
                "nystrom-free".to_string()
            } else {
                "nystrom-scattering".to_string()
            }
        }
    }
}

/// Run the configured scale sweep, streaming rows to
/// `<output_dir>/<experiment>.csv` (via a `.partial` file) with a JSON
/// sidecar of the config snapshot and per-row timings.
pub fn cmd_sweep(config: &Path) -> CliResult<()> {
    let cfg = ExperimentConfig::load(config)?;
    let hs = cfg.resolve_test_functions()?;
    let grid = cfg.resolve_grid()?;
    let cache = cfg.open_cache()?;
    let h_labels: Vec<String> = hs.iter().map(|h| h.label().to_string()).collect();

    // Norm columns need dense lattice blocks; continuum rows carry NaN.
    let s_arg: Option<&[f64]> = match cfg.model.engine {
        Engine::Lattice => Some(&cfg.s_list),
        Engine::ContinuumKernel => None,
    };

    let header = csv_header(&h_labels, &cfg.s_list);
    let mut writer = SweepWriter::create(&cfg.output_dir, &cfg.experiment, &header)?;
    let mut io_err: Option<CliError> = None;
    let mut timings: Vec<RowTiming> = Vec::new();
    let started = Instant::now();

    let result = run_sweep_with(&cfg.model, &grid, &hs, s_arg, cache.as_ref(), |row| {
        timings.push(RowTiming {
            l: row.l,
            wall_time_s: row.wall_time_s,
        });
        if io_err.is_none() {
            let line = csv_row(row, cfg.s_list.len());
            if let Err(e) = writer.write_line(&line).and_then(|_| writer.flush()) {
                io_err = Some(e);
            }
        }
    });
    let total_wall_s = started.elapsed().as_secs_f64();

    let finish =
        |error: Option<String>, engine_tag: String, timings: Vec<RowTiming>| -> CliResult<()> {
            let doc = Sidecar {
                config: &cfg,
                engine_tag,
                h_labels: h_labels.clone(),
                s_list: cfg.s_list.clone(),
                rows: timings,
                total_wall_s,
                error,
            };
            write_sidecar(&cfg.output_dir, &cfg.experiment, &doc)?;
            Ok(())
        };

    if let Some(e) = io_err {
        let _ = finish(
            Some(format!("output error: {e}")),
            engine_tag_for(&cfg.model),
            timings,
        );
        eprintln!(
            "sweep aborted; completed rows left in {}",
            writer.partial_path().display()
        );
        return Err(e);
    }

    match result {
        Ok(table) => {
            let csv = writer.finish()?;
            finish(None, table.engine_tag.clone(), timings)?;
            // Re-runnable echo of the exact config that produced the CSV.
            let echo = cfg
                .output_dir
                .join(format!("{}_config.toml", cfg.experiment));
            std::fs::write(&echo, cfg.emit()?)
                .map_err(|e| CliError::numerical(format!("write {}: {e}", echo.display())))?;
            println!("wrote {} ({} rows)", csv.display(), table.rows.len());
            println!(
                "wrote {}",
                cfg.output_dir
                    .join(format!("{}.json", cfg.experiment))
                    .display()
            );
            Ok(())
        }
        Err(core_err) => {
            let msg = core_err.to_string();
            let _ = finish(Some(msg), engine_tag_for(&cfg.model), timings);
            eprintln!(
                "sweep aborted; completed rows left in {}",
                writer.partial_path().display()
            );
            Err(core_err.into())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
    Error,
    Skipped,
}

impl CheckStatus {
    fn tag(self) -> &'static str {
        match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Inconclusive => "INCONCLUSIVE",
            CheckStatus::Error => "ERROR",
            CheckStatus::Skipped => "SKIP",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

/// Fold a check result into an outcome; failures to even run a check are
/// isolated into an `Error` status instead of aborting the command.
fn outcome(name: &str, result: CliResult<(CheckStatus, String)>) -> CheckOutcome {
    match result {
        Ok((status, detail)) => CheckOutcome {
            name: name.to_string(),
            status,
            detail,
        },
        Err(e) => CheckOutcome {
            name: name.to_string(),
            status: CheckStatus::Error,
            detail: e.to_string(),
        },
    }
}

/// Stability gate: the fitted boundary coefficients must agree within the
/// larger of the leave-one-out uncertainty and 5% of the reference value,
/// and the scaled trace difference must not grow over the top half of the
/// sweep.
fn stability_gate(
    trend_nonincreasing: bool,
    b_perturbed: f64,
    b_reference: f64,
    combined_uncertainty: f64,
) -> (CheckStatus, String) {
    let shift = (b_perturbed - b_reference).abs();
    let tol = combined_uncertainty.max(0.05 * b_reference.abs());
    let detail = format!(
        "b_V = {b_perturbed:.6}, b_0 = {b_reference:.6}, |shift| = {shift:.3e}, tol = {tol:.3e}, \
         difference trend non-increasing: {trend_nonincreasing}"
    );
    if !trend_nonincreasing {
        (CheckStatus::Inconclusive, detail)
    } else if shift <= tol {
        (CheckStatus::Pass, detail)
    } else {
        (CheckStatus::Fail, detail)
    }
}

fn count_bad(outcomes: &[CheckOutcome]) -> usize {
    outcomes
        .iter()
        .filter(|o| matches!(o.status, CheckStatus::Fail | CheckStatus::Error))
        .count()
}

/// Dense-lattice context shared by the operator-norm checks: the
/// perturbed projection, its potential-free companion on the same box,
/// and the scaled domain they are truncated to.
struct LatticeCtx {
    p: FermiProjection,
    p0: FermiProjection,
    domain: Domain,
}

fn lattice_ctx(cfg: &ExperimentConfig, scale: f64) -> CliResult<LatticeCtx> {
    let cache = cfg.open_cache()?;
    let mut model = cfg.model.clone();
    model.engine = Engine::Lattice;
    let p = fermi_projection(&model, scale, cache.as_ref())?;
    let mut reference = model.clone();
    reference.potential = model.potential.reference();
    reference.lattice.box_halfwidth = Some(p.box_info().halfwidth);
    reference.lattice.margin_override = None;
    let p0 = fermi_projection(&reference, scale, cache.as_ref())?;
    let domain = cfg.model.domain.scaled(scale)?;
    Ok(LatticeCtx { p, p0, domain })
}

fn purity_check(ctx: &LatticeCtx) -> CliResult<(CheckStatus, String)> {
    let svals = q_block_singular_values(&ctx.p, &ctx.domain)?;
    let (_, q2_sq) = schatten_qnorm(&svals, 2.0)?;
    let spec = ctx.p.truncated_spectrum(&ctx.domain)?;
    let s1 = poly_basis(PolyKind::S, 1)?;
    let tr = trace_h(&spec, &s1)?;
    let rel = (q2_sq - tr).abs() / tr.abs().max(1e-300);
    let detail = format!("‖Q‖₂² = {q2_sq:.12e}, tr s₁(P) = {tr:.12e}, rel diff = {rel:.3e}");
    if rel <= 1e-10 {
        Ok((CheckStatus::Pass, detail))
    } else {
        Ok((CheckStatus::Fail, detail))
    }
}

fn telescope_check(ctx: &LatticeCtx) -> CliResult<(CheckStatus, String)> {
    let mut worst: Option<(u32, f64, f64)> = None;
    for n in 1..=4 {
        let c = telescope_bound_check(&ctx.p, &ctx.p0, &ctx.domain, n)?;
        if !c.holds {
            return Ok((
                CheckStatus::Fail,
                format!("order {n}: lhs = {:.6e} > rhs = {:.6e}", c.lhs, c.rhs),
            ));
        }
        let slack = c.rhs - c.lhs;
        if worst.map(|(_, _, s)| slack < s).unwrap_or(true) {
            worst = Some((n, c.lhs, slack));
        }
    }
    let (n, lhs, slack) = worst.unwrap();
    Ok((
        CheckStatus::Pass,
        format!("orders 1–4 hold; tightest at n = {n} (lhs = {lhs:.6e}, slack = {slack:.3e})"),
    ))
}

fn interpolation_check_suite(ctx: &LatticeCtx) -> CliResult<(CheckStatus, String)> {
    let svals = q_block_singular_values(&ctx.p, &ctx.domain)?;
    let mut cases: Vec<(f64, f64, f64)> = vec![
        (1.0, 2.0, 0.0),
        (1.0, 2.0, 0.5),
        (1.0, 2.0, 1.0),
        (2.0, 4.0, 0.25),
        (0.5, 3.0, 0.75),
    ];
    let mut rng = StdRng::seed_from_u64(20260825);
    for _ in 0..200 {
        let p0 = 10f64.powf(rng.random_range(-0.3..0.6));
        let p1 = p0 * 10f64.powf(rng.random_range(0.0..0.8));
        let theta = rng.random_range(0.0..=1.0);
        cases.push((p0, p1, theta));
    }
    let total = cases.len();
    for (p0, p1, theta) in cases {
        let c = interpolation_check(&svals, p0, p1, theta)?;
        if !c.holds {
            return Ok((
                CheckStatus::Fail,
                format!(
                    "violated at p₀ = {p0:.4}, p₁ = {p1:.4}, θ = {theta:.4}: \
                     lhs = {:.6e} > rhs = {:.6e}",
                    c.lhs, c.rhs
                ),
            ));
        }
    }
    Ok((
        CheckStatus::Pass,
        format!("{total} exponent triples hold on {} singular values", svals.len()),
    ))
}

fn ids_check(cfg: &ExperimentConfig) -> CliResult<(CheckStatus, String)> {
    let arb = arbitrate_convention(cfg.model.energy)?;
    let n0_chosen = match arb.chosen {
        N0Convention::Weyl => arb.weyl,
        N0Convention::AsPrinted => arb.as_printed,
    };
    let rel = (arb.ids - n0_chosen).abs() / n0_chosen.abs().max(1e-300);
    let detail = format!(
        "lattice IDS = {:.6}, Weyl = {:.6}, as-printed = {:.6}, chosen = {:?}, rel dev = {rel:.3e}",
        arb.ids, arb.weyl, arb.as_printed, arb.chosen
    );
    if arb.chosen != cfg.model.convention {
        return Ok((
            CheckStatus::Fail,
            format!(
                "{detail}; config requests {:?} but the lattice count favors {:?}",
                cfg.model.convention, arb.chosen
            ),
        ));
    }
    if rel <= 0.02 {
        Ok((CheckStatus::Pass, detail))
    } else {
        Ok((CheckStatus::Fail, detail))
    }
}

#[derive(Serialize)]
struct VerifyDocument<'a> {
    experiment: &'a str,
    checks: &'a [CheckOutcome],
    failures: usize,
}

/// Run the verification battery: boundary-coefficient stability for every
/// configured test function, the dense-lattice operator checks, and the
/// volume-coefficient convention arbitration. Each check is isolated —
/// an error in one is reported and the rest still run.
pub fn cmd_verify(config: &Path) -> CliResult<()> {
    let cfg = ExperimentConfig::load(config)?;
    let hs = cfg.resolve_test_functions()?;
    let grid = cfg.resolve_grid()?;
    let cache = cfg.open_cache()?;
    let dim = cfg.model.dimension();

    let mut outcomes: Vec<CheckOutcome> = Vec::new();

    // Sweeps are shared by all stability checks; an error here surfaces
    // once per dependent check rather than aborting the battery.
    let sweeps: CliResult<(SweepTable, Option<SweepTable>)> = (|| {
        let perturbed = run_sweep(&cfg.model, &grid, &hs, None, cache.as_ref())?;
        let reference = if cfg.model.potential.is_zero() {
            None
        } else {
            let mut ref_model = cfg.model.clone();
            ref_model.potential = cfg.model.potential.reference();
            Some(run_sweep(&ref_model, &grid, &hs, None, cache.as_ref())?)
        };
        Ok((perturbed, reference))
    })();

    for h in &hs {
        let name = format!("stability({})", h.label());
        let result = sweeps.as_ref().map_err(|e| e.clone()).and_then(
            |(perturbed, reference)| -> CliResult<(CheckStatus, String)> {
                let reference = reference.as_ref().unwrap_or(perturbed);
                let report = stability_report(perturbed, reference, h)?;
                Ok(stability_gate(
                    report.trend_nonincreasing,
                    report.b_perturbed,
                    report.b_reference,
                    report.combined_uncertainty,
                ))
            },
        );
        outcomes.push(outcome(&name, result));
    }

    if dim == 1 {
        let ctx = lattice_ctx(&cfg, grid[0]);
        let with_ctx = |f: &dyn Fn(&LatticeCtx) -> CliResult<(CheckStatus, String)>| match &ctx {
            Ok(c) => f(c),
            Err(e) => Err(e.clone()),
        };
        outcomes.push(outcome("purity-identity", with_ctx(&purity_check)));
        outcomes.push(outcome("telescope-bound", with_ctx(&telescope_check)));
        outcomes.push(outcome(
            "schatten-interpolation",
            with_ctx(&interpolation_check_suite),
        ));
        outcomes.push(outcome("ids-arbitration", ids_check(&cfg)));
    } else {
        let skip = (
            CheckStatus::Skipped,
            "dense lattice checks run in one dimension only".to_string(),
        );
        for name in ["purity-identity", "telescope-bound", "schatten-interpolation"] {
            outcomes.push(outcome(name, Ok(skip.clone())));
        }
        outcomes.push(outcome(
            "ids-arbitration",
            Ok((
                CheckStatus::Skipped,
                "volume-coefficient arbitration uses the one-dimensional lattice".to_string(),
            )),
        ));
    }

    for o in &outcomes {
        println!("[{:<12}] {}: {}", o.status.tag(), o.name, o.detail);
    }

    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| CliError::numerical(format!("create {}: {e}", cfg.output_dir.display())))?;
    let path = cfg
        .output_dir
        .join(format!("{}_verify.json", cfg.experiment));
    let doc = VerifyDocument {
        experiment: &cfg.experiment,
        checks: &outcomes,
        failures: count_bad(&outcomes),
    };
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::numerical(format!("serialize verify report: {e}")))?;
    std::fs::write(&path, text)
        .map_err(|e| CliError::numerical(format!("write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());

    let bad = count_bad(&outcomes);
    if bad > 0 {
        Err(CliError::numerical(format!(
            "{bad} verification check(s) did not pass"
        )))
    } else {
        Ok(())
    }
}

/// Fit previously written sweep CSVs and emit gnuplot-ready `.dat` files
/// (per-test-function curves plus one coefficient table per sweep).
pub fn cmd_plotdata(config: &Path, sweeps: &[PathBuf]) -> CliResult<()> {
    let cfg = ExperimentConfig::load(config)?;
    let default_path = cfg.output_dir.join(format!("{}.csv", cfg.experiment));
    let paths: Vec<PathBuf> = if sweeps.is_empty() {
        vec![default_path]
    } else {
        sweeps.to_vec()
    };
    for path in &paths {
        let parsed = parse_sweep_csv(path)?;
        let prefix = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(&cfg.experiment)
            .to_string();
        let written = write_plot_files(&cfg, &prefix, &parsed, &cfg.output_dir)?;
        for w in &written {
            println!("wrote {}", w.display());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct MembershipEntry {
    label: String,
    #[serde(flatten)]
    report: MembershipReport,
}

/// Report admissible-class membership for every configured test function
/// across the requested dimensions, as a JSON array.
pub fn cmd_check_testfn(config: &Path, dims: &[u32]) -> CliResult<()> {
    let cfg = ExperimentConfig::load(config)?;
    let hs = cfg.resolve_test_functions()?;
    let mut entries = Vec::new();
    for h in &hs {
        for &d in dims {
            entries.push(MembershipEntry {
                label: h.label().to_string(),
                report: check_membership(h, d)?,
            });
        }
    }
    let text = serde_json::to_string_pretty(&entries)
        .map_err(|e| CliError::numerical(format!("serialize membership report: {e}")))?;
    println!("{text}");
    Ok(())
}

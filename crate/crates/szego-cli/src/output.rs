//! File emission: the frozen sweep CSV schema, JSON sidecars, and
//! gnuplot-ready plot data.
//!
//! CSV format: '.' decimal, ',' separator, LF line endings, 17 significant
//! digits. Norm cells that a row cannot provide (continuum engines) are
//! `NaN`, keeping the column set frozen across engines.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use szego_core::asymptotics::{fit_asymptotics, FitBasis, FitResult, SweepRow, SweepTable};
use szego_core::testfn::from_name;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// 17 significant digits, locale-independent.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// The frozen column list: `L`, one `trace_<label>` per test function,
/// then `q2`, `qdiff2s_<s>` per exponent, `pdiff2`, `trdiff`, `phi`.
pub fn csv_header(h_labels: &[String], s_list: &[f64]) -> String {
    let mut cols = vec!["L".to_string()];
    for l in h_labels {
        cols.push(format!("trace_{l}"));
    }
    cols.push("q2".to_string());
    for s in s_list {
        cols.push(format!("qdiff2s_{s}"));
    }
    cols.push("pdiff2".to_string());
    cols.push("trdiff".to_string());
    cols.push("phi".to_string());
    cols.join(",")
}

/// One data line in the frozen schema.
pub fn csv_row(row: &SweepRow, s_count: usize) -> String {
    let mut cells = vec![fmt_f64(row.l)];
    for &t in &row.traces {
        cells.push(fmt_f64(t));
    }
    match &row.norms {
        Some(n) => {
            cells.push(fmt_f64(n.q2_sq));
            for &(_, v) in &n.qdiff_pow {
                cells.push(fmt_f64(v));
            }
            cells.push(fmt_f64(n.pdiff_2));
            cells.push(fmt_f64(n.trdiff));
            cells.push(fmt_f64(n.phi));
        }
        None => {
            for _ in 0..s_count + 4 {
                cells.push("NaN".to_string());
            }
        }
    }
    cells.join(",")
}

/// Streaming CSV writer: rows land in `<name>.csv.partial` as they are
/// computed; `finish` renames to `<name>.csv`. An aborted sweep therefore
/// leaves its completed rows behind under the `.partial` suffix.
pub struct SweepWriter {
    final_path: PathBuf,
    partial_path: PathBuf,
    file: BufWriter<File>,
}

impl SweepWriter {
    pub fn create(dir: &Path, experiment: &str, header: &str) -> CliResult<SweepWriter> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::numerical(format!("create {}: {e}", dir.display())))?;
        let final_path = dir.join(format!("{experiment}.csv"));
        let partial_path = dir.join(format!("{experiment}.csv.partial"));
        let file = File::create(&partial_path)
            .map_err(|e| CliError::numerical(format!("create {}: {e}", partial_path.display())))?;
        let mut w = SweepWriter {
            final_path,
            partial_path,
            file: BufWriter::new(file),
        };
        w.write_line(header)?;
        Ok(w)
    }

    pub fn write_line(&mut self, line: &str) -> CliResult<()> {
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.write_all(b"\n"))
            .map_err(|e| CliError::numerical(format!("write sweep csv: {e}")))
    }

    /// Flush what has been written so a crashed run still leaves rows.
    pub fn flush(&mut self) -> CliResult<()> {
        self.file
            .flush()
            .map_err(|e| CliError::numerical(format!("flush sweep csv: {e}")))
    }

    /// Promote the partial file to the final name.
    pub fn finish(mut self) -> CliResult<PathBuf> {
        self.flush()?;
        fs::rename(&self.partial_path, &self.final_path).map_err(|e| {
            CliError::numerical(format!(
                "rename {} -> {}: {e}",
                self.partial_path.display(),
                self.final_path.display()
            ))
        })?;
        Ok(self.final_path.clone())
    }

    pub fn partial_path(&self) -> &Path {
        &self.partial_path
    }
}

/// Per-row timing entry of the sidecar.
#[derive(Debug, Serialize)]
pub struct RowTiming {
    pub l: f64,
    pub wall_time_s: f64,
}

/// JSON sidecar: the config snapshot plus run metadata and per-row timing.
#[derive(Debug, Serialize)]
pub struct Sidecar<'a> {
    pub config: &'a ExperimentConfig,
    pub engine_tag: String,
    pub h_labels: Vec<String>,
    pub s_list: Vec<f64>,
    pub rows: Vec<RowTiming>,
    pub total_wall_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Write the sidecar; aborted runs get the `.partial` suffix.
pub fn write_sidecar(dir: &Path, experiment: &str, doc: &Sidecar<'_>) -> CliResult<PathBuf> {
    let name = if doc.error.is_some() {
        format!("{experiment}.json.partial")
    } else {
        format!("{experiment}.json")
    };
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(doc)
        .map_err(|e| CliError::numerical(format!("sidecar json: {e}")))?;
    fs::write(&path, text)
        .map_err(|e| CliError::numerical(format!("write {}: {e}", path.display())))?;
    Ok(path)
}

/// A sweep CSV read back: labels, exponents, and numeric rows.
pub struct ParsedSweep {
    pub h_labels: Vec<String>,
    pub scales: Vec<f64>,
    /// One trace column per label, in label order.
    pub traces: Vec<Vec<f64>>,
}

/// Parse a sweep CSV produced by this tool (schema above).
pub fn parse_sweep_csv(path: &Path) -> CliResult<ParsedSweep> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read sweep {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::config(format!("{}: empty sweep file", path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"L") {
        return Err(CliError::config(format!(
            "{}: not a sweep csv (header starts with {:?})",
            path.display(),
            cols.first()
        )));
    }
    let h_labels: Vec<String> = cols
        .iter()
        .skip(1)
        .take_while(|c| c.starts_with("trace_"))
        .map(|c| c["trace_".len()..].to_string())
        .collect();
    let mut scales = Vec::new();
    let mut traces: Vec<Vec<f64>> = vec![Vec::new(); h_labels.len()];
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(CliError::config(format!(
                "{} line {}: {} cells, expected {}",
                path.display(),
                ln + 2,
                cells.len(),
                cols.len()
            )));
        }
        let parse = |s: &str| -> CliResult<f64> {
            s.parse::<f64>()
                .map_err(|e| CliError::config(format!("{} line {}: {e}", path.display(), ln + 2)))
        };
        scales.push(parse(cells[0])?);
        for (j, t) in traces.iter_mut().enumerate() {
            t.push(parse(cells[1 + j])?);
        }
    }
    Ok(ParsedSweep {
        h_labels,
        scales,
        traces,
    })
}

fn safe_label(label: &str) -> String {
    label.replace(':', "-").replace('.', "_")
}

/// Emit per-test-function plot files (`L  trace  fit  residual`) and one
/// coefficient table, all gnuplot-ready. File names start with `prefix`
/// so several sweeps can land in one directory. Returns the written paths
/// (per-h files first, table last).
pub fn write_plot_files(
    cfg: &ExperimentConfig,
    prefix: &str,
    sweep: &ParsedSweep,
    dir: &Path,
) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::numerical(format!("create {}: {e}", dir.display())))?;
    let dim = cfg.model.dimension();
    let basis = FitBasis::full(dim)?;

    // Rebuild a sweep table so the fits run exactly as they do in-process.
    let table = SweepTable {
        config: cfg.model.clone(),
        engine_tag: "csv".into(),
        h_labels: sweep.h_labels.clone(),
        s_list: Vec::new(),
        rows: sweep
            .scales
            .iter()
            .enumerate()
            .map(|(i, &l)| SweepRow {
                l,
                traces: sweep.traces.iter().map(|t| t[i]).collect(),
                norms: None,
                wall_time_s: 0.0,
            })
            .collect(),
    };

    let mut written = Vec::new();
    let mut fits: Vec<FitResult> = Vec::new();
    for (j, label) in sweep.h_labels.iter().enumerate() {
        let h = from_name(label)?;
        let fit = fit_asymptotics(&table, &h, &basis)?;
        let path = dir.join(format!("{prefix}_{}.dat", safe_label(label)));
        let mut out = String::from("# L trace fit residual\n");
        for (i, &l) in sweep.scales.iter().enumerate() {
            let fitted: f64 = fit
                .coeffs
                .iter()
                .zip(basis_values(dim, l))
                .map(|(c, b)| c * b)
                .sum();
            let trace = sweep.traces[j][i];
            out.push_str(&format!(
                "{} {} {} {}\n",
                fmt_f64(l),
                fmt_f64(trace),
                fmt_f64(fitted),
                fmt_f64(trace - fitted)
            ));
        }
        fs::write(&path, out)
            .map_err(|e| CliError::numerical(format!("write {}: {e}", path.display())))?;
        written.push(path);
        fits.push(fit);
    }

    let table_path = dir.join(format!("{prefix}_fit.dat"));
    let mut out = String::from(
        "# label a_hat b_hat c_hat d_hat residual condition pred_a pred_b rel_err_a rel_err_b\n",
    );
    for fit in &fits {
        let opt = |v: Option<f64>| fmt_f64(v.unwrap_or(f64::NAN));
        let (pa, pb) = match &fit.prediction {
            Some(p) => (p.volume_coeff, p.boundary_coeff),
            None => (f64::NAN, f64::NAN),
        };
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {} {} {} {}\n",
            fit.h_label,
            opt(fit.a_hat),
            opt(fit.b_hat),
            opt(fit.c_hat),
            opt(fit.d_hat),
            fmt_f64(fit.residual_norm),
            fmt_f64(fit.condition),
            fmt_f64(pa),
            fmt_f64(pb),
            opt(fit.rel_err_a),
            opt(fit.rel_err_b),
        ));
    }
    fs::write(&table_path, out)
        .map_err(|e| CliError::numerical(format!("write {}: {e}", table_path.display())))?;
    written.push(table_path);
    Ok(written)
}

/// Standard-basis values at one scale, in basis order.
fn basis_values(dim: u32, l: f64) -> Vec<f64> {
    if dim == 1 {
        vec![l, l.ln(), 1.0]
    } else {
        vec![l * l, l * l.ln(), l, 1.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_17_significant_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(12.5), "1.2500000000000000e1");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        // 0.3 is not representable; 17 digits expose the stored value.
        assert_eq!(fmt_f64(-0.3), "-2.9999999999999999e-1");
        // Round-trip exactness at 17 digits.
        let x = std::f64::consts::PI * 1e-3;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn header_layout_is_frozen() {
        let h = csv_header(
            &["renyi:1:nats".to_string(), "s:1".to_string()],
            &[0.6, 1.0],
        );
        assert_eq!(
            h,
            "L,trace_renyi:1:nats,trace_s:1,q2,qdiff2s_0.6,qdiff2s_1,pdiff2,trdiff,phi"
        );
    }

    #[test]
    fn rows_without_norms_fill_nan_cells() {
        let row = SweepRow {
            l: 2.0,
            traces: vec![1.5],
            norms: None,
            wall_time_s: 0.0,
        };
        let line = csv_row(&row, 2);
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 1 + 1 + 1 + 2 + 3);
        assert!(cells[2..].iter().all(|c| *c == "NaN"));
    }
}

//! CSV tables, the JSON report and atomic file writes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use osc_factor::experiments::{FactorPair, FidelitySeries, ProtocolRun, SweepTable};
use serde::Serialize;

use crate::error::{CliError, Result};

pub const CURVE_COLUMNS: [&str; 8] = ["tau", "F", "g", "k", "alpha", "gamma3", "N", "window_mode"];
pub const SWEEP_VALUE_COLUMNS: [&str; 4] = ["F", "born_probability", "ideal_probability", "tau"];

/// 17 significant digits, enough to recover the exact `f64`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Writes through a temporary file in the target directory, so readers see
/// either the old file or the complete new one.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn comment_lines(out: &mut String, meta: &[String]) {
    for line in meta {
        for l in line.lines() {
            if l.is_empty() {
                out.push_str("#\n");
            } else {
                let _ = writeln!(out, "# {l}");
            }
        }
    }
}

/// One row per time point, series after series.
pub fn curve_csv(meta: &[String], series: &[FidelitySeries]) -> String {
    let mut out = String::new();
    comment_lines(&mut out, meta);
    for s in series {
        let c = &s.metadata;
        let (g, k) = c.leading_coupling();
        let mut notes = Vec::new();
        if let Some(&(tau, f)) = s.extrema.iter().max_by(|a, b| a.1.total_cmp(&b.1)) {
            notes.push(format!("largest maximum F={} at tau={}", num(f), num(tau)));
        }
        for &(theta, tau) in &s.threshold_crossings {
            notes.push(format!("first F>={theta} at tau={}", num(tau)));
        }
        let _ = writeln!(
            out,
            "# series g={} k={k} alpha={} gamma3={}: {}",
            num(g),
            num(c.alpha.modulus()),
            num(c.bath.gamma3()),
            if notes.is_empty() { "no maxima".to_string() } else { notes.join("; ") }
        );
    }
    out.push_str(&CURVE_COLUMNS.join(","));
    out.push('\n');
    for s in series {
        let c = &s.metadata;
        let (g, k) = c.leading_coupling();
        let fixed = format!(
            "{},{k},{},{},{},{}",
            num(g),
            num(c.alpha.modulus()),
            num(c.bath.gamma3()),
            c.target.value(),
            c.window_mode.label()
        );
        for (&tau, &f) in s.tau_grid.iter().zip(&s.values) {
            let _ = writeln!(out, "{},{},{fixed}", num(tau), num(f));
        }
    }
    out
}

/// Axis column, optional series column, then the values; rows that failed
/// hold `nan` and their error is listed in the header comments.
pub fn sweep_csv(meta: &[String], table: &SweepTable) -> String {
    let mut out = String::new();
    comment_lines(&mut out, meta);
    if let Some(t) = table.reference_tau {
        let _ = writeln!(out, "# reference tau={}", num(t));
    }
    for (i, row) in table.rows.iter().enumerate() {
        if let Err(e) = &row.result {
            let _ = writeln!(out, "# row {i} failed: {e}");
        }
    }
    let mut header = vec![table.spec.axis.name()];
    if let Some((axis, _)) = &table.spec.series {
        header.push(axis.name());
    }
    header.extend(SWEEP_VALUE_COLUMNS);
    out.push_str(&header.join(","));
    out.push('\n');
    for row in &table.rows {
        let mut cells = vec![num(row.value)];
        if let Some(s) = row.series {
            cells.push(num(s));
        }
        match &row.result {
            Ok(p) => cells.extend([p.fidelity, p.born_probability, p.ideal_probability, p.tau].map(num)),
            Err(_) => cells.extend(std::iter::repeat_n("nan".to_string(), SWEEP_VALUE_COLUMNS.len())),
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    #[serde(rename = "N")]
    pub n: u64,
    pub pairs: Vec<(u32, u32, f64)>,
    pub tau: f64,
    pub born_probability: f64,
    pub ideal_probability: f64,
    pub success: bool,
    pub outcome: &'static str,
    pub contaminants: Vec<(u32, u32, f64)>,
    pub tau_source: &'static str,
    pub window_mode: &'static str,
    pub warnings: &'a [String],
    pub tool_version: &'static str,
    pub threads: usize,
    pub wall_clock_seconds: f64,
}

fn triples(pairs: &[FactorPair]) -> Vec<(u32, u32, f64)> {
    pairs.iter().map(|p| (p.r, p.s, p.weight)).collect()
}

impl<'a> Report<'a> {
    pub fn new(run: &'a ProtocolRun) -> Self {
        let r = &run.report;
        Self {
            n: r.n,
            pairs: triples(&r.pairs),
            tau: r.tau,
            born_probability: r.born_probability,
            ideal_probability: r.ideal_probability,
            success: r.success,
            outcome: r.outcome.label(),
            contaminants: triples(&r.contaminants),
            tau_source: run.tau_source.label(),
            window_mode: run.curve.metadata.window_mode.label(),
            warnings: &run.warnings,
            tool_version: crate::config::TOOL_VERSION,
            threads: run.threads,
            wall_clock_seconds: run.wall_clock_seconds,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }
}

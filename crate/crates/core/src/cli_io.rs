//! File emission shared by the command-line front end: fixed-format CSV,
//! JSON run manifests and atomic writes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytic_cir::TimeSeries;
use crate::ber_link::BerResult;
use crate::error::Result;
use crate::monte_carlo::HitHistogram;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Floats in every CSV use 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// `# kind: <kind>` header line, then `t_s,value[,extra...]`.
pub fn time_series_csv(series: &TimeSeries, extra: &[(&str, &[f64])]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# kind: {}", series.kind.name());
    out.push_str("t_s,value");
    for (name, _) in extra {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, (t, v)) in series.times.iter().zip(&series.values).enumerate() {
        out.push_str(&fmt_f64(*t));
        out.push(',');
        out.push_str(&fmt_f64(*v));
        for (_, col) in extra {
            out.push(',');
            out.push_str(&fmt_f64(col[i]));
        }
        out.push('\n');
    }
    out
}

/// `t_lo_s,t_hi_s,count`.
pub fn histogram_csv(hist: &HitHistogram) -> String {
    let mut out = String::from("t_lo_s,t_hi_s,count\n");
    for (k, c) in hist.counts.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_f64(hist.bin_edges[k]),
            fmt_f64(hist.bin_edges[k + 1]),
            c
        );
    }
    out
}

/// `t_s_s,channel_kind,D0_um,ber,ci_lo,ci_hi,threshold`; free-space rows
/// carry `inf` as boundary radius.
pub fn ber_csv(results: &[BerResult]) -> String {
    let mut out = String::from("t_s_s,channel_kind,D0_um,ber,ci_lo,ci_hi,threshold\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(r.t_s),
            r.channel_kind.name(),
            fmt_f64(r.boundary_radius_um.unwrap_or(f64::INFINITY)),
            fmt_f64(r.ber),
            fmt_f64(r.ci_lo),
            fmt_f64(r.ci_hi),
            r.threshold_used
        );
    }
    out
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, params: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            params,
            seed,
            tool_version: TOOL_VERSION.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }
}

/// `dir/name.csv` -> `dir/name.manifest.json`.
pub fn manifest_path_for(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}

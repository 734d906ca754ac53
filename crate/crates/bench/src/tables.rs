//! Versioned CSV schemas. Every row carries its schema tag in the first
//! column so a file can be checked without knowing which command wrote it.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, BenchResult};

pub const SUMMARY_SCHEMA: &str = "svdro-summary/1";
pub const TRACE_SCHEMA: &str = "svdro-trace/1";
pub const SCALING_SCHEMA: &str = "svdro-scaling/1";

/// Success rate and completion time of one controller (or kernel) at one
/// threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryRow {
    pub schema: String,
    pub env: String,
    pub label: String,
    /// m
    pub threshold: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_pct: f64,
    /// s, over successful trials only.
    pub time_mean: Option<f64>,
    pub time_std: Option<f64>,
    /// `*` when no trial completed.
    pub star: String,
}

impl SummaryRow {
    fn check(&self) -> Result<(), String> {
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err("threshold must be positive".into());
        }
        if self.trials == 0 || self.successes > self.trials {
            return Err("successes must lie in 0..=trials with trials > 0".into());
        }
        let pct = 100.0 * self.successes as f64 / self.trials as f64;
        if (self.success_pct - pct).abs() > 1e-6 {
            return Err(format!("success_pct {} disagrees with {}/{}", self.success_pct, self.successes, self.trials));
        }
        let star = self.successes == 0;
        if (self.star == "*") != star || !(self.star.is_empty() || self.star == "*") {
            return Err("star must be `*` exactly when nothing completed".into());
        }
        if star != self.time_mean.is_none() || self.time_mean.is_none() != self.time_std.is_none() {
            return Err("completion times must be present exactly when trials completed".into());
        }
        if [self.time_mean, self.time_std].iter().flatten().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err("completion times must be finite and nonnegative".into());
        }
        Ok(())
    }
}

/// Long-format trace sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRow {
    pub schema: String,
    /// `objective`, `particles` or `discrepancy`.
    pub mode: String,
    pub label: String,
    pub trial: usize,
    pub seed: u64,
    /// Solver iteration, planning cycle, or offset index.
    pub iteration: usize,
    pub series: String,
    pub value: f64,
}

impl TraceRow {
    fn check(&self) -> Result<(), String> {
        if !matches!(self.mode.as_str(), "objective" | "particles" | "discrepancy") {
            return Err(format!("unknown trace mode `{}`", self.mode));
        }
        if self.series.is_empty() {
            return Err("empty series name".into());
        }
        if self.value.is_nan() {
            return Err("NaN value".into());
        }
        Ok(())
    }
}

/// Wall-clock of one SV-DRO plan plus transport at one axis value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingRow {
    pub schema: String,
    /// `particles` or `horizon`.
    pub axis: String,
    pub value: usize,
    pub workers: usize,
    pub repetitions: usize,
    /// s
    pub mean_s: f64,
    pub std_s: f64,
}

impl ScalingRow {
    fn check(&self) -> Result<(), String> {
        if !matches!(self.axis.as_str(), "particles" | "horizon") {
            return Err(format!("unknown axis `{}`", self.axis));
        }
        if self.value == 0 || self.workers == 0 || self.repetitions == 0 {
            return Err("value, workers and repetitions must be positive".into());
        }
        if !(self.mean_s.is_finite() && self.mean_s > 0.0 && self.std_s.is_finite() && self.std_s >= 0.0) {
            return Err("durations must be positive and finite".into());
        }
        Ok(())
    }
}

const SUMMARY_COLUMNS: [&str; 10] = [
    "schema",
    "env",
    "label",
    "threshold",
    "trials",
    "successes",
    "success_pct",
    "time_mean",
    "time_std",
    "star",
];
const TRACE_COLUMNS: [&str; 8] = ["schema", "mode", "label", "trial", "seed", "iteration", "series", "value"];
const SCALING_COLUMNS: [&str; 7] = ["schema", "axis", "value", "workers", "repetitions", "mean_s", "std_s"];

pub fn to_csv<R: Serialize>(rows: &[R]) -> BenchResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| crate::error::BenchError::Runtime(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| crate::error::BenchError::Runtime(format!("csv: {e}")))
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> BenchResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let text = to_csv(rows)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

fn rows<R: DeserializeOwned>(
    reader: &mut csv::Reader<&[u8]>,
    schema: &str,
    tag: impl Fn(&R) -> &str,
    check: impl Fn(&R) -> Result<(), String>,
) -> Result<usize, String> {
    let mut n = 0;
    for (i, rec) in reader.deserialize::<R>().enumerate() {
        let row = rec.map_err(|e| format!("row {}: {e}", i + 1))?;
        if tag(&row) != schema {
            return Err(format!("row {}: schema `{}`, expected `{schema}`", i + 1, tag(&row)));
        }
        check(&row).map_err(|e| format!("row {}: {e}", i + 1))?;
        n += 1;
    }
    Ok(n)
}

/// Identifies which schema a CSV document follows and checks every row
/// against it. Returns the schema tag and the row count.
pub fn validate_csv(text: &str) -> BenchResult<(&'static str, usize)> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| invalid(format!("csv header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let result = if header == SUMMARY_COLUMNS {
        rows::<SummaryRow>(&mut reader, SUMMARY_SCHEMA, |r| &r.schema, SummaryRow::check)
            .map(|n| (SUMMARY_SCHEMA, n))
    } else if header == TRACE_COLUMNS {
        rows::<TraceRow>(&mut reader, TRACE_SCHEMA, |r| &r.schema, TraceRow::check).map(|n| (TRACE_SCHEMA, n))
    } else if header == SCALING_COLUMNS {
        rows::<ScalingRow>(&mut reader, SCALING_SCHEMA, |r| &r.schema, ScalingRow::check)
            .map(|n| (SCALING_SCHEMA, n))
    } else {
        Err(format!("header `{}` matches no known schema", header.join(",")))
    };
    result.map_err(invalid)
}

/// Plain-text rendering of a summary table.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut out = format!(
        "{:<16} {:>9} {:>8} {:>9} {:>18}\n",
        "label", "threshold", "trials", "success", "completion [s]"
    );
    for r in rows {
        let time = match (r.time_mean, r.time_std) {
            (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
            _ => "*".to_string(),
        };
        out.push_str(&format!(
            "{:<16} {:>8.2}m {:>8} {:>8.2}% {:>18}\n",
            r.label, r.threshold, r.trials, r.success_pct, time
        ));
    }
    out
}

//! results.csv, summary.json and per-run interval tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::eval::sweep::{SummaryRow, SweepOutcome};
use crate::pipeline::RunResult;

pub const RESULTS_HEADER: &str =
    "method_trend,method_season,method_remainder,decomposed,alpha,seed,picp,piaw,runtime_ms";

/// Fixed six-decimal formatting; infinities as `inf`, failures as `nan`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        let s = format!("{v:.6}");
        // avoid "-0.000000"
        if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
            s[1..].to_string()
        } else {
            s
        }
    }
}

fn json_number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn summary_json(row: &SummaryRow) -> Value {
    json!({
        "method_trend": row.method_trend,
        "method_season": row.method_season,
        "method_remainder": row.method_remainder,
        "decomposed": row.decomposed,
        "alpha": row.alpha,
        "n_seeds": row.n_seeds,
        "n_failed": row.n_failed,
        "picp_mean": json_number(row.picp_mean),
        "picp_se": json_number(row.picp_se),
        "piaw_mean": json_number(row.piaw_mean),
        "piaw_se": json_number(row.piaw_se),
        "piaw_infinite": row.piaw_infinite,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Test-range intervals of a run: the recomposed (or raw) series followed
/// by each component's own, `t` being the 1-based series index.
pub fn write_intervals_csv(path: impl AsRef<Path>, run: &RunResult) -> Result<()> {
    let mut out = String::from("t,actual,lower,upper,component\n");
    let mut block = |actuals: &[f64], iv: &crate::types::IntervalSeries| {
        for (i, (y, v)) in actuals.iter().zip(iv.iter()).enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                run.test_start + i + 1,
                format_float(*y),
                format_float(v.lower),
                format_float(v.upper),
                iv.component()
            );
        }
    };
    block(&run.actuals, &run.intervals);
    for c in &run.components {
        block(&c.actuals, &c.intervals);
    }
    write(path.as_ref(), &out)
}

/// Writes `results.csv`, `summary.json` and `intervals/run_NNN.csv` for
/// every successful run. Returns the written paths.
pub fn emit_report(outcome: &SweepOutcome, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let mut csv = String::from(RESULTS_HEADER);
    csv.push('\n');
    for r in &outcome.rows {
        let piaw = if r.piaw_infinite {
            f64::INFINITY
        } else {
            r.piaw
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.method_trend,
            r.method_season,
            r.method_remainder,
            r.decomposed,
            format_float(r.alpha),
            r.seed,
            format_float(r.picp),
            format_float(piaw),
            format_float(r.runtime_ms),
        );
    }
    let results = dir.join("results.csv");
    write(&results, &csv)?;
    written.push(results);

    let failures: Vec<Value> = outcome
        .rows
        .iter()
        .filter_map(|r| {
            r.error.as_ref().map(|e| {
                json!({
                    "method_trend": r.method_trend,
                    "method_season": r.method_season,
                    "method_remainder": r.method_remainder,
                    "alpha": r.alpha,
                    "seed": r.seed,
                    "error": e,
                })
            })
        })
        .collect();
    let summary = json!({
        "configs": outcome.summary.iter().map(summary_json).collect::<Vec<_>>(),
        "failures": failures,
    });
    let summary_path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary)?;
    write(&summary_path, &(text + "\n"))?;
    written.push(summary_path);

    let runs_dir = dir.join("intervals");
    if outcome.runs.iter().any(Option::is_some) {
        fs::create_dir_all(&runs_dir).map_err(|e| Error::io(&runs_dir, e))?;
    }
    for (i, run) in outcome.runs.iter().enumerate() {
        if let Some(run) = run {
            let p = runs_dir.join(format!("run_{i:03}.csv"));
            write_intervals_csv(&p, run)?;
            written.push(p);
        }
    }
    Ok(written)
}

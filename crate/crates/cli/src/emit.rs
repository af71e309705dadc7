//! Tidy CSV tables projected from trajectory logs.

use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{CliError, Result};
use crate::experiment::RunRecord;

/// Series that trajectory records may carry.
pub const KNOWN_SERIES: [&str; 3] = ["nash_gap", "phi_mu", "clock"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeriesSelection {
    All,
    Named(Vec<String>),
}

struct Row {
    time: f64,
    seed: u64,
    record: Value,
}

fn read_log(path: &Path, seed: u64) -> Result<(String, Vec<Row>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut time_key = None;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |reason: String| CliError::Malformed {
            path: path.to_path_buf(),
            reason: format!("line {}: {reason}", n + 1),
        };
        let record: Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let key = match record.get("kind").and_then(Value::as_str) {
            Some("learn") => "t",
            Some("flow") => "tau",
            other => return Err(bad(format!("unexpected kind {other:?}"))),
        };
        time_key.get_or_insert(key);
        let time = record
            .get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| bad(format!("missing `{key}`")))?;
        rows.push(Row { time, seed, record });
    }
    Ok((time_key.unwrap_or("t").to_string(), rows))
}

/// Writes `<series>.csv` with columns `t|tau, seed, <series>` into `out_dir`,
/// one row per log record carrying the series.
pub fn emit_plot_data(record: &RunRecord, selection: &SeriesSelection, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let logs: Vec<_> = record
        .seeds
        .iter()
        .filter(|s| s.log.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    if logs.is_empty() {
        return Err(CliError::NoLogs);
    }
    let mut time_key = String::from("t");
    let mut rows = Vec::new();
    for s in logs {
        let (key, mut r) = read_log(&record.output_dir.join(&s.log), s.seed)?;
        time_key = key;
        rows.append(&mut r);
    }
    let present = |name: &str| rows.iter().any(|r| r.record.get(name).is_some_and(|v| !v.is_null()));
    let names: Vec<String> = match selection {
        SeriesSelection::All => KNOWN_SERIES
            .iter()
            .filter(|n| present(n))
            .map(|n| n.to_string())
            .collect(),
        SeriesSelection::Named(names) => {
            for n in names {
                if !KNOWN_SERIES.contains(&n.as_str()) {
                    return Err(CliError::UnknownSeries(n.clone()));
                }
                if !present(n) {
                    return Err(CliError::AbsentSeries(n.clone()));
                }
            }
            names.clone()
        }
    };
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut written = Vec::new();
    for name in names {
        let path = out_dir.join(format!("{name}.csv"));
        let csv_err = |e: csv::Error| CliError::Malformed {
            path: path.clone(),
            reason: e.to_string(),
        };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record([time_key.as_str(), "seed", name.as_str()]).map_err(csv_err)?;
        for r in &rows {
            if let Some(v) = r.record.get(&name).and_then(Value::as_f64) {
                w.write_record([r.time.to_string(), r.seed.to_string(), v.to_string()])
                    .map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

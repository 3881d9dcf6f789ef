//! Per-run metric records and their CSV form.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! `parse(emit(records)) == records` holds exactly and deterministic runs
//! produce byte-identical files.

use crate::error::{Result, RuntimeError};
use std::fmt::Write as _;
use std::path::Path;

pub const CSV_HEADER: &str =
    "iteration,epoch,train_loss,eval_accuracy,wall_time_s,sim_time,pushes,pulls";

/// One evaluation row. `eval_accuracy` is absent for regression models,
/// `sim_time` is absent unless a timing profile is attached to the run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub iteration: u64,
    pub epoch: u64,
    pub train_loss: f64,
    pub eval_accuracy: Option<f64>,
    pub wall_time_s: f64,
    pub sim_time: Option<f64>,
    pub pushes: u64,
    pub pulls: u64,
}

fn write_opt(out: &mut String, v: Option<f64>) {
    if let Some(x) = v {
        let _ = write!(out, "{x}");
    }
}

pub fn to_csv(records: &[MetricRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = write!(
            out,
            "{},{},{},",
            r.iteration, r.epoch, r.train_loss
        );
        write_opt(&mut out, r.eval_accuracy);
        let _ = write!(out, ",{},", r.wall_time_s);
        write_opt(&mut out, r.sim_time);
        let _ = write!(out, ",{},{}", r.pushes, r.pulls);
        out.push('\n');
    }
    out
}

fn parse_opt(field: &str, line: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        field
            .parse::<f64>()
            .map(Some)
            .map_err(|e| RuntimeError::Protocol(format!("csv line {line}: {e}")))
    }
}

pub fn from_csv(text: &str) -> Result<Vec<MetricRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(RuntimeError::Protocol(format!(
                "unexpected csv header: {other:?}"
            )))
        }
    }
    let mut records = Vec::new();
    let mut last_iter: Option<u64> = None;
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(RuntimeError::Protocol(format!(
                "csv line {}: expected 8 fields, found {}",
                i + 2,
                fields.len()
            )));
        }
        let parse_u64 = |s: &str| -> Result<u64> {
            s.parse()
                .map_err(|e| RuntimeError::Protocol(format!("csv line {}: {e}", i + 2)))
        };
        let parse_f64 = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| RuntimeError::Protocol(format!("csv line {}: {e}", i + 2)))
        };
        let record = MetricRecord {
            iteration: parse_u64(fields[0])?,
            epoch: parse_u64(fields[1])?,
            train_loss: parse_f64(fields[2])?,
            eval_accuracy: parse_opt(fields[3], i + 2)?,
            wall_time_s: parse_f64(fields[4])?,
            sim_time: parse_opt(fields[5], i + 2)?,
            pushes: parse_u64(fields[6])?,
            pulls: parse_u64(fields[7])?,
        };
        if let Some(prev) = last_iter {
            if record.iteration <= prev {
                return Err(RuntimeError::Protocol(format!(
                    "csv line {}: iteration {} not increasing (prev {prev})",
                    i + 2,
                    record.iteration
                )));
            }
        }
        if record.pulls > record.pushes {
            return Err(RuntimeError::Protocol(format!(
                "csv line {}: pulls {} exceed pushes {}",
                i + 2,
                record.pulls,
                record.pushes
            )));
        }
        last_iter = Some(record.iteration);
        records.push(record);
    }
    Ok(records)
}

pub fn write_csv(path: &Path, records: &[MetricRecord]) -> Result<()> {
    std::fs::write(path, to_csv(records))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricRecord>> {
    let text = std::fs::read_to_string(path)?;
    from_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(iter: u64) -> MetricRecord {
        MetricRecord {
            iteration: iter,
            epoch: iter / 10,
            train_loss: 0.1 * iter as f64 + 0.0123456789,
            eval_accuracy: if iter % 2 == 0 { Some(0.5 + 1e-17) } else { None },
            wall_time_s: iter as f64 * 0.001,
            sim_time: if iter % 3 == 0 { Some(iter as f64 * 1.5) } else { None },
            pushes: iter * 4,
            pulls: iter,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let records: Vec<MetricRecord> = (1..20).map(record).collect();
        let csv = to_csv(&records);
        let parsed = from_csv(&csv).unwrap();
        assert_eq!(records, parsed);
        // and byte-stable
        assert_eq!(csv, to_csv(&parsed));
    }

    #[test]
    fn non_increasing_iterations_rejected() {
        let mut records = vec![record(5), record(5)];
        records[1].pushes = records[1].pulls; // keep pulls <= pushes valid
        let csv = to_csv(&records);
        assert!(from_csv(&csv).is_err());
    }

    #[test]
    fn pulls_above_pushes_rejected() {
        let mut r = record(1);
        r.pulls = r.pushes + 1;
        let csv = to_csv(&[r]);
        assert!(from_csv(&csv).is_err());
    }

    #[test]
    fn header_mismatch_rejected() {
        assert!(from_csv("a,b,c\n").is_err());
    }
}

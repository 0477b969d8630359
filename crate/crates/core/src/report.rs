//! Per-object summaries and JSONL trajectory logs.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::controller::{Phase, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::scenario::RunMetrics;
use crate::so3::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Table,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "table" => Ok(Self::Table),
            other => Err(Error::InvalidArgument(format!("unknown report format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSummary {
    pub object: String,
    pub mean_error_deg: f64,
    pub mean_plan_time: f64,
    pub mean_total_time: f64,
    pub successes: usize,
    pub runs: usize,
}

/// Groups by object in order of first appearance.
pub fn summarize(metrics: &[RunMetrics]) -> Vec<ObjectSummary> {
    let mut order: Vec<&str> = Vec::new();
    for m in metrics {
        if !order.contains(&m.object.as_str()) {
            order.push(&m.object);
        }
    }
    order
        .into_iter()
        .map(|name| {
            let rows: Vec<&RunMetrics> = metrics.iter().filter(|m| m.object == name).collect();
            let n = rows.len() as f64;
            let mean = |f: fn(&RunMetrics) -> f64| rows.iter().map(|m| f(m)).sum::<f64>() / n;
            ObjectSummary {
                object: name.to_string(),
                mean_error_deg: mean(|m| m.final_orientation_error),
                mean_plan_time: mean(|m| m.total_plan_time),
                mean_total_time: mean(|m| m.total_time),
                successes: rows.iter().filter(|m| m.success).count(),
                runs: rows.len(),
            }
        })
        .collect()
}

const HEADER: [&str; 5] = ["object", "mean_error_deg", "mean_plan_time_s", "mean_total_time_s", "success"];

pub fn emit_report(metrics: &[RunMetrics], format: ReportFormat) -> Result<String> {
    if metrics.is_empty() {
        return Err(Error::InvalidArgument("no runs to report".into()));
    }
    let rows: Vec<[String; 5]> = summarize(metrics)
        .into_iter()
        .map(|s| {
            [
                s.object,
                format!("{:.3}", s.mean_error_deg),
                format!("{:.4}", s.mean_plan_time),
                format!("{:.1}", s.mean_total_time),
                format!("{}/{}", s.successes, s.runs),
            ]
        })
        .collect();

    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(&HEADER.join(","));
            out.push('\n');
            for r in &rows {
                out.push_str(&r.join(","));
                out.push('\n');
            }
        }
        ReportFormat::Table => {
            let mut widths = HEADER.map(str::len);
            for r in &rows {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.len());
                }
            }
            let line = |cells: &[&str]| {
                let mut s = String::new();
                for (i, (c, w)) in cells.iter().zip(widths).enumerate() {
                    if i == 0 {
                        let _ = write!(s, "{c:<w$}");
                    } else {
                        let _ = write!(s, "  {c:>w$}");
                    }
                }
                s.push('\n');
                s
            };
            out.push_str(&line(&HEADER));
            let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
            for r in &rows {
                let cells: Vec<&str> = r.iter().map(String::as_str).collect();
                out.push_str(&line(&cells));
            }
        }
    }
    Ok(out)
}

/// Cross-run spread of the observed pose in `phase`, per axis
/// (roll, pitch, yaw, x, y, z). Runs are aligned by tick and cut to the
/// shortest; each axis is the mean over ticks of the population standard
/// deviation, in units of `rot_unit` (rad) or `trans_unit` (m).
pub fn axis_spread(logs: &[TrajectoryRecord], phase: Phase, rot_unit: f64, trans_unit: f64) -> Option<[f64; 6]> {
    let runs: Vec<Vec<[f64; 6]>> = logs
        .iter()
        .map(|log| {
            log.entries
                .iter()
                .filter(|e| e.phase == phase)
                .map(|e| {
                    let [r, p, y] = e.pose.r.rpy().to_array();
                    let [tx, ty, tz] = e.pose.t.to_array();
                    [r, p, y, tx, ty, tz]
                })
                .collect()
        })
        .collect();
    let len = runs.iter().map(Vec::len).min()?;
    if runs.len() < 2 || len == 0 {
        return None;
    }
    let n = runs.len() as f64;
    let mut out = [0.0; 6];
    for k in 0..len {
        for (axis, acc) in out.iter_mut().enumerate() {
            // Angles are taken relative to the first run so that wrap-around
            // at ±π does not inflate the spread.
            let reference = runs[0][k][axis];
            let devs: Vec<f64> = runs
                .iter()
                .map(|r| if axis < 3 { wrap_angle(r[k][axis] - reference) } else { r[k][axis] - reference })
                .collect();
            let mean = devs.iter().sum::<f64>() / n;
            let var = devs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
            *acc += var.sqrt() / if axis < 3 { rot_unit } else { trans_unit };
        }
    }
    Some(out.map(|v| v / len as f64))
}

pub fn write_jsonl<W: Write>(log: &TrajectoryRecord, mut w: W) -> Result<()> {
    for e in &log.entries {
        serde_json::to_writer(&mut w, e).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<dir>/<scenario>_rep<k>.jsonl`, creating `dir` if needed.
pub fn write_log_file(dir: &Path, scenario: &str, rep: usize, log: &TrajectoryRecord) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{scenario}_rep{rep}.jsonl"));
    let f = std::io::BufWriter::new(std::fs::File::create(&path)?);
    write_jsonl(log, f)?;
    Ok(path)
}

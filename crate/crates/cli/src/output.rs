//! CSV and metadata files of an experiment directory.
//!
//! | file | columns |
//! |---|---|
//! | `trace_<tag>_seed<seed>.csv` | `t, grad_norm, grad_mstar_norm, inner_residual, wall_ms, status` |
//! | `summary.csv` | `tag, seed, status, iters, final_grad_mstar, rate_class, rho` |
//! | `plotdata_<title>.csv` | `series_label, t, residual_mstar` |
//! | `contraction_<tag>_seed<seed>.csv` | `t, ratio, eta, nu, bound_rhs, certified, within_bound` |
//! | `embedding_rates.csv` | `tag, rows, successes, trials, rate, meets_target` |
//!
//! Everything except `metadata.toml` is a pure function of the config and
//! seeds. Floats are written in their shortest round-trip form.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::plot::{render_svg, Series};
use crate::runner::{embedding_rates, Report, RunOutcome};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const METADATA_FILE: &str = "metadata.toml";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trace_file(tag: &str, seed: u64) -> String {
    format!("trace_{tag}_seed{seed}.csv")
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Metadata {
    pub title: String,
    pub experiment: String,
    pub problem: String,
    pub total_wall_ms: f64,
    pub reference_newton_iterations: Option<usize>,
    pub reference_error: Option<String>,
    pub runs: Vec<RunMeta>,
    pub failures: Vec<FailureMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub tag: String,
    pub seed: u64,
    pub status: String,
    pub wall_ms: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FailureMeta {
    pub tag: String,
    pub seed: u64,
    pub message: String,
}

/// Writes every output file of `report` into `dir`; returns the files written.
pub fn write_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut summary = csv::Writer::from_path(dir.join(SUMMARY_FILE))?;
    summary.write_record(["tag", "seed", "status", "iters", "final_grad_mstar", "rate_class", "rho"])?;
    let mut series = Vec::new();

    for rec in &report.records {
        let seed = rec.seed.to_string();
        match &rec.outcome {
            RunOutcome::Solved {
                trace,
                rate,
                contraction,
            } => {
                let path = dir.join(trace_file(&rec.tag, rec.seed));
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["t", "grad_norm", "grad_mstar_norm", "inner_residual", "wall_ms", "status"])?;
                let last = trace.records.len().saturating_sub(1);
                for (i, row) in trace.records.iter().enumerate() {
                    let step = row.step.as_ref();
                    let status = if i == last {
                        trace.status.label()
                    } else if step.is_some_and(|s| s.inner_stalled) {
                        "inner_stalled"
                    } else {
                        "step"
                    };
                    w.write_record([
                        row.t.to_string(),
                        row.grad_norm.to_string(),
                        opt(row.grad_mstar_norm),
                        opt(step.map(|s| s.inner_residual)),
                        if report.record_timing { row.wall_ms.to_string() } else { String::new() },
                        status.to_string(),
                    ])?;
                }
                w.flush()?;
                written.push(path);

                let final_mstar = trace.records.last().and_then(|r| r.grad_mstar_norm);
                let (class, rho) = match rate {
                    Ok(r) => (r.classification.label().to_string(), opt(r.classification.rho())),
                    Err(_) => ("unavailable".to_string(), String::new()),
                };
                summary.write_record([
                    rec.tag.clone(),
                    seed,
                    rec.status().to_string(),
                    trace.iterations().to_string(),
                    opt(final_mstar),
                    class,
                    rho,
                ])?;
                let points: Vec<(usize, f64)> = trace
                    .records
                    .iter()
                    .filter_map(|r| r.grad_mstar_norm.map(|v| (r.t, v)))
                    .collect();
                if !points.is_empty() {
                    series.push(Series {
                        label: format!("{}@s{}", rec.tag, rec.seed),
                        points,
                    });
                }
                if let Some(rows) = contraction {
                    let path = dir.join(format!("contraction_{}_seed{}.csv", rec.tag, rec.seed));
                    let mut w = csv::Writer::from_path(&path)?;
                    w.write_record(["t", "ratio", "eta", "nu", "bound_rhs", "certified", "within_bound"])?;
                    for r in rows {
                        w.write_record([
                            r.t.to_string(),
                            r.ratio.to_string(),
                            r.eta.to_string(),
                            r.nu.to_string(),
                            r.bound_rhs.to_string(),
                            r.certified.to_string(),
                            r.within_bound.to_string(),
                        ])?;
                    }
                    w.flush()?;
                    written.push(path);
                }
            }
            RunOutcome::Embedding { .. } | RunOutcome::Failed(_) => {
                summary.write_record([
                    rec.tag.as_str(),
                    seed.as_str(),
                    rec.status(),
                    "",
                    "",
                    "",
                    "",
                ])?;
            }
        }
    }
    summary.flush()?;
    written.push(dir.join(SUMMARY_FILE));

    let rates = embedding_rates(report);
    if !rates.is_empty() {
        let path = dir.join("embedding_rates.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["tag", "rows", "successes", "trials", "rate", "meets_target"])?;
        for (tag, rows, hits, trials) in rates {
            let rate = hits as f64 / trials as f64;
            w.write_record([
                tag,
                rows.to_string(),
                hits.to_string(),
                trials.to_string(),
                rate.to_string(),
                (rate >= report.embedding_target).to_string(),
            ])?;
        }
        w.flush()?;
        written.push(path);
    }

    if !series.is_empty() {
        written.extend(write_plot_files(dir, &report.title, &series)?);
    }

    let meta = Metadata {
        title: report.title.clone(),
        experiment: report.experiment.to_string(),
        problem: report.problem.clone(),
        total_wall_ms: report.total_wall_ms,
        reference_newton_iterations: report.reference.as_ref().ok().copied(),
        reference_error: report.reference.as_ref().err().filter(|e| e.as_str() != "not needed").cloned(),
        runs: report
            .records
            .iter()
            .map(|r| RunMeta {
                tag: r.tag.clone(),
                seed: r.seed,
                status: r.status().to_string(),
                wall_ms: r.wall_ms,
            })
            .collect(),
        failures: report
            .records
            .iter()
            .filter_map(|r| match &r.outcome {
                RunOutcome::Failed(m) => Some(FailureMeta {
                    tag: r.tag.clone(),
                    seed: r.seed,
                    message: m.clone(),
                }),
                _ => None,
            })
            .collect(),
    };
    let text = toml::to_string(&meta).map_err(|e| CliError::Config(format!("cannot encode metadata: {e}")))?;
    fs::write(dir.join(METADATA_FILE), text)?;
    written.push(dir.join(METADATA_FILE));
    Ok(written)
}

fn write_plot_files(dir: &Path, title: &str, series: &[Series]) -> Result<Vec<PathBuf>, CliError> {
    let csv_path = dir.join(format!("plotdata_{title}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["series_label", "t", "residual_mstar"])?;
    for s in series {
        for (t, v) in &s.points {
            w.write_record([s.label.clone(), t.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    let svg_path = dir.join(format!("plot_{title}.svg"));
    fs::write(&svg_path, render_svg(title, series))?;
    Ok(vec![csv_path, svg_path])
}

/// Rebuilds the plot data and SVG of an existing run directory from its
/// `summary.csv` and trace files.
pub fn emit_plot_data(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let missing = |what: String| CliError::MissingInputs {
        dir: dir.to_path_buf(),
        expected: what,
    };
    let summary_path = dir.join(SUMMARY_FILE);
    if !summary_path.is_file() {
        return Err(missing(format!(
            "{SUMMARY_FILE} and trace_<tag>_seed<seed>.csv files (run `approxnewton run <config>` first)"
        )));
    }
    let title = fs::read_to_string(dir.join(METADATA_FILE))
        .ok()
        .and_then(|t| toml::from_str::<BTreeMap<String, toml::Value>>(&t).ok())
        .and_then(|m| m.get("title").and_then(|v| v.as_str().map(str::to_string)))
        .unwrap_or_else(|| "custom".to_string());

    let mut series = Vec::new();
    let mut absent = Vec::new();
    let mut reader = csv::Reader::from_path(&summary_path)?;
    for row in reader.records() {
        let row = row?;
        let (tag, seed, status) = (&row[0], &row[1], &row[2]);
        if matches!(status, "error" | "embedded" | "not_embedded") {
            continue;
        }
        let name = format!("trace_{tag}_seed{seed}.csv");
        let path = dir.join(&name);
        if !path.is_file() {
            absent.push(name);
            continue;
        }
        let mut points = Vec::new();
        let mut tr = csv::Reader::from_path(&path)?;
        for rec in tr.records() {
            let rec = rec?;
            if let (Ok(t), Ok(v)) = (rec[0].parse::<usize>(), rec[2].parse::<f64>()) {
                points.push((t, v));
            }
        }
        if !points.is_empty() {
            series.push(Series {
                label: format!("{tag}@s{seed}"),
                points,
            });
        }
    }
    if !absent.is_empty() {
        return Err(missing(absent.join(", ")));
    }
    if series.is_empty() {
        return Err(missing("at least one trace with grad_mstar_norm values".into()));
    }
    write_plot_files(dir, &title, &series)
}

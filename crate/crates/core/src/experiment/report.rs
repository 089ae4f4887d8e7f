//! CSV output of grid and reference runs.
//!
//! Layout of an output directory:
//!
//! * `config.resolved.toml`: the configuration actually used.
//! * `baselines.csv`, `preferences.csv`: single-objective baselines and the generated preferences.
//! * `runs.csv`: one row per training run, failures included.
//! * `hvi.csv`: hypervolume per label set, method and seed.
//! * `aggregate.csv`: rule vs smoothed rule (and SLA vs LS) with gains and p-values.
//! * `summary.csv`: per-method means and the MWL ranking.
//! * `traces/`, `models/`: per-run iteration traces and model files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::grid::GridReport;
use super::reference::ReferenceReport;
use crate::combinators::TradeOff;
use crate::{Error, Result};

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::file(path, e))
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn padded(values: &[f64], width: usize) -> Vec<String> {
    let mut out: Vec<String> = values.iter().map(|&v| fmt(v)).collect();
    out.resize(width, String::new());
    out
}

fn numbered(prefix: &str, width: usize) -> Vec<String> {
    (1..=width).map(|i| format!("{prefix}{i}")).collect()
}

fn joined(values: &[f64]) -> String {
    values.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(";")
}

pub fn write_aggregate<W: Write>(report: &GridReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label_set", "family", "metric", "orig", "ma", "gain_pct", "p_value", "pairs"])?;
    for c in &report.comparisons {
        w.write_record([
            report.label_sets[c.label_set].name.clone(),
            c.family.clone(),
            c.metric.clone(),
            fmt(c.orig),
            fmt(c.ma),
            fmt(c.gain_pct),
            fmt_opt(c.p_value),
            c.pairs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_runs<W: Write>(report: &GridReport, out: W) -> Result<()> {
    let k = report.label_sets.iter().map(|c| c.labels.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> =
        ["label_set", "method", "preference", "seed", "status", "form", "values", "n_trees", "stop_reason"]
            .map(String::from)
            .to_vec();
    header.extend(numbered("train_c_", k));
    header.extend(numbered("test_c_", k));
    header.extend(numbered("test_ndcg_", k));
    header.extend(["mwl_train", "mwl_test", "vno_test", "fallbacks", "error"].map(String::from));
    w.write_record(&header)?;
    for run in &report.runs {
        let (form, values) = match &run.preference.trade_off {
            TradeOff::Priority { weights } => ("priority", joined(weights)),
            TradeOff::EpsilonConstraint { bounds, .. } => ("epsilon", joined(bounds)),
        };
        let mut row = vec![
            report.label_sets[run.label_set].name.clone(),
            run.method.to_string(),
            run.preference_index.to_string(),
            run.seed.to_string(),
            if run.outcome.is_ok() { "ok" } else { "failed" }.to_string(),
            form.to_string(),
            values,
        ];
        match &run.outcome {
            Ok(m) => {
                row.push(m.n_trees.to_string());
                row.push(serde_json::to_value(m.stop_reason)?.as_str().unwrap_or_default().to_string());
                row.extend(padded(&m.train_costs, k));
                row.extend(padded(&m.test.costs, k));
                row.extend(padded(&m.test.ndcg, k));
                row.extend([
                    fmt_opt(m.mwl_train),
                    fmt_opt(m.mwl_test),
                    fmt(m.vno_test),
                    m.fallbacks.to_string(),
                    String::new(),
                ]);
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 2 + 3 * k + 4));
                row.push(e.clone());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_hvi<W: Write>(report: &GridReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label_set", "method", "seed", "points", "hvi_cost", "hvi_ndcg"])?;
    for h in &report.hvi {
        w.write_record([
            report.label_sets[h.label_set].name.clone(),
            h.method.to_string(),
            h.seed.to_string(),
            h.points.to_string(),
            fmt(h.hvi_cost),
            fmt(h.hvi_ndcg),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(report: &GridReport, out: W) -> Result<()> {
    let k = report.label_sets.iter().map(|c| c.labels.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "label_set",
        "method",
        "rank",
        "runs",
        "failed",
        "mean_mwl_test",
        "mean_vno_test",
        "mean_hvi_cost",
        "mean_hvi_ndcg",
    ]
    .map(String::from)
    .to_vec();
    header.extend(numbered("mean_test_ndcg_", k));
    w.write_record(&header)?;
    for s in &report.summaries {
        let mut row = vec![
            report.label_sets[s.label_set].name.clone(),
            s.method.to_string(),
            s.rank.map(|r| r.to_string()).unwrap_or_default(),
            s.runs.to_string(),
            s.failed.to_string(),
            fmt_opt(s.mean_mwl_test),
            fmt(s.mean_vno_test),
            fmt(s.mean_hvi_cost),
            fmt(s.mean_hvi_ndcg),
        ];
        row.extend(padded(&s.mean_test_ndcg, k));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_preferences<W: Write>(report: &GridReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label_set", "form", "index", "values"])?;
    for ctx in &report.label_sets {
        for (i, r) in ctx.rays.iter().enumerate() {
            w.write_record([ctx.name.clone(), "priority".into(), i.to_string(), joined(r)])?;
        }
        for (i, b) in ctx.bounds.iter().enumerate() {
            w.write_record([ctx.name.clone(), "epsilon".into(), i.to_string(), joined(b)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_baselines<W: Write>(report: &GridReport, out: W) -> Result<()> {
    let k = report.label_sets.iter().map(|c| c.labels.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label_set".to_string(), "objective".to_string()];
    header.extend(numbered("train_c_", k));
    header.extend(numbered("test_c_", k));
    header.extend(numbered("test_ndcg_", k));
    w.write_record(&header)?;
    for ctx in &report.label_sets {
        for b in &ctx.baselines {
            let mut row = vec![ctx.name.clone(), ctx.label_names[b.objective].clone()];
            row.extend(padded(&b.train_costs, k));
            row.extend(padded(&b.test.costs, k));
            row.extend(padded(&b.test.ndcg, k));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write every grid artifact into `dir` (created if needed).
pub fn write_grid_report(report: &GridReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let mut cfg = create(&dir.join("config.resolved.toml"))?;
    cfg.write_all(report.config.to_toml_string()?.as_bytes())?;
    cfg.flush()?;
    write_baselines(report, create(&dir.join("baselines.csv"))?)?;
    write_preferences(report, create(&dir.join("preferences.csv"))?)?;
    write_runs(report, create(&dir.join("runs.csv"))?)?;
    write_hvi(report, create(&dir.join("hvi.csv"))?)?;
    write_aggregate(report, create(&dir.join("aggregate.csv"))?)?;
    write_summary(report, create(&dir.join("summary.csv"))?)?;
    if report.config.write_traces || report.config.write_models {
        let traces = dir.join("traces");
        let models = dir.join("models");
        for run in &report.runs {
            let stem = run.stem(&report.label_sets[run.label_set]);
            if let (true, Some(t)) = (report.config.write_traces, &run.trace) {
                fs::create_dir_all(&traces).map_err(|e| Error::file(&traces, e))?;
                t.save_csv(traces.join(format!("{stem}.csv")))?;
            }
            if let (true, Some(m)) = (report.config.write_models, &run.model) {
                fs::create_dir_all(&models).map_err(|e| Error::file(&models, e))?;
                m.save(models.join(format!("{stem}.json")))?;
            }
        }
    }
    Ok(())
}

/// Write the reference exploration artifacts into `dir`.
pub fn write_reference_report(
    report: &ReferenceReport,
    cfg: &crate::experiment::ExperimentConfig,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let mut c = create(&dir.join("config.resolved.toml"))?;
    c.write_all(cfg.to_toml_string()?.as_bytes())?;
    c.flush()?;
    let k = report.label_names.len();

    let mut w = csv::Writer::from_writer(create(&dir.join("reference_runs.csv"))?);
    let mut header: Vec<String> = ["method", "preference", "seed", "status", "weights"].map(String::from).to_vec();
    header.extend(numbered("train_c_", k));
    header.extend(numbered("delta_c_", k));
    header.extend(numbered("test_ndcg_", k));
    header.extend(["dominates_reference", "mwl_vs_reference", "error"].map(String::from));
    w.write_record(&header)?;
    for run in &report.runs {
        let mut row = vec![
            run.method.to_string(),
            run.preference_index.to_string(),
            run.seed.to_string(),
            if run.outcome.is_ok() { "ok" } else { "failed" }.to_string(),
            joined(&run.weights),
        ];
        match &run.outcome {
            Ok(m) => {
                row.extend(padded(&m.train_costs, k));
                row.extend(padded(&m.improvement, k));
                row.extend(padded(&m.test.ndcg, k));
                row.extend([m.dominates_reference.to_string(), fmt(m.mwl_vs_reference), String::new()]);
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 3 * k + 2));
                row.push(e.clone());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(create(&dir.join("reference_summary.csv"))?);
    let mut header: Vec<String> =
        ["method", "runs", "failed", "dominating", "mean_mwl_vs_reference"].map(String::from).to_vec();
    header.extend(numbered("mean_delta_c_", k));
    w.write_record(&header)?;
    let mut row = vec!["reference".to_string(), String::new(), String::new(), String::new(), String::new()];
    row.extend(padded(&report.reference_costs, k));
    w.write_record(&row)?;
    for s in &report.summaries {
        let mut row = vec![
            s.method.to_string(),
            s.runs.to_string(),
            s.failed.to_string(),
            s.dominating.to_string(),
            fmt(s.mean_mwl_vs_reference),
        ];
        row.extend(padded(&s.mean_improvement, k));
        w.write_record(&row)?;
    }
    w.flush()?;

    if cfg.write_traces {
        let traces = dir.join("traces");
        for (run, trace) in report.runs.iter().zip(&report.traces) {
            if let Some(t) = trace {
                fs::create_dir_all(&traces).map_err(|e| Error::file(&traces, e))?;
                t.save_csv(traces.join(format!("ref_{}_p{}_s{}.csv", run.method, run.preference_index, run.seed)))?;
            }
        }
    }
    Ok(())
}

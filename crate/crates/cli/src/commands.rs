use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::json;

use poselift::corrupt::{CorruptionOperator, SplitRole};
use poselift::metrics::{displacement, EvalReport, Histogram};
use poselift::net::{read_checkpoint, run_gradcheck, save_checkpoint, GradCheckOptions, LifterModel, Real, TrainingLog};
use poselift::{load_bundle, save_bundle, DatasetBundle, Error};

use crate::config::{BundleKind, RunConfig};
use crate::pipeline::{self, Grid};
use crate::provenance;

fn write(path: &Path, contents: &str, outputs: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    outputs.push(path.to_path_buf());
    Ok(())
}

fn load(cfg: &RunConfig, kind: BundleKind) -> anyhow::Result<DatasetBundle> {
    let dir = cfg.bundle_dir(kind);
    load_bundle(&dir).with_context(|| format!("loading bundle {}", dir.display()))
}

fn operator_counts(bundle: &DatasetBundle) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for r in &bundle.sequences {
        *counts.entry(r.operator().as_str().to_string()).or_insert(0) += 1;
    }
    counts
}

pub fn synth(cfg: &RunConfig) -> anyhow::Result<()> {
    let (train, test) = pipeline::synthesize(cfg)?;
    let mut outputs = Vec::new();
    let mut save = |kind, b: &DatasetBundle| -> anyhow::Result<()> {
        let dir = cfg.bundle_dir(kind);
        save_bundle(b, &dir)?;
        outputs.push(dir.join("manifest.json"));
        println!(
            "{}: {} sequences x {} frames, {} joints",
            dir.display(),
            b.sequences.len(),
            cfg.synth.frames,
            b.layout.joint_count
        );
        Ok(())
    };
    save(BundleKind::CleanTrain, &train)?;
    if let Some(t) = &test {
        save(BundleKind::CleanTest, t)?;
    }
    let details = json!({
        "train_sequences": train.sequences.len(),
        "test_sequences": test.as_ref().map_or(0, |t| t.sequences.len()),
        "frames": cfg.synth.frames,
        "joints": train.layout.joint_count,
    });
    provenance::record(cfg, "synth", details, &outputs)
}

pub fn corrupt(cfg: &RunConfig, roles: &[SplitRole]) -> anyhow::Result<()> {
    let mut outputs = Vec::new();
    let mut details = serde_json::Map::new();
    for &role in roles {
        let (from, to, name) = match role {
            SplitRole::Train => (BundleKind::CleanTrain, BundleKind::CorruptTrain, "train"),
            SplitRole::Test => (BundleKind::CleanTest, BundleKind::CorruptTest, "test"),
        };
        let clean = load(cfg, from)?;
        let bundle = pipeline::corrupt(cfg, &clean, role)?;
        let dir = cfg.bundle_dir(to);
        save_bundle(&bundle, &dir)?;
        outputs.push(dir.join("manifest.json"));
        let counts = operator_counts(&bundle);
        println!("{}: {} records {:?}", dir.display(), bundle.sequences.len(), counts);
        details.insert(name.to_string(), json!({ "records": bundle.sequences.len(), "operators": counts }));
    }
    provenance::record(cfg, "corrupt", serde_json::Value::Object(details), &outputs)
}

fn train_typed<T: Real>(cfg: &RunConfig) -> anyhow::Result<()> {
    let eff = cfg.effective()?;
    let kind = if eff.preset.trains_on_corrupt() { BundleKind::CorruptTrain } else { BundleKind::CleanTrain };
    let bundle = load(cfg, kind)?;
    let header = format!("preset {}: {}", eff.preset, eff.preset.describe());
    println!("{header}");
    let (model, log): (LifterModel<T>, TrainingLog) = pipeline::fit(cfg, &eff, &bundle)?;

    let mut outputs = Vec::new();
    let ckpt = cfg.checkpoint_path();
    if let Some(dir) = ckpt.parent() {
        std::fs::create_dir_all(dir)?;
    }
    save_checkpoint(&model, &ckpt)?;
    outputs.push(ckpt);
    let mut text = format!("# {header}\n# receptive field {}, {} parameters\n", model.receptive_field(), model.param_count());
    for e in &log.epochs {
        text.push_str(&format!("epoch {:3}  lr {:.6}  train MPJPE {:.2} mm\n", e.epoch, e.lr, e.train_mpjpe_mm));
    }
    write(&cfg.run_dir.join("train.log"), &text, &mut outputs)?;
    write(&cfg.run_dir.join("train_log.csv"), &log.to_csv(), &mut outputs)?;
    if let Some(last) = log.epochs.last() {
        println!("final train MPJPE {:.2} mm after {} epochs", last.train_mpjpe_mm, log.epochs.len());
    }
    let details = json!({ "preset": eff.preset.to_string(), "header": header });
    provenance::record(cfg, "train", details, &outputs)
}

pub fn train(cfg: &RunConfig, use_f64: bool) -> anyhow::Result<()> {
    if use_f64 {
        train_typed::<f64>(cfg)
    } else {
        train_typed::<f32>(cfg)
    }
}

/// Per-operator, per-joint histograms of the clean-to-corrupt 2D displacement.
fn histograms(test: &DatasetBundle, bins: usize) -> poselift::Result<Vec<(String, Histogram)>> {
    let mut out = Vec::new();
    for op in CorruptionOperator::ALL {
        let records: Vec<_> = test.sequences.iter().filter(|r| r.operator() == op).collect();
        if records.is_empty() {
            continue;
        }
        let joints = test.layout.joint_count;
        let mut per_joint = vec![Vec::new(); joints];
        for r in records {
            let (det, _) = r.observed();
            for (i, d) in displacement(&r.det2d_clean, det)?.into_iter().enumerate() {
                per_joint[i % joints].push(d);
            }
        }
        for (j, values) in per_joint.iter().enumerate() {
            let name = format!("{}_{}", op.as_str(), test.layout.joint_names[j]);
            out.push((name, Histogram::from_values(values, bins, None)?));
        }
    }
    Ok(out)
}

fn eval_typed<T: Real>(cfg: &RunConfig) -> anyhow::Result<()> {
    let eff = cfg.effective()?;
    let ckpt = cfg.checkpoint_path();
    let model: LifterModel<T> = read_checkpoint(&ckpt)?;
    if model.config.input_mode != eff.lifter.input_mode {
        return Err(Error::Checkpoint(format!(
            "{} holds a {} model but preset {} expects {}",
            ckpt.display(),
            model.config.input_mode,
            eff.preset,
            eff.lifter.input_mode
        ))
        .into());
    }
    let test = load(cfg, BundleKind::CorruptTest)?;
    let report: EvalReport = pipeline::assess(cfg, &eff, &model, &test)?;

    let dir = cfg.report_dir();
    let mut outputs = Vec::new();
    write(&dir.join("eval.csv"), &report.to_csv(), &mut outputs)?;
    write(&dir.join("eval.md"), &report.to_markdown(), &mut outputs)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    write(&dir.join("eval.json"), &json, &mut outputs)?;
    if cfg.eval.histogram_bins > 0 {
        for (name, h) in histograms(&test, cfg.eval.histogram_bins)? {
            write(&dir.join("histograms").join(format!("{name}.csv")), &h.to_csv(), &mut outputs)?;
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", report.to_markdown());
    let details = json!({ "preset": eff.preset.to_string(), "average_mpjpe_tau_mm": report.average.mpjpe_tau_mm });
    provenance::record(cfg, "eval", details, &outputs)
}

pub fn eval(cfg: &RunConfig, use_f64: bool) -> anyhow::Result<()> {
    if use_f64 {
        eval_typed::<f64>(cfg)
    } else {
        eval_typed::<f32>(cfg)
    }
}

pub fn sweep(cfg: &RunConfig, grid: &Grid, use_f64: bool) -> anyhow::Result<()> {
    let cells = grid.cells(cfg)?;
    let clean = load(cfg, BundleKind::CleanTrain)?;
    let frames = clean.total_frames();
    let minutes: f64 = cells.iter().map(|c| pipeline::estimate_seconds(&c.config, frames)).sum::<f64>() / 60.0;
    if minutes > cfg.sweep.budget_minutes {
        return Err(Error::Validation(format!(
            "sweep of {} cells is estimated at {minutes:.1} min, over the {:.1} min budget (sweep.budget_minutes)",
            cells.len(),
            cfg.sweep.budget_minutes
        ))
        .into());
    }
    println!("sweeping {} cells, estimated {minutes:.1} min", cells.len());
    let corrupt_train = if cells.iter().any(|c| c.preset.trains_on_corrupt()) {
        Some(load(cfg, BundleKind::CorruptTrain)?)
    } else {
        None
    };
    let test = load(cfg, BundleKind::CorruptTest)?;
    let rows = if use_f64 {
        pipeline::run_sweep::<f64>(&cells, &clean, corrupt_train.as_ref(), &test)?
    } else {
        pipeline::run_sweep::<f32>(&cells, &clean, corrupt_train.as_ref(), &test)?
    };
    let name = match grid {
        Grid::JointTemporal { .. } => "sweep_pk.csv",
        Grid::ReceptiveField { .. } => "sweep_rf.csv",
    };
    let csv = pipeline::sweep_csv(&rows);
    print!("{csv}");
    let mut outputs = Vec::new();
    write(&cfg.report_dir().join(name), &csv, &mut outputs)?;
    provenance::record(cfg, &format!("sweep_{}", &name[6..8]), json!({ "cells": rows.len() }), &outputs)
}

pub fn gradcheck(cfg: &RunConfig, options: &GradCheckOptions) -> anyhow::Result<()> {
    let report = run_gradcheck(options)?;
    let text = report.to_text();
    print!("{text}");
    let mut outputs = Vec::new();
    write(&cfg.run_dir.join("gradcheck.txt"), &text, &mut outputs)?;
    provenance::record(cfg, "gradcheck", json!({ "passed": report.passed() }), &outputs)?;
    if !report.passed() {
        let worst = report
            .entries
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
            .map(|e| format!("{}/{}", e.case, e.worst_param))
            .unwrap_or_default();
        return Err(Error::Numerical(format!(
            "gradient check failed: max relative error {:.3e} > {:.0e} at {worst}",
            report.max_rel_error(),
            report.tolerance
        ))
        .into());
    }
    Ok(())
}

/// One table row per evaluated run directory.
pub fn report(cfg: &RunConfig, runs: &[PathBuf]) -> anyhow::Result<()> {
    if runs.is_empty() {
        return Err(Error::Validation("report needs at least one run directory".into()).into());
    }
    let mut rows = Vec::new();
    for dir in runs {
        let run = provenance::load(dir)?;
        let eval = run
            .commands
            .get("eval")
            .ok_or_else(|| Error::Validation(format!("{} has no eval record in run.json", dir.display())))?;
        let file = eval
            .outputs
            .iter()
            .find(|o| o.path.ends_with("eval.json"))
            .map(|o| dir.join(&o.path))
            .ok_or_else(|| Error::Validation(format!("{} lists no eval.json", dir.display())))?;
        let report: EvalReport = serde_json::from_str(&std::fs::read_to_string(&file)?)?;
        let label = eval.details.get("preset").and_then(|v| v.as_str()).map(str::to_string);
        rows.push((label.unwrap_or_else(|| dir.display().to_string()), report));
    }

    let ops = CorruptionOperator::ALL;
    let cell = |r: &EvalReport, op| r.row(op).map_or("n/a".to_string(), |row| format!("{:.2}", row.mpjpe_tau_mm));
    let mut md = format!("| Run | {} | Average |\n", ops.map(|o| o.title()).join(" | "));
    md.push_str(&format!("|---|{}---|\n", "---|".repeat(ops.len())));
    let mut csv = format!("run,{},average\n", ops.map(|o| o.as_str()).join(","));
    for (label, r) in &rows {
        let cells: Vec<String> = ops.iter().map(|&op| cell(r, op)).collect();
        md.push_str(&format!("| {label} | {} | {:.2} |\n", cells.join(" | "), r.average.mpjpe_tau_mm));
        csv.push_str(&format!("{label},{},{:.4}\n", cells.join(","), r.average.mpjpe_tau_mm));
    }
    print!("{md}");
    let dir = cfg.report_dir();
    let mut outputs = Vec::new();
    write(&dir.join("summary.md"), &md, &mut outputs)?;
    write(&dir.join("summary.csv"), &csv, &mut outputs)?;
    provenance::record(cfg, "report", json!({ "runs": runs }), &outputs)
}

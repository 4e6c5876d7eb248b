//! In-memory stages shared by the subcommands and the acceptance suite.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use poselift::corrupt::{build_corrupted_split, SplitRole};
use poselift::metrics::{evaluate, EvalOptions, EvalReport};
use poselift::net::{build_model, train, Augmentation, LifterConfig, LifterModel, Real, TrainSequence, TrainingLog};
use poselift::synthgen::{synthesize_dataset, SynthConfig};
use poselift::tagn::median_filter_denoise;
use poselift::{DatasetBundle, Error, SeededRng};

use crate::config::{Effective, RunConfig};
use crate::preset::Preset;

fn root(cfg: &RunConfig) -> SeededRng {
    SeededRng::new(cfg.seed, 0)
}

fn role_name(role: SplitRole) -> &'static str {
    match role {
        SplitRole::Train => "train",
        SplitRole::Test => "test",
    }
}

/// Clean train bundle and, when `test_sequences > 0`, a clean test bundle.
pub fn synthesize(cfg: &RunConfig) -> poselift::Result<(DatasetBundle, Option<DatasetBundle>)> {
    let rng = root(cfg).child("synth");
    let train = synthesize_dataset(&cfg.layout, &cfg.synth, "train", &rng.child("train"))?;
    let test = if cfg.test_sequences == 0 {
        None
    } else {
        let test_cfg = SynthConfig { sequences: cfg.test_sequences, ..cfg.synth.clone() };
        Some(synthesize_dataset(&cfg.layout, &test_cfg, "test", &rng.child("test"))?)
    };
    Ok((train, test))
}

pub fn corrupt(cfg: &RunConfig, clean: &DatasetBundle, role: SplitRole) -> poselift::Result<DatasetBundle> {
    let seed = root(cfg).child("corrupt").child(role_name(role)).seed();
    build_corrupted_split(clean, role, seed, &cfg.split)
}

/// Lifter inputs for a preset, refusing a bundle of the wrong kind.
pub fn training_data(eff: &Effective, bundle: &DatasetBundle) -> poselift::Result<Vec<TrainSequence>> {
    let corrupted = bundle.sequences.iter().filter(|r| r.corrupted.is_some()).count();
    if eff.preset.trains_on_corrupt() && corrupted == 0 {
        return Err(Error::Validation(format!(
            "preset {} trains on the corrupted split, but the bundle has no corrupted records",
            eff.preset
        )));
    }
    if !eff.preset.trains_on_corrupt() && corrupted > 0 {
        return Err(Error::Validation(format!(
            "preset {} trains on clean data, but the bundle has {corrupted} corrupted records",
            eff.preset
        )));
    }
    bundle
        .sequences
        .iter()
        .map(|r| {
            let mut s = TrainSequence::from_record(r);
            if let Some(k) = eff.median_filter {
                s.pose = median_filter_denoise(&s.pose, k)?;
            }
            Ok(s)
        })
        .collect()
}

/// Builds and trains the preset's model. Streams: `init`, `tagn`, `train`.
pub fn fit<T: Real>(
    cfg: &RunConfig,
    eff: &Effective,
    bundle: &DatasetBundle,
) -> poselift::Result<(LifterModel<T>, TrainingLog)> {
    let data = training_data(eff, bundle)?;
    let rng = root(cfg);
    let mut model = build_model(&eff.lifter, &bundle.layout, &rng.child("init"))?;
    let augmentation = eff.tagn.clone().map(|config| Augmentation { config, rng: rng.child("tagn") });
    let log = train(&mut model, &data, &cfg.train, augmentation.as_ref(), &rng.child("train"))?;
    Ok((model, log))
}

pub fn assess<T: Real>(
    cfg: &RunConfig,
    eff: &Effective,
    model: &LifterModel<T>,
    test: &DatasetBundle,
) -> poselift::Result<EvalReport> {
    let rf = model.receptive_field();
    if let Some(short) = test.sequences.iter().min_by_key(|r| r.frames()) {
        if short.frames() < rf {
            return Err(Error::Validation(format!(
                "receptive field {rf} exceeds the shortest test sequence ({}, {} frames)",
                short.id,
                short.frames()
            )));
        }
    }
    evaluate(model, test, &EvalOptions { tau: cfg.eval.tau, median_filter: eff.median_filter })
}

/// Train then evaluate one preset.
pub fn run_preset<T: Real>(
    cfg: &RunConfig,
    train_bundle: &DatasetBundle,
    test: &DatasetBundle,
) -> poselift::Result<(EvalReport, TrainingLog)> {
    let eff = cfg.effective().map_err(|e| Error::Validation(e.to_string()))?;
    let (model, log) = fit::<T>(cfg, &eff, train_bundle)?;
    Ok((assess(cfg, &eff, &model, test)?, log))
}

/// Grids swept by `sweep`.
#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    /// TAGN joint and temporal ratios at a fixed σ.
    JointTemporal { sigma: f64, ratios: Vec<f64> },
    ReceptiveField { fields: Vec<usize>, presets: Vec<Preset> },
}

pub const PK_RATIOS: [f64; 5] = [0.1, 0.3, 0.5, 0.8, 1.0];
pub const RECEPTIVE_FIELDS: [usize; 4] = [1, 9, 27, 81];

impl Grid {
    pub fn joint_temporal(sigma: f64) -> Self {
        Self::JointTemporal { sigma, ratios: PK_RATIOS.to_vec() }
    }

    pub fn receptive_field(presets: Vec<Preset>) -> Self {
        Self::ReceptiveField { fields: RECEPTIVE_FIELDS.to_vec(), presets }
    }

    /// One config per cell, in output order.
    pub fn cells(&self, base: &RunConfig) -> poselift::Result<Vec<SweepCell>> {
        let mut out = Vec::new();
        match self {
            Self::JointTemporal { sigma, ratios } => {
                for &p in ratios {
                    for &k in ratios {
                        let preset = Preset::CleanTagn { sigma: *sigma, p, k };
                        out.push(SweepCell {
                            preset: preset.clone(),
                            p: Some(p),
                            k: Some(k),
                            sigma: Some(*sigma),
                            receptive_field: base.lifter.receptive_field(),
                            config: RunConfig { preset: Some(preset), ..base.clone() },
                        });
                    }
                }
            }
            Self::ReceptiveField { fields, presets } => {
                for preset in presets {
                    for &rf in fields {
                        let shape = LifterConfig::with_receptive_field(rf)?;
                        let lifter = LifterConfig { kernel: shape.kernel, num_blocks: shape.num_blocks, ..base.lifter.clone() };
                        let tagn = preset.tagn();
                        out.push(SweepCell {
                            preset: preset.clone(),
                            p: tagn.map(|t| t.1),
                            k: tagn.map(|t| t.2),
                            sigma: tagn.map(|t| t.0),
                            receptive_field: rf,
                            config: RunConfig { preset: Some(preset.clone()), lifter, ..base.clone() },
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct SweepCell {
    pub preset: Preset,
    pub p: Option<f64>,
    pub k: Option<f64>,
    pub sigma: Option<f64>,
    pub receptive_field: usize,
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub preset: String,
    pub p: Option<f64>,
    pub k: Option<f64>,
    pub sigma: Option<f64>,
    pub receptive_field: usize,
    pub average_mpjpe_tau_mm: f64,
    pub average_p_mpjpe_tau_mm: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("preset,p,k,sigma,receptive_field,average_mpjpe_tau_mm,average_p_mpjpe_tau_mm\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:.4},{:.4}\n",
            r.preset,
            opt(r.p),
            opt(r.k),
            opt(r.sigma),
            r.receptive_field,
            r.average_mpjpe_tau_mm,
            r.average_p_mpjpe_tau_mm
        ));
    }
    out
}

/// Floating-point work of one training window (forward and backward).
fn window_flops(lifter: &LifterConfig, joints: usize) -> f64 {
    let (d, k, rf) = (lifter.channels as f64, lifter.kernel as f64, lifter.receptive_field() as f64);
    let ca = lifter.input_mode == poselift::net::InputMode::ConfidenceAware;
    let d_in = match lifter.input_mode {
        poselift::net::InputMode::PoseOnly => 2.0 * joints as f64,
        _ => 3.0 * joints as f64,
    };
    let mut macs = rf * d_in * d;
    let mut positions = rf;
    for _ in 0..lifter.num_blocks {
        positions = (positions / k).max(1.0);
        macs += positions * k * d * d * if ca { 2.0 } else { 1.0 };
    }
    macs += 3.0 * joints as f64 * d;
    6.0 * macs
}

/// Rough wall-clock estimate of training one cell, in seconds.
pub fn estimate_seconds(cfg: &RunConfig, train_frames: usize) -> f64 {
    let windows = (train_frames / cfg.lifter.receptive_field()).max(1) as f64;
    let flops = window_flops(&cfg.lifter, cfg.layout.joint_count) * windows * cfg.train.epochs as f64;
    flops / (cfg.sweep.gflops * 1e9)
}

/// Trains and evaluates every cell; cells run in parallel and keep their order.
pub fn run_sweep<T: Real>(
    cells: &[SweepCell],
    clean_train: &DatasetBundle,
    corrupt_train: Option<&DatasetBundle>,
    test: &DatasetBundle,
) -> poselift::Result<Vec<SweepRow>> {
    cells
        .par_iter()
        .map(|cell| {
            let bundle = if cell.preset.trains_on_corrupt() {
                corrupt_train.ok_or_else(|| {
                    Error::Validation(format!("preset {} needs the corrupted train split", cell.preset))
                })?
            } else {
                clean_train
            };
            let (report, _) = run_preset::<T>(&cell.config, bundle, test)?;
            Ok(SweepRow {
                preset: cell.preset.to_string(),
                p: cell.p,
                k: cell.k,
                sigma: cell.sigma,
                receptive_field: cell.receptive_field,
                average_mpjpe_tau_mm: report.average.mpjpe_tau_mm,
                average_p_mpjpe_tau_mm: report.average.p_mpjpe_tau_mm,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pk_grid_has_25_cells_at_fixed_sigma() {
        let cells = Grid::joint_temporal(0.3).cells(&RunConfig::default()).unwrap();
        assert_eq!(cells.len(), 25);
        assert!(cells.iter().all(|c| c.sigma == Some(0.3)));
        assert_eq!((cells[1].p, cells[1].k), (Some(0.1), Some(0.3)));
        assert_eq!(cells[24].config.preset, Some(Preset::CleanTagn { sigma: 0.3, p: 1.0, k: 1.0 }));
    }

    #[test]
    fn rf_grid_has_four_rows_per_preset() {
        let presets = vec![Preset::Clean, Preset::CorruptCaConv { gamma: 1.0 }];
        let cells = Grid::receptive_field(presets).cells(&RunConfig::default()).unwrap();
        assert_eq!(cells.len(), 8);
        let fields: Vec<usize> = cells.iter().map(|c| c.config.lifter.receptive_field()).collect();
        assert_eq!(fields, [1, 9, 27, 81, 1, 9, 27, 81]);
    }

    #[test]
    fn estimate_grows_with_model_size() {
        let small = RunConfig::default();
        let mut wide = RunConfig::default();
        wide.lifter.channels = 256;
        assert!(estimate_seconds(&wide, 30_000) > 3.0 * estimate_seconds(&small, 30_000));
        let mut ca = RunConfig::default();
        ca.lifter.input_mode = poselift::net::InputMode::ConfidenceAware;
        assert!(estimate_seconds(&ca, 30_000) > estimate_seconds(&small, 30_000));
    }

    #[test]
    fn preset_refuses_mismatched_bundle() {
        let cfg = RunConfig {
            synth: SynthConfig { sequences: 2, frames: 30, ..Default::default() },
            test_sequences: 0,
            ..Default::default()
        };
        let (clean, _) = synthesize(&cfg).unwrap();
        let caconv = RunConfig { preset: Some(Preset::CorruptCaConv { gamma: 1.0 }), ..cfg };
        let err = training_data(&caconv.effective().unwrap(), &clean).unwrap_err();
        assert!(err.to_string().contains("no corrupted records"), "{err}");
    }
}

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use poselift::corrupt::SplitConfig;
use poselift::net::{LifterConfig, TrainConfig};
use poselift::synthgen::SynthConfig;
use poselift::tagn::TagnConfig;
use poselift::{Error, SkeletonLayout};

use crate::preset::Preset;

/// Everything a command needs. Missing fields take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub run_dir: PathBuf,
    pub paths: PathsConfig,
    pub layout: SkeletonLayout,
    pub synth: SynthConfig,
    /// Size of the held-out clean test bundle written by `synth`.
    pub test_sequences: usize,
    pub split: SplitConfig,
    pub preset: Option<Preset>,
    pub tagn: Option<TagnConfig>,
    pub lifter: LifterConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            run_dir: PathBuf::from("run"),
            paths: PathsConfig::default(),
            layout: SkeletonLayout::h36m16(),
            synth: SynthConfig::default(),
            test_sequences: 10,
            split: SplitConfig::default(),
            preset: None,
            tagn: None,
            lifter: LifterConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// Locations relative to `run_dir` unless absolute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub data: PathBuf,
    pub checkpoint: PathBuf,
    pub report: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::from("data"),
            checkpoint: PathBuf::from("model.ckpt"),
            report: PathBuf::from("report"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub tau: f64,
    /// Bins of the per-joint 2D error histograms; 0 disables them.
    pub histogram_bins: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { tau: 0.1, histogram_bins: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// A sweep whose estimated cost exceeds this is refused.
    pub budget_minutes: f64,
    /// Assumed sustained training throughput for the estimate.
    pub gflops: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { budget_minutes: 120.0, gflops: 2.0 }
    }
}

/// Which bundle a file name refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BundleKind {
    CleanTrain,
    CleanTest,
    CorruptTrain,
    CorruptTest,
}

impl BundleKind {
    fn dir_name(self) -> &'static str {
        match self {
            Self::CleanTrain => "clean_train",
            Self::CleanTest => "clean_test",
            Self::CorruptTrain => "corrupt_train",
            Self::CorruptTest => "corrupt_test",
        }
    }
}

fn config_error(msg: String) -> anyhow::Error {
    Error::Validation(msg).into()
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| config_error(format!("config {}: {e}", path.display())))
    }

    /// Checks every section before any work starts.
    pub fn validate(&self) -> anyhow::Result<()> {
        let section = |name: &str, r: poselift::Result<()>| {
            r.map_err(|e| config_error(format!("{name}: {e}")))
        };
        section("layout", self.layout.validate())?;
        section("synth", self.synth.validate())?;
        section("split.detector", self.split.detector.validate())?;
        if let Some(t) = &self.tagn {
            section("tagn", t.validate())?;
        }
        section("lifter", self.lifter.validate())?;
        section("train", self.train.validate())?;
        if !(self.eval.tau > 0.0) {
            return Err(config_error(format!("eval.tau must be positive, got {}", self.eval.tau)));
        }
        if !(self.sweep.budget_minutes > 0.0 && self.sweep.gflops > 0.0) {
            return Err(config_error("sweep.budget_minutes and sweep.gflops must be positive".into()));
        }
        if let Some(p) = &self.preset {
            p.validate().map_err(|e| config_error(format!("preset: {e}")))?;
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.run_dir.join(p)
        }
    }

    pub fn bundle_dir(&self, kind: BundleKind) -> PathBuf {
        self.resolve(&self.paths.data).join(kind.dir_name())
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.resolve(&self.paths.checkpoint)
    }

    pub fn report_dir(&self) -> PathBuf {
        self.resolve(&self.paths.report)
    }

    /// Folds the preset into the lifter, TAGN and median-filter settings.
    pub fn effective(&self) -> anyhow::Result<Effective> {
        let preset = self.preset.clone().unwrap_or(Preset::Clean);
        let mut lifter = self.lifter.clone();
        lifter.input_mode = preset.input_mode();
        if let Some(g) = preset.gamma() {
            lifter.gamma = g;
        }
        let tagn = preset.tagn().map(|(sigma, p, k)| {
            let base = self.tagn.clone().unwrap_or_default();
            TagnConfig { sigma, joint_ratio_p: p, temporal_ratio_k: k, ..base }
        });
        lifter.validate().map_err(|e| config_error(format!("lifter: {e}")))?;
        Ok(Effective { median_filter: preset.median_kernel(), preset, lifter, tagn })
    }
}

/// Settings after the preset has been applied.
#[derive(Clone, Debug, PartialEq)]
pub struct Effective {
    pub preset: Preset,
    pub lifter: LifterConfig,
    pub tagn: Option<TagnConfig>,
    pub median_filter: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 3}"#).is_err());
    }

    #[test]
    fn bad_section_names_its_field() {
        let mut c = RunConfig::default();
        c.synth.frames = 0;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("synth.frames"), "{msg}");
    }

    #[test]
    fn preset_overrides_lifter_mode() {
        let c = RunConfig { preset: Some("corrupt+caconv(0)".parse().unwrap()), ..Default::default() };
        let e = c.effective().unwrap();
        assert_eq!(e.lifter.input_mode, poselift::net::InputMode::ConfidenceAware);
        assert_eq!(e.lifter.gamma, 0.0);
        assert!(e.tagn.is_none());
    }

    #[test]
    fn relative_paths_live_under_run_dir() {
        let c = RunConfig { run_dir: "/tmp/r".into(), ..Default::default() };
        assert_eq!(c.bundle_dir(BundleKind::CorruptTest), PathBuf::from("/tmp/r/data/corrupt_test"));
        assert_eq!(c.checkpoint_path(), PathBuf::from("/tmp/r/model.ckpt"));
    }
}

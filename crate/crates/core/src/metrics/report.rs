use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::DatasetBundle;
use crate::corrupt::CorruptionOperator;
use crate::error::{shape, validation, Result};
use crate::net::{predict_sequence, LifterModel, Padding, Real};
use crate::pose::PoseSequence3D;
use crate::tagn::median_filter_denoise;

use super::inclusion::inclusion_mask;
use super::{aligned_joint_errors, joint_errors};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub tau: f64,
    /// Median-filter the corrupted detections (odd kernel) before lifting.
    pub median_filter: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { tau: 0.1, median_filter: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub operator: String,
    pub mpjpe_tau_mm: f64,
    pub p_mpjpe_tau_mm: f64,
    pub included_fraction: f64,
    /// Frames with at least one included joint.
    pub n_frames: usize,
    /// Frames with no included joint, left out of both means.
    pub dropped_frames: usize,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tau: f64,
    pub rows: Vec<EvalRow>,
    pub average: EvalRow,
    pub warnings: Vec<String>,
}

#[derive(Default)]
struct Acc {
    err: f64,
    aligned: f64,
    included: usize,
    joints: usize,
    frames: usize,
    dropped: usize,
}


impl EvalReport {
    pub fn row(&self, op: CorruptionOperator) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.operator == op.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("operator,mpjpe_tau_mm,p_mpjpe_tau_mm,included_fraction,n_frames,dropped_frames,valid\n");
        for r in self.rows.iter().chain(std::iter::once(&self.average)) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.operator, r.mpjpe_tau_mm, r.p_mpjpe_tau_mm, r.included_fraction, r.n_frames, r.dropped_frames, r.valid
            ));
        }
        out
    }

    /// Operators as columns, in report order, with the average last.
    pub fn to_markdown(&self) -> String {
        let cols: Vec<Option<&EvalRow>> = CorruptionOperator::ALL.iter().map(|op| self.row(*op)).collect();
        let mut out = String::from("| Metric |");
        for op in CorruptionOperator::ALL {
            out.push_str(&format!(" {} |", op.title()));
        }
        out.push_str(" Average |\n|---|");
        out.push_str(&"---:|".repeat(CorruptionOperator::ALL.len() + 1));
        out.push('\n');
        let line = |label: String, f: &dyn Fn(&EvalRow) -> String| {
            let mut s = format!("| {label} |");
            for c in &cols {
                match c {
                    Some(r) if r.valid => s.push_str(&format!(" {} |", f(r))),
                    _ => s.push_str(" n/a |"),
                }
            }
            s.push_str(&format!(" {} |\n", f(&self.average)));
            s
        };
        out.push_str(&line(format!("MPJPE≤{} (mm)", self.tau), &|r| format!("{:.2}", r.mpjpe_tau_mm)));
        out.push_str(&line(format!("P-MPJPE≤{} (mm)", self.tau), &|r| format!("{:.2}", r.p_mpjpe_tau_mm)));
        out.push_str(&line("Included joints (%)".into(), &|r| format!("{:.1}", 100.0 * r.included_fraction)));
        out
    }
}

/// Scores one prediction per record of a corrupted test split.
pub fn evaluate_predictions(bundle: &DatasetBundle, predictions: &[PoseSequence3D], tau: f64) -> Result<EvalReport> {
    if predictions.len() != bundle.sequences.len() {
        return Err(shape(format!("{} predictions for {} records", predictions.len(), bundle.sequences.len())));
    }
    if !(tau >= 0.0) {
        return Err(validation("tau must be non-negative"));
    }
    let per_record = bundle
        .sequences
        .par_iter()
        .zip(predictions)
        .map(|(rec, pred)| -> Result<(CorruptionOperator, Acc)> {
            let view = rec.corrupted.as_ref().ok_or_else(|| {
                validation(format!("record {} has no corrupted detections; evaluate a corrupted test split", rec.id))
            })?;
            let op = view.manifest.operator;
            let mask = inclusion_mask(&rec.det2d_clean, &view.det2d, tau)?;
            let j = mask.joints;
            let keep = |t: usize| (0..j).any(|jj| mask.get(t, jj));
            let err = joint_errors(pred, &rec.gt3d)?;
            let aligned = aligned_joint_errors(pred, &rec.gt3d, keep)?;
            let mut acc = Acc { joints: mask.mask.len(), ..Default::default() };
            for t in 0..mask.frames {
                if !keep(t) {
                    acc.dropped += 1;
                    continue;
                }
                acc.frames += 1;
                for jj in (0..j).filter(|jj| mask.get(t, *jj)) {
                    acc.err += err[t * j + jj];
                    acc.aligned += aligned[t * j + jj];
                    acc.included += 1;
                }
            }
            Ok((op, acc))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let present: Vec<CorruptionOperator> =
        CorruptionOperator::ALL.iter().copied().filter(|op| per_record.iter().any(|(o, _)| o == op)).collect();
    if per_record.iter().any(|(o, _)| !CorruptionOperator::ALL.contains(o)) {
        return Err(validation("test split contains uncorrupted records"));
    }
    for op in present {
        let mut total = Acc::default();
        for (_, a) in per_record.iter().filter(|(o, _)| *o == op) {
            total.err += a.err;
            total.aligned += a.aligned;
            total.included += a.included;
            total.joints += a.joints;
            total.frames += a.frames;
            total.dropped += a.dropped;
        }
        let valid = total.included > 0;
        if !valid {
            warnings.push(format!("{}: no joints within tau; excluded from the average", op.title()));
        }
        if total.dropped > 0 {
            warnings.push(format!("{}: dropped {} frames with no included joints", op.title(), total.dropped));
        }
        let n = total.included.max(1) as f64;
        rows.push(EvalRow {
            operator: op.as_str().into(),
            mpjpe_tau_mm: if valid { total.err / n } else { f64::NAN },
            p_mpjpe_tau_mm: if valid { total.aligned / n } else { f64::NAN },
            included_fraction: total.included as f64 / total.joints.max(1) as f64,
            n_frames: total.frames,
            dropped_frames: total.dropped,
            valid,
        });
    }
    let valid: Vec<&EvalRow> = rows.iter().filter(|r| r.valid).collect();
    if valid.is_empty() {
        return Err(validation("no operator has any joint within tau"));
    }
    let mean = |f: fn(&EvalRow) -> f64| valid.iter().map(|r| f(r)).sum::<f64>() / valid.len() as f64;
    let average = EvalRow {
        operator: "average".into(),
        mpjpe_tau_mm: mean(|r| r.mpjpe_tau_mm),
        p_mpjpe_tau_mm: mean(|r| r.p_mpjpe_tau_mm),
        included_fraction: mean(|r| r.included_fraction),
        n_frames: valid.iter().map(|r| r.n_frames).sum(),
        dropped_frames: valid.iter().map(|r| r.dropped_frames).sum(),
        valid: true,
    };
    Ok(EvalReport { tau, rows, average, warnings })
}

/// Lifts every corrupted record and scores it with MPJPE≤τ and P-MPJPE≤τ.
pub fn evaluate<T: Real>(model: &LifterModel<T>, bundle: &DatasetBundle, options: &EvalOptions) -> Result<EvalReport> {
    let predictions = bundle
        .sequences
        .par_iter()
        .map(|rec| {
            let (pose, conf) = rec.observed();
            let pose = match options.median_filter {
                Some(k) => median_filter_denoise(pose, k)?,
                None => pose.clone(),
            };
            predict_sequence(model, &pose, Some(conf), Padding::Edge)
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate_predictions(bundle, &predictions, options.tau)
}

use serde::{Deserialize, Serialize};

use crate::bundle::SequenceRecord;
use crate::error::{shape, validation, Error, Result};
use crate::pose::{ConfidenceSequence, PoseSequence2D, PoseSequence3D};
use crate::rng::SeededRng;
use crate::tagn::{apply_tagn, TagnConfig};

use super::adam::AdamState;
use super::model::{Geometry, LifterModel};
use super::real::Real;
use super::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 50, batch_size: 256, lr: 0.001, lr_decay: 0.95, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(validation("train.batch_size must be positive"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(validation("train.lr must be non-negative"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(validation("train.lr_decay must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(validation("train.beta1 and train.beta2 must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(validation("train.eps must be positive"));
        }
        Ok(())
    }
}

/// One input/target pair seen by the trainer.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSequence {
    pub pose: PoseSequence2D,
    pub conf: ConfidenceSequence,
    pub target: PoseSequence3D,
}

impl TrainSequence {
    /// Uses the corrupted detections when the record has them, the clean ones otherwise.
    pub fn from_record(record: &SequenceRecord) -> Self {
        let (pose, conf) = record.observed();
        Self { pose: pose.clone(), conf: conf.clone(), target: record.gt3d.clone() }
    }
}

/// TAGN applied by the trainer, either once up front or afresh every epoch.
#[derive(Clone, Debug)]
pub struct Augmentation {
    pub config: TagnConfig,
    pub rng: SeededRng,
}

impl Augmentation {
    fn apply(&self, data: &[TrainSequence], rng: &SeededRng) -> Result<Vec<TrainSequence>> {
        data.iter()
            .enumerate()
            .map(|(i, s)| {
                let pose = apply_tagn(&s.pose, &self.config, &mut rng.child_index(i as u64))?;
                Ok(TrainSequence { pose, ..s.clone() })
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub windows: usize,
    pub train_mpjpe_mm: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lr,windows,train_mpjpe_mm\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{},{}\n", e.epoch, e.lr, e.windows, e.train_mpjpe_mm));
        }
        out
    }
}

/// Mean per-joint Euclidean distance between `pred` and `target` (same
/// layout, three values per joint) and its gradient with respect to `pred`.
pub fn mpjpe_loss<T: Real>(pred: &Tensor<T>, target: &[T]) -> Result<(f64, Tensor<T>)> {
    if pred.len() != target.len() || pred.len() % 3 != 0 || pred.is_empty() {
        return Err(shape(format!("prediction has {} values, target {}", pred.len(), target.len())));
    }
    let n = pred.len() / 3;
    let inv_n = T::of(1.0 / n as f64);
    let mut grad = Tensor::zeros(&pred.dims);
    let mut total = 0.0;
    for ((p, t), g) in pred.data.chunks_exact(3).zip(target.chunks_exact(3)).zip(grad.data.chunks_exact_mut(3)) {
        let d = [p[0] - t[0], p[1] - t[1], p[2] - t[2]];
        let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        total += norm.as_f64();
        if norm > T::zero() {
            for a in 0..3 {
                g[a] = d[a] / norm * inv_n;
            }
        }
    }
    Ok((total / n as f64, grad))
}

/// Time-major windows of one receptive field around each `(sequence, frame)`
/// centre, edge-replicated at the sequence ends, plus centre targets in meters.
pub fn gather_windows<T: Real>(
    data: &[TrainSequence],
    centres: &[(usize, usize)],
    rf: usize,
) -> Result<(Tensor<T>, Tensor<T>, Vec<T>)> {
    let b = centres.len();
    let j = data.first().map(|s| s.pose.joints).unwrap_or(0);
    let pad = (rf - 1) / 2;
    let mut pose = Vec::with_capacity(rf * b * 2 * j);
    let mut conf = Vec::with_capacity(rf * b * j);
    for l in 0..rf {
        for &(s, t) in centres {
            let seq = &data[s];
            let src = (t + l).saturating_sub(pad).min(seq.pose.frames - 1);
            pose.extend(seq.pose.frame(src).iter().map(|v| T::of(*v)));
            conf.extend((0..j).map(|jj| T::of(seq.conf.get(src, jj))));
        }
    }
    let target = centres.iter().flat_map(|&(s, t)| data[s].target.frame(t).iter().map(|v| T::of(v / 1000.0))).collect();
    Ok((Tensor::from_vec(&[rf, b, 2 * j], pose)?, Tensor::from_vec(&[rf, b, j], conf)?, target))
}

fn check_data<T: Real>(model: &LifterModel<T>, data: &[TrainSequence]) -> Result<()> {
    if data.is_empty() {
        return Err(validation("training set is empty"));
    }
    for (i, s) in data.iter().enumerate() {
        let t = s.pose.frames;
        let j = s.pose.joints;
        if j != model.joints || s.target.joints != j || s.conf.joints != j {
            return Err(shape(format!("training sequence {i} has {j} joints, model lifts {}", model.joints)));
        }
        if t == 0 || s.target.frames != t || s.conf.frames != t {
            return Err(shape(format!("training sequence {i} has mismatched or empty frame counts")));
        }
    }
    Ok(())
}

/// Minibatch Adam on centre-frame MPJPE over random receptive-field windows.
/// Each epoch draws `total_frames / rf` window centres uniformly with
/// replacement.
pub fn train<T: Real>(
    model: &mut LifterModel<T>,
    data: &[TrainSequence],
    config: &TrainConfig,
    augmentation: Option<&Augmentation>,
    rng: &SeededRng,
) -> Result<TrainingLog> {
    config.validate()?;
    check_data(model, data)?;
    if let Some(a) = augmentation {
        a.config.validate()?;
    }
    let rf = model.receptive_field();
    let once = match augmentation {
        Some(a) if !a.config.per_epoch => Some(a.apply(data, &a.rng.child_index(a.config.seed))?),
        _ => None,
    };
    let base = once.as_deref().unwrap_or(data);

    let mut starts = Vec::with_capacity(data.len());
    let mut total = 0usize;
    for s in data {
        starts.push(total);
        total += s.pose.frames;
    }
    let n_windows = (total / rf).max(1);

    let mut adam = AdamState::new(model.params().into_iter().map(|(_, t)| t), config.lr);
    adam.beta1 = config.beta1;
    adam.beta2 = config.beta2;
    adam.eps = config.eps;
    adam.lr_decay_per_epoch = config.lr_decay;

    let mut log = TrainingLog::default();
    for epoch in 0..config.epochs {
        let fresh = match augmentation {
            Some(a) if a.config.per_epoch => {
                Some(a.apply(data, &a.rng.child_index(a.config.seed).child("epoch").child_index(epoch as u64))?)
            }
            _ => None,
        };
        let epoch_data = fresh.as_deref().unwrap_or(base);
        let mut wr = rng.child("windows").child_index(epoch as u64);
        let centres: Vec<(usize, usize)> = (0..n_windows)
            .map(|_| {
                let g = wr.int_inclusive(0, total - 1);
                let s = starts.partition_point(|&st| st <= g) - 1;
                (s, g - starts[s])
            })
            .collect();
        let lr = adam.lr;
        let mut sum = 0.0;
        for (bi, batch) in centres.chunks(config.batch_size).enumerate() {
            let (pose, conf, target) = gather_windows::<T>(epoch_data, batch, rf)?;
            let mut drng = rng.child("dropout").child_index(epoch as u64).child_index(bi as u64);
            let batch_key = (drng.seed(), drng.stream_id());
            let (out, trace) = model.forward(&pose, Some(&conf), Geometry::Strided, Some(&mut drng))?;
            let (loss, dout) = mpjpe_loss(&out, &target)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss at epoch {epoch}, batch {bi} (batch rng seed {}, stream {:#x})",
                    batch_key.0, batch_key.1
                )));
            }
            let grads = model.backward(&trace, &dout)?;
            adam.update(model.params_mut(), &grads)?;
            sum += loss * batch.len() as f64;
        }
        log.epochs.push(EpochLog { epoch, lr, windows: n_windows, train_mpjpe_mm: sum / n_windows as f64 * 1000.0 });
        adam.end_epoch();
    }
    Ok(log)
}

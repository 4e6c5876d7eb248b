//! Corrupted train/test splits.
//!
//! Train: each operator claims a disjoint random tenth of the sequences, the
//! rest stay clean. Test: every sequence is repeated once per operator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{CorruptedView, DatasetBundle, SequenceRecord};
use crate::corrupt::frame::PixelTrack;
use crate::corrupt::manifest::CorruptionOperator;
use crate::corrupt::plan_corruption;
use crate::error::{validation, Result};
use crate::rng::SeededRng;
use crate::synthgen::detector::{simulate_detection, DetectorSimConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRole {
    Train,
    Test,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub detector: DetectorSimConfig,
    /// Leaves cropping out of both roles.
    pub skip_cropping: bool,
}

impl SplitConfig {
    pub fn operators(&self) -> Vec<CorruptionOperator> {
        CorruptionOperator::ALL
            .into_iter()
            .filter(|&op| !(self.skip_cropping && op == CorruptionOperator::Cropping))
            .collect()
    }
}

fn corrupt_record(
    record: &SequenceRecord,
    op: CorruptionOperator,
    id: String,
    detector: &DetectorSimConfig,
    rng: &SeededRng,
) -> Result<SequenceRecord> {
    let track = PixelTrack::from_pose(&record.gt2d);
    let manifest = plan_corruption(
        op,
        &track,
        record.gt2d.width_px,
        record.gt2d.height_px,
        &mut rng.child("plan"),
    )?;
    let (det2d, conf) = simulate_detection(&record.gt2d, Some(&manifest), detector, &mut rng.child("detect"))?;
    Ok(SequenceRecord {
        id,
        corrupted: Some(CorruptedView {
            det2d,
            conf,
            manifest,
        }),
        ..record.clone()
    }
    .quantized())
}

pub fn build_corrupted_split(
    bundle: &DatasetBundle,
    role: SplitRole,
    seed: u64,
    cfg: &SplitConfig,
) -> Result<DatasetBundle> {
    cfg.detector.validate()?;
    let ops = cfg.operators();
    let n = bundle.sequences.len();
    let root = SeededRng::new(seed, 0).child("split");
    let jobs: Vec<(usize, Option<CorruptionOperator>)> = match role {
        SplitRole::Train => {
            if n < 10 {
                return Err(validation(format!(
                    "train split needs at least 10 sequences to allocate 10% slices, got {n}"
                )));
            }
            let per_op = n / 10;
            let mut order: Vec<usize> = (0..n).collect();
            root.child("assign").shuffle(&mut order);
            let mut assigned = vec![None; n];
            for (k, &op) in ops.iter().enumerate() {
                for &i in &order[k * per_op..(k + 1) * per_op] {
                    assigned[i] = Some(op);
                }
            }
            assigned.into_iter().enumerate().collect()
        }
        SplitRole::Test => ops
            .iter()
            .flat_map(|&op| (0..n).map(move |i| (i, Some(op))))
            .collect(),
    };
    let sequences = jobs
        .into_par_iter()
        .map(|(i, op)| {
            let record = &bundle.sequences[i];
            match op {
                None => Ok(record.clone()),
                Some(op) => {
                    let id = match role {
                        SplitRole::Train => record.id.clone(),
                        SplitRole::Test => format!("{}/{}", record.id, op),
                    };
                    let rng = root.child_index(i as u64).child(op.as_str());
                    corrupt_record(record, op, id, &cfg.detector, &rng)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetBundle {
        layout: bundle.layout.clone(),
        sequences,
    })
}

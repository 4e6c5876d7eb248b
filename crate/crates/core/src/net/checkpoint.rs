use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensorfile::{self, TensorEntry};

use super::model::{build_for_joints, LifterConfig, LifterModel};
use super::real::Real;

/// Tensor holding the JSON metadata, one UTF-8 byte per value.
pub const META_TENSOR: &str = "__meta__.config";
const FORMAT: &str = "poselift-checkpoint";

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Meta {
    format: String,
    joints: usize,
    lifter: LifterConfig,
}

pub fn save_checkpoint<T: Real>(model: &LifterModel<T>, path: &Path) -> Result<()> {
    let meta = Meta { format: FORMAT.into(), joints: model.joints, lifter: model.config.clone() };
    let json = serde_json::to_vec(&meta)?;
    let mut entries = vec![TensorEntry::new(META_TENSOR, &[json.len()], json.iter().map(|b| *b as f32).collect())];
    for (name, t) in model.params() {
        entries.push(TensorEntry::new(name, &t.dims, t.data.iter().map(|v| v.as_f64() as f32).collect()));
    }
    tensorfile::write(path, &entries)
}

/// Rebuilds the model stored at `path`.
pub fn read_checkpoint<T: Real>(path: &Path) -> Result<LifterModel<T>> {
    let entries = tensorfile::read(path)?;
    let bad = |detail: String| Error::Checkpoint(format!("{}: {detail}", path.display()));
    let meta_entry = tensorfile::find(&entries, META_TENSOR).ok_or_else(|| bad(format!("missing {META_TENSOR}")))?;
    let bytes: Vec<u8> = meta_entry.data.iter().map(|v| *v as u8).collect();
    let meta: Meta = serde_json::from_slice(&bytes).map_err(|e| bad(format!("unreadable metadata: {e}")))?;
    if meta.format != FORMAT {
        return Err(bad(format!("unknown checkpoint format {:?}", meta.format)));
    }
    let mut model: LifterModel<T> = build_for_joints(&meta.lifter, meta.joints, &SeededRng::new(0, 0))?;
    let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
    for (name, param) in names.iter().zip(model.params_mut()) {
        let entry = tensorfile::find(&entries, name).ok_or_else(|| bad(format!("missing parameter {name}")))?;
        if entry.dims_usize() != param.dims {
            return Err(bad(format!("parameter {name} has shape {:?}, expected {:?}", entry.dims, param.dims)));
        }
        for (p, v) in param.data.iter_mut().zip(&entry.data) {
            *p = T::of(*v as f64);
        }
    }
    Ok(model)
}

/// Replaces `model` with the checkpoint at `path`, which must have the same
/// joint count, input mode and layer shapes.
pub fn load_checkpoint<T: Real>(model: &mut LifterModel<T>, path: &Path) -> Result<()> {
    let loaded: LifterModel<T> = read_checkpoint(path)?;
    let bad = |detail: String| Err(Error::Checkpoint(format!("{}: {detail}", path.display())));
    if loaded.joints != model.joints {
        return bad(format!("checkpoint lifts {} joints, model expects {}", loaded.joints, model.joints));
    }
    let (a, b) = (&loaded.config, &model.config);
    if a.input_mode != b.input_mode {
        return bad(format!("checkpoint input mode {} does not match model input mode {}", a.input_mode, b.input_mode));
    }
    if (a.num_blocks, a.kernel, a.channels) != (b.num_blocks, b.kernel, b.channels) {
        return bad(format!(
            "checkpoint architecture (blocks {}, kernel {}, channels {}) does not match model (blocks {}, kernel {}, channels {})",
            a.num_blocks, a.kernel, a.channels, b.num_blocks, b.kernel, b.channels
        ));
    }
    *model = loaded;
    Ok(())
}

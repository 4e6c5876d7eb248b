//! On-disk dataset bundles.
//!
//! A bundle directory holds `manifest.json` (layout, record ids, shapes, file
//! names, checksums and corruption manifests) and one tensor file per record.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corrupt::{CorruptionManifest, CorruptionOperator};
use crate::error::{shape, validation, Error, Result};
use crate::pose::{ConfidenceSequence, PoseSequence2D, PoseSequence3D};
use crate::skeleton::SkeletonLayout;
use crate::tensorfile::{self, TensorEntry};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceRecord {
    pub id: String,
    pub gt3d: PoseSequence3D,
    pub gt2d: PoseSequence2D,
    pub det2d_clean: PoseSequence2D,
    pub conf_clean: ConfidenceSequence,
    pub corrupted: Option<CorruptedView>,
}

/// Detections under a corruption, together with the manifest that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct CorruptedView {
    pub det2d: PoseSequence2D,
    pub conf: ConfidenceSequence,
    pub manifest: CorruptionManifest,
}

impl SequenceRecord {
    pub fn frames(&self) -> usize {
        self.gt3d.frames
    }

    pub fn joints(&self) -> usize {
        self.gt3d.joints
    }

    pub fn operator(&self) -> CorruptionOperator {
        self.corrupted
            .as_ref()
            .map_or(CorruptionOperator::None, |c| c.manifest.operator)
    }

    /// Corrupted detections when present, clean ones otherwise.
    pub fn observed(&self) -> (&PoseSequence2D, &ConfidenceSequence) {
        match &self.corrupted {
            Some(c) => (&c.det2d, &c.conf),
            None => (&self.det2d_clean, &self.conf_clean),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (t, j) = (self.frames(), self.joints());
        let mut ok = self.gt2d.frames == t
            && self.gt2d.joints == j
            && self.det2d_clean.same_shape(&self.gt2d)
            && self.conf_clean.frames == t
            && self.conf_clean.joints == j;
        if let Some(c) = &self.corrupted {
            ok &= c.det2d.same_shape(&self.gt2d)
                && c.conf.frames == t
                && c.conf.joints == j
                && c.manifest.frames() == t;
        }
        if !ok {
            return Err(shape(format!(
                "record '{}': tensors disagree on frames/joints",
                self.id
            )));
        }
        Ok(())
    }

    /// Rounds every payload to `f32` so that a save/load cycle is exact.
    pub fn quantized(mut self) -> Self {
        self.gt3d = self.gt3d.quantized();
        self.gt2d = self.gt2d.quantized();
        self.det2d_clean = self.det2d_clean.quantized();
        self.conf_clean = self.conf_clean.quantized();
        if let Some(c) = self.corrupted.as_mut() {
            c.det2d = c.det2d.quantized();
            c.conf = c.conf.quantized();
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBundle {
    pub layout: SkeletonLayout,
    pub sequences: Vec<SequenceRecord>,
}

impl DatasetBundle {
    pub fn total_frames(&self) -> usize {
        self.sequences.iter().map(|s| s.frames()).sum()
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    format: String,
    version: u32,
    layout: SkeletonLayout,
    records: Vec<ManifestRecord>,
}

#[derive(Serialize, Deserialize)]
struct ManifestRecord {
    id: String,
    file: String,
    sha256: String,
    frames: usize,
    joints: usize,
    width_px: u32,
    height_px: u32,
    operator: CorruptionOperator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    corruption: Option<CorruptionManifest>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn record_entries(r: &SequenceRecord) -> Vec<TensorEntry> {
    let (t, j) = (r.frames(), r.joints());
    let mut entries = vec![
        TensorEntry::from_f64("gt3d", &[t, j, 3], &r.gt3d.data),
        TensorEntry::from_f64("gt2d", &[t, j, 2], &r.gt2d.data),
        TensorEntry::from_f64("det2d_clean", &[t, j, 2], &r.det2d_clean.data),
        TensorEntry::from_f64("conf_clean", &[t, j], &r.conf_clean.scores),
    ];
    if let Some(c) = &r.corrupted {
        entries.push(TensorEntry::from_f64("det2d_corrupt", &[t, j, 2], &c.det2d.data));
        entries.push(TensorEntry::from_f64("conf_corrupt", &[t, j], &c.conf.scores));
    }
    entries
}

pub fn save_bundle(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    bundle.layout.validate()?;
    std::fs::create_dir_all(dir)?;
    let mut records = Vec::with_capacity(bundle.sequences.len());
    for (i, r) in bundle.sequences.iter().enumerate() {
        r.validate()?;
        let file = format!("record_{i:05}.plt");
        let bytes = tensorfile::encode(&record_entries(r));
        std::fs::write(dir.join(&file), &bytes)?;
        records.push(ManifestRecord {
            id: r.id.clone(),
            file,
            sha256: sha256_hex(&bytes),
            frames: r.frames(),
            joints: r.joints(),
            width_px: r.gt2d.width_px,
            height_px: r.gt2d.height_px,
            operator: r.operator(),
            corruption: r.corrupted.as_ref().map(|c| c.manifest.clone()),
        });
    }
    let manifest = ManifestFile {
        format: "poselift-bundle".into(),
        version: BUNDLE_VERSION,
        layout: bundle.layout.clone(),
        records,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    std::fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(())
}

fn tensor<'a>(entries: &'a [TensorEntry], name: &str, path: &Path, dims: &[usize]) -> Result<&'a TensorEntry> {
    let e = tensorfile::find(entries, name).ok_or_else(|| Error::Malformed {
        path: path.to_path_buf(),
        detail: format!("missing tensor '{name}'"),
    })?;
    if e.dims_usize() != dims {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            detail: format!("tensor '{name}' has dims {:?}, expected {dims:?}", e.dims),
        });
    }
    Ok(e)
}

pub fn load_bundle(dir: &Path) -> Result<DatasetBundle> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(Error::MissingManifest(manifest_path));
    }
    let manifest: ManifestFile = serde_json::from_slice(&std::fs::read(&manifest_path)?)?;
    if manifest.version != BUNDLE_VERSION {
        return Err(Error::VersionMismatch {
            path: manifest_path,
            found: manifest.version,
            expected: BUNDLE_VERSION,
        });
    }
    manifest.layout.validate()?;
    let mut sequences = Vec::with_capacity(manifest.records.len());
    for rec in manifest.records {
        let path = dir.join(&rec.file);
        let bytes = std::fs::read(&path)?;
        let entries = tensorfile::decode(&bytes, &path)?;
        let found = sha256_hex(&bytes);
        if found != rec.sha256 {
            return Err(Error::ChecksumMismatch {
                path,
                expected: rec.sha256,
                found,
            });
        }
        let (t, j) = (rec.frames, rec.joints);
        if j != manifest.layout.joint_count {
            return Err(validation(format!(
                "record '{}' has {j} joints, layout has {}",
                rec.id, manifest.layout.joint_count
            )));
        }
        let pose2d = |name: &str| -> Result<PoseSequence2D> {
            let e = tensor(&entries, name, &path, &[t, j, 2])?;
            PoseSequence2D::new(t, j, e.to_f64(), rec.width_px, rec.height_px)
        };
        let conf = |name: &str| -> Result<ConfidenceSequence> {
            let e = tensor(&entries, name, &path, &[t, j])?;
            ConfidenceSequence::new(t, j, e.to_f64())
        };
        let corrupted = match rec.corruption {
            Some(m) => Some(CorruptedView {
                det2d: pose2d("det2d_corrupt")?,
                conf: conf("conf_corrupt")?,
                manifest: m,
            }),
            None => {
                if tensorfile::find(&entries, "det2d_corrupt").is_some() {
                    return Err(Error::Malformed {
                        path,
                        detail: "corrupted tensors present without a corruption manifest".into(),
                    });
                }
                None
            }
        };
        let record = SequenceRecord {
            id: rec.id,
            gt3d: PoseSequence3D::new(t, j, tensor(&entries, "gt3d", &path, &[t, j, 3])?.to_f64())?,
            gt2d: pose2d("gt2d")?,
            det2d_clean: pose2d("det2d_clean")?,
            conf_clean: conf("conf_clean")?,
            corrupted,
        };
        record.validate()?;
        sequences.push(record);
    }
    Ok(DatasetBundle {
        layout: manifest.layout,
        sequences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrupt::{FrameCorruption, Rect};
    use crate::rng::SeededRng;

    fn random_record(id: &str, t: usize, rng: &mut SeededRng, corrupted: bool) -> SequenceRecord {
        let j = 16;
        let mut v = |n: usize, s: f64| -> Vec<f64> { (0..n).map(|_| rng.normal() * s).collect() };
        let gt3d = PoseSequence3D::new(t, j, v(t * j * 3, 300.0)).unwrap();
        let gt2d = PoseSequence2D::new(t, j, v(t * j * 2, 0.3), 1000, 1000).unwrap();
        let det = PoseSequence2D::new(t, j, v(t * j * 2, 0.3), 1000, 1000).unwrap();
        let conf = ConfidenceSequence::new(t, j, v(t * j, 0.3).iter().map(|x| x.abs().min(1.0)).collect()).unwrap();
        let corrupted = corrupted.then(|| CorruptedView {
            det2d: det.clone(),
            conf: conf.clone(),
            manifest: CorruptionManifest {
                operator: CorruptionOperator::GuidedPatchErase,
                severity: 1.0,
                width_px: 1000,
                height_px: 1000,
                per_frame: vec![
                    FrameCorruption {
                        erased_rects: vec![Rect::from([1, 2, 50, 60])],
                        ..Default::default()
                    };
                    t
                ],
            },
        });
        SequenceRecord {
            id: id.into(),
            gt3d,
            gt2d,
            det2d_clean: det,
            conf_clean: conf,
            corrupted,
        }
        .quantized()
    }

    fn sample_bundle() -> DatasetBundle {
        let mut rng = SeededRng::new(3, 0);
        DatasetBundle {
            layout: SkeletonLayout::h36m16(),
            sequences: vec![
                random_record("a", 7, &mut rng, false),
                random_record("b", 5, &mut rng, true),
            ],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let b = sample_bundle();
        save_bundle(&b, dir.path()).unwrap();
        let back = load_bundle(dir.path()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn missing_manifest() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(Error::MissingManifest(_))));
    }

    #[test]
    fn truncated_tensor_detected() {
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&sample_bundle(), dir.path()).unwrap();
        let f = dir.path().join("record_00001.plt");
        let bytes = std::fs::read(&f).unwrap();
        std::fs::write(&f, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(Error::TruncatedTensor { .. })));
    }

    #[test]
    fn checksum_failure_detected() {
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&sample_bundle(), dir.path()).unwrap();
        let f = dir.path().join("record_00000.plt");
        let mut bytes = std::fs::read(&f).unwrap();
        let n = bytes.len();
        bytes[n - 2] ^= 0x01;
        std::fs::write(&f, &bytes).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(Error::ChecksumMismatch { .. })));
    }

    #[test]
    fn version_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&sample_bundle(), dir.path()).unwrap();
        let p = dir.path().join(MANIFEST_FILE);
        let s = std::fs::read_to_string(&p).unwrap().replace("\"version\": 1", "\"version\": 2");
        std::fs::write(&p, s).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(Error::VersionMismatch { found: 2, .. })));
    }
}

//! Kinematic tree shared by the motion generator, the lifter and the metrics.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonLayout {
    pub joint_count: usize,
    /// Parent index per joint, `-1` for the root.
    pub parent: Vec<i64>,
    pub bone_lengths_mm: Vec<f64>,
    pub joint_names: Vec<String>,
}

impl SkeletonLayout {
    pub fn new(
        parent: Vec<i64>,
        bone_lengths_mm: Vec<f64>,
        joint_names: Vec<String>,
    ) -> Result<Self> {
        let layout = Self {
            joint_count: parent.len(),
            parent,
            bone_lengths_mm,
            joint_names,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// 16-joint layout: pelvis root, legs, spine, head and arms.
    pub fn h36m16() -> Self {
        let spec: [(&str, i64, f64); 16] = [
            ("pelvis", -1, 0.0),
            ("r_hip", 0, 132.9),
            ("r_knee", 1, 442.9),
            ("r_ankle", 2, 454.2),
            ("l_hip", 0, 132.9),
            ("l_knee", 4, 442.9),
            ("l_ankle", 5, 454.2),
            ("spine", 0, 233.4),
            ("thorax", 7, 257.1),
            ("head", 8, 236.0),
            ("l_shoulder", 8, 151.0),
            ("l_elbow", 10, 278.9),
            ("l_wrist", 11, 251.7),
            ("r_shoulder", 8, 151.0),
            ("r_elbow", 13, 278.9),
            ("r_wrist", 14, 251.7),
        ];
        Self {
            joint_count: spec.len(),
            parent: spec.iter().map(|s| s.1).collect(),
            bone_lengths_mm: spec.iter().map(|s| s.2).collect(),
            joint_names: spec.iter().map(|s| s.0.to_string()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.joint_count;
        if j == 0 {
            return Err(validation("layout has no joints"));
        }
        if self.parent.len() != j || self.bone_lengths_mm.len() != j || self.joint_names.len() != j
        {
            return Err(validation(format!(
                "layout arrays disagree with joint_count {j}: parent {}, bone_lengths_mm {}, joint_names {}",
                self.parent.len(),
                self.bone_lengths_mm.len(),
                self.joint_names.len()
            )));
        }
        let roots: Vec<usize> = (0..j).filter(|&i| self.parent[i] == -1).collect();
        if roots.len() != 1 {
            return Err(validation(format!(
                "layout must have exactly one root (parent -1), found {}",
                roots.len()
            )));
        }
        for i in 0..j {
            let p = self.parent[i];
            if p != -1 && (p < 0 || p as usize >= j || p as usize == i) {
                return Err(validation(format!(
                    "joint {i} ({}) has invalid parent {p}",
                    self.joint_names[i]
                )));
            }
            let len = self.bone_lengths_mm[i];
            if p == -1 {
                if len != 0.0 {
                    return Err(validation(format!(
                        "root joint {i} ({}) must have bone length 0, got {len}",
                        self.joint_names[i]
                    )));
                }
            } else if !(len.is_finite() && len > 0.0) {
                return Err(validation(format!(
                    "joint {i} ({}) must have a positive bone length, got {len}",
                    self.joint_names[i]
                )));
            }
        }
        // Every ancestor walk must reach the root within j steps.
        for i in 0..j {
            let mut cur = i;
            let mut steps = 0;
            while self.parent[cur] != -1 {
                cur = self.parent[cur] as usize;
                steps += 1;
                if steps > j {
                    return Err(validation(format!(
                        "joint {i} ({}) is part of a parent cycle",
                        self.joint_names[i]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn root(&self) -> usize {
        self.parent
            .iter()
            .position(|&p| p == -1)
            .expect("validated layout has a root")
    }

    pub fn parent_of(&self, joint: usize) -> Option<usize> {
        match self.parent[joint] {
            -1 => None,
            p => Some(p as usize),
        }
    }

    /// Joints ordered so that every parent precedes its children.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut depth = vec![0usize; self.joint_count];
        for (i, d) in depth.iter_mut().enumerate() {
            let mut cur = i;
            while let Some(p) = self.parent_of(cur) {
                *d += 1;
                cur = p;
            }
        }
        let mut order: Vec<usize> = (0..self.joint_count).collect();
        order.sort_by_key(|&i| (depth[i], i));
        order
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_is_valid() {
        let l = SkeletonLayout::h36m16();
        l.validate().unwrap();
        assert_eq!(l.joint_count, 16);
        assert_eq!(l.root(), 0);
    }

    #[test]
    fn cycle_is_rejected_and_named() {
        let mut l = SkeletonLayout::h36m16();
        l.parent[1] = 2;
        let err = l.validate().unwrap_err().to_string();
        assert!(err.contains("r_hip"), "{err}");
        assert!(err.contains("cycle"), "{err}");
    }

    #[test]
    fn two_roots_rejected() {
        let mut l = SkeletonLayout::h36m16();
        l.parent[7] = -1;
        l.bone_lengths_mm[7] = 0.0;
        assert!(l.validate().is_err());
    }

    #[test]
    fn topological_order_puts_parents_first() {
        let l = SkeletonLayout::h36m16();
        let order = l.topological_order();
        let pos: Vec<usize> = (0..16)
            .map(|j| order.iter().position(|&o| o == j).unwrap())
            .collect();
        for j in 0..16 {
            if let Some(p) = l.parent_of(j) {
                assert!(pos[p] < pos[j]);
            }
        }
    }
}

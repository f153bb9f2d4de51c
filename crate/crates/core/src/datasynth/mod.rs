//! Synthetic indoor scenes with ground-truth object changes.
//!
//! Scenes are rooms of primitive objects. A re-scan moves, removes or adds
//! objects; the change log and symmetry-aware ground truth come along with
//! it. TSDF volumes are either computed analytically from the scene or fused
//! from rendered depth frames.

mod bundle;
mod changes;
mod manifest;
mod render;
mod scene;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use bundle::{export_benchmark_bundle, generate_corpus, load_bundle, Bundle, CorpusConfig, ScanConfig, ScenePair};
pub use changes::{apply_changes, Change, ChangeConfig, ChangeKind, RotationAxis, ScenePairManifest};
pub use manifest::{
    load_scan_manifest, manifest_violations, parse_scan_manifest, save_scan_manifest, QueryObject, RescanEntry,
    SceneManifest, SCHEMA,
};
pub use render::{look_at, orbit_poses, render_depth};
pub use scene::{
    class_label_for, generate_scene, Primitive, PrimitiveKind, Room, SceneConfig, SceneObject, SyntheticScene,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Relative split sizes. The default mirrors the 3RScan reference scenes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: u32,
    pub val: u32,
    pub test: u32,
}

impl Default for SplitRatio {
    fn default() -> Self {
        SplitRatio { train: 385, val: 47, test: 46 }
    }
}

impl SplitRatio {
    /// Scene counts per split for `n` scenes (largest remainder rounding).
    pub fn counts(&self, n: usize) -> Result<[usize; 3]> {
        let w = [self.train as u64, self.val as u64, self.test as u64];
        let total: u64 = w.iter().sum();
        if total == 0 {
            return invalid("split ratio is all zero");
        }
        let mut counts = [0usize; 3];
        let mut rem = [(0u64, 0usize); 3];
        for i in 0..3 {
            let num = w[i] * n as u64;
            counts[i] = (num / total) as usize;
            rem[i] = (num % total, i);
        }
        // ties go to the earlier split
        rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut left = n - counts.iter().sum::<usize>();
        for &(_, i) in &rem {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        Ok(counts)
    }
}

/// Shuffled split labels for `n` scenes, deterministic in `seed`.
pub fn assign_splits(n: usize, ratio: &SplitRatio, seed: u64) -> Result<Vec<Split>> {
    let [tr, va, te] = ratio.counts(n)?;
    let mut out: Vec<Split> = std::iter::repeat_n(Split::Train, tr)
        .chain(std::iter::repeat_n(Split::Val, va))
        .chain(std::iter::repeat_n(Split::Test, te))
        .collect();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(out)
}

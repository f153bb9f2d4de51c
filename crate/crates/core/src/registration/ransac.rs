use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{kabsch, Correspondence};
use crate::error::{invalid, Result, RioError};
use crate::pose::RigidPose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub max_iterations: usize,
    /// Residual bound for inliers, in meters.
    pub inlier_threshold: f64,
    pub min_inliers: usize,
    pub seed: u64,
    /// Redraws allowed within one iteration when the sample is degenerate.
    pub max_resamples: usize,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig { max_iterations: 4096, inlier_threshold: 0.05, min_inliers: 5, seed: 0, max_resamples: 16 }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.min_inliers == 0 || self.max_resamples == 0 {
            return invalid("RANSAC iteration counts and min_inliers must be positive");
        }
        if !(self.inlier_threshold > 0.0) {
            return invalid(format!("inlier_threshold must be positive, got {}", self.inlier_threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub pose: RigidPose,
    /// Indices into the input correspondences.
    pub inliers: Vec<usize>,
    pub iterations_with_model: usize,
}

/// Independent RNG stream per iteration, so any iteration can be replayed
/// (or run in parallel) and still select the same model.
fn iteration_rng(seed: u64, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    rng
}

fn triangle_ok(a: &nalgebra::Point3<f64>, b: &nalgebra::Point3<f64>, c: &nalgebra::Point3<f64>) -> bool {
    let (ab, ac, bc) = (b - a, c - a, c - b);
    let longest = ab.norm_squared().max(ac.norm_squared()).max(bc.norm_squared());
    let area2 = ab.cross(&ac).norm();
    longest > 0.0 && area2 > 1e-6 * longest
}

/// Robust rigid alignment: minimal 3-point Kabsch hypotheses scored by
/// inlier count, then by mean inlier residual; the winner is re-fitted on all
/// of its inliers.
pub fn ransac_align(correspondences: &[Correspondence], config: &RansacConfig) -> Result<RansacResult> {
    config.validate()?;
    let n = correspondences.len();
    if n < 3 {
        return Err(RioError::AlignmentFailure(format!("need at least 3 correspondences, got {n}")));
    }
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    let mut with_model = 0;
    let mut inliers = Vec::with_capacity(n);
    for it in 0..config.max_iterations {
        let mut rng = iteration_rng(config.seed, it);
        let mut sample = None;
        for _ in 0..config.max_resamples {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let k = rng.random_range(0..n);
            if i == j || j == k || i == k {
                continue;
            }
            let (a, b, c) = (&correspondences[i], &correspondences[j], &correspondences[k]);
            if triangle_ok(&a.source_point, &b.source_point, &c.source_point)
                && triangle_ok(&a.target_point, &b.target_point, &c.target_point)
            {
                sample = Some([*a, *b, *c]);
                break;
            }
        }
        let Some(sample) = sample else { continue };
        let Ok(pose) = kabsch(&sample) else { continue };
        with_model += 1;
        inliers.clear();
        let mut sum = 0.0;
        for (idx, c) in correspondences.iter().enumerate() {
            let r = c.residual(&pose);
            if r <= config.inlier_threshold {
                inliers.push(idx);
                sum += r;
            }
        }
        let count = inliers.len();
        if count == 0 {
            continue;
        }
        let mean = sum / count as f64;
        let better = match &best {
            None => true,
            Some((bc, bm, _)) => count > *bc || (count == *bc && mean < *bm),
        };
        if better {
            best = Some((count, mean, inliers.clone()));
        }
    }
    let (count, _, best_inliers) = best.ok_or_else(|| RioError::AlignmentFailure("every sample was degenerate".into()))?;
    if count < config.min_inliers.max(3) {
        return Err(RioError::AlignmentFailure(format!(
            "best model has {count} inliers, need {}",
            config.min_inliers.max(3)
        )));
    }
    let subset: Vec<Correspondence> = best_inliers.iter().map(|&i| correspondences[i]).collect();
    let pose = kabsch(&subset).map_err(|e| RioError::AlignmentFailure(format!("refit on inliers failed: {e}")))?;
    Ok(RansacResult { pose, inliers: best_inliers, iterations_with_model: with_model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    #[test]
    fn collinear_triplet_fails() {
        let c: Vec<_> = (0..3)
            .map(|i| {
                let p = Point3::new(i as f64, 0.0, 0.0);
                Correspondence::new(p, p)
            })
            .collect();
        assert!(matches!(ransac_align(&c, &RansacConfig::default()), Err(RioError::AlignmentFailure(_))));
    }

    #[test]
    fn too_few_correspondences() {
        let c = vec![Correspondence::new(Point3::origin(), Point3::origin())];
        assert!(matches!(ransac_align(&c, &RansacConfig::default()), Err(RioError::AlignmentFailure(_))));
    }

    #[test]
    fn iteration_streams_differ() {
        let a: u64 = iteration_rng(7, 0).random();
        let b: u64 = iteration_rng(7, 1).random();
        let a2: u64 = iteration_rng(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }
}

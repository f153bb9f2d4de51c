//! Learned multi-scale TSDF descriptor: network, triplet loss, training and
//! model files.

pub mod io;
mod layers;
mod loss;
mod network;
mod real;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use layers::{LayerSpec, Shape};
pub use loss::{triplet_loss, TripletLossConfig};
pub use network::{Branch, DescriptorModel, ModelSpec, ScaleMode, Stage, TrainingMeta};
pub use real::Real;
pub use train::{backward, train, BatchGradients, Freeze, Gradients, LossPoint, TrainOptions, TrainReport};

use crate::error::{invalid, Result};
use crate::keypoints::Keypoint;
use crate::registration::FeatureMatrix;
use crate::volume::{extract_two_scale, PatchPairSpec, TsdfVolume};

/// Anything that maps keypoints of a volume to fixed-length features.
pub trait Descriptor {
    fn dim(&self) -> usize;
    fn describe(&self, volume: &TsdfVolume, keypoints: &[Keypoint]) -> Result<FeatureMatrix>;
}

/// Features of `keypoints`, one row each, in input order.
pub fn describe_keypoints<T: Real>(
    model: &DescriptorModel<T>,
    volume: &TsdfVolume,
    keypoints: &[Keypoint],
    spec: &PatchPairSpec,
) -> Result<FeatureMatrix> {
    if spec.resolution != model.spec().input_resolution {
        return invalid(format!(
            "patch resolution {} does not match model input {}",
            spec.resolution,
            model.spec().input_resolution
        ));
    }
    let dim = model.feature_dim();
    let mut data = Vec::with_capacity(dim * keypoints.len());
    let mut scratch = Vec::new();
    let conv = |v: &[f32]| v.iter().map(|&x| T::from_f32(x)).collect::<Vec<T>>();
    for kp in keypoints {
        let pair = extract_two_scale(volume, &kp.position, spec)?;
        let f = model.forward_values(&conv(pair.fine.values()), &conv(pair.coarse.values()), &mut scratch);
        data.extend(f.into_iter().map(T::to_single));
    }
    FeatureMatrix::new(dim, data)
}

impl<T: Real> Descriptor for DescriptorModel<T> {
    fn dim(&self) -> usize {
        self.feature_dim()
    }

    fn describe(&self, volume: &TsdfVolume, keypoints: &[Keypoint]) -> Result<FeatureMatrix> {
        describe_keypoints(self, volume, keypoints, &self.spec().patch)
    }
}

/// Baseline that ignores geometry: i.i.d. standard-uniform features.
///
/// Streams are keyed by a hash of the volume contents, so two different
/// volumes never share features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomDescriptor {
    pub dim: usize,
    pub seed: u64,
}

impl Descriptor for RandomDescriptor {
    fn dim(&self) -> usize {
        self.dim
    }

    fn describe(&self, volume: &TsdfVolume, keypoints: &[Keypoint]) -> Result<FeatureMatrix> {
        let mut h = 0xcbf29ce484222325u64;
        for v in volume.values() {
            for b in v.to_bits().to_le_bytes() {
                h = (h ^ b as u64).wrapping_mul(0x100000001b3);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ h);
        let data = (0..self.dim * keypoints.len()).map(|_| rng.random::<f32>()).collect();
        FeatureMatrix::new(self.dim, data)
    }
}

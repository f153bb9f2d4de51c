//! Harris 3D keypoints on TSDF volumes, non-maxima suppression, cross-volume
//! refinement and training-triplet generation.

mod harris;
mod nms;
mod segment;
mod triplets;

use std::path::Path;

pub use harris::{harris3d, harris_response, keypoint_order, refine_on, tsdf_gradient, HarrisConfig, Keypoint, ResponseField};
pub use nms::nms;
pub use segment::ObjectSegment;
pub use triplets::{
    detect_keypoints, load_triplets, sample_dynamic_triplets, sample_static_triplets, save_triplets,
    static_triplets_from_pair, Augmentation, DynamicInstance, NegativePool, Provenance, TrainingTriplet, TripletBatch,
    TripletConfig,
};

pub(crate) use harris::point_serde;

use crate::error::Result;

/// Writes keypoints as a JSON array of `{position: [x, y, z], response}`.
pub fn save_keypoints(path: impl AsRef<Path>, keypoints: &[Keypoint]) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(f, keypoints)?;
    Ok(())
}

pub fn load_keypoints(path: impl AsRef<Path>) -> Result<Vec<Keypoint>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    Ok(serde_json::from_reader(f)?)
}

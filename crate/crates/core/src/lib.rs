//! Object instance re-localization in changing indoor scans.
//!
//! Given a rigid object segmented in a source TSDF scan and a later re-scan
//! of the same room, estimate where the object went: Harris 3D keypoints,
//! learned two-scale TSDF descriptors, k-NN matching, RANSAC and Kabsch.
//! Also ships the symmetry-aware benchmark scorer and a synthetic
//! changing-scene generator that supplies exact ground truth.

pub mod datasynth;
pub mod descriptor;
pub mod error;
pub mod evaluation;
pub mod keypoints;
pub mod pose;
pub mod registration;
pub mod volume;
pub mod workflow;

pub use error::{Result, RioError};
pub use pose::RigidPose;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/volumes.md")]
    struct Volumes;
    #[doc = include_str!("../../../book/src/keypoints.md")]
    struct Keypoints;
    #[doc = include_str!("../../../book/src/descriptor.md")]
    struct Descriptor;
    #[doc = include_str!("../../../book/src/registration.md")]
    struct Registration;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    struct Evaluation;
    #[doc = include_str!("../../../book/src/datasynth.md")]
    struct Datasynth;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}

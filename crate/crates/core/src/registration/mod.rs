//! Descriptor matching, RANSAC, Kabsch and per-object re-localization.

mod kabsch;
mod matching;
mod pipeline;
mod ransac;

pub use kabsch::{kabsch, sum_squared_residuals, Correspondence};
pub use matching::{match_knn, FeatureMatch, FeatureMatrix};
pub use pipeline::{
    describe_scene, relocalize_instance, relocalize_with_features, RelocalizeConfig, RelocalizeDiagnostics, SceneFeatures,
};
pub use ransac::{ransac_align, RansacConfig, RansacResult};

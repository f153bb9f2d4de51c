use std::path::Path;

use serde::{Deserialize, Serialize};

use rio::datasynth::CorpusConfig;
use rio::descriptor::{ModelSpec, TripletLossConfig};
use rio::registration::RelocalizeConfig;
use rio::workflow::TrainingSetConfig;
use rio::RioError;

use crate::CliError;

/// Contents of `--config`. Every section is optional and falls back to the
/// library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: CorpusConfig,
    pub training: TrainingSetConfig,
    pub loss: TripletLossConfig,
    pub model: ModelSpec,
    pub relocalize: RelocalizeConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    /// Checks every section against its module's preconditions, before any
    /// work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let section = |name: &str, r: rio::Result<()>| {
            r.map_err(|e: RioError| CliError::Validation(format!("config section {name}: {e}")))
        };
        section("corpus.scene", self.corpus.scene.validate())?;
        section("corpus.changes", self.corpus.changes.validate())?;
        section("training.triplets", self.training.triplets.validate())?;
        section("training.render", self.training.render.validate())?;
        section("loss", self.loss.validate())?;
        section("model", self.model.validate())?;
        section("relocalize", self.relocalize.validate())?;
        if self.training.triplets.patch != self.model.patch {
            return Err(CliError::Validation(
                "config: training.triplets.patch must equal model.patch (the model reads patches of that shape)".into(),
            ));
        }
        if !(self.corpus.scan.voxel_size > 0.0 && self.corpus.scan.truncation > 0.0) {
            return Err(CliError::Validation("config section corpus.scan: voxel size and truncation must be positive".into()));
        }
        Ok(())
    }
}

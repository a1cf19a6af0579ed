//! Experiment configuration files.

use std::path::{Path, PathBuf};

use icewatch_core::pipeline::{PipelineConfig, Variant};
use icewatch_core::record::{apply_label_windows, LabeledDataset};
use icewatch_core::synth::{make_turbine_pair, OffsetProfile, SynthConfig, SynthOutput};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::formats::{open, parse_scada_csv, parse_windows_csv};

pub const TRAIN_TURBINE: &str = "wt_a";
pub const TEST_TURBINE: &str = "wt_b";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurbineFiles {
    pub turbine_id: String,
    pub scada: PathBuf,
    pub windows: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    /// A generated pair; the first turbine trains, the second tests.
    Synthetic {
        #[serde(default)]
        base: SynthConfig,
        #[serde(default = "OffsetProfile::documented_default")]
        offset_profile: OffsetProfile,
    },
    /// Paths are relative to the config file.
    Files {
        train: TurbineFiles,
        test: TurbineFiles,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default)]
    pub traditional: Option<PipelineConfig>,
    #[serde(default)]
    pub reengineered: Option<PipelineConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(CliError::config)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.traditional.is_none() && self.reengineered.is_none() {
            return Err(CliError::config(
                "config needs a traditional or reengineered pipeline",
            ));
        }
        for (slot, want) in [
            (&self.traditional, Variant::Traditional),
            (&self.reengineered, Variant::Reengineered),
        ] {
            if let Some(p) = slot {
                if p.variant != want {
                    return Err(CliError::Config(format!(
                        "the {want} entry has variant {}",
                        p.variant
                    )));
                }
                p.validate()?;
            }
        }
        if let DataSource::Synthetic { base, .. } = &self.data {
            base.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical (compact, field-ordered) JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Train and test datasets; `base_dir` resolves relative file paths.
    pub fn load_datasets(
        &self,
        base_dir: &Path,
    ) -> Result<(LabeledDataset, LabeledDataset), CliError> {
        match &self.data {
            DataSource::Synthetic {
                base,
                offset_profile,
            } => {
                let (a, b) = make_turbine_pair(base, offset_profile)?;
                Ok((
                    label_synthetic(TRAIN_TURBINE, a)?,
                    label_synthetic(TEST_TURBINE, b)?,
                ))
            }
            DataSource::Files { train, test } => Ok((
                load_turbine(train, base_dir)?,
                load_turbine(test, base_dir)?,
            )),
        }
    }
}

pub fn label_synthetic(turbine_id: &str, out: SynthOutput) -> Result<LabeledDataset, CliError> {
    apply_label_windows(turbine_id, out.records, &out.truth_windows)
        .map_err(|e| CliError::Data(e.to_string()))
}

fn load_turbine(files: &TurbineFiles, base_dir: &Path) -> Result<LabeledDataset, CliError> {
    let records = parse_scada_csv(open(&base_dir.join(&files.scada))?)?;
    let windows = parse_windows_csv(open(&base_dir.join(&files.windows))?)?;
    apply_label_windows(files.turbine_id.as_str(), records, &windows)
        .map_err(|e| CliError::Data(e.to_string()))
}

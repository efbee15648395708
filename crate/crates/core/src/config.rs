use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::SplitConfig;
use crate::error::{Error, Result};
use crate::mfcc::MfccConfig;
use crate::pca::PcaConfig;
use crate::roi::RoiConfig;
use crate::zernike::ZernikeConfig;

/// Default file locations, used when the matching command-line flag is absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Every tunable of the pipeline, stored as TOML.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub roi: RoiConfig,
    pub zernike: ZernikeConfig,
    pub mfcc: MfccConfig,
    pub pca: PcaConfig,
    pub split: SplitConfig,
    pub paths: PathsConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.zernike.validate()?;
        self.mfcc.validate()?;
        self.split.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

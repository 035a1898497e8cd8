//! Named model constructors shared by the library and the CLI.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorConfig, DetectorKind};
use crate::ensembles::{build_ensemble, EnsembleConfig, EnsembleKind};
use crate::error::{Error, Result};
use crate::pwpae::{PwpaeModel, DEFAULT_EPSILON};
use crate::rng::derive_seed;
use crate::trees::{HoeffdingTree, HoeffdingTreeConfig};
use crate::types::AdaptiveLearner;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelName {
    #[serde(rename = "ht")]
    Ht,
    #[serde(rename = "efdt")]
    Efdt,
    #[serde(rename = "lb")]
    Lb,
    #[serde(rename = "arf-adwin")]
    ArfAdwin,
    #[serde(rename = "arf-ddm")]
    ArfDdm,
    #[serde(rename = "srp-adwin")]
    SrpAdwin,
    #[serde(rename = "srp-ddm")]
    SrpDdm,
    #[serde(rename = "pwpae")]
    Pwpae,
}

impl ModelName {
    pub const ALL: [ModelName; 8] = [
        ModelName::Ht,
        ModelName::Efdt,
        ModelName::Lb,
        ModelName::ArfAdwin,
        ModelName::ArfDdm,
        ModelName::SrpAdwin,
        ModelName::SrpDdm,
        ModelName::Pwpae,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Ht => "ht",
            ModelName::Efdt => "efdt",
            ModelName::Lb => "lb",
            ModelName::ArfAdwin => "arf-adwin",
            ModelName::ArfDdm => "arf-ddm",
            ModelName::SrpAdwin => "srp-adwin",
            ModelName::SrpDdm => "srp-ddm",
            ModelName::Pwpae => "pwpae",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.map(ModelName::as_str).join(", ")
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::param(
                    "models",
                    format!("unknown model `{s}`; valid names: {}", Self::valid_names()),
                )
            })
    }
}

/// Every tunable shared by the registered models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub tree: HoeffdingTreeConfig,
    pub detectors: DetectorConfig,
    pub members: usize,
    pub lambda: f64,
    pub subspace_fraction: f64,
    pub epsilon: f64,
    /// Run seed; each model derives its own seed from it and its name.
    pub seed: u64,
}

impl Default for ModelParams {
    fn default() -> Self {
        let e = EnsembleConfig::default();
        Self {
            tree: HoeffdingTreeConfig::default(),
            detectors: DetectorConfig::default(),
            members: e.n_members,
            lambda: e.lambda,
            subspace_fraction: e.subspace_fraction,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
        }
    }
}

impl ModelParams {
    /// Ensemble configuration for an ensemble model name.
    pub fn ensemble_config(&self, name: ModelName) -> Option<(EnsembleKind, EnsembleConfig)> {
        let (kind, detector_kind) = match name {
            ModelName::Lb => (EnsembleKind::Lb, DetectorKind::Adwin),
            ModelName::ArfAdwin => (EnsembleKind::Arf, DetectorKind::Adwin),
            ModelName::ArfDdm => (EnsembleKind::Arf, DetectorKind::Ddm),
            ModelName::SrpAdwin => (EnsembleKind::Srp, DetectorKind::Adwin),
            ModelName::SrpDdm => (EnsembleKind::Srp, DetectorKind::Ddm),
            ModelName::Ht | ModelName::Efdt | ModelName::Pwpae => return None,
        };
        Some((
            kind,
            EnsembleConfig {
                n_members: self.members,
                lambda: self.lambda,
                detector_kind,
                detectors: self.detectors,
                subspace_mode: None,
                subspace_fraction: self.subspace_fraction,
                tree: self.tree.clone(),
                seed: derive_seed(self.seed, name.as_str()),
            },
        ))
    }
}

pub fn build_model(
    name: ModelName,
    params: &ModelParams,
    feature_count: usize,
    class_count: usize,
) -> Result<Box<dyn AdaptiveLearner>> {
    Ok(match name {
        ModelName::Ht => Box::new(HoeffdingTree::ht(params.tree.clone(), feature_count, class_count)?),
        ModelName::Efdt => Box::new(HoeffdingTree::efdt(params.tree.clone(), feature_count, class_count)?),
        ModelName::Pwpae => Box::new(PwpaeModel::new(params, feature_count, class_count)?),
        ensemble => {
            let (kind, cfg) = params.ensemble_config(ensemble).expect("ensemble name");
            Box::new(build_ensemble(kind, cfg, feature_count, class_count)?)
        }
    })
}

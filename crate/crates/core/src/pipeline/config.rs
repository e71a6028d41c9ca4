use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::actor::{ActorConfig, ActorMode};
use crate::augment::PolicyTriple;
use crate::critic::{ArchPreset, TrainSettings};
use crate::data::SensitivitySpec;
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_STUDY_DELTA;

/// Where the final classifier's augmentation policy comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PolicySource {
    /// No augmentation at all.
    None,
    /// Uniform random triple per instance per epoch.
    Random,
    /// One fixed triple everywhere.
    Fixed(PolicyTriple),
    /// Learned actor with fixed p=0.5 and fixed magnitude.
    LbaugE,
    /// Learned actor with learnable probability and magnitude heads.
    LbaugH,
    /// Same machinery as H but the actor sees a constant all-ones input.
    LabelAgnostic,
}

impl PolicySource {
    pub fn needs_actor(&self) -> bool {
        matches!(self, PolicySource::LbaugE | PolicySource::LbaugH | PolicySource::LabelAgnostic)
    }

    pub fn actor_mode(&self) -> Option<ActorMode> {
        match self {
            PolicySource::LbaugE => Some(ActorMode::E),
            PolicySource::LbaugH | PolicySource::LabelAgnostic => Some(ActorMode::H),
            _ => None,
        }
    }
}

impl std::fmt::Display for PolicySource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolicySource::None => write!(f, "none"),
            PolicySource::Random => write!(f, "random"),
            PolicySource::Fixed(t) => write!(f, "fixed:{t}"),
            PolicySource::LbaugE => write!(f, "lbaug_E"),
            PolicySource::LbaugH => write!(f, "lbaug_H"),
            PolicySource::LabelAgnostic => write!(f, "label_agnostic"),
        }
    }
}

impl FromStr for PolicySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<PolicySource> {
        match s {
            "none" => Ok(PolicySource::None),
            "random" => Ok(PolicySource::Random),
            "lbaug_E" => Ok(PolicySource::LbaugE),
            "lbaug_H" => Ok(PolicySource::LbaugH),
            "label_agnostic" => Ok(PolicySource::LabelAgnostic),
            other => {
                if let Some(triple) = other.strip_prefix("fixed:") {
                    Ok(PolicySource::Fixed(triple.parse()?))
                } else {
                    Err(Error::invalid(format!("unknown policy source `{other}`")))
                }
            }
        }
    }
}

impl Serialize for PolicySource {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PolicySource {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Synthetic data parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub spec: SensitivitySpec,
    pub n_train: usize,
    pub n_valid: usize,
    pub image_size: usize,
}

impl GeneratorConfig {
    pub fn desk_default() -> GeneratorConfig {
        GeneratorConfig {
            spec: SensitivitySpec::default_planted(),
            n_train: 2000,
            n_valid: 500,
            image_size: 32,
        }
    }
}

fn default_k() -> usize {
    8
}
fn default_ratio() -> f64 {
    0.8
}
fn default_oracle_mc() -> usize {
    2
}
fn default_oracle_max_instances() -> usize {
    24
}
fn default_study_delta() -> f64 {
    DEFAULT_STUDY_DELTA
}
fn default_study_m_level() -> u8 {
    5
}
fn default_true() -> bool {
    true
}

/// Full experiment settings; echoed verbatim into every run report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    /// Synthetic generation parameters; ignored when `dataset_dir` is set.
    pub generator: Option<GeneratorConfig>,
    /// Directory holding `train/` and `valid/` dataset folders.
    pub dataset_dir: Option<PathBuf>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    pub seed: u64,
    pub critic_arch: ArchPreset,
    pub critic_train: TrainSettings,
    pub actor: ActorConfig,
    pub final_arch: ArchPreset,
    pub final_train: TrainSettings,
    pub policy_source: PolicySource,
    #[serde(default = "default_study_delta")]
    pub study_delta: f64,
    #[serde(default = "default_study_m_level")]
    pub study_m_level: u8,
    /// Seeds for the label study and sweeps; defaults to `[seed]`.
    #[serde(default)]
    pub study_seeds: Option<Vec<u64>>,
    #[serde(default = "default_oracle_mc")]
    pub oracle_mc: usize,
    #[serde(default = "default_oracle_max_instances")]
    pub oracle_max_instances: usize,
    /// Stochastic reading of the reward: sample the calling probability and
    /// score skipped applications as zero.
    #[serde(default)]
    pub reward_respects_p: bool,
    /// Whether fold sweeps also train and evaluate a final classifier per K.
    #[serde(default = "default_true")]
    pub sweep_train_final: bool,
    /// Output directory for reports, tables and checkpoints.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl RunConfig {
    /// Minutes-scale defaults on the planted dataset.
    pub fn desk_default(seed: u64) -> RunConfig {
        RunConfig {
            generator: Some(GeneratorConfig::desk_default()),
            dataset_dir: None,
            k: 8,
            ratio: 0.8,
            seed,
            critic_arch: ArchPreset::DeskConv,
            critic_train: TrainSettings::desk_default(),
            actor: ActorConfig::desk_default(ActorMode::H, seed),
            final_arch: ArchPreset::DeskConv,
            final_train: TrainSettings::desk_default(),
            policy_source: PolicySource::LbaugH,
            study_delta: DEFAULT_STUDY_DELTA,
            study_m_level: 5,
            study_seeds: None,
            oracle_mc: 2,
            oracle_max_instances: 24,
            reward_respects_p: false,
            sweep_train_final: true,
            out_dir: None,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::invalid("ratio must lie in (0,1)"));
        }
        if self.generator.is_none() && self.dataset_dir.is_none() {
            return Err(Error::invalid("config needs either a generator block or a dataset_dir"));
        }
        if let Some(dir) = &self.dataset_dir {
            if !dir.join("train").join("manifest.csv").exists() {
                return Err(Error::invalid(format!(
                    "dataset_dir {} has no train/manifest.csv",
                    dir.display()
                )));
            }
        }
        self.actor.validate()?;
        Ok(())
    }

    pub fn study_seed_list(&self) -> Vec<u64> {
        self.study_seeds.clone().unwrap_or_else(|| vec![self.seed])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_source_string_round_trip() {
        for s in ["none", "random", "lbaug_E", "lbaug_H", "label_agnostic", "fixed:Rotate:5:5"] {
            let src: PolicySource = s.parse().unwrap();
            assert_eq!(src.to_string(), s);
        }
        assert!("bogus".parse::<PolicySource>().is_err());
        assert!("fixed:Bogus:1:1".parse::<PolicySource>().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = RunConfig::desk_default(7);
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string_pretty(&back).unwrap(), json);
    }

    #[test]
    fn validation_catches_empty_sources() {
        let mut cfg = RunConfig::desk_default(1);
        cfg.generator = None;
        assert!(cfg.validate().is_err());
    }
}

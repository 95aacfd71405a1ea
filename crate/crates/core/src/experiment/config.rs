use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{SplitRatios, WindowParams, ARCHIVE_MANIFEST};
use crate::error::{Error, Result};
use crate::nn::{Architecture, Hyperparameters};
use crate::training::TrainConfig;

/// Where experiment samples come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Generate patients from `profile` in memory.
    #[default]
    Synthetic,
    /// Ingest patient directories under `corpus_dir`.
    Corpus,
    /// Read the sample archive written by `prepare`.
    Archive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub profile: Option<PathBuf>,
    pub corpus_dir: PathBuf,
    pub archive_dir: PathBuf,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: DataSource::Synthetic,
            profile: None,
            corpus_dir: PathBuf::from("out/corpus"),
            archive_dir: PathBuf::from("out/archive"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub hyper: Hyperparameters,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            architecture: Architecture::CnnBilstm,
            hyper: Hyperparameters::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersonalizationConfig {
    /// Fine-tuning epochs; defaults to `train.epochs`. Zero skips fine-tuning.
    pub finetune_epochs: Option<usize>,
}

/// Everything needed to re-run an experiment. Relative paths are resolved
/// against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub window: WindowParams,
    pub split: SplitRatios,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub personalization: PersonalizationConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            output_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            window: WindowParams::default(),
            split: SplitRatios::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            personalization: PersonalizationConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a config file, then checks that the configured
    /// data source exists.
    pub fn load(path: &Path) -> Result<Self> {
        let cfg = Self::load_unchecked(path)?;
        cfg.check_source()?;
        Ok(cfg)
    }

    /// Parses and validates without touching the data source; used by the
    /// commands that create it.
    pub fn load_unchecked(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_prefix(&e))))?;
        cfg.base_dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.sync_seed();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.sync_seed();
    }

    fn sync_seed(&mut self) {
        self.train.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        self.split.validate()?;
        self.train.validate()?;
        if self.data.source == DataSource::Synthetic && self.data.profile.is_none() {
            return Err(Error::Config(
                "data.profile is required when data.source = \"synthetic\"".into(),
            ));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn profile_path(&self) -> Result<PathBuf> {
        self.data
            .profile
            .as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| Error::Config("data.profile is not set".into()))
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.resolve(&self.data.corpus_dir)
    }

    pub fn archive_dir(&self) -> PathBuf {
        self.resolve(&self.data.archive_dir)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Fails with a config error naming the missing input of the configured source.
    pub fn check_source(&self) -> Result<()> {
        let (what, path, ok) = match self.data.source {
            DataSource::Synthetic => {
                let p = self.profile_path()?;
                ("data.profile", p.clone(), p.is_file())
            }
            DataSource::Corpus => {
                let p = self.corpus_dir();
                ("data.corpus_dir", p.clone(), p.is_dir())
            }
            DataSource::Archive => {
                let p = self.archive_dir();
                ("data.archive_dir", p.clone(), p.join(ARCHIVE_MANIFEST).is_file())
            }
        };
        if !ok {
            return Err(Error::Config(format!("{what}: {} does not exist", path.display())));
        }
        Ok(())
    }

    /// SHA-256 of the config as serialized, excluding the output directory
    /// so identical runs into different directories share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let text = toml::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

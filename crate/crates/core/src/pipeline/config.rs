use crate::autoencoder::{AutoencoderConfig, TrainConfig};
use crate::contrastive::HeadConfig;
use crate::data::SyntheticSpec;
use crate::diffusion::DiffusionConfig;
use crate::error::{Error, Result};
use crate::nn::AdamW;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Environment variable that overrides the output root.
pub const OUT_ENV: &str = "IMVCDC_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Generated data. Its `k` and `seed` are taken from the experiment.
    Synthetic(SyntheticSpec),
    /// A manifest file listing view files and labels.
    Manifest(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationMode {
    Diffusion,
    ZeroPadding,
    None,
}

/// Everything a run needs. Every field has a default, so an empty file is
/// a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub eta: f64,
    pub k: usize,
    pub data: DataSource,
    pub imputation: ImputationMode,
    pub autoencoder: AutoencoderConfig,
    pub diffusion: DiffusionConfig,
    pub heads: HeadConfig,
    pub stage1: TrainConfig,
    pub stage2: TrainConfig,
    pub stage3: TrainConfig,
    pub kmeans_iters: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            eta: 0.5,
            k: 4,
            data: DataSource::Synthetic(SyntheticSpec::default()),
            imputation: ImputationMode::Diffusion,
            autoencoder: AutoencoderConfig::default(),
            diffusion: DiffusionConfig::default(),
            heads: HeadConfig::default(),
            stage1: TrainConfig {
                epochs: 60,
                batch_size: 64,
                optimizer: AdamW::with_lr(1e-3),
            },
            stage2: TrainConfig {
                epochs: 60,
                batch_size: 64,
                optimizer: AdamW::with_lr(2e-3),
            },
            stage3: TrainConfig {
                epochs: 40,
                batch_size: 128,
                optimizer: AdamW::with_lr(1e-3),
            },
            kmeans_iters: 100,
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::format(origin, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text, path)?;
        if let DataSource::Manifest(m) = &mut cfg.data {
            if m.is_relative() {
                if let Some(dir) = path.parent() {
                    *m = dir.join(&*m);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("config serialization: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::invalid(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        if self.k < 2 {
            return Err(Error::invalid(format!("k must be at least 2, got {}", self.k)));
        }
        if self.imputation == ImputationMode::None && self.eta != 0.0 {
            return Err(Error::invalid("imputation = \"none\" is only valid with eta = 0"));
        }
        if let DataSource::Synthetic(spec) = &self.data {
            self.synthetic_spec(spec).validate()?;
        }
        self.diffusion.validate()?;
        self.heads.validate()?;
        for s in [&self.stage1, &self.stage2, &self.stage3] {
            s.validate()?;
        }
        if self.kmeans_iters == 0 {
            return Err(Error::invalid("kmeans_iters must be positive"));
        }
        Ok(())
    }

    /// The generator spec actually used: `k` and the seed come from the
    /// experiment. The data seed does not depend on `eta`, so a sweep sees
    /// the same samples at every missing rate.
    pub fn synthetic_spec(&self, spec: &SyntheticSpec) -> SyntheticSpec {
        SyntheticSpec {
            k: self.k,
            seed: crate::rng::derive_seed(self.seed, &["data".into()]),
            ..spec.clone()
        }
    }

    /// Sub-seed for one stage, derived from `(seed, stage, eta)`.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        crate::rng::derive_seed(self.seed, &[stage.into(), self.eta.into()])
    }

    /// Canonical JSON of the config; stable across runs and platforms.
    pub fn snapshot(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.snapshot().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `--out` beats `IMVCDC_OUT`, which beats the config's `out_dir`.
pub fn resolve_out_dir(cli: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.out_dir.clone(),
    }
}

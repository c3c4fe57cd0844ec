use super::config::ExperimentConfig;
use crate::metrics::Scores;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

/// Which stages produced the predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Autoencoders only, k-means on zero-padded latents.
    Rec,
    /// Autoencoders and diffusion completion, k-means on completed latents.
    RecDm,
    /// Autoencoders and clustering heads on zero-padded latents.
    RecClu,
    /// All three stages.
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Rec, Variant::RecDm, Variant::RecClu, Variant::Full];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Rec => "L_rec",
            Variant::RecDm => "L_rec+L_dm",
            Variant::RecClu => "L_rec+L_clu",
            Variant::Full => "L_rec+L_dm+L_clu",
        }
    }

    pub fn uses_diffusion(self) -> bool {
        matches!(self, Variant::RecDm | Variant::Full)
    }

    pub fn uses_heads(self) -> bool {
        matches!(self, Variant::RecClu | Variant::Full)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageCurves {
    pub stage1: Vec<f64>,
    pub stage2: Vec<f64>,
    pub stage3: Vec<f64>,
}

/// Final per-stage losses and their sum. The stages are optimized one
/// after another; the sum is bookkeeping only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageLosses {
    pub rec: f64,
    pub dm: Option<f64>,
    pub clu: Option<f64>,
    pub objective: f64,
}

impl StageLosses {
    pub fn from_curves(c: &StageCurves) -> Self {
        let rec = c.stage1.last().copied().unwrap_or(0.0);
        let dm = c.stage2.last().copied();
        let clu = c.stage3.last().copied();
        StageLosses {
            rec,
            dm,
            clu,
            objective: rec + dm.unwrap_or(0.0) + clu.unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankSummary {
    pub observed: usize,
    pub imputed: usize,
    pub zero_padded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: Variant,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub curves: StageCurves,
    pub losses: StageLosses,
    /// Present exactly when the dataset has labels.
    pub metrics: Option<Scores>,
    pub bank: BankSummary,
    /// Parameter fingerprints, keyed `<model>@<after stage>`.
    pub fingerprints: BTreeMap<String, String>,
    pub checkpoints: BTreeMap<String, PathBuf>,
    pub seconds: BTreeMap<String, f64>,
}

impl RunRecord {
    /// The parts of the record that must be identical across reruns.
    pub fn reproducible_part(&self) -> (Variant, &str, &StageCurves, &StageLosses, Option<&Scores>, &BankSummary) {
        (
            self.variant,
            &self.config_hash,
            &self.curves,
            &self.losses,
            self.metrics.as_ref(),
            &self.bank,
        )
    }
}

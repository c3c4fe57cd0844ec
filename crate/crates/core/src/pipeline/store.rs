use super::config::ImputationMode;
use super::record::{RunRecord, Variant};
use super::run::{kmeans_predictions, load_dataset, Run};
use crate::autoencoder::{Autoencoders, LatentBank};
use crate::contrastive::ClusterHeads;
use crate::data::{load_matrix, save_matrix, write_labels, MaskMatrix};
use crate::diffusion::DiffusionModel;
use crate::error::{Error, Result, StageExt};
use crate::metrics::{evaluate, Scores};
use crate::nn::Checkpoint;
use std::fmt::Write as _;
use std::path::Path;

pub const RECORD_FILE: &str = "run.json";
pub const MASK_FILE: &str = "mask.mat";
pub const LABELS_FILE: &str = "labels.txt";
const AE_FILE: &str = "autoencoders.ckpt";
const DM_FILE: &str = "diffusion.ckpt";
const HEADS_FILE: &str = "heads.ckpt";

pub fn write_curve(path: &Path, curve: &[f64]) -> Result<()> {
    let mut out = String::from("epoch,loss\n");
    for (e, l) in curve.iter().enumerate() {
        writeln!(out, "{},{l}", e + 1).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

impl Run {
    /// Writes checkpoints, the mask, predictions, assignment matrices, loss
    /// curves, the config and the record into `dir`. Checkpoint paths in
    /// the record are relative to `dir`.
    pub fn save(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut ckpts = std::collections::BTreeMap::new();
        self.autoencoders.checkpoint().save(&dir.join(AE_FILE))?;
        ckpts.insert("autoencoders".to_string(), AE_FILE.into());
        if let Some(dm) = &self.diffusion {
            dm.checkpoint().save(&dir.join(DM_FILE))?;
            ckpts.insert("diffusion".to_string(), DM_FILE.into());
        }
        if let Some(h) = &self.heads {
            h.checkpoint().save(&dir.join(HEADS_FILE))?;
            ckpts.insert("heads".to_string(), HEADS_FILE.into());
            for (v, y) in h.assignments(&self.bank)?.iter().enumerate() {
                save_matrix(&dir.join(format!("assignments_view{}.mat", v + 1)), y)?;
            }
        }
        self.record.checkpoints = ckpts;
        save_matrix(&dir.join(MASK_FILE), &self.mask.to_tensor())?;
        write_labels(&dir.join(LABELS_FILE), &self.predictions)?;
        for (name, curve) in [
            ("stage1", &self.record.curves.stage1),
            ("stage2", &self.record.curves.stage2),
            ("stage3", &self.record.curves.stage3),
        ] {
            if !curve.is_empty() {
                write_curve(&dir.join(format!("curve_{name}.csv")), curve)?;
            }
        }
        let toml = self.record.config.to_toml()?;
        std::fs::write(dir.join("config.toml"), toml).map_err(|e| Error::io(dir.join("config.toml"), e))?;
        write_json(&dir.join(RECORD_FILE), &self.record)
    }
}

pub fn load_record(dir: &Path) -> Result<RunRecord> {
    let path = dir.join(RECORD_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
}

fn checkpoint(dir: &Path, record: &RunRecord, name: &str) -> Result<Checkpoint> {
    let file = record
        .checkpoints
        .get(name)
        .ok_or_else(|| Error::invalid(format!("run in {} has no {name} checkpoint", dir.display())))?;
    Checkpoint::load(&dir.join(file))
}

/// Rebuilds a saved run from its checkpoints and recomputes its
/// predictions and metrics. Nothing is retrained.
pub fn load_run(dir: &Path) -> Result<Run> {
    let mut record = load_record(dir)?;
    let cfg = record.config.clone();
    let dataset = load_dataset(&cfg).stage("data")?;
    let mask = MaskMatrix::from_tensor(&load_matrix(&dir.join(MASK_FILE))?).stage("data")?;
    if mask.n() != dataset.n() || mask.num_views() != dataset.num_views() {
        return Err(Error::shape("load_run", "saved mask does not match the dataset").in_stage("data"));
    }
    let mut autoencoders =
        Autoencoders::new(&dataset.view_dims(), &cfg.autoencoder, cfg.stage_seed("init1")).stage("stage1")?;
    autoencoders.restore(&checkpoint(dir, &record, "autoencoders")?).stage("stage1")?;

    let variant = record.variant;
    let mut diffusion = None;
    let bank = if variant.uses_diffusion() {
        let observed = LatentBank::encode(&autoencoders, &dataset, &mask).stage("encode")?;
        let mut model = DiffusionModel::new(dataset.num_views(), cfg.autoencoder.latent_dim, &cfg.diffusion, 0)
            .stage("stage2")?;
        model.restore(&checkpoint(dir, &record, "diffusion")?).stage("stage2")?;
        let bank = model.impute(&observed, cfg.stage_seed("impute")).stage("impute")?;
        diffusion = Some(model);
        bank
    } else if variant == Variant::RecClu && cfg.imputation == ImputationMode::None {
        LatentBank::encode(&autoencoders, &dataset, &mask).stage("encode")?
    } else {
        LatentBank::zero_padded(&autoencoders, &dataset, &mask).stage("encode")?
    };

    let mut heads = None;
    let predictions = if variant.uses_heads() {
        let mut h = ClusterHeads::new(dataset.num_views(), bank.latent_dim(), cfg.k, &cfg.heads, 0).stage("stage3")?;
        h.restore(&checkpoint(dir, &record, "heads")?).stage("stage3")?;
        let p = h.predict(&bank).stage("predict")?;
        heads = Some(h);
        p
    } else {
        kmeans_predictions(&cfg, &bank)?
    };
    record.metrics = match dataset.labels() {
        Some(l) => Some(evaluate(l, &predictions).stage("evaluate")?),
        None => None,
    };
    Ok(Run {
        record,
        dataset,
        mask,
        autoencoders,
        diffusion,
        heads,
        bank,
        predictions,
    })
}

/// Stored versus recomputed metrics for a saved run.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub stored: Option<Scores>,
    pub recomputed: Option<Scores>,
    pub predictions: Vec<usize>,
}

impl Evaluation {
    /// Bit-for-bit agreement between the saved and recomputed metrics.
    pub fn reproduced(&self) -> bool {
        match (&self.stored, &self.recomputed) {
            (Some(a), Some(b)) => {
                a.acc.to_bits() == b.acc.to_bits() && a.nmi.to_bits() == b.nmi.to_bits() && a.ari.to_bits() == b.ari.to_bits()
            }
            (None, None) => true,
            _ => false,
        }
    }
}

pub fn evaluate_saved(dir: &Path) -> Result<Evaluation> {
    let stored = load_record(dir)?.metrics;
    let run = load_run(dir)?;
    Ok(Evaluation {
        stored,
        recomputed: run.record.metrics,
        predictions: run.predictions,
    })
}

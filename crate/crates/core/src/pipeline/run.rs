use super::config::{DataSource, ExperimentConfig, ImputationMode};
use super::record::{BankSummary, RunRecord, StageCurves, StageLosses, Variant};
use crate::autoencoder::{Autoencoders, LatentBank, LatentStatus};
use crate::contrastive::ClusterHeads;
use crate::data::{generate_mask, generate_synthetic, load_manifest, MaskMatrix, MultiViewDataset};
use crate::diffusion::DiffusionModel;
use crate::error::{Result, StageExt};
use crate::metrics::{evaluate, kmeans};
use crate::par;
use std::collections::BTreeMap;
use std::time::Instant;

/// A finished run: the record plus every model and intermediate needed to
/// save or inspect it.
#[derive(Debug, Clone)]
pub struct Run {
    pub record: RunRecord,
    pub dataset: MultiViewDataset,
    pub mask: MaskMatrix,
    pub autoencoders: Autoencoders,
    pub diffusion: Option<DiffusionModel>,
    pub heads: Option<ClusterHeads>,
    pub bank: LatentBank,
    pub predictions: Vec<usize>,
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<MultiViewDataset> {
    match &cfg.data {
        DataSource::Synthetic(spec) => generate_synthetic(&cfg.synthetic_spec(spec)),
        DataSource::Manifest(path) => Ok(load_manifest(path)?.0),
    }
}

pub fn build_mask(cfg: &ExperimentConfig, n: usize, views: usize) -> Result<MaskMatrix> {
    generate_mask(n, views, cfg.eta, cfg.stage_seed("mask"))
}

/// Stage 1 plus the bookkeeping shared by every variant.
struct Prepared {
    cfg: ExperimentConfig,
    dataset: MultiViewDataset,
    mask: MaskMatrix,
    autoencoders: Autoencoders,
    curves: StageCurves,
    fingerprints: BTreeMap<String, String>,
    seconds: BTreeMap<String, f64>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate().stage("config")?;
    let dataset = load_dataset(cfg).stage("data")?;
    let mask = build_mask(cfg, dataset.n(), dataset.num_views()).stage("data")?;
    let start = Instant::now();
    let mut autoencoders =
        Autoencoders::new(&dataset.view_dims(), &cfg.autoencoder, cfg.stage_seed("init1")).stage("stage1")?;
    let stage1 = autoencoders
        .train(&dataset, &mask, &cfg.stage1, cfg.stage_seed("stage1"))
        .stage("stage1")?;
    let mut fingerprints = BTreeMap::new();
    fingerprints.insert("autoencoders@stage1".to_string(), autoencoders.store.fingerprint());
    let mut seconds = BTreeMap::new();
    seconds.insert("stage1".to_string(), start.elapsed().as_secs_f64());
    log::info!("stage 1 done: loss {:.5}", stage1.last().copied().unwrap_or(f64::NAN));
    Ok(Prepared {
        cfg: cfg.clone(),
        dataset,
        mask,
        autoencoders,
        curves: StageCurves {
            stage1,
            ..StageCurves::default()
        },
        fingerprints,
        seconds,
    })
}

struct Completed {
    model: DiffusionModel,
    bank: LatentBank,
    curve: Vec<f64>,
    seconds: f64,
}

fn complete(p: &Prepared, observed: &LatentBank) -> Result<Completed> {
    let cfg = &p.cfg;
    let start = Instant::now();
    let mut model = DiffusionModel::new(
        observed.num_views(),
        observed.latent_dim(),
        &cfg.diffusion,
        cfg.stage_seed("init2"),
    )
    .stage("stage2")?;
    let curve = model.train(observed, &cfg.stage2, cfg.stage_seed("stage2")).stage("stage2")?;
    let bank = model.impute(observed, cfg.stage_seed("impute")).stage("impute")?;
    log::info!(
        "stage 2 done: loss {:.5}, {} latents imputed",
        curve.last().copied().unwrap_or(f64::NAN),
        bank.count(LatentStatus::Imputed)
    );
    Ok(Completed {
        model,
        bank,
        curve,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn train_heads(cfg: &ExperimentConfig, bank: &LatentBank) -> Result<(ClusterHeads, Vec<f64>, Vec<usize>)> {
    let mut heads = ClusterHeads::new(bank.num_views(), bank.latent_dim(), cfg.k, &cfg.heads, cfg.stage_seed("init3"))
        .stage("stage3")?;
    let curve = heads.train(bank, &cfg.stage3, cfg.stage_seed("stage3")).stage("stage3")?;
    let predictions = heads.predict(bank).stage("predict")?;
    log::info!("stage 3 done: loss {:.5}", curve.last().copied().unwrap_or(f64::NAN));
    Ok((heads, curve, predictions))
}

pub(crate) fn kmeans_predictions(cfg: &ExperimentConfig, bank: &LatentBank) -> Result<Vec<usize>> {
    Ok(kmeans(&bank.concatenated(), cfg.k, cfg.stage_seed("kmeans"), cfg.kmeans_iters)
        .stage("kmeans")?
        .labels)
}

fn summarize(bank: &LatentBank) -> BankSummary {
    BankSummary {
        observed: bank.count(LatentStatus::Observed),
        imputed: bank.count(LatentStatus::Imputed),
        zero_padded: bank.count(LatentStatus::ZeroPadded),
    }
}

struct Parts {
    variant: Variant,
    diffusion: Option<(DiffusionModel, Vec<f64>, f64)>,
    heads: Option<(ClusterHeads, Vec<f64>, f64)>,
    bank: LatentBank,
    predictions: Vec<usize>,
}

fn finish(p: &Prepared, parts: Parts) -> Result<Run> {
    let mut curves = p.curves.clone();
    let mut fingerprints = p.fingerprints.clone();
    let mut seconds = p.seconds.clone();
    let ae_print = p.autoencoders.store.fingerprint();
    if let Some((model, curve, secs)) = &parts.diffusion {
        curves.stage2 = curve.clone();
        seconds.insert("stage2".into(), *secs);
        fingerprints.insert("autoencoders@stage2".into(), ae_print.clone());
        fingerprints.insert("diffusion@stage2".into(), model.checkpoint().fingerprint());
    }
    if let Some((_, curve, secs)) = &parts.heads {
        curves.stage3 = curve.clone();
        seconds.insert("stage3".into(), *secs);
        fingerprints.insert("autoencoders@stage3".into(), ae_print);
        if let Some((model, _, _)) = &parts.diffusion {
            fingerprints.insert("diffusion@stage3".into(), model.checkpoint().fingerprint());
        }
    }
    let metrics = match p.dataset.labels() {
        Some(labels) => Some(evaluate(labels, &parts.predictions).stage("evaluate")?),
        None => None,
    };
    let record = RunRecord {
        variant: parts.variant,
        config: p.cfg.clone(),
        config_hash: p.cfg.hash(),
        losses: StageLosses::from_curves(&curves),
        curves,
        metrics,
        bank: summarize(&parts.bank),
        fingerprints,
        checkpoints: BTreeMap::new(),
        seconds,
    };
    Ok(Run {
        record,
        dataset: p.dataset.clone(),
        mask: p.mask.clone(),
        autoencoders: p.autoencoders.clone(),
        diffusion: parts.diffusion.map(|d| d.0),
        heads: parts.heads.map(|h| h.0),
        bank: parts.bank,
        predictions: parts.predictions,
    })
}

/// Runs the three stages in order and scores the fused predictions.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Run> {
    let p = prepare(cfg)?;
    let (variant, diffusion, bank) = match cfg.imputation {
        ImputationMode::Diffusion => {
            let observed = LatentBank::encode(&p.autoencoders, &p.dataset, &p.mask).stage("encode")?;
            let c = complete(&p, &observed)?;
            (Variant::Full, Some((c.model, c.curve, c.seconds)), c.bank)
        }
        ImputationMode::ZeroPadding => (
            Variant::RecClu,
            None,
            LatentBank::zero_padded(&p.autoencoders, &p.dataset, &p.mask).stage("encode")?,
        ),
        ImputationMode::None => (
            Variant::RecClu,
            None,
            LatentBank::encode(&p.autoencoders, &p.dataset, &p.mask).stage("encode")?,
        ),
    };
    let start = Instant::now();
    let (heads, curve, predictions) = train_heads(cfg, &bank)?;
    let secs = start.elapsed().as_secs_f64();
    finish(
        &p,
        Parts {
            variant,
            diffusion,
            heads: Some((heads, curve, secs)),
            bank,
            predictions,
        },
    )
}

/// One run per missing rate, each with its own `eta`-derived sub-seeds.
/// A failed run does not stop the others.
pub fn sweep_missing_rate(cfg: &ExperimentConfig, etas: &[f64]) -> Vec<(f64, Result<Run>)> {
    let runs = par::map_slice(etas, |&eta| {
        let cfg = ExperimentConfig { eta, ..cfg.clone() };
        run_experiment(&cfg)
    });
    etas.iter().copied().zip(runs).collect()
}

/// The four objective variants on one shared stage 1 (and, for the two
/// variants that use it, one shared stage 2). Returned in
/// [`Variant::ALL`] order.
pub fn ablate(cfg: &ExperimentConfig) -> Result<Vec<Run>> {
    let p = prepare(cfg)?;
    let observed = LatentBank::encode(&p.autoencoders, &p.dataset, &p.mask).stage("encode")?;
    let padded = LatentBank::zero_padded(&p.autoencoders, &p.dataset, &p.mask).stage("encode")?;
    let completed = complete(&p, &observed)?;

    let rec = finish(
        &p,
        Parts {
            variant: Variant::Rec,
            diffusion: None,
            heads: None,
            predictions: kmeans_predictions(cfg, &padded)?,
            bank: padded.clone(),
        },
    )?;
    let rec_dm = finish(
        &p,
        Parts {
            variant: Variant::RecDm,
            diffusion: Some((completed.model.clone(), completed.curve.clone(), completed.seconds)),
            heads: None,
            predictions: kmeans_predictions(cfg, &completed.bank)?,
            bank: completed.bank.clone(),
        },
    )?;
    let start = Instant::now();
    let (heads_c, curve_c, pred_c) = train_heads(cfg, &padded)?;
    let secs_c = start.elapsed().as_secs_f64();
    let rec_clu = finish(
        &p,
        Parts {
            variant: Variant::RecClu,
            diffusion: None,
            heads: Some((heads_c, curve_c, secs_c)),
            predictions: pred_c,
            bank: padded,
        },
    )?;
    let start = Instant::now();
    let (heads_d, curve_d, pred_d) = train_heads(cfg, &completed.bank)?;
    let secs_d = start.elapsed().as_secs_f64();
    let full = finish(
        &p,
        Parts {
            variant: Variant::Full,
            diffusion: Some((completed.model, completed.curve, completed.seconds)),
            heads: Some((heads_d, curve_d, secs_d)),
            predictions: pred_d,
            bank: completed.bank,
        },
    )?;
    Ok(vec![rec, rec_dm, rec_clu, full])
}

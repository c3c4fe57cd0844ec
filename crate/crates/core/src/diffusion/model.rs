use super::{diffusion_loss_graph, draw_noise, sample, Denoiser, DenoiserConfig, NoiseSchedule, ScheduleKind};
use crate::autoencoder::{LatentBank, LatentStatus, TrainConfig, DIVERGENCE_LIMIT};
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, Graph, Tensor};
use crate::{par, rng};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

const IMPUTE_BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionConfig {
    pub steps: usize,
    pub schedule: ScheduleKind,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Standardize latents per dimension before diffusing them.
    pub standardize: bool,
    pub net: DenoiserConfig,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            steps: 200,
            schedule: ScheduleKind::Linear,
            beta_min: 1e-4,
            beta_max: 0.02,
            standardize: true,
            net: DenoiserConfig::default(),
        }
    }
}

impl DiffusionConfig {
    pub fn schedule(&self) -> Result<NoiseSchedule> {
        match self.schedule {
            ScheduleKind::Linear => NoiseSchedule::linear(self.steps, self.beta_min, self.beta_max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule()?;
        self.net.validate()
    }
}

/// Per-view affine map to zero mean, unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentScaler {
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
}

impl LatentScaler {
    pub fn identity(views: usize, d: usize) -> Self {
        LatentScaler {
            mean: vec![vec![0.0; d]; views],
            std: vec![vec![1.0; d]; views],
        }
    }

    /// Statistics over the observed entries of each view.
    pub fn fit(bank: &LatentBank) -> Self {
        let d = bank.latent_dim();
        let mut out = Self::identity(bank.num_views(), d);
        for v in 0..bank.num_views() {
            let rows: Vec<usize> = (0..bank.n()).filter(|&i| bank.status(i, v) == LatentStatus::Observed).collect();
            if rows.is_empty() {
                continue;
            }
            let z = bank.view(v);
            for j in 0..d {
                let m = rows.iter().map(|&i| z.get(i, j)).sum::<f64>() / rows.len() as f64;
                let var = rows.iter().map(|&i| (z.get(i, j) - m).powi(2)).sum::<f64>() / rows.len() as f64;
                out.mean[v][j] = m;
                out.std[v][j] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
            }
        }
        out
    }

    pub fn forward(&self, v: usize, z: &Tensor) -> Tensor {
        let mut out = z.clone();
        for i in 0..out.rows() {
            for ((x, m), s) in out.row_mut(i).iter_mut().zip(&self.mean[v]).zip(&self.std[v]) {
                *x = (*x - m) / s;
            }
        }
        out
    }

    pub fn inverse(&self, v: usize, z: &Tensor) -> Tensor {
        let mut out = z.clone();
        for i in 0..out.rows() {
            for ((x, m), s) in out.row_mut(i).iter_mut().zip(&self.mean[v]).zip(&self.std[v]) {
                *x = *x * s + m;
            }
        }
        out
    }
}

/// One denoiser per ordered view pair `(condition, target)`.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    pub cfg: DiffusionConfig,
    pub schedule: NoiseSchedule,
    pub scaler: LatentScaler,
    nets: Vec<((usize, usize), Denoiser)>,
    latent_dim: usize,
    num_views: usize,
    trained: bool,
}

impl DiffusionModel {
    pub fn new(num_views: usize, latent_dim: usize, cfg: &DiffusionConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if num_views < 2 {
            return Err(Error::invalid("diffusion completion needs at least two views"));
        }
        let mut nets = Vec::new();
        for c in 0..num_views {
            for t in 0..num_views {
                if c != t {
                    let name = format!("net{c}to{t}");
                    nets.push(((c, t), Denoiser::new(&name, latent_dim, &cfg.net, seed)?));
                }
            }
        }
        Ok(DiffusionModel {
            cfg: cfg.clone(),
            schedule: cfg.schedule()?,
            scaler: LatentScaler::identity(num_views, latent_dim),
            nets,
            latent_dim,
            num_views,
            trained: false,
        })
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    /// Net that generates view `target` from view `cond`.
    pub fn net(&self, cond: usize, target: usize) -> Result<&Denoiser> {
        self.nets
            .iter()
            .find(|(k, _)| *k == (cond, target))
            .map(|(_, n)| n)
            .ok_or_else(|| Error::invalid(format!("no denoiser for {cond} -> {target}")))
    }

    pub fn directions(&self) -> Vec<(usize, usize)> {
        self.nets.iter().map(|(k, _)| *k).collect()
    }

    /// Trains every direction on the rows where both of its views are
    /// observed. Returns the per-epoch loss averaged over directions.
    pub fn train(&mut self, bank: &LatentBank, cfg: &TrainConfig, seed: u64) -> Result<Vec<f64>> {
        cfg.validate()?;
        self.check_bank(bank)?;
        self.scaler = if self.cfg.standardize {
            LatentScaler::fit(bank)
        } else {
            LatentScaler::identity(self.num_views, self.latent_dim)
        };
        let mut jobs = Vec::new();
        for (p, ((c, t), _)) in self.nets.iter().enumerate() {
            let rows: Vec<usize> = (0..bank.n())
                .filter(|&i| bank.status(i, *c) == LatentStatus::Observed && bank.status(i, *t) == LatentStatus::Observed)
                .collect();
            if rows.is_empty() {
                return Err(Error::Precondition(format!(
                    "no rows observe both view {c} and view {t}; the denoiser needs complete rows"
                )));
            }
            jobs.push((p, rows));
        }
        let mut curve = vec![0.0; cfg.epochs];
        let steps = self.schedule.steps();
        let num_nets = self.nets.len();
        for (p, rows) in jobs {
            let ((c, t), net) = &mut self.nets[p];
            let target = self.scaler.forward(*t, &bank.view(*t).gather_rows(&rows));
            let cond = self.scaler.forward(*c, &bank.view(*c).gather_rows(&rows));
            let mut order: Vec<usize> = (0..rows.len()).collect();
            for (epoch, slot) in curve.iter_mut().enumerate() {
                let mut r = rng::stream(seed, &["stage2".into(), p.into(), epoch.into()]);
                order.shuffle(&mut r);
                let mut total = 0.0;
                for batch in order.chunks(cfg.batch_size) {
                    let zs = target.gather_rows(batch);
                    let zc = cond.gather_rows(batch);
                    let draws = draw_noise(&mut r, batch.len(), self.latent_dim, steps);
                    let mut g = Graph::new();
                    let loss = diffusion_loss_graph(net, &mut g, &net.store, &zs, &zc, &draws, &self.schedule)?;
                    let value = g.value(loss).item();
                    if value > DIVERGENCE_LIMIT {
                        return Err(Error::Diverged {
                            epoch,
                            loss: value,
                            limit: DIVERGENCE_LIMIT,
                        });
                    }
                    let grads = g.backward(loss)?.params();
                    cfg.optimizer.step(&mut net.store, &grads)?;
                    total += value * batch.len() as f64;
                }
                *slot += total / rows.len() as f64 / num_nets as f64;
            }
        }
        for (e, l) in curve.iter().enumerate() {
            log::debug!("stage2 epoch {e}: {l:.6}");
        }
        self.trained = true;
        Ok(curve)
    }

    fn check_bank(&self, bank: &LatentBank) -> Result<()> {
        if bank.num_views() != self.num_views || bank.latent_dim() != self.latent_dim {
            return Err(Error::shape(
                "diffusion",
                format!(
                    "bank has {} views of width {}, model expects {} of width {}",
                    bank.num_views(),
                    bank.latent_dim(),
                    self.num_views,
                    self.latent_dim
                ),
            ));
        }
        Ok(())
    }

    /// Replaces every `Absent` latent by ancestral sampling conditioned on
    /// the lowest-indexed observed view of the same row. Each (row, view)
    /// owns the stream `(seed, "impute", row, view)`.
    pub fn impute(&self, bank: &LatentBank, seed: u64) -> Result<LatentBank> {
        self.check_bank(bank)?;
        let mut jobs: Vec<((usize, usize), Vec<usize>)> = self.directions().into_iter().map(|k| (k, Vec::new())).collect();
        for i in 0..bank.n() {
            let missing: Vec<usize> = (0..self.num_views).filter(|&v| bank.status(i, v) == LatentStatus::Absent).collect();
            if missing.is_empty() {
                continue;
            }
            let cond = (0..self.num_views)
                .find(|&v| bank.status(i, v) == LatentStatus::Observed)
                .ok_or_else(|| Error::Precondition(format!("row {i} has no observed view to condition on")))?;
            for v in missing {
                jobs.iter_mut().find(|(k, _)| *k == (cond, v)).expect("all directions exist").1.push(i);
            }
        }
        let mut out = bank.clone();
        if jobs.iter().all(|(_, rows)| rows.is_empty()) {
            return Ok(out);
        }
        if !self.trained {
            return Err(Error::Precondition("denoisers are untrained".into()));
        }
        for ((c, t), rows) in jobs {
            let net = self.net(c, t)?;
            let blocks: Vec<&[usize]> = rows.chunks(IMPUTE_BLOCK).collect();
            let results = par::map_slice(&blocks, |block| -> Result<Tensor> {
                let cond = self.scaler.forward(c, &bank.view(c).gather_rows(block));
                let mut rngs: Vec<_> = block
                    .iter()
                    .map(|&i| rng::stream(seed, &["impute".into(), i.into(), t.into()]))
                    .collect();
                let z = sample(net, &cond, &self.schedule, &mut rngs)?;
                Ok(self.scaler.inverse(t, &z))
            });
            for (block, z) in blocks.iter().zip(results) {
                let z = z?;
                for (r, &i) in block.iter().enumerate() {
                    out.fill(i, t, z.row(r))?;
                }
            }
        }
        Ok(out)
    }

    /// Parameters of every direction plus the schedule and scaler.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint {
            step: self.nets.iter().map(|(_, n)| n.store.step()).min().unwrap_or(0),
            entries: Vec::new(),
        };
        for (_, net) in &self.nets {
            ck.entries.extend(Checkpoint::from_store(&net.store).entries);
        }
        ck.push("schedule.betas", self.schedule.to_tensor());
        for v in 0..self.num_views {
            ck.push(format!("scaler.mean.{v}"), Tensor::matrix(1, self.latent_dim, self.scaler.mean[v].clone()));
            ck.push(format!("scaler.std.{v}"), Tensor::matrix(1, self.latent_dim, self.scaler.std[v].clone()));
        }
        ck
    }

    pub fn restore(&mut self, ck: &Checkpoint) -> Result<()> {
        for (_, net) in &mut self.nets {
            ck.restore_into(&mut net.store)?;
        }
        self.schedule = NoiseSchedule::from_tensor(ck.require("schedule.betas")?)?;
        for v in 0..self.num_views {
            for (name, dst) in [("mean", &mut self.scaler.mean[v]), ("std", &mut self.scaler.std[v])] {
                let t = ck.require(&format!("scaler.{name}.{v}"))?;
                if t.len() != self.latent_dim {
                    return Err(Error::shape("DiffusionModel::restore", format!("scaler.{name}.{v}: {:?}", t.shape())));
                }
                dst.copy_from_slice(t.data());
            }
        }
        self.trained = ck.step > 0;
        Ok(())
    }
}

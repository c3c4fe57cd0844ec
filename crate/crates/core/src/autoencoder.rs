//! Per-view autoencoders, the latent bank, and stage-1 training.

use crate::data::{apply_zero_padding, MaskMatrix, MultiViewDataset};
use crate::error::{Error, Result};
use crate::nn::{
    Activation, AdamW, Checkpoint, Graph, Mlp, MlpSpec, OutputActivation, ParamStore, Tensor, Var,
};
use crate::{par, rng};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Losses above this (per observed entry) abort training.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

const ENCODE_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderConfig {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            latent_dim: 16,
            hidden: vec![64, 64],
        }
    }
}

/// Epochs, minibatch size and optimizer for one training stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamW,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 128,
            optimizer: AdamW::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone)]
pub struct ViewAutoencoder {
    pub encoder: Mlp,
    pub decoder: Mlp,
}

/// Encoder/decoder pairs for every view, sharing one parameter store.
/// Parameter names are prefixed with `view{v}.`, so the pairs never share
/// weights.
#[derive(Debug, Clone)]
pub struct Autoencoders {
    pub store: ParamStore,
    pub views: Vec<ViewAutoencoder>,
    pub latent_dim: usize,
}

impl Autoencoders {
    pub fn new(view_dims: &[usize], cfg: &AutoencoderConfig, seed: u64) -> Result<Self> {
        if cfg.latent_dim == 0 {
            return Err(Error::invalid("latent_dim must be positive"));
        }
        let mut store = ParamStore::new();
        let mut views = Vec::with_capacity(view_dims.len());
        for (v, &dv) in view_dims.iter().enumerate() {
            let mut enc = vec![dv];
            enc.extend(&cfg.hidden);
            enc.push(cfg.latent_dim);
            let mut dec = vec![cfg.latent_dim];
            dec.extend(cfg.hidden.iter().rev());
            dec.push(dv);
            views.push(ViewAutoencoder {
                encoder: Mlp::new(
                    &mut store,
                    &format!("view{v}.enc"),
                    MlpSpec::new(enc, Activation::Relu, OutputActivation::Identity),
                    seed,
                )?,
                decoder: Mlp::new(
                    &mut store,
                    &format!("view{v}.dec"),
                    MlpSpec::new(dec, Activation::Relu, OutputActivation::Identity),
                    seed,
                )?,
            });
        }
        Ok(Autoencoders {
            store,
            views,
            latent_dim: cfg.latent_dim,
        })
    }

    /// Builds from explicit encoder/decoder specs (used for hand-set tests).
    pub fn from_specs(specs: Vec<(MlpSpec, MlpSpec)>, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let mut views = Vec::new();
        let mut latent_dim = None;
        for (v, (enc, dec)) in specs.into_iter().enumerate() {
            enc.validate()?;
            dec.validate()?;
            if enc.output_width() != dec.input_width() {
                return Err(Error::shape(
                    "Autoencoders::from_specs",
                    format!("view {v}: encoder emits {}, decoder takes {}", enc.output_width(), dec.input_width()),
                ));
            }
            if enc.input_width() != dec.output_width() {
                return Err(Error::shape(
                    "Autoencoders::from_specs",
                    format!("view {v}: decoder must reconstruct width {}", enc.input_width()),
                ));
            }
            if *latent_dim.get_or_insert(enc.output_width()) != enc.output_width() {
                return Err(Error::shape("Autoencoders::from_specs", "latent widths differ across views"));
            }
            views.push(ViewAutoencoder {
                encoder: Mlp::new(&mut store, &format!("view{v}.enc"), enc, seed)?,
                decoder: Mlp::new(&mut store, &format!("view{v}.dec"), dec, seed)?,
            });
        }
        Ok(Autoencoders {
            store,
            views,
            latent_dim: latent_dim.ok_or_else(|| Error::invalid("no views"))?,
        })
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    /// `f^(v)(X^v)`, evaluated in row chunks (in parallel when enabled).
    pub fn encode(&self, v: usize, x: &Tensor) -> Result<Tensor> {
        self.eval_rows(&self.views[v].encoder, x, self.latent_dim)
    }

    /// `g^(v)(f^(v)(X^v))`
    pub fn reconstruct(&self, v: usize, x: &Tensor) -> Result<Tensor> {
        let z = self.encode(v, x)?;
        let width = self.views[v].decoder.spec.output_width();
        self.eval_rows(&self.views[v].decoder, &z, width)
    }

    fn eval_rows(&self, mlp: &Mlp, x: &Tensor, out_width: usize) -> Result<Tensor> {
        if x.cols() != mlp.spec.input_width() {
            return Err(Error::shape(
                "encode",
                format!("input width {}, expected {}", x.cols(), mlp.spec.input_width()),
            ));
        }
        let n = x.rows();
        let chunks = n.div_ceil(ENCODE_CHUNK);
        let parts = par::map_indices(chunks, |c| {
            let idx: Vec<usize> = (c * ENCODE_CHUNK..((c + 1) * ENCODE_CHUNK).min(n)).collect();
            mlp.eval(&self.store, &x.gather_rows(&idx))
        });
        let mut data = Vec::with_capacity(n * out_width);
        for p in parts {
            data.extend_from_slice(p?.data());
        }
        Ok(Tensor::matrix(n, out_width, data))
    }

    /// `Σ_v Σ_i M_i^v ‖X_i^v − g(f(X_i^v))‖²` on the graph, for the rows in
    /// `xs` with per-view 0/1 weights `masks`.
    pub fn loss_graph(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        xs: &[Tensor],
        masks: &[Vec<f64>],
    ) -> Result<Var> {
        let mut total: Option<Var> = None;
        for (v, ae) in self.views.iter().enumerate() {
            let x = g.input(xs[v].clone())?;
            let z = ae.encoder.forward(g, store, x)?;
            let recon = ae.decoder.forward(g, store, z)?;
            let diff = g.sub(recon, x)?;
            let (n, d) = (xs[v].rows(), xs[v].cols());
            let weights = Tensor::matrix(
                n,
                d,
                masks[v].iter().flat_map(|&m| std::iter::repeat_n(m, d)).collect(),
            );
            let masked = g.mul_const(diff, weights)?;
            let sq = g.square(masked)?;
            let s = g.sum(sq)?;
            total = Some(match total {
                Some(t) => g.add(t, s)?,
                None => s,
            });
        }
        total.ok_or_else(|| Error::invalid("no views"))
    }

    /// Mask-weighted reconstruction loss over the whole dataset.
    pub fn reconstruction_loss(&self, data: &MultiViewDataset, mask: &MaskMatrix) -> Result<f64> {
        check_shapes(self, data, mask)?;
        let mut total = 0.0;
        for v in 0..self.num_views() {
            let recon = self.reconstruct(v, data.view(v))?;
            for i in 0..data.n() {
                if mask.observed(i, v) {
                    total += recon
                        .row(i)
                        .iter()
                        .zip(data.view(v).row(i))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                }
            }
        }
        if !total.is_finite() {
            return Err(Error::NonFinite("reconstruction loss".into()));
        }
        Ok(total)
    }

    /// Stage 1: minibatch AdamW on the reconstruction loss. Returns the
    /// per-epoch loss divided by the number of observed view-rows.
    pub fn train(
        &mut self,
        data: &MultiViewDataset,
        mask: &MaskMatrix,
        cfg: &TrainConfig,
        seed: u64,
    ) -> Result<Vec<f64>> {
        check_shapes(self, data, mask)?;
        cfg.validate()?;
        let n = data.n();
        let observed = mask.n() * mask.num_views() - mask.total_missing();
        let mut curve = Vec::with_capacity(cfg.epochs);
        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..cfg.epochs {
            let mut r = rng::stream(seed, &["stage1".into(), epoch.into()]);
            order.shuffle(&mut r);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let xs: Vec<Tensor> = data.views().iter().map(|t| t.gather_rows(batch)).collect();
                let masks: Vec<Vec<f64>> = (0..self.num_views())
                    .map(|v| batch.iter().map(|&i| if mask.observed(i, v) { 1.0 } else { 0.0 }).collect())
                    .collect();
                let mut g = Graph::new();
                let loss = self.loss_graph(&mut g, &self.store, &xs, &masks)?;
                let value = g.value(loss).item();
                let per_entry = value / masks.iter().flatten().sum::<f64>().max(1.0);
                if per_entry > DIVERGENCE_LIMIT {
                    return Err(Error::Diverged {
                        epoch,
                        loss: per_entry,
                        limit: DIVERGENCE_LIMIT,
                    });
                }
                let grads = g.backward(loss)?.params();
                cfg.optimizer.step(&mut self.store, &grads)?;
                epoch_loss += value;
            }
            curve.push(epoch_loss / observed.max(1) as f64);
            log::debug!("stage1 epoch {epoch}: {:.6}", curve[epoch]);
        }
        Ok(curve)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_store(&self.store)
    }

    pub fn restore(&mut self, ck: &Checkpoint) -> Result<()> {
        ck.restore_into(&mut self.store)
    }
}

fn check_shapes(aes: &Autoencoders, data: &MultiViewDataset, mask: &MaskMatrix) -> Result<()> {
    if data.num_views() != aes.num_views() || mask.num_views() != aes.num_views() || mask.n() != data.n() {
        return Err(Error::shape(
            "autoencoders",
            format!(
                "{} autoencoders, dataset {}x{} views, mask {}x{}",
                aes.num_views(),
                data.n(),
                data.num_views(),
                mask.n(),
                mask.num_views()
            ),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentStatus {
    Observed,
    Imputed,
    ZeroPadded,
    Absent,
}

/// Per-view latent matrices with a status for every (sample, view) entry.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBank {
    latents: Vec<Tensor>,
    status: Vec<LatentStatus>,
    n: usize,
}

impl LatentBank {
    /// Builds a bank from raw matrices; entries with `status == Absent`
    /// are zeroed.
    pub fn new(mut latents: Vec<Tensor>, status: Vec<LatentStatus>) -> Result<Self> {
        let n = latents.first().map_or(0, Tensor::rows);
        let views = latents.len();
        if latents.iter().any(|z| z.rows() != n) || status.len() != n * views {
            return Err(Error::shape("LatentBank", "inconsistent latent shapes"));
        }
        for (v, z) in latents.iter_mut().enumerate() {
            for i in 0..n {
                if status[i * views + v] == LatentStatus::Absent {
                    z.row_mut(i).fill(0.0);
                }
            }
        }
        Ok(LatentBank { latents, status, n })
    }

    /// Encodes every view; unobserved entries are left `Absent`.
    pub fn encode(aes: &Autoencoders, data: &MultiViewDataset, mask: &MaskMatrix) -> Result<Self> {
        check_shapes(aes, data, mask)?;
        let latents = (0..aes.num_views())
            .map(|v| aes.encode(v, data.view(v)))
            .collect::<Result<Vec<_>>>()?;
        let status = (0..data.n())
            .flat_map(|i| (0..mask.num_views()).map(move |v| (i, v)))
            .map(|(i, v)| if mask.observed(i, v) { LatentStatus::Observed } else { LatentStatus::Absent })
            .collect();
        Self::new(latents, status)
    }

    /// Encodes the zero-padded dataset, so missing entries hold `f^(v)(0)`.
    pub fn zero_padded(aes: &Autoencoders, data: &MultiViewDataset, mask: &MaskMatrix) -> Result<Self> {
        let padded = apply_zero_padding(data, mask)?;
        let latents = (0..aes.num_views())
            .map(|v| aes.encode(v, padded.view(v)))
            .collect::<Result<Vec<_>>>()?;
        let status = (0..data.n())
            .flat_map(|i| (0..mask.num_views()).map(move |v| (i, v)))
            .map(|(i, v)| if mask.observed(i, v) { LatentStatus::Observed } else { LatentStatus::ZeroPadded })
            .collect();
        Self::new(latents, status)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_views(&self) -> usize {
        self.latents.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.latents.first().map_or(0, Tensor::cols)
    }

    pub fn view(&self, v: usize) -> &Tensor {
        &self.latents[v]
    }

    pub fn status(&self, i: usize, v: usize) -> LatentStatus {
        self.status[i * self.latents.len() + v]
    }

    pub fn count(&self, s: LatentStatus) -> usize {
        self.status.iter().filter(|&&x| x == s).count()
    }

    pub fn has_absent(&self) -> bool {
        self.count(LatentStatus::Absent) > 0
    }

    /// Writes an imputed latent into an `Absent` slot.
    pub fn fill(&mut self, i: usize, v: usize, z: &[f64]) -> Result<()> {
        let views = self.latents.len();
        if self.status[i * views + v] != LatentStatus::Absent {
            return Err(Error::invalid(format!(
                "latent ({i}, {v}) is {:?}, only absent entries can be imputed",
                self.status[i * views + v]
            )));
        }
        if z.len() != self.latent_dim() {
            return Err(Error::shape("LatentBank::fill", format!("{} values", z.len())));
        }
        self.latents[v].row_mut(i).copy_from_slice(z);
        self.status[i * views + v] = LatentStatus::Imputed;
        Ok(())
    }

    /// Row-wise concatenation `[Z^1 | Z^2 | ...]`.
    pub fn concatenated(&self) -> Tensor {
        let d = self.latent_dim();
        let v = self.latents.len();
        let mut data = Vec::with_capacity(self.n * d * v);
        for i in 0..self.n {
            for z in &self.latents {
                data.extend_from_slice(z.row(i));
            }
        }
        Tensor::matrix(self.n, d * v, data)
    }
}

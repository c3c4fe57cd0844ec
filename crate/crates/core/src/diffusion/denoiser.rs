use crate::error::{Error, Result};
use crate::nn::{AttentionBlock, Graph, Init, Linear, ParamStore, Tensor, Var};
use serde::{Deserialize, Serialize};

/// Anything that predicts the injected noise `ε̂ = ε_θ(z_t, t, z_cond)` for a
/// batch of rows. `t[i]` is the timestep of row `i`.
pub trait EpsilonModel: Sync {
    fn predict(&self, z_t: &Tensor, t: &[usize], cond: &Tensor) -> Result<Tensor>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserConfig {
    /// Sinusoidal time-embedding width (even).
    pub time_dim: usize,
    /// Number of tokens a latent is split into for cross-attention.
    pub tokens: usize,
    pub token_width: usize,
    pub hidden: usize,
    pub blocks: usize,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        DenoiserConfig {
            time_dim: 16,
            tokens: 4,
            token_width: 16,
            hidden: 64,
            blocks: 2,
        }
    }
}

impl DenoiserConfig {
    pub fn validate(&self) -> Result<()> {
        if self.time_dim == 0 || !self.time_dim.is_multiple_of(2) {
            return Err(Error::invalid("time_dim must be a positive even number"));
        }
        if self.tokens == 0 || self.token_width == 0 || self.hidden == 0 {
            return Err(Error::invalid("denoiser widths must be positive"));
        }
        Ok(())
    }
}

/// `[sin(t·ω_0), …, sin(t·ω_{m−1}), cos(t·ω_0), …]` with
/// `ω_i = 10000^{−i/m}` and `m = dim / 2`.
pub fn time_embedding(t: &[usize], dim: usize) -> Tensor {
    let half = dim / 2;
    let mut out = Tensor::zeros(&[t.len(), dim]);
    for (r, &step) in t.iter().enumerate() {
        let row = out.row_mut(r);
        for i in 0..half {
            let w = (-(10000f64.ln()) * i as f64 / half as f64).exp();
            let a = step as f64 * w;
            row[i] = a.sin();
            row[half + i] = a.cos();
        }
    }
    out
}

/// Noise predictor for one completion direction.
///
/// The noisy latent and the condition are each projected to `h` tokens; the
/// noisy tokens cross-attend to the condition tokens, and the attended
/// features, the noisy latent and the time embedding are summed into a
/// residual MLP trunk.
#[derive(Debug, Clone)]
pub struct Denoiser {
    pub store: ParamStore,
    pub cfg: DenoiserConfig,
    pub latent_dim: usize,
    query_proj: Linear,
    cond_proj: Linear,
    attention: AttentionBlock,
    z_in: Linear,
    attn_in: Linear,
    time_in: Linear,
    blocks: Vec<(Linear, Linear)>,
    out: Linear,
}

impl Denoiser {
    pub fn new(name: &str, latent_dim: usize, cfg: &DenoiserConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if latent_dim == 0 {
            return Err(Error::invalid("latent_dim must be positive"));
        }
        let mut s = ParamStore::new();
        let (h, dt, hid) = (cfg.tokens, cfg.token_width, cfg.hidden);
        let p = |part: &str| format!("{name}.{part}");
        let query_proj = Linear::new(&mut s, &p("query"), latent_dim, h * dt, true, Init::Xavier, seed)?;
        let cond_proj = Linear::new(&mut s, &p("cond"), latent_dim, h * dt, true, Init::Xavier, seed)?;
        let attention = AttentionBlock::new(&mut s, &p("attn"), dt, dt, dt, seed)?;
        let z_in = Linear::new(&mut s, &p("z_in"), latent_dim, hid, true, Init::Xavier, seed)?;
        let attn_in = Linear::new(&mut s, &p("attn_in"), h * dt, hid, false, Init::Xavier, seed)?;
        let time_in = Linear::new(&mut s, &p("time_in"), cfg.time_dim, hid, false, Init::Xavier, seed)?;
        let blocks = (0..cfg.blocks)
            .map(|b| {
                Ok((
                    Linear::new(&mut s, &p(&format!("block{b}.a")), hid, hid, true, Init::He, seed)?,
                    Linear::new(&mut s, &p(&format!("block{b}.b")), hid, hid, true, Init::Xavier, seed)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let out = Linear::new(&mut s, &p("out"), hid, latent_dim, true, Init::Xavier, seed)?;
        Ok(Denoiser {
            store: s,
            cfg: cfg.clone(),
            latent_dim,
            query_proj,
            cond_proj,
            attention,
            z_in,
            attn_in,
            time_in,
            blocks,
            out,
        })
    }

    /// Builds `ε_θ` on the graph. `temb` is the time embedding of each row.
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        z_t: Var,
        temb: Var,
        cond: Var,
    ) -> Result<Var> {
        let batch = g.value(z_t).rows();
        let (h, dt) = (self.cfg.tokens, self.cfg.token_width);
        let q = self.query_proj.forward(g, store, z_t)?;
        let q = g.reshape(q, batch * h, dt)?;
        let c = self.cond_proj.forward(g, store, cond)?;
        let c = g.reshape(c, batch * h, dt)?;
        let a = self.attention.forward(g, store, q, c, batch)?;
        let a = g.reshape(a, batch, h * dt)?;
        let x = self.z_in.forward(g, store, z_t)?;
        let ax = self.attn_in.forward(g, store, a)?;
        let tx = self.time_in.forward(g, store, temb)?;
        let x = g.add(x, ax)?;
        let x = g.add(x, tx)?;
        let mut x = g.gelu(x)?;
        for (a, b) in &self.blocks {
            let y = a.forward(g, store, x)?;
            let y = g.gelu(y)?;
            let y = b.forward(g, store, y)?;
            x = g.add(x, y)?;
        }
        self.out.forward(g, store, x)
    }

    fn check(&self, z_t: &Tensor, t: &[usize], cond: &Tensor) -> Result<()> {
        let n = z_t.rows();
        if z_t.cols() != self.latent_dim || cond.cols() != self.latent_dim || cond.rows() != n || t.len() != n {
            return Err(Error::shape(
                "denoiser",
                format!(
                    "z_t {:?}, cond {:?}, {} timesteps, latent width {}",
                    z_t.shape(),
                    cond.shape(),
                    t.len(),
                    self.latent_dim
                ),
            ));
        }
        Ok(())
    }

    /// Graph inputs for a batch.
    pub fn inputs(&self, g: &mut Graph, z_t: &Tensor, t: &[usize], cond: &Tensor) -> Result<(Var, Var, Var)> {
        self.check(z_t, t, cond)?;
        Ok((
            g.input(z_t.clone())?,
            g.input(time_embedding(t, self.cfg.time_dim))?,
            g.input(cond.clone())?,
        ))
    }
}

impl EpsilonModel for Denoiser {
    fn predict(&self, z_t: &Tensor, t: &[usize], cond: &Tensor) -> Result<Tensor> {
        if z_t.rows() == 0 {
            self.check(z_t, t, cond)?;
            return Ok(Tensor::zeros(&[0, self.latent_dim]));
        }
        let mut g = Graph::new();
        let (z, e, c) = self.inputs(&mut g, z_t, t, cond)?;
        let out = self.forward(&mut g, &self.store, z, e, c)?;
        Ok(g.value(out).clone())
    }
}

use super::graph::{Graph, Var};
use super::param::{ParamId, ParamStore};
use super::Tensor;
use crate::error::{Error, Result};
use crate::rng;
use rand::Rng as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Gelu,
    Identity,
}

/// Transform applied to the last layer's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Softmax,
    L2Normalize,
}

/// Layer widths `[d_in, h_1, ..., d_out]` with one activation per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub output: OutputActivation,
}

impl MlpSpec {
    /// Hidden layers use `hidden`, the last layer is linear and followed by
    /// `output`.
    pub fn new(widths: Vec<usize>, hidden: Activation, output: OutputActivation) -> Self {
        let layers = widths.len().saturating_sub(1);
        let mut activations = vec![hidden; layers];
        if let Some(last) = activations.last_mut() {
            *last = Activation::Identity;
        }
        MlpSpec {
            widths,
            activations,
            output,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::invalid("an MLP needs at least one layer"));
        }
        if self.widths.contains(&0) {
            return Err(Error::invalid(format!("zero layer width in {:?}", self.widths)));
        }
        if self.activations.len() != self.widths.len() - 1 {
            return Err(Error::invalid(format!(
                "{} activations for {} layers",
                self.activations.len(),
                self.widths.len() - 1
            )));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated spec")
    }
}

/// Affine map `x · W + b` with `W: in × out`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Uniform with bound `sqrt(6 / fan_in)`, for relu-family layers.
    He,
    /// Uniform with bound `sqrt(6 / (fan_in + fan_out))`.
    Xavier,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        init: Init,
        seed: u64,
    ) -> Result<Self> {
        let bound = match init {
            Init::He => (6.0 / in_dim as f64).sqrt(),
            Init::Xavier => (6.0 / (in_dim + out_dim) as f64).sqrt(),
        };
        let mut r = rng::stream(seed, &[name.into()]);
        let w: Vec<f64> = (0..in_dim * out_dim)
            .map(|_| r.random_range(-bound..bound))
            .collect();
        let weight = store.insert(format!("{name}.w"), Tensor::matrix(in_dim, out_dim, w))?;
        let bias = if bias {
            Some(store.insert(format!("{name}.b"), Tensor::zeros(&[1, out_dim]))?)
        } else {
            None
        };
        Ok(Linear {
            weight,
            bias,
            in_dim,
            out_dim,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight)?;
        let y = g.matmul(x, w)?;
        match self.bias {
            Some(b) => {
                let b = g.param(store, b)?;
                g.add_row(y, b)
            }
            None => Ok(y),
        }
    }
}

fn activate(g: &mut Graph, x: Var, act: Activation) -> Result<Var> {
    match act {
        Activation::Relu => g.relu(x),
        Activation::Gelu => g.gelu(x),
        Activation::Identity => Ok(x),
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new(store: &mut ParamStore, name: &str, spec: MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::with_capacity(spec.activations.len());
        for (i, act) in spec.activations.iter().enumerate() {
            let init = match act {
                Activation::Relu | Activation::Gelu => Init::He,
                Activation::Identity => Init::Xavier,
            };
            layers.push(Linear::new(
                store,
                &format!("{name}.l{i}"),
                spec.widths[i],
                spec.widths[i + 1],
                true,
                init,
                seed,
            )?);
        }
        Ok(Mlp { spec, layers })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let width = g.value(x).cols();
        if width != self.spec.input_width() {
            return Err(Error::shape(
                "mlp_forward",
                format!("input width {width}, expected {}", self.spec.input_width()),
            ));
        }
        let mut h = x;
        for (layer, &act) in self.layers.iter().zip(&self.spec.activations) {
            h = layer.forward(g, store, h)?;
            h = activate(g, h, act)?;
        }
        match self.spec.output {
            OutputActivation::Identity => Ok(h),
            OutputActivation::Softmax => g.softmax_rows(h),
            OutputActivation::L2Normalize => g.l2_normalize_rows(h),
        }
    }

    /// Forward pass outside of any training graph.
    pub fn eval(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let v = g.input(x.clone())?;
        let out = self.forward(&mut g, store, v)?;
        Ok(g.value(out).clone())
    }
}

/// Scaled dot-product cross-attention between query tokens and context
/// tokens, with learnable projections to a common width `d`.
#[derive(Debug, Clone)]
pub struct AttentionBlock {
    pub w_q: Linear,
    pub w_k: Linear,
    pub w_v: Linear,
    pub d: usize,
}

impl AttentionBlock {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        query_dim: usize,
        context_dim: usize,
        d: usize,
        seed: u64,
    ) -> Result<Self> {
        if d == 0 || query_dim == 0 || context_dim == 0 {
            return Err(Error::invalid("attention widths must be positive"));
        }
        Ok(AttentionBlock {
            w_q: Linear::new(store, &format!("{name}.wq"), query_dim, d, false, Init::Xavier, seed)?,
            w_k: Linear::new(store, &format!("{name}.wk"), context_dim, d, false, Init::Xavier, seed)?,
            w_v: Linear::new(store, &format!("{name}.wv"), context_dim, d, false, Init::Xavier, seed)?,
            d,
        })
    }

    /// Builds a block from explicit `query_dim × d` / `context_dim × d`
    /// projection matrices.
    pub fn from_matrices(
        store: &mut ParamStore,
        name: &str,
        w_q: Tensor,
        w_k: Tensor,
        w_v: Tensor,
    ) -> Result<Self> {
        let d = w_q.cols();
        if d == 0 || w_k.cols() != d || w_v.cols() != d || w_k.rows() != w_v.rows() {
            return Err(Error::shape(
                "AttentionBlock::from_matrices",
                format!("{:?} {:?} {:?}", w_q.shape(), w_k.shape(), w_v.shape()),
            ));
        }
        let lin = |store: &mut ParamStore, suffix: &str, t: Tensor| -> Result<Linear> {
            let (in_dim, out_dim) = (t.rows(), t.cols());
            Ok(Linear {
                weight: store.insert(format!("{name}.{suffix}.w"), t)?,
                bias: None,
                in_dim,
                out_dim,
            })
        };
        Ok(AttentionBlock {
            w_q: lin(store, "wq", w_q)?,
            w_k: lin(store, "wk", w_k)?,
            w_v: lin(store, "wv", w_v)?,
            d,
        })
    }

    /// `queries` stacks `batch` groups of `h` tokens, `context` stacks
    /// `batch` groups of `m` tokens; every group attends only within itself.
    /// Returns `(batch·h) × d`.
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        queries: Var,
        context: Var,
        batch: usize,
    ) -> Result<Var> {
        let q = self.w_q.forward(g, store, queries)?;
        let k = self.w_k.forward(g, store, context)?;
        let v = self.w_v.forward(g, store, context)?;
        let scores = g.batch_matmul_nt(q, k, batch)?;
        let scores = g.scale(scores, 1.0 / (self.d as f64).sqrt())?;
        let weights = g.softmax_rows(scores)?;
        g.batch_matmul(weights, v, batch)
    }

    /// Single-group attention: `queries: h × d_q`, `context: m × d_c`.
    pub fn attend(&self, store: &ParamStore, queries: &Tensor, context: &Tensor) -> Result<Tensor> {
        if queries.rows() == 0 || context.rows() == 0 {
            return Err(Error::shape("attention", "need at least one query and one context token"));
        }
        let mut g = Graph::new();
        let q = g.input(queries.clone())?;
        let c = g.input(context.clone())?;
        let out = self.forward(&mut g, store, q, c, 1)?;
        Ok(g.value(out).clone())
    }
}

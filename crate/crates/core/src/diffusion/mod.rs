//! Conditional latent diffusion: noise schedule, ε-prediction loss,
//! ancestral sampling and the per-direction denoisers used to complete
//! missing latents.

mod denoiser;
mod model;
mod schedule;

pub use denoiser::{time_embedding, Denoiser, DenoiserConfig, EpsilonModel};
pub use model::{DiffusionConfig, DiffusionModel, LatentScaler};
pub use schedule::{forward_noising, NoiseSchedule, ScheduleKind};

use crate::error::{Error, Result};
use crate::nn::{Graph, ParamStore, Tensor, Var};
use crate::rng::Rng;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

/// Timesteps and noise drawn for one batch of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraws {
    pub t: Vec<usize>,
    pub eps: Tensor,
}

/// Per row: `t ~ U{1..T}`, then `d` standard normals.
pub fn draw_noise(rng: &mut Rng, n: usize, d: usize, steps: usize) -> NoiseDraws {
    let mut t = Vec::with_capacity(n);
    let mut eps = Vec::with_capacity(n * d);
    for _ in 0..n {
        t.push(rng.random_range(1..=steps));
        eps.extend((0..d).map(|_| -> f64 { StandardNormal.sample(rng) }));
    }
    NoiseDraws {
        t,
        eps: Tensor::matrix(n, d, eps),
    }
}

pub(crate) fn normals(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| -> f64 { StandardNormal.sample(rng) }).collect()
}

/// Noises every row of `z0` at its own timestep.
pub fn noise_rows(z0: &Tensor, draws: &NoiseDraws, sched: &NoiseSchedule) -> Result<Tensor> {
    if z0.shape() != draws.eps.shape() || draws.t.len() != z0.rows() {
        return Err(Error::shape("noise_rows", format!("z0 {:?}, eps {:?}", z0.shape(), draws.eps.shape())));
    }
    let mut out = z0.clone();
    for (i, &t) in draws.t.iter().enumerate() {
        let ab = sched.alpha_bar(t)?;
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        for (o, e) in out.row_mut(i).iter_mut().zip(draws.eps.row(i)) {
            *o = a * *o + b * e;
        }
    }
    Ok(out)
}

fn check_pair(z_src: &Tensor, z_cond: &Tensor) -> Result<()> {
    if z_src.shape() != z_cond.shape() {
        return Err(Error::shape(
            "diffusion_loss",
            format!("source {:?} vs condition {:?}", z_src.shape(), z_cond.shape()),
        ));
    }
    if z_src.rows() == 0 {
        return Err(Error::Precondition("no complete rows to train the denoiser on".into()));
    }
    Ok(())
}

/// Mean over rows of `‖ε − ε_θ(z_t, t, z_cond)‖²` with fresh draws.
pub fn diffusion_loss<M: EpsilonModel + ?Sized>(
    net: &M,
    z_src: &Tensor,
    z_cond: &Tensor,
    sched: &NoiseSchedule,
    rng: &mut Rng,
) -> Result<f64> {
    check_pair(z_src, z_cond)?;
    let draws = draw_noise(rng, z_src.rows(), z_src.cols(), sched.steps());
    diffusion_loss_with(net, z_src, z_cond, &draws, sched)
}

/// Same loss with the timestep and noise draws supplied by the caller.
pub fn diffusion_loss_with<M: EpsilonModel + ?Sized>(
    net: &M,
    z_src: &Tensor,
    z_cond: &Tensor,
    draws: &NoiseDraws,
    sched: &NoiseSchedule,
) -> Result<f64> {
    check_pair(z_src, z_cond)?;
    let z_t = noise_rows(z_src, draws, sched)?;
    let pred = net.predict(&z_t, &draws.t, z_cond)?;
    let sq: f64 = pred.data().iter().zip(draws.eps.data()).map(|(p, e)| (e - p) * (e - p)).sum();
    let loss = sq / z_src.rows() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("diffusion loss".into()));
    }
    Ok(loss)
}

/// The loss on the graph, differentiable in the parameters of `net`.
pub fn diffusion_loss_graph(
    net: &Denoiser,
    g: &mut Graph,
    store: &ParamStore,
    z_src: &Tensor,
    z_cond: &Tensor,
    draws: &NoiseDraws,
    sched: &NoiseSchedule,
) -> Result<Var> {
    check_pair(z_src, z_cond)?;
    let z_t = noise_rows(z_src, draws, sched)?;
    let (z, e, c) = net.inputs(g, &z_t, &draws.t, z_cond)?;
    let pred = net.forward(g, store, z, e, c)?;
    let eps = g.input(draws.eps.clone())?;
    let diff = g.sub(eps, pred)?;
    let sq = g.square(diff)?;
    let s = g.sum(sq)?;
    g.scale(s, 1.0 / z_src.rows() as f64)
}

/// One reverse step with explicit noise `xi` (ignored at `t = 1`). Passing
/// `None` takes the posterior mean.
pub fn denoise_step_with<M: EpsilonModel + ?Sized>(
    net: &M,
    z_t: &Tensor,
    t: usize,
    cond: &Tensor,
    sched: &NoiseSchedule,
    xi: Option<&Tensor>,
) -> Result<Tensor> {
    let (alpha, alpha_bar, beta) = (sched.alpha(t)?, sched.alpha_bar(t)?, sched.beta(t)?);
    let eps = net.predict(z_t, &vec![t; z_t.rows()], cond)?;
    if eps.shape() != z_t.shape() {
        return Err(Error::shape("denoise_step", format!("prediction {:?}", eps.shape())));
    }
    let coef = beta / (1.0 - alpha_bar).sqrt();
    let scale = 1.0 / alpha.sqrt();
    let mut out = z_t.zip_map(&eps, |z, e| scale * (z - coef * e));
    if let (Some(xi), true) = (xi, t > 1) {
        if xi.shape() != z_t.shape() {
            return Err(Error::shape("denoise_step", format!("noise {:?}", xi.shape())));
        }
        let sigma = sched.sigma(t)?;
        for (o, x) in out.data_mut().iter_mut().zip(xi.data()) {
            *o += sigma * x;
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite(format!("reverse step at t = {t}")));
    }
    Ok(out)
}

/// `z_{t−1} = (z_t − β_t/√(1 − ᾱ_t)·ε̂)/√α_t + σ_t·ξ` with `σ_t² = β_t`
/// and `σ_1 = 0`.
pub fn conditional_denoise_step<M: EpsilonModel + ?Sized>(
    net: &M,
    z_t: &Tensor,
    t: usize,
    cond: &Tensor,
    sched: &NoiseSchedule,
    rng: &mut Rng,
) -> Result<Tensor> {
    sched.alpha(t)?;
    let xi = if t > 1 {
        Some(Tensor::matrix(z_t.rows(), z_t.cols(), normals(rng, z_t.len())))
    } else {
        None
    };
    denoise_step_with(net, z_t, t, cond, sched, xi.as_ref())
}

/// Full ancestral sampling from `z_T ~ N(0, I)`. Row `i` draws all of its
/// noise from `rngs[i]`, so results do not depend on how rows are batched.
pub fn sample<M: EpsilonModel + ?Sized>(
    net: &M,
    cond: &Tensor,
    sched: &NoiseSchedule,
    rngs: &mut [Rng],
) -> Result<Tensor> {
    let (n, d) = (cond.rows(), cond.cols());
    if rngs.len() != n {
        return Err(Error::shape("sample", format!("{} rows, {} streams", n, rngs.len())));
    }
    let mut z = Tensor::matrix(n, d, rngs.iter_mut().flat_map(|r| normals(r, d)).collect());
    for t in (1..=sched.steps()).rev() {
        let xi = if t > 1 {
            Some(Tensor::matrix(n, d, rngs.iter_mut().flat_map(|r| normals(r, d)).collect()))
        } else {
            None
        };
        z = denoise_step_with(net, &z, t, cond, sched, xi.as_ref())?;
    }
    Ok(z)
}

#[cfg(test)]
mod tests;

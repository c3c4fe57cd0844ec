use crate::error::{Error, Result};
use crate::nn::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Linear,
}

/// Variance schedule `β_1..β_T` with `α_t = 1 − β_t` and
/// `ᾱ_t = Π_{s≤t} α_s`. Timesteps are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        if let Some((t, b)) = betas.iter().enumerate().find(|(_, &b)| !(b > 0.0 && b < 1.0)) {
            return Err(Error::invalid(format!("beta_{} = {b} is outside (0, 1)", t + 1)));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(alphas.len());
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        Ok(NoiseSchedule {
            betas,
            alphas,
            alpha_bars,
        })
    }

    /// `β_t` evenly spaced from `beta_min` (t = 1) to `beta_max` (t = T).
    pub fn linear(steps: usize, beta_min: f64, beta_max: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
            return Err(Error::invalid(format!(
                "need 0 < beta_min <= beta_max < 1, got {beta_min} and {beta_max}"
            )));
        }
        let betas = (0..steps)
            .map(|i| {
                if steps == 1 {
                    beta_min
                } else {
                    beta_min + (beta_max - beta_min) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        Self::from_betas(betas)
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    fn index(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.betas.len() {
            return Err(Error::invalid(format!("timestep {t} outside [1, {}]", self.betas.len())));
        }
        Ok(t - 1)
    }

    pub fn beta(&self, t: usize) -> Result<f64> {
        Ok(self.betas[self.index(t)?])
    }

    pub fn alpha(&self, t: usize) -> Result<f64> {
        Ok(self.alphas[self.index(t)?])
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        Ok(self.alpha_bars[self.index(t)?])
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    /// Sampler standard deviation; `σ_1 = 0`.
    pub fn sigma(&self, t: usize) -> Result<f64> {
        let b = self.beta(t)?;
        Ok(if t == 1 { 0.0 } else { b.sqrt() })
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::matrix(1, self.betas.len(), self.betas.clone())
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        Self::from_betas(t.data().to_vec())
    }
}

/// `√ᾱ_t · z0 + √(1 − ᾱ_t) · ε`
pub fn forward_noising(z0: &Tensor, t: usize, eps: &Tensor, sched: &NoiseSchedule) -> Result<Tensor> {
    if z0.shape() != eps.shape() {
        return Err(Error::shape(
            "forward_noising",
            format!("z0 {:?} vs eps {:?}", z0.shape(), eps.shape()),
        ));
    }
    let ab = sched.alpha_bar(t)?;
    Ok(noise_with(z0, eps, ab))
}

pub(crate) fn noise_with(z0: &Tensor, eps: &Tensor, alpha_bar: f64) -> Tensor {
    let (a, b) = (alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt());
    z0.zip_map(eps, |z, e| a * z + b * e)
}

//! AdamW with decoupled weight decay.
//!
//! ```text
//! θ ← θ · (1 − lr · λ)
//! m ← β1 · m + (1 − β1) · g
//! v ← β2 · v + (1 − β2) · g²
//! θ ← θ − lr · (m / (1 − β1^t)) / (sqrt(v / (1 − β2^t)) + eps)
//! ```

use super::param::{ParamGrads, ParamStore};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        AdamW {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-2,
        }
    }
}

impl AdamW {
    pub fn with_lr(lr: f64) -> Self {
        AdamW {
            lr,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad optimizer settings {self:?}")))
        }
    }

    /// One optimizer step. Parameters without a gradient are left alone.
    /// Nothing is modified if any gradient entry is non-finite.
    pub fn step(&self, store: &mut ParamStore, grads: &ParamGrads) -> Result<()> {
        for (id, g) in grads {
            if g.shape() != store.value(*id).shape() {
                return Err(Error::shape(
                    "adamw_step",
                    format!(
                        "{}: gradient {:?} vs parameter {:?}",
                        store.name(*id),
                        g.shape(),
                        store.value(*id).shape()
                    ),
                ));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient of {}", store.name(*id))));
            }
        }
        let t = store.step() + 1;
        store.set_step(t);
        let bc1 = 1.0 - self.beta1.powi(t as i32);
        let bc2 = 1.0 - self.beta2.powi(t as i32);
        let decay = 1.0 - self.lr * self.weight_decay;
        for (id, g) in grads {
            let (theta, m, v) = store.slot_mut(*id);
            let it = theta
                .data_mut()
                .iter_mut()
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
                .zip(g.data());
            for (((p, m), v), &g) in it {
                *p *= decay;
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    fn store_with(values: Vec<f64>) -> (ParamStore, crate::nn::ParamId) {
        let mut s = ParamStore::new();
        let n = values.len();
        let id = s.insert("p", Tensor::matrix(1, n, values)).unwrap();
        (s, id)
    }

    #[test]
    fn zero_lr_leaves_params_unchanged() {
        let (mut s, id) = store_with(vec![1.0, -2.0, 3.5]);
        let before = s.value(id).clone();
        let mut g = ParamGrads::new();
        g.insert(id, Tensor::matrix(1, 3, vec![0.3, 0.1, -5.0]));
        AdamW {
            lr: 0.0,
            weight_decay: 0.3,
            ..AdamW::default()
        }
        .step(&mut s, &g)
        .unwrap();
        assert_eq!(s.value(id), &before);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn zero_gradient_only_decays() {
        let (mut s, id) = store_with(vec![1.0, -2.0, 3.5]);
        let mut g = ParamGrads::new();
        g.insert(id, Tensor::zeros(&[1, 3]));
        let opt = AdamW {
            lr: 0.1,
            weight_decay: 0.5,
            ..AdamW::default()
        };
        opt.step(&mut s, &g).unwrap();
        let f = 1.0 - 0.1 * 0.5;
        assert_eq!(s.value(id).data(), &[1.0 * f, -2.0 * f, 3.5 * f]);
        let (m, v) = s.moments(id);
        assert!(m.data().iter().chain(v.data()).all(|&x| x == 0.0));
    }

    #[test]
    fn first_step_matches_hand_recurrence() {
        let theta = [0.5, -1.0, 2.0];
        let grad = [0.2, -3.0, 1e-3];
        let (mut s, id) = store_with(theta.to_vec());
        let mut g = ParamGrads::new();
        g.insert(id, Tensor::matrix(1, 3, grad.to_vec()));
        let opt = AdamW {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.1,
        };
        opt.step(&mut s, &g).unwrap();
        for i in 0..3 {
            // m̂ = g, v̂ = g² after one step
            let expected = theta[i] * (1.0 - 0.01 * 0.1) - 0.01 * grad[i] / (grad[i].abs() + 1e-8);
            assert!((s.value(id).data()[i] - expected).abs() < 1e-12);
        }
    }

    /// Scalar Adam with decoupled decay, written out step by step.
    fn reference(theta0: f64, grads: &[f64], lr: f64, wd: f64) -> f64 {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut theta, mut m, mut v) = (theta0, 0.0, 0.0);
        for (k, g) in grads.iter().enumerate() {
            let t = (k + 1) as i32;
            theta -= lr * wd * theta;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            theta -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
        }
        theta
    }

    #[test]
    fn many_steps_match_reference_adam() {
        let grads: Vec<[f64; 2]> = (0..50).map(|k| [(k as f64 * 0.7).sin(), 0.01 * k as f64 - 0.2]).collect();
        for wd in [0.0, 0.05] {
            let (mut s, id) = store_with(vec![1.5, -0.4]);
            let opt = AdamW {
                lr: 0.02,
                weight_decay: wd,
                ..AdamW::default()
            };
            for g in &grads {
                let mut pg = ParamGrads::new();
                pg.insert(id, Tensor::matrix(1, 2, g.to_vec()));
                opt.step(&mut s, &pg).unwrap();
            }
            for (j, theta0) in [1.5, -0.4].into_iter().enumerate() {
                let gs: Vec<f64> = grads.iter().map(|g| g[j]).collect();
                let want = reference(theta0, &gs, 0.02, wd);
                assert!((s.value(id).data()[j] - want).abs() < 1e-12, "wd {wd}, entry {j}");
            }
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_side_effects() {
        let (mut s, id) = store_with(vec![1.0]);
        let mut g = ParamGrads::new();
        g.insert(id, Tensor::matrix(1, 1, vec![f64::NAN]));
        assert!(AdamW::default().step(&mut s, &g).is_err());
        assert_eq!(s.value(id).data(), &[1.0]);
        assert_eq!(s.step(), 0);
    }
}

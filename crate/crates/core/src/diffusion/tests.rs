use super::*;
use crate::autoencoder::{LatentBank, LatentStatus, TrainConfig};
use crate::data::{generate_mask, MaskMatrix};
use crate::nn::{gradient_check, AdamW};
use crate::{par, rng};

struct ZeroNet;

impl EpsilonModel for ZeroNet {
    fn predict(&self, z_t: &Tensor, _t: &[usize], _cond: &Tensor) -> Result<Tensor> {
        Ok(Tensor::zeros(z_t.shape()))
    }
}

/// Knows the clean latent, so it can recover the injected noise exactly.
struct OracleNet<'a> {
    z0: &'a Tensor,
    sched: &'a NoiseSchedule,
}

impl EpsilonModel for OracleNet<'_> {
    fn predict(&self, z_t: &Tensor, t: &[usize], _cond: &Tensor) -> Result<Tensor> {
        let mut out = z_t.clone();
        for (i, &ti) in t.iter().enumerate() {
            let ab = self.sched.alpha_bar(ti)?;
            for (o, z) in out.row_mut(i).iter_mut().zip(self.z0.row(i)) {
                *o = (*o - ab.sqrt() * z) / (1.0 - ab).sqrt();
            }
        }
        Ok(out)
    }
}

fn gaussian(n: usize, d: usize, seed: u64) -> Tensor {
    let mut r = rng::stream(seed, &["gaussian".into()]);
    Tensor::matrix(n, d, normals(&mut r, n * d))
}

fn small_net(d: usize) -> Denoiser {
    let cfg = DenoiserConfig {
        time_dim: 4,
        tokens: 2,
        token_width: 3,
        hidden: 5,
        blocks: 1,
    };
    Denoiser::new("n", d, &cfg, 11).unwrap()
}

#[test]
fn perfect_denoiser_has_zero_loss() {
    let sched = NoiseSchedule::linear(50, 1e-4, 0.02).unwrap();
    let z0 = gaussian(100, 4, 1);
    let oracle = OracleNet { z0: &z0, sched: &sched };
    let mut r = rng::stream(3, &[]);
    let loss = diffusion_loss(&oracle, &z0, &z0, &sched, &mut r).unwrap();
    assert!(loss < 1e-20, "{loss}");
}

#[test]
fn zero_net_loss_is_chi_square_mean() {
    let sched = NoiseSchedule::linear(200, 1e-4, 0.02).unwrap();
    let z0 = gaussian(10_000, 16, 2);
    let mut r = rng::stream(4, &[]);
    let loss = diffusion_loss(&ZeroNet, &z0, &z0, &sched, &mut r).unwrap();
    assert!((loss - 16.0).abs() < 0.05 * 16.0, "{loss}");
}

#[test]
fn frozen_draws_match_straight_line_evaluation() {
    let sched = NoiseSchedule::linear(30, 1e-4, 0.02).unwrap();
    let net = Denoiser::new("n", 4, &DenoiserConfig::default(), 5).unwrap();
    let z0 = gaussian(6, 4, 7);
    let cond = gaussian(6, 4, 8);
    let mut r = rng::stream(9, &[]);
    let draws = draw_noise(&mut r, 6, 4, 30);
    let batched = diffusion_loss_with(&net, &z0, &cond, &draws, &sched).unwrap();

    let mut total = 0.0;
    for i in 0..6 {
        let ab = sched.alpha_bars()[draws.t[i] - 1];
        let zt: Vec<f64> = (0..4)
            .map(|j| ab.sqrt() * z0.get(i, j) + (1.0 - ab).sqrt() * draws.eps.get(i, j))
            .collect();
        let pred = net
            .predict(&Tensor::matrix(1, 4, zt), &[draws.t[i]], &cond.gather_rows(&[i]))
            .unwrap();
        for j in 0..4 {
            total += (draws.eps.get(i, j) - pred.get(0, j)).powi(2);
        }
    }
    assert!((batched - total / 6.0).abs() < 1e-12);

    let mut g = Graph::new();
    let v = diffusion_loss_graph(&net, &mut g, &net.store, &z0, &cond, &draws, &sched).unwrap();
    assert!((g.value(v).item() - batched).abs() < 1e-12);
}

#[test]
fn loss_requires_rows() {
    let sched = NoiseSchedule::linear(5, 1e-4, 0.02).unwrap();
    let empty = Tensor::zeros(&[0, 3]);
    let mut r = rng::stream(1, &[]);
    assert!(matches!(
        diffusion_loss(&ZeroNet, &empty, &empty, &sched, &mut r),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn zero_predictor_telescopes() {
    let sched = NoiseSchedule::linear(200, 1e-4, 0.02).unwrap();
    let z_t = gaussian(5, 3, 1);
    let cond = Tensor::zeros(&[5, 3]);
    let mut z = z_t.clone();
    for t in (1..=200).rev() {
        z = denoise_step_with(&ZeroNet, &z, t, &cond, &sched, None).unwrap();
        assert_eq!(z.shape(), &[5, 3]);
        assert!(z.is_finite());
    }
    let scale = 1.0 / sched.alpha_bar(200).unwrap().sqrt();
    for (a, b) in z.data().iter().zip(z_t.data()) {
        assert!((a - b * scale).abs() < 1e-9);
    }
}

#[test]
fn final_step_injects_no_noise() {
    let sched = NoiseSchedule::linear(10, 1e-4, 0.02).unwrap();
    let z = gaussian(4, 3, 2);
    let mut r = rng::stream(5, &[]);
    let a = conditional_denoise_step(&ZeroNet, &z, 1, &z, &sched, &mut r).unwrap();
    let b = denoise_step_with(&ZeroNet, &z, 1, &z, &sched, None).unwrap();
    assert_eq!(a, b);
    let c = conditional_denoise_step(&ZeroNet, &z, 2, &z, &sched, &mut r).unwrap();
    assert_ne!(c, denoise_step_with(&ZeroNet, &z, 2, &z, &sched, None).unwrap());
    assert!(conditional_denoise_step(&ZeroNet, &z, 11, &z, &sched, &mut r).is_err());
    assert!(conditional_denoise_step(&ZeroNet, &z, 0, &z, &sched, &mut r).is_err());
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn forward_noising_monte_carlo_moments() {
    let sched = NoiseSchedule::linear(200, 1e-4, 0.02).unwrap();
    let n = 100_000;
    let z0 = Tensor::full(&[n, 1], 1.7);
    let eps = gaussian(n, 1, 3);
    for t in [1, 50, 200] {
        let zt = forward_noising(&z0, t, &eps, &sched).unwrap();
        let ab = sched.alpha_bar(t).unwrap();
        let (m, v) = moments(zt.data());
        let se = ((1.0 - ab) / n as f64).sqrt();
        assert!((m - ab.sqrt() * 1.7).abs() < 3.0 * se, "t={t}: {m}");
        assert!((v / (1.0 - ab) - 1.0).abs() < 0.02, "t={t}: {v}");
    }
}

#[test]
fn closed_form_matches_iterated_chain() {
    let sched = NoiseSchedule::linear(10, 0.05, 0.3).unwrap();
    let n = 100_000;
    let z0 = 0.8;
    let mut r = rng::stream(6, &[]);
    let mut iter = vec![z0; n];
    for t in 1..=10 {
        let (a, b) = (sched.alpha(t).unwrap(), sched.beta(t).unwrap());
        let noise = normals(&mut r, n);
        for (z, e) in iter.iter_mut().zip(noise) {
            *z = a.sqrt() * *z + b.sqrt() * e;
        }
    }
    let closed = forward_noising(&Tensor::full(&[n, 1], z0), 10, &gaussian(n, 1, 7), &sched).unwrap();
    let (mi, vi) = moments(&iter);
    let (mc, vc) = moments(closed.data());
    let ab = sched.alpha_bar(10).unwrap();
    let se = ((1.0 - ab) / n as f64).sqrt();
    assert!((mi - mc).abs() < 4.0 * se, "{mi} vs {mc}");
    assert!((vi / vc - 1.0).abs() < 0.03, "{vi} vs {vc}");
    assert!((mi - ab.sqrt() * z0).abs() < 3.0 * se);
}

#[test]
fn diffusion_loss_gradient_matches_finite_differences() {
    let sched = NoiseSchedule::linear(20, 1e-4, 0.02).unwrap();
    let net = small_net(3);
    let z0 = gaussian(8, 3, 1);
    let cond = gaussian(8, 3, 2);
    let mut r = rng::stream(3, &[]);
    let draws = draw_noise(&mut r, 8, 3, 20);
    let report = gradient_check(&net.store, 1e-5, |g, s| {
        diffusion_loss_graph(&net, g, s, &z0, &cond, &draws, &sched)
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

fn bank_from(z1: Tensor, z2: Tensor, mask: &MaskMatrix) -> LatentBank {
    let status = (0..mask.n())
        .flat_map(|i| (0..2).map(move |v| (i, v)))
        .map(|(i, v)| if mask.observed(i, v) { LatentStatus::Observed } else { LatentStatus::Absent })
        .collect();
    LatentBank::new(vec![z1, z2], status).unwrap()
}

fn tiny_cfg() -> DiffusionConfig {
    DiffusionConfig {
        steps: 20,
        net: DenoiserConfig {
            time_dim: 4,
            tokens: 2,
            token_width: 4,
            hidden: 8,
            blocks: 1,
        },
        ..DiffusionConfig::default()
    }
}

fn quick_train() -> TrainConfig {
    TrainConfig {
        epochs: 3,
        batch_size: 16,
        optimizer: AdamW::with_lr(1e-3),
    }
}

#[test]
fn training_needs_complete_rows() {
    let mask = generate_mask(10, 2, 1.0, 1).unwrap();
    let bank = bank_from(gaussian(10, 2, 1), gaussian(10, 2, 2), &mask);
    let mut model = DiffusionModel::new(2, 2, &tiny_cfg(), 1).unwrap();
    assert!(matches!(model.train(&bank, &quick_train(), 1), Err(Error::Precondition(_))));
}

#[test]
fn training_is_deterministic() {
    let mask = generate_mask(40, 2, 0.5, 1).unwrap();
    let bank = bank_from(gaussian(40, 2, 1), gaussian(40, 2, 2), &mask);
    let run = || {
        let mut m = DiffusionModel::new(2, 2, &tiny_cfg(), 4).unwrap();
        let curve = m.train(&bank, &quick_train(), 7).unwrap();
        (curve, m.checkpoint())
    };
    let (c1, k1) = run();
    let (c2, k2) = run();
    assert_eq!(c1, c2);
    assert_eq!(k1, k2);
    assert_eq!(c1.len(), 3);
}

#[test]
fn directions_have_separate_parameters() {
    let m = DiffusionModel::new(2, 3, &tiny_cfg(), 4).unwrap();
    assert_eq!(m.directions(), vec![(0, 1), (1, 0)]);
    let a = m.net(0, 1).unwrap();
    let b = m.net(1, 0).unwrap();
    assert!(a.store.named_values().all(|(n, _)| n.starts_with("net0to1.")));
    assert!(b.store.named_values().all(|(n, _)| n.starts_with("net1to0.")));
    assert!(m.net(0, 0).is_err());
}

#[test]
fn complete_mask_is_a_no_op() {
    let bank = bank_from(gaussian(12, 2, 1), gaussian(12, 2, 2), &MaskMatrix::full(12, 2));
    let m = DiffusionModel::new(2, 2, &tiny_cfg(), 4).unwrap();
    assert_eq!(m.impute(&bank, 1).unwrap(), bank);
}

#[test]
fn imputation_bookkeeping_and_determinism() {
    let mask = generate_mask(150, 2, 0.6, 3).unwrap();
    let bank = bank_from(gaussian(150, 2, 1), gaussian(150, 2, 2), &mask);
    let mut m = DiffusionModel::new(2, 2, &tiny_cfg(), 4).unwrap();
    assert!(matches!(m.impute(&bank, 1), Err(Error::Precondition(_))));
    m.train(&bank, &quick_train(), 7).unwrap();
    let out = m.impute(&bank, 1).unwrap();
    assert_eq!(out.count(LatentStatus::Imputed), mask.total_missing());
    assert!(!out.has_absent());
    for i in 0..150 {
        for v in 0..2 {
            if mask.observed(i, v) {
                assert_eq!(out.view(v).row(i), bank.view(v).row(i));
            }
        }
    }
    assert_eq!(m.impute(&bank, 1).unwrap(), out);
    assert_eq!(par::with_sequential(|| m.impute(&bank, 1).unwrap()), out);
    assert_ne!(m.impute(&bank, 2).unwrap(), out);

    let ck = m.checkpoint();
    let mut fresh = DiffusionModel::new(2, 2, &tiny_cfg(), 99).unwrap();
    fresh.restore(&ck).unwrap();
    assert!(fresh.is_trained());
    assert_eq!(fresh.impute(&bank, 1).unwrap(), out);
}

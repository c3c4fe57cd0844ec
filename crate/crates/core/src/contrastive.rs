//! Clustering heads on completed latents: spectral contrastive loss on the
//! feature head, cluster-level contrastive loss with an entropy penalty on
//! the assignment head, and argmax-of-sum prediction.

use crate::autoencoder::{LatentBank, TrainConfig, DIVERGENCE_LIMIT};
use crate::error::{Error, Result};
use crate::nn::{Activation, Checkpoint, Graph, Init, Linear, Mlp, MlpSpec, OutputActivation, ParamStore, Tensor, Var};
use crate::rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadConfig {
    pub mid: usize,
    pub feature_dim: usize,
    pub temperature: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            mid: 64,
            feature_dim: 32,
            temperature: 0.5,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mid == 0 || self.feature_dim == 0 {
            return Err(Error::invalid("head widths must be positive"));
        }
        check_temperature(self.temperature)
    }
}

fn check_temperature(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("temperature must be positive, got {tau}")));
    }
    Ok(())
}

/// View-specific MLPs into a shared trunk, followed by two parallel heads:
/// unit-norm features `H` and softmax assignments `Ŷ`.
#[derive(Debug, Clone)]
pub struct ClusterHeads {
    pub store: ParamStore,
    pub cfg: HeadConfig,
    pub k: usize,
    views: Vec<Mlp>,
    trunk: Mlp,
    feature: Linear,
    assign: Linear,
}

impl ClusterHeads {
    pub fn new(num_views: usize, latent_dim: usize, k: usize, cfg: &HeadConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if k < 2 {
            return Err(Error::invalid(format!("need at least 2 clusters, got {k}")));
        }
        let mut store = ParamStore::new();
        let layer = |a, b| MlpSpec {
            widths: vec![a, b],
            activations: vec![Activation::Relu],
            output: OutputActivation::Identity,
        };
        let views = (0..num_views)
            .map(|v| Mlp::new(&mut store, &format!("heads.view{v}"), layer(latent_dim, cfg.mid), seed))
            .collect::<Result<Vec<_>>>()?;
        let trunk = Mlp::new(&mut store, "heads.trunk", layer(cfg.mid, cfg.mid), seed)?;
        let feature = Linear::new(&mut store, "heads.feature", cfg.mid, cfg.feature_dim, true, Init::Xavier, seed)?;
        let assign = Linear::new(&mut store, "heads.assign", cfg.mid, k, true, Init::Xavier, seed)?;
        Ok(ClusterHeads {
            store,
            cfg: cfg.clone(),
            k,
            views,
            trunk,
            feature,
            assign,
        })
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    /// `(H^v, Ŷ^v)` on the graph.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, v: usize, z: Var) -> Result<(Var, Var)> {
        let x = self.views[v].forward(g, store, z)?;
        let x = self.trunk.forward(g, store, x)?;
        let h = self.feature.forward(g, store, x)?;
        let h = g.l2_normalize_rows(h)?;
        let y = self.assign.forward(g, store, x)?;
        let y = g.softmax_rows(y)?;
        Ok((h, y))
    }

    /// Evaluates `(H^v, Ŷ^v)` for every view of the bank.
    pub fn outputs(&self, bank: &LatentBank) -> Result<Vec<(Tensor, Tensor)>> {
        self.check_bank(bank)?;
        (0..self.num_views())
            .map(|v| {
                let mut g = Graph::new();
                let z = g.input(bank.view(v).clone())?;
                let (h, y) = self.forward(&mut g, &self.store, v, z)?;
                Ok((g.value(h).clone(), g.value(y).clone()))
            })
            .collect()
    }

    pub fn assignments(&self, bank: &LatentBank) -> Result<Vec<Tensor>> {
        Ok(self.outputs(bank)?.into_iter().map(|(_, y)| y).collect())
    }

    /// `L_H + L_C` summed over view pairs, for latents `zs` (one per view).
    pub fn loss_graph(&self, g: &mut Graph, store: &ParamStore, zs: &[Tensor]) -> Result<Var> {
        let mut outs = Vec::with_capacity(zs.len());
        for (v, z) in zs.iter().enumerate() {
            let z = g.input(z.clone())?;
            outs.push(self.forward(g, store, v, z)?);
        }
        let mut total: Option<Var> = None;
        for a in 0..outs.len() {
            for b in a + 1..outs.len() {
                let l = clustering_loss_graph(g, outs[a], outs[b], self.cfg.temperature)?;
                total = Some(match total {
                    Some(t) => g.add(t, l)?,
                    None => l,
                });
            }
        }
        total.ok_or_else(|| Error::invalid("clustering needs at least two views"))
    }

    fn check_bank(&self, bank: &LatentBank) -> Result<()> {
        if bank.num_views() != self.num_views() {
            return Err(Error::shape(
                "ClusterHeads",
                format!("{} views, heads built for {}", bank.num_views(), self.num_views()),
            ));
        }
        if bank.has_absent() {
            return Err(Error::Precondition(format!(
                "{} latents are still absent; complete the bank first",
                bank.count(crate::autoencoder::LatentStatus::Absent)
            )));
        }
        Ok(())
    }

    /// Stage 3: minibatch AdamW on the clustering objective over every row
    /// of the completed bank. A trailing batch of one row is dropped.
    pub fn train(&mut self, bank: &LatentBank, cfg: &TrainConfig, seed: u64) -> Result<Vec<f64>> {
        cfg.validate()?;
        self.check_bank(bank)?;
        if bank.n() < 2 {
            return Err(Error::Precondition("clustering needs at least two rows".into()));
        }
        let mut order: Vec<usize> = (0..bank.n()).collect();
        let mut curve = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            let mut r = rng::stream(seed, &["stage3".into(), epoch.into()]);
            order.shuffle(&mut r);
            let (mut total, mut rows) = (0.0, 0usize);
            for batch in order.chunks(cfg.batch_size.max(2)) {
                if batch.len() < 2 {
                    continue;
                }
                let zs: Vec<Tensor> = (0..bank.num_views()).map(|v| bank.view(v).gather_rows(batch)).collect();
                let mut g = Graph::new();
                let loss = self.loss_graph(&mut g, &self.store, &zs)?;
                let value = g.value(loss).item();
                if value.abs() > DIVERGENCE_LIMIT {
                    return Err(Error::Diverged {
                        epoch,
                        loss: value,
                        limit: DIVERGENCE_LIMIT,
                    });
                }
                let grads = g.backward(loss)?.params();
                cfg.optimizer.step(&mut self.store, &grads)?;
                total += value * batch.len() as f64;
                rows += batch.len();
            }
            curve.push(total / rows as f64);
            log::debug!("stage3 epoch {epoch}: {:.6}", curve[epoch]);
        }
        Ok(curve)
    }

    /// Final loss over the full bank in one batch.
    pub fn full_loss(&self, bank: &LatentBank) -> Result<f64> {
        self.check_bank(bank)?;
        let zs: Vec<Tensor> = (0..bank.num_views()).map(|v| bank.view(v).clone()).collect();
        let mut g = Graph::new();
        let l = self.loss_graph(&mut g, &self.store, &zs)?;
        Ok(g.value(l).item())
    }

    pub fn predict(&self, bank: &LatentBank) -> Result<Vec<usize>> {
        predict(&self.assignments(bank)?)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_store(&self.store)
    }

    pub fn restore(&mut self, ck: &Checkpoint) -> Result<()> {
        ck.restore_into(&mut self.store)
    }
}

/// Spectral contrastive loss on the graph:
/// `−(2/n) Σ_i H¹_i·H²_i + 1/(n(n−1)) Σ_{i≠j} (H¹_i·H²_j)²`.
pub fn spectral_loss_graph(g: &mut Graph, h1: Var, h2: Var) -> Result<Var> {
    let n = g.value(h1).rows();
    if n < 2 {
        return Err(Error::invalid(format!("spectral loss needs at least 2 rows, got {n}")));
    }
    let s = g.matmul_nt(h1, h2)?;
    let eye = Tensor::identity(n);
    let off = eye.map(|x| 1.0 - x);
    let diag = g.mul_const(s, eye)?;
    let pos = g.sum(diag)?;
    let sq = g.square(s)?;
    let offsq = g.mul_const(sq, off)?;
    let neg = g.sum(offsq)?;
    let pos = g.scale(pos, -2.0 / n as f64)?;
    let neg = g.scale(neg, 1.0 / (n * (n - 1)) as f64)?;
    g.add(pos, neg)
}

/// Cluster-level contrast between the normalized columns of `Ŷ¹`, `Ŷ²`
/// plus `Σ_m Σ_j p^m_j log p^m_j` over batch-mean assignments.
pub fn category_loss_graph(g: &mut Graph, y1: Var, y2: Var, temperature: f64) -> Result<Var> {
    check_temperature(temperature)?;
    let (s1, s2) = (g.value(y1).shape().to_vec(), g.value(y2).shape().to_vec());
    if s1 != s2 {
        return Err(Error::shape("category_loss", format!("{s1:?} vs {s2:?}")));
    }
    let k = s1[1];
    if k < 2 {
        return Err(Error::invalid("category loss needs at least 2 clusters"));
    }
    let inv_tau = 1.0 / temperature;
    let t1 = g.transpose(y1)?;
    let q1 = g.l2_normalize_rows(t1)?;
    let t2 = g.transpose(y2)?;
    let q2 = g.l2_normalize_rows(t2)?;
    let eye = Tensor::identity(k);
    let off = eye.map(|x| 1.0 - x);

    let cross = g.matmul_nt(q1, q2)?;
    let cross = g.mul_const(cross, eye)?;
    let pos = g.sum(cross)?;
    let pos = g.scale(pos, 2.0 * inv_tau)?;

    let mut denoms = Vec::new();
    for q in [q1, q2] {
        let s = g.matmul_nt(q, q)?;
        let s = g.scale(s, inv_tau)?;
        let e = g.exp(s)?;
        let e = g.mul_const(e, off.clone())?;
        let d = g.sum_rows(e)?;
        let d = g.log(d)?;
        denoms.push(g.sum(d)?);
    }
    let neg = g.add(denoms[0], denoms[1])?;
    let contrast = g.sub(neg, pos)?;
    let contrast = g.scale(contrast, 1.0 / k as f64)?;

    let mut total = contrast;
    for y in [y1, y2] {
        let p = g.mean_cols(y)?;
        let e = g.xlogx(p)?;
        let e = g.sum(e)?;
        total = g.add(total, e)?;
    }
    Ok(total)
}

/// `L_H + L_C` for one view pair given `(H, Ŷ)` nodes.
pub fn clustering_loss_graph(g: &mut Graph, a: (Var, Var), b: (Var, Var), temperature: f64) -> Result<Var> {
    let lh = spectral_loss_graph(g, a.0, b.0)?;
    let lc = category_loss_graph(g, a.1, b.1, temperature)?;
    g.add(lh, lc)
}

fn eval2(a: &Tensor, b: &Tensor, f: impl FnOnce(&mut Graph, Var, Var) -> Result<Var>) -> Result<f64> {
    let mut g = Graph::new();
    let (x, y) = (g.input(a.clone())?, g.input(b.clone())?);
    let l = f(&mut g, x, y)?;
    Ok(g.value(l).item())
}

pub fn spectral_loss(h1: &Tensor, h2: &Tensor) -> Result<f64> {
    if h1.shape() != h2.shape() {
        return Err(Error::shape("spectral_loss", format!("{:?} vs {:?}", h1.shape(), h2.shape())));
    }
    eval2(h1, h2, spectral_loss_graph)
}

pub fn category_loss(y1: &Tensor, y2: &Tensor, temperature: f64) -> Result<f64> {
    eval2(y1, y2, |g, a, b| category_loss_graph(g, a, b, temperature))
}

pub fn clustering_loss(h1: &Tensor, h2: &Tensor, y1: &Tensor, y2: &Tensor, temperature: f64) -> Result<f64> {
    Ok(spectral_loss(h1, h2)? + category_loss(y1, y2, temperature)?)
}

/// `argmax_j Σ_v Ŷ^v_ij`, lowest index on ties.
pub fn predict(assignments: &[Tensor]) -> Result<Vec<usize>> {
    let first = assignments.first().ok_or_else(|| Error::invalid("no assignment matrices"))?;
    if assignments.iter().any(|y| y.shape() != first.shape()) {
        return Err(Error::shape("predict", "assignment matrices differ in shape"));
    }
    Ok((0..first.rows())
        .map(|i| {
            let mut best = (0, f64::NEG_INFINITY);
            for j in 0..first.cols() {
                let s: f64 = assignments.iter().map(|y| y.get(i, j)).sum();
                if s > best.1 {
                    best = (j, s);
                }
            }
            best.0
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::LatentStatus;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use crate::metrics::acc;
    use crate::nn::{gradient_check, AdamW};

    fn m(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::matrix(rows, cols, data.to_vec())
    }

    #[test]
    fn spectral_orthonormal_rows() {
        let h = Tensor::identity(3);
        assert!((spectral_loss(&h, &h).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_identical_rows() {
        let h = m(4, 2, &[0.6, 0.8, 0.6, 0.8, 0.6, 0.8, 0.6, 0.8]);
        assert!((spectral_loss(&h, &h).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_swapped_pair() {
        let h1 = m(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let h2 = m(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((spectral_loss(&h1, &h2).unwrap() - 1.0).abs() < 1e-12);
        assert!(spectral_loss(&m(1, 2, &[1.0, 0.0]), &m(1, 2, &[1.0, 0.0])).is_err());
    }

    fn straight_line_category(y1: &Tensor, y2: &Tensor, tau: f64) -> f64 {
        let (n, k) = (y1.rows(), y1.cols());
        let col = |y: &Tensor, j: usize| -> Vec<f64> {
            let c: Vec<f64> = (0..n).map(|i| y.get(i, j)).collect();
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            c.iter().map(|x| x / norm).collect()
        };
        let s = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / tau;
        let mut contrast = 0.0;
        for j in 0..k {
            let (a, b) = (col(y1, j), col(y2, j));
            let num = s(&a, &b).exp();
            let d1: f64 = (0..k).filter(|&l| l != j).map(|l| s(&a, &col(y1, l)).exp()).sum();
            let d2: f64 = (0..k).filter(|&l| l != j).map(|l| s(&b, &col(y2, l)).exp()).sum();
            contrast += (num / d1).ln() + (num / d2).ln();
        }
        let mut ent = 0.0;
        for y in [y1, y2] {
            for j in 0..k {
                let p = (0..n).map(|i| y.get(i, j)).sum::<f64>() / n as f64;
                if p > 0.0 {
                    ent += p * p.ln();
                }
            }
        }
        -contrast / k as f64 + ent
    }

    #[test]
    fn category_loss_matches_straight_line() {
        let y1 = m(2, 2, &[0.7, 0.3, 0.2, 0.8]);
        let y2 = m(2, 2, &[0.9, 0.1, 0.4, 0.6]);
        let got = category_loss(&y1, &y2, 0.5).unwrap();
        assert!((got - straight_line_category(&y1, &y2, 0.5)).abs() < 1e-12);
        let y3 = m(3, 3, &[0.5, 0.3, 0.2, 0.1, 0.1, 0.8, 0.3, 0.3, 0.4]);
        let y4 = m(3, 3, &[0.6, 0.2, 0.2, 0.2, 0.2, 0.6, 0.1, 0.8, 0.1]);
        assert!((category_loss(&y3, &y4, 0.7).unwrap() - straight_line_category(&y3, &y4, 0.7)).abs() < 1e-12);
    }

    #[test]
    fn entropy_term_extremes() {
        let k = 4;
        let ent = |y: &Tensor| {
            let mut g = Graph::new();
            let v = g.input(y.clone()).unwrap();
            let p = g.mean_cols(v).unwrap();
            let e = g.xlogx(p).unwrap();
            let s = g.sum(e).unwrap();
            g.value(s).item()
        };
        let uniform = Tensor::full(&[5, k], 0.25);
        assert!((2.0 * ent(&uniform) + 2.0 * (k as f64).ln()).abs() < 1e-12);
        let collapsed = Tensor::matrix(3, k, (0..12).map(|i| if i % k == 0 { 1.0 } else { 0.0 }).collect());
        assert_eq!(ent(&collapsed), 0.0);
    }

    #[test]
    fn clustering_loss_is_additive() {
        let h = Tensor::identity(4);
        let y = m(4, 2, &[0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]);
        let total = clustering_loss(&h, &h, &y, &y, 0.5).unwrap();
        let expect = spectral_loss(&h, &h).unwrap() + category_loss(&y, &y, 0.5).unwrap();
        assert_eq!(total, expect);
        assert!(category_loss(&y, &y, 0.0).is_err());
        assert!(category_loss(&y, &y, -1.0).is_err());
    }

    #[test]
    fn spectral_lower_bound_on_random_unit_rows() {
        let mut r = rng::stream(1, &[]);
        use rand::Rng;
        for _ in 0..200 {
            let n = r.random_range(2..7);
            let d = r.random_range(1..5);
            let unit = |r: &mut rng::Rng| {
                let mut t = Tensor::matrix(n, d, (0..n * d).map(|_| r.random_range(-1.0..1.0)).collect());
                for i in 0..n {
                    let norm = t.row(i).iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
                    t.row_mut(i).iter_mut().for_each(|x| *x /= norm);
                }
                t
            };
            let (a, b) = (unit(&mut r), unit(&mut r));
            assert!(spectral_loss(&a, &b).unwrap() >= -2.0 - 1e-12);
        }
    }

    #[test]
    fn predict_rules() {
        let y1 = m(2, 2, &[0.9, 0.1, 0.5, 0.5]);
        let y2 = m(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert_eq!(predict(&[y1.clone(), y2.clone()]).unwrap(), vec![0, 0]);
        let scaled: Vec<Tensor> = [y1.clone(), y2.clone()].iter().map(|t| t.map(|x| 3.0 * x)).collect();
        assert_eq!(predict(&scaled).unwrap(), predict(&[y1, y2]).unwrap());
    }

    #[test]
    fn predict_matches_brute_force_scan() {
        use rand::Rng;
        let mut r = rng::stream(2, &[]);
        let y1 = Tensor::matrix(100, 4, (0..400).map(|_| r.random_range(0.0..1.0)).collect());
        let y2 = Tensor::matrix(100, 4, (0..400).map(|_| r.random_range(0.0..1.0)).collect());
        let got = predict(&[y1.clone(), y2.clone()]).unwrap();
        for i in 0..100 {
            let sums: Vec<f64> = (0..4).map(|j| y1.get(i, j) + y2.get(i, j)).collect();
            let best = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(got[i], sums.iter().position(|&s| s == best).unwrap());
        }
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let mut heads = ClusterHeads::new(2, 3, 3, &HeadConfig { mid: 5, feature_dim: 4, temperature: 0.5 }, 3).unwrap();
        // keep every row away from the zero vector, where normalization is not smooth
        let biases: Vec<_> = heads.store.ids().filter(|&id| heads.store.name(id).ends_with(".b")).collect();
        for id in biases {
            let t = heads.store.value_mut(id);
            for (j, x) in t.data_mut().iter_mut().enumerate() {
                *x = 0.3 + 0.1 * j as f64;
            }
        }
        let zs: Vec<Tensor> = (0..2)
            .map(|v| Tensor::matrix(8, 3, (0..24).map(|i| ((i * (v + 2)) as f64 * 0.37).sin()).collect()))
            .collect();
        let report = gradient_check(&heads.store, 1e-5, |g, s| heads.loss_graph(g, s, &zs)).unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
        let spectral = gradient_check(&heads.store, 1e-5, |g, s| {
            let a = g.input(zs[0].clone())?;
            let b = g.input(zs[1].clone())?;
            let (h1, _) = heads.forward(g, s, 0, a)?;
            let (h2, _) = heads.forward(g, s, 1, b)?;
            spectral_loss_graph(g, h1, h2)
        })
        .unwrap();
        assert!(spectral.max_rel_error < 1e-4, "{spectral:?}");
    }

    #[test]
    fn outputs_satisfy_invariants() {
        let heads = ClusterHeads::new(2, 3, 4, &HeadConfig::default(), 3).unwrap();
        let z = Tensor::matrix(6, 3, (0..18).map(|i| (i as f64).cos()).collect());
        let bank = LatentBank::new(vec![z.clone(), z], vec![LatentStatus::Observed; 12]).unwrap();
        for (h, y) in heads.outputs(&bank).unwrap() {
            for i in 0..6 {
                assert!((h.row(i).iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-9);
                assert!((y.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        assert!(ClusterHeads::new(2, 3, 1, &HeadConfig::default(), 3).is_err());
    }

    #[test]
    fn absent_latents_are_rejected() {
        let mut heads = ClusterHeads::new(2, 2, 2, &HeadConfig::default(), 3).unwrap();
        let z = Tensor::zeros(&[4, 2]);
        let mut status = vec![LatentStatus::Observed; 8];
        status[3] = LatentStatus::Absent;
        let bank = LatentBank::new(vec![z.clone(), z], status).unwrap();
        assert!(matches!(heads.train(&bank, &TrainConfig::default(), 1), Err(Error::Precondition(_))));
    }

    fn clean_bank() -> (LatentBank, Vec<usize>) {
        let data = generate_synthetic(&SyntheticSpec {
            k: 4,
            n: 400,
            latent_dim: 4,
            view_dims: vec![8, 8],
            noise_std: 0.0,
            nuisance_dim: 0,
            cluster_std: 0.3,
            seed: 5,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let labels = data.labels().unwrap().to_vec();
        let bank = LatentBank::new(data.views().to_vec(), vec![LatentStatus::Observed; 800]).unwrap();
        (bank, labels)
    }

    #[test]
    fn separable_latents_are_clustered() {
        let (bank, labels) = clean_bank();
        let mut heads = ClusterHeads::new(2, 8, 4, &HeadConfig::default(), 1).unwrap();
        let cfg = TrainConfig {
            epochs: 40,
            batch_size: 128,
            optimizer: AdamW::with_lr(2e-3),
        };
        let curve = heads.train(&bank, &cfg, 2).unwrap();
        assert!(curve.last().unwrap() < &curve[0]);
        let pred = heads.predict(&bank).unwrap();
        let score = acc(&labels, &pred).unwrap();
        assert!(score >= 0.95, "acc {score}");
        let y = heads.assignments(&bank).unwrap();
        let p: Vec<f64> = (0..4).map(|j| (0..400).map(|i| y[0].get(i, j)).sum::<f64>() / 400.0).collect();
        let entropy: f64 = -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>();
        assert!(entropy > 0.0);

        let mut again = ClusterHeads::new(2, 8, 4, &HeadConfig::default(), 1).unwrap();
        assert_eq!(again.train(&bank, &cfg, 2).unwrap(), curve);
        assert_eq!(again.predict(&bank).unwrap(), pred);
    }
}

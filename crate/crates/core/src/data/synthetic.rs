use super::MultiViewDataset;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Parameters of the two-view Gaussian-cluster generator.
///
/// Each sample belongs to one of `k` equidistant centers (pairwise distance
/// `separation`). Every view gets its own latent point around that center,
/// whose deviation mixes a draw shared by all views (variance fraction
/// `shared_fraction`) with a view-private draw. View `v` is a fixed random
/// linear map of its latent, plus an optional view-private nuisance signal,
/// plus isotropic noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub k: usize,
    pub n: usize,
    pub latent_dim: usize,
    pub view_dims: Vec<usize>,
    /// Standard deviation of the isotropic per-view noise.
    pub noise_std: f64,
    /// Pairwise distance between cluster centers.
    pub separation: f64,
    /// Spread of latent points around their center.
    pub cluster_std: f64,
    /// Fraction of the within-cluster variance shared across views.
    pub shared_fraction: f64,
    /// Dimension of each view's private nuisance factor (0 disables it).
    pub nuisance_dim: usize,
    pub nuisance_std: f64,
    /// Scale of a fixed per-view mean added to every sample, so that a
    /// zero-filled view does not coincide with the data mean.
    pub offset: f64,
    /// Use identity maps instead of random ones (needs equal dims).
    pub identity_maps: bool,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            k: 4,
            n: 1000,
            latent_dim: 4,
            view_dims: vec![20, 20],
            noise_std: 0.5,
            separation: 6.0,
            cluster_std: 1.0,
            shared_fraction: 0.5,
            nuisance_dim: 4,
            nuisance_std: 2.5,
            offset: 2.0,
            identity_maps: false,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid("synthetic data needs k >= 2"));
        }
        if self.k > self.n {
            return Err(Error::invalid(format!("k = {} exceeds n = {}", self.k, self.n)));
        }
        if self.view_dims.len() < 2 || self.view_dims.contains(&0) {
            return Err(Error::invalid(format!("bad view dims {:?}", self.view_dims)));
        }
        if self.latent_dim < self.k {
            return Err(Error::invalid(format!(
                "latent_dim {} must be at least k = {} to hold equidistant centers",
                self.latent_dim, self.k
            )));
        }
        if self.identity_maps && self.view_dims.iter().any(|&d| d != self.latent_dim) {
            return Err(Error::invalid("identity maps need view dims equal to latent_dim"));
        }
        if !(0.0..=1.0).contains(&self.shared_fraction) {
            return Err(Error::invalid(format!("shared_fraction = {} must lie in [0, 1]", self.shared_fraction)));
        }
        for (name, x) in [
            ("noise_std", self.noise_std),
            ("separation", self.separation),
            ("cluster_std", self.cluster_std),
            ("nuisance_std", self.nuisance_std),
            ("offset", self.offset),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::invalid(format!("{name} = {x} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

fn gaussian(r: &mut rng::Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| scale * { let s: f64 = StandardNormal.sample(r); s })
            .collect::<Vec<f64>>(),
    )
}

/// `k` points with pairwise distance `separation`, embedded in `dim ≥ k`
/// dimensions by a random orthonormal map.
fn simplex_centers(k: usize, dim: usize, separation: f64, r: &mut rng::Rng) -> Tensor {
    let scale = separation / std::f64::consts::SQRT_2;
    let mut vertices = Tensor::zeros(&[k, k]);
    for j in 0..k {
        for c in 0..k {
            let e = if c == j { 1.0 } else { 0.0 };
            vertices.set(j, c, scale * (e - 1.0 / k as f64));
        }
    }
    let g = gaussian(r, dim, k, 1.0);
    let q = DMatrix::from_row_slice(dim, k, g.data()).qr().q();
    // q: dim × k with orthonormal columns
    let qt = Tensor::matrix(
        k,
        dim,
        (0..k)
            .flat_map(|c| (0..dim).map(move |row| (c, row)))
            .map(|(c, row)| q[(row, c)])
            .collect(),
    );
    vertices.matmul(&qt).expect("k × k · k × dim")
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultiViewDataset> {
    spec.validate()?;
    let (k, n, d) = (spec.k, spec.n, spec.latent_dim);
    let mut centers_rng = rng::stream(spec.seed, &["centers".into()]);
    let centers = simplex_centers(k, d, spec.separation, &mut centers_rng);

    let mut label_rng = rng::stream(spec.seed, &["labels".into()]);
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(&mut label_rng);

    let mut latent_rng = rng::stream(spec.seed, &["latent".into()]);
    let shared = gaussian(&mut latent_rng, n, d, spec.cluster_std * spec.shared_fraction.sqrt());

    let mut views = Vec::with_capacity(spec.view_dims.len());
    for (v, &dv) in spec.view_dims.iter().enumerate() {
        let mut r = rng::stream(spec.seed, &["latent".into(), v.into()]);
        let mut latent = gaussian(&mut r, n, d, spec.cluster_std * (1.0 - spec.shared_fraction).sqrt());
        latent.add_assign(&shared);
        for (i, &l) in labels.iter().enumerate() {
            for (x, c) in latent.row_mut(i).iter_mut().zip(centers.row(l)) {
                *x += c;
            }
        }
        let map = if spec.identity_maps {
            Tensor::identity(d)
        } else {
            let mut r = rng::stream(spec.seed, &["map".into(), v.into()]);
            gaussian(&mut r, d, dv, 1.0 / (d as f64).sqrt())
        };
        let mut x = latent.matmul(&map)?;
        if spec.nuisance_dim > 0 && spec.nuisance_std > 0.0 {
            let mut r = rng::stream(spec.seed, &["nuisance".into(), v.into()]);
            let basis = gaussian(&mut r, spec.nuisance_dim, dv, 1.0 / (spec.nuisance_dim as f64).sqrt());
            let factors = gaussian(&mut r, n, spec.nuisance_dim, spec.nuisance_std);
            x.add_assign(&factors.matmul(&basis)?);
        }
        if spec.offset > 0.0 {
            let mut r = rng::stream(spec.seed, &["offset".into(), v.into()]);
            let shift = gaussian(&mut r, 1, dv, spec.offset);
            for i in 0..n {
                for (x, s) in x.row_mut(i).iter_mut().zip(shift.data()) {
                    *x += s;
                }
            }
        }
        if spec.noise_std > 0.0 {
            let mut r = rng::stream(spec.seed, &["noise".into(), v.into()]);
            x.add_assign(&gaussian(&mut r, n, dv, spec.noise_std));
        }
        views.push(x);
    }
    MultiViewDataset::new(views, Some(labels))
}

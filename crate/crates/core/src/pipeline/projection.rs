use crate::error::{Error, Result};
use crate::nn::Tensor;
use nalgebra::{DMatrix, SymmetricEigen};
use std::fmt::Write as _;
use std::path::Path;

/// Coordinates on the top two principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `n × 2`
    pub coords: Tensor,
    /// Share of total variance carried by each component.
    pub explained: [f64; 2],
}

pub fn pca_2d(x: &Tensor) -> Result<Projection> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::invalid(format!("projection needs at least 2 rows, got {n}")));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("projection input".into()));
    }
    let mut centered = DMatrix::from_row_slice(n, d, x.data());
    for j in 0..d {
        let mean = centered.column(j).mean();
        centered.column_mut(j).add_scalar_mut(-mean);
    }
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0)).sum();
    let mut coords = Tensor::zeros(&[n, 2]);
    let mut explained = [0.0; 2];
    if total <= 1e-12 * (1.0 + centered.norm_squared()) {
        return Ok(Projection { coords, explained });
    }
    for (c, &idx) in order.iter().take(2).enumerate() {
        let mut axis = eig.eigenvectors.column(idx).into_owned();
        let pivot = axis.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            axis = -axis;
        }
        explained[c] = eig.eigenvalues[idx].max(0.0) / total;
        let proj = &centered * axis;
        for i in 0..n {
            coords.set(i, c, proj[i]);
        }
    }
    Ok(Projection { coords, explained })
}

/// Writes `x,y,label` rows; the label column is empty without labels.
pub fn write_projection_csv(path: &Path, p: &Projection, labels: Option<&[usize]>) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != p.coords.rows() {
            return Err(Error::shape("projection", format!("{} labels for {} rows", l.len(), p.coords.rows())));
        }
    }
    let mut out = String::from("x,y,label\n");
    for i in 0..p.coords.rows() {
        let label = labels.map(|l| l[i].to_string()).unwrap_or_default();
        writeln!(out, "{},{},{}", p.coords.get(i, 0), p.coords.get(i, 1), label).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn rank_one_data() {
        let x = Tensor::matrix(5, 3, (0..15).map(|i| ((i / 3) as f64) * [1.0, 2.0, -1.0][i % 3]).collect());
        let p = pca_2d(&x).unwrap();
        assert!((p.explained[0] - 1.0).abs() < 1e-12);
        assert!(p.explained[1].abs() < 1e-12);
        assert_eq!(p.coords.shape(), &[5, 2]);
    }

    #[test]
    fn constant_data() {
        let p = pca_2d(&Tensor::full(&[4, 3], 2.5)).unwrap();
        assert_eq!(p.explained, [0.0, 0.0]);
        assert!(p.coords.data().iter().all(|&v| v == 0.0));
        assert!(pca_2d(&Tensor::zeros(&[1, 3])).is_err());
    }

    #[test]
    fn isotropic_spectrum() {
        let (n, d) = (10_000, 8);
        let mut r = rng::stream(1, &[]);
        let x = Tensor::matrix(n, d, (0..n * d).map(|_| -> f64 { StandardNormal.sample(&mut r) }).collect());
        let p = pca_2d(&x).unwrap();
        let share = 2.0 / d as f64;
        assert!(((p.explained[0] + p.explained[1]) / share - 1.0).abs() < 0.2, "{:?}", p.explained);
        for e in p.explained {
            assert!((e * d as f64 - 1.0).abs() < 0.2);
        }
    }

    #[test]
    fn csv_has_one_row_per_sample() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let x = Tensor::matrix(6, 2, (0..12).map(|i| (i as f64).sin()).collect());
        let p = pca_2d(&x).unwrap();
        write_projection_csv(&path, &p, Some(&[0, 1, 0, 1, 2, 2])).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().nth(5).unwrap().ends_with(",2"));
        assert!(write_projection_csv(&path, &p, Some(&[0])).is_err());
    }
}

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng as _;

/// Binary observability matrix: `M[i][v] = 1` iff view `v` of sample `i`
/// is observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskMatrix {
    n: usize,
    views: usize,
    bits: Vec<bool>,
}

impl MaskMatrix {
    pub fn full(n: usize, views: usize) -> Self {
        MaskMatrix {
            n,
            views,
            bits: vec![true; n * views],
        }
    }

    /// Reads a mask from an `n × V` 0/1 matrix. Every row must keep at
    /// least one view.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (n, views) = (t.rows(), t.cols());
        let mut bits = Vec::with_capacity(n * views);
        for &x in t.data() {
            match x {
                1.0 => bits.push(true),
                0.0 => bits.push(false),
                other => return Err(Error::invalid(format!("mask entry {other} is not 0 or 1"))),
            }
        }
        let m = MaskMatrix { n, views, bits };
        if let Some(i) = (0..n).find(|&i| m.row_sum(i) == 0) {
            return Err(Error::invalid(format!("mask row {i} observes no view")));
        }
        Ok(m)
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::matrix(
            self.n,
            self.views,
            self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_views(&self) -> usize {
        self.views
    }

    pub fn observed(&self, i: usize, v: usize) -> bool {
        self.bits[i * self.views + v]
    }

    pub fn set(&mut self, i: usize, v: usize, observed: bool) {
        self.bits[i * self.views + v] = observed;
    }

    pub fn row_sum(&self, i: usize) -> usize {
        self.bits[i * self.views..(i + 1) * self.views]
            .iter()
            .filter(|&&b| b)
            .count()
    }

    pub fn is_complete(&self, i: usize) -> bool {
        self.row_sum(i) == self.views
    }

    pub fn complete_rows(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.is_complete(i)).collect()
    }

    pub fn incomplete_count(&self) -> usize {
        (0..self.n).filter(|&i| !self.is_complete(i)).count()
    }

    pub fn missing_count(&self, v: usize) -> usize {
        (0..self.n).filter(|&i| !self.observed(i, v)).count()
    }

    pub fn total_missing(&self) -> usize {
        self.bits.iter().filter(|&&b| !b).count()
    }

    /// Realized missing rate (incomplete rows / n).
    pub fn missing_rate(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.incomplete_count() as f64 / self.n as f64
        }
    }

    /// `n × 1` column of 0/1 weights for view `v`.
    pub fn view_column(&self, v: usize) -> Vec<f64> {
        (0..self.n)
            .map(|i| if self.observed(i, v) { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Draws a mask with `round(eta · n)` incomplete rows. With two views each
/// incomplete row loses exactly one view and the lost view alternates, so
/// the per-view missing counts differ by at most one.
pub fn generate_mask(n: usize, views: usize, eta: f64, seed: u64) -> Result<MaskMatrix> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid(format!("missing rate {eta} outside [0, 1]")));
    }
    if views < 2 {
        return Err(Error::invalid("masks need at least two views"));
    }
    let incomplete = (eta * n as f64).round() as usize;
    let mut r = rng::stream(seed, &["mask".into()]);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    let first_view = r.random_range(0..views);

    let mut mask = MaskMatrix::full(n, views);
    for (j, &i) in order.iter().take(incomplete).enumerate() {
        if views == 2 {
            mask.set(i, (first_view + j) % 2, false);
        } else {
            // keep at least one view; the first dropped view rotates
            let drop = r.random_range(1..views);
            let mut vs: Vec<usize> = (0..views).collect();
            vs.rotate_left((first_view + j) % views);
            vs[1..].shuffle(&mut r);
            for &v in vs.iter().take(drop) {
                mask.set(i, v, false);
            }
        }
    }
    Ok(mask)
}

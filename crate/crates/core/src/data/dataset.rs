use super::MaskMatrix;
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// `V` aligned views of the same `n` samples, optionally labelled.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<Tensor>,
    labels: Option<Vec<usize>>,
}

impl MultiViewDataset {
    pub fn new(views: Vec<Tensor>, labels: Option<Vec<usize>>) -> Result<Self> {
        if views.len() < 2 {
            return Err(Error::invalid(format!(
                "a multi-view dataset needs at least 2 views, got {}",
                views.len()
            )));
        }
        let n = views[0].rows();
        for (v, t) in views.iter().enumerate() {
            if t.shape().len() != 2 {
                return Err(Error::shape("MultiViewDataset", format!("view {v} is not a matrix")));
            }
            if t.rows() != n {
                return Err(Error::shape(
                    "MultiViewDataset",
                    format!("view {v} has {} rows, view 0 has {n}", t.rows()),
                ));
            }
            if !t.is_finite() {
                return Err(Error::NonFinite(format!("features of view {v}")));
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::shape(
                    "MultiViewDataset",
                    format!("{} labels for {n} samples", l.len()),
                ));
            }
        }
        Ok(MultiViewDataset { views, labels })
    }

    pub fn n(&self) -> usize {
        self.views[0].rows()
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn view(&self, v: usize) -> &Tensor {
        &self.views[v]
    }

    pub fn views(&self) -> &[Tensor] {
        &self.views
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(Tensor::cols).collect()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of distinct classes implied by the labels (max + 1).
    pub fn num_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }
}

/// Replaces every unobserved view row with zeros.
pub fn apply_zero_padding(data: &MultiViewDataset, mask: &MaskMatrix) -> Result<MultiViewDataset> {
    if mask.n() != data.n() || mask.num_views() != data.num_views() {
        return Err(Error::shape(
            "apply_zero_padding",
            format!(
                "mask {}x{} vs dataset {}x{}",
                mask.n(),
                mask.num_views(),
                data.n(),
                data.num_views()
            ),
        ));
    }
    let views = data
        .views
        .iter()
        .enumerate()
        .map(|(v, t)| {
            let mut out = t.clone();
            for i in 0..data.n() {
                if !mask.observed(i, v) {
                    out.row_mut(i).fill(0.0);
                }
            }
            out
        })
        .collect();
    MultiViewDataset::new(views, data.labels.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_mask;

    fn toy() -> MultiViewDataset {
        let a = Tensor::matrix(4, 2, (1..=8).map(f64::from).collect());
        let b = Tensor::matrix(4, 3, (1..=12).map(|i| -f64::from(i)).collect());
        MultiViewDataset::new(vec![a, b], Some(vec![0, 1, 0, 1])).unwrap()
    }

    #[test]
    fn rejects_mismatched_rows_and_single_view() {
        let a = Tensor::zeros(&[3, 2]);
        let b = Tensor::zeros(&[4, 2]);
        assert!(MultiViewDataset::new(vec![a.clone(), b], None).is_err());
        assert!(MultiViewDataset::new(vec![a], None).is_err());
    }

    #[test]
    fn zero_padding_with_full_mask_is_identity() {
        let d = toy();
        let m = MaskMatrix::full(4, 2);
        assert_eq!(apply_zero_padding(&d, &m).unwrap(), d);
    }

    #[test]
    fn zero_padding_clears_exactly_the_masked_rows() {
        let d = toy();
        let mut m = MaskMatrix::full(4, 2);
        m.set(2, 1, false);
        let p = apply_zero_padding(&d, &m).unwrap();
        assert_eq!(p.view(1).row(2), &[0.0, 0.0, 0.0]);
        assert_eq!(p.view(1).row(1), d.view(1).row(1));
        assert_eq!(p.view(0), d.view(0));

        let m = generate_mask(4, 2, 1.0, 3).unwrap();
        let p = apply_zero_padding(&d, &m).unwrap();
        let masked: f64 = (0..4)
            .flat_map(|i| (0..2).map(move |v| (i, v)))
            .filter(|&(i, v)| !m.observed(i, v))
            .map(|(i, v)| p.view(v).row(i).iter().map(|x| x.abs()).sum::<f64>())
            .sum();
        assert_eq!(masked, 0.0);
    }
}

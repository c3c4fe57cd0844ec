use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::{par, rng};
use rand::Rng as _;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centers: Tensor,
    pub inertia: f64,
    /// Inertia after every assignment step, in order.
    pub history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centers: &Tensor) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centers.rows() {
        let d = sq_dist(x, centers.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: the first center uniformly, then each next one with
/// probability proportional to its squared distance to the nearest chosen
/// center.
fn seed_centers(x: &Tensor, k: usize, r: &mut rng::Rng) -> Tensor {
    let n = x.rows();
    let mut chosen = vec![r.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = r.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            while d2[pick] == 0.0 {
                pick -= 1;
            }
            pick
        } else {
            // every remaining point coincides with a center
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[r.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    x.gather_rows(&chosen)
}

/// Lloyd's algorithm with k-means++ seeding. A cluster that loses all its
/// points is moved onto the point farthest from its current center.
pub fn kmeans(x: &Tensor, k: usize, seed: u64, max_iter: usize) -> Result<KMeansResult> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k-means with k = {k} on {n} points")));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("k-means input".into()));
    }
    let d = x.cols();
    let mut r = rng::stream(seed, &["kmeans".into()]);
    let mut centers = seed_centers(x, k, &mut r);
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        let assigned = par::map_indices(n, |i| nearest(x.row(i), &centers));
        let changed = assigned.iter().zip(&labels).any(|((c, _), &l)| *c != l);
        let inertia: f64 = assigned.iter().map(|(_, dist)| dist).sum();
        labels = assigned.iter().map(|(c, _)| *c).collect();
        history.push(inertia);
        if !changed || iterations >= max_iter {
            break;
        }
        iterations += 1;

        let mut sums = Tensor::zeros(&[k, d]);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, v) in sums.row_mut(labels[i]).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let cnt = counts[c] as f64;
                let row = sums.row(c).iter().map(|s| s / cnt).collect::<Vec<_>>();
                centers.row_mut(c).copy_from_slice(&row);
            }
        }
        for c in (0..k).filter(|&c| counts[c] == 0) {
            let far = (0..n)
                .max_by(|&a, &b| {
                    let da = sq_dist(x.row(a), centers.row(labels[a]));
                    let db = sq_dist(x.row(b), centers.row(labels[b]));
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("n >= k >= 1");
            let p = x.row(far).to_vec();
            centers.row_mut(c).copy_from_slice(&p);
            labels[far] = c;
        }
    }
    let inertia = *history.last().expect("at least one assignment");
    Ok(KMeansResult {
        labels,
        centers,
        inertia,
        history,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::acc;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(n_per: usize, centers: &[[f64; 2]], std: f64, seed: u64) -> (Tensor, Vec<usize>) {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (c, ctr) in centers.iter().enumerate() {
            for _ in 0..n_per {
                for v in ctr {
                    let e: f64 = StandardNormal.sample(&mut r);
                    data.push(v + std * e);
                }
                labels.push(c);
            }
        }
        (Tensor::matrix(labels.len(), 2, data), labels)
    }

    #[test]
    fn separable_blobs_split_perfectly() {
        let (x, y) = blobs(50, &[[0.0, 0.0], [20.0, 20.0]], 0.5, 1);
        let res = kmeans(&x, 2, 3, 100).unwrap();
        assert_eq!(acc(&y, &res.labels).unwrap(), 1.0);
    }

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let (x, _) = blobs(4, &[[0.0, 0.0], [1.0, 1.0]], 0.3, 2);
        let res = kmeans(&x, 8, 1, 100).unwrap();
        assert_eq!(res.inertia, 0.0);
        let mut l = res.labels.clone();
        l.sort_unstable();
        assert_eq!(l, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn duplicates_with_k_equals_n() {
        let x = Tensor::matrix(3, 1, vec![1.0, 1.0, 1.0]);
        let res = kmeans(&x, 3, 1, 10).unwrap();
        assert_eq!(res.inertia, 0.0);
    }

    #[test]
    fn inertia_never_increases() {
        for seed in 0..20 {
            let (x, _) = blobs(40, &[[0.0, 0.0], [2.0, 0.5], [1.0, 2.0], [3.0, 3.0]], 1.0, seed);
            let res = kmeans(&x, 5, seed, 200).unwrap();
            for w in res.history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", res.history);
            }
        }
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        assert!(kmeans(&Tensor::zeros(&[3, 2]), 4, 0, 10).is_err());
    }

    #[test]
    fn deterministic_per_seed_and_mode() {
        let (x, _) = blobs(100, &[[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]], 1.0, 7);
        let a = kmeans(&x, 3, 5, 100).unwrap();
        let b = par::with_sequential(|| kmeans(&x, 3, 5, 100).unwrap());
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.inertia.to_bits(), b.inertia.to_bits());
    }
}

use crate::error::{Error, Result};

/// Minimum-cost perfect matching on a square cost matrix (row-major).
/// Returns `perm` with row `i` assigned to column `perm[i]`.
///
/// Shortest augmenting paths with row/column potentials, O(k³).
pub fn hungarian(cost: &[f64], k: usize) -> Result<Vec<usize>> {
    if cost.len() != k * k {
        return Err(Error::shape(
            "hungarian",
            format!("{} entries is not a {k}x{k} matrix", cost.len()),
        ));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("hungarian cost matrix".into()));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    // 1-based arrays; index 0 is the virtual start column.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    let mut col_owner = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for row in 1..=k {
        col_owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![inf; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * k + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; k];
    for j in 1..=k {
        perm[col_owner[j] - 1] = j - 1;
    }
    Ok(perm)
}

pub fn assignment_cost(cost: &[f64], k: usize, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost[i * k + j]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn brute_force(cost: &[f64], k: usize) -> f64 {
        fn rec(cost: &[f64], k: usize, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == k {
                *best = best.min(acc);
                return;
            }
            for j in 0..k {
                if !used[j] {
                    used[j] = true;
                    rec(cost, k, row + 1, used, acc + cost[row * k + j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, k, 0, &mut vec![false; k], 0.0, &mut best);
        best
    }

    #[test]
    fn diagonal_optimum() {
        let k = 4;
        let cost: Vec<f64> = (0..k * k).map(|i| if i / k == i % k { 0.0 } else { 1.0 }).collect();
        let p = hungarian(&cost, k).unwrap();
        assert_eq!(p, vec![0, 1, 2, 3]);
        assert_eq!(assignment_cost(&cost, k, &p), 0.0);
    }

    #[test]
    fn three_by_three_hand_matrix() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let p = hungarian(&cost, 3).unwrap();
        assert_eq!(assignment_cost(&cost, 3, &p), brute_force(&cost, 3));
        assert_eq!(assignment_cost(&cost, 3, &p), 5.0);
    }

    #[test]
    fn random_matrices_match_exhaustive_search() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let k = r.random_range(1..=6);
            let cost: Vec<f64> = (0..k * k).map(|_| r.random_range(-10.0..10.0)).collect();
            let p = hungarian(&cost, k).unwrap();
            let mut sorted = p.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..k).collect::<Vec<_>>());
            assert!((assignment_cost(&cost, k, &p) - brute_force(&cost, k)).abs() < 1e-9);
        }
    }

    #[test]
    fn non_square_is_rejected() {
        assert!(hungarian(&[1.0, 2.0, 3.0], 2).is_err());
    }
}

use super::hungarian::hungarian;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Co-occurrence counts of true (rows) versus predicted (columns) labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<u64>,
    pub k_true: usize,
    pub k_pred: usize,
    pub n: u64,
}

impl ContingencyTable {
    pub fn new(y_true: &[usize], y_pred: &[usize]) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::shape(
                "contingency",
                format!("{} true labels vs {} predictions", y_true.len(), y_pred.len()),
            ));
        }
        let k_true = y_true.iter().max().map_or(0, |m| m + 1);
        let k_pred = y_pred.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![0u64; k_true * k_pred];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            counts[t * k_pred + p] += 1;
        }
        Ok(ContingencyTable {
            counts,
            k_true,
            k_pred,
            n: y_true.len() as u64,
        })
    }

    pub fn get(&self, t: usize, p: usize) -> u64 {
        self.counts[t * self.k_pred + p]
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.k_true)
            .map(|t| (0..self.k_pred).map(|p| self.get(t, p)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.k_pred)
            .map(|p| (0..self.k_true).map(|t| self.get(t, p)).sum())
            .collect()
    }
}

/// Best agreement fraction over all one-to-one label matchings.
pub fn acc(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(y_true, y_pred)?;
    if table.n == 0 {
        return Ok(0.0);
    }
    let k = table.k_true.max(table.k_pred);
    let mut cost = vec![0.0; k * k];
    for t in 0..table.k_true {
        for p in 0..table.k_pred {
            cost[t * k + p] = -(table.get(t, p) as f64);
        }
    }
    let perm = hungarian(&cost, k)?;
    let matched: u64 = perm
        .iter()
        .enumerate()
        .filter(|&(t, &p)| t < table.k_true && p < table.k_pred)
        .map(|(t, &p)| table.get(t, p))
        .sum();
    Ok(matched as f64 / table.n as f64)
}

fn entropy(marginal: &[u64], n: f64) -> f64 {
    marginal
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information normalized by the geometric mean of the entropies.
/// Zero when either labelling has zero entropy.
pub fn nmi(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(y_true, y_pred)?;
    if t.n == 0 {
        return Ok(0.0);
    }
    let n = t.n as f64;
    let (rows, cols) = (t.row_sums(), t.col_sums());
    let (hu, hv) = (entropy(&rows, n), entropy(&cols, n));
    if hu <= 0.0 || hv <= 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for a in 0..t.k_true {
        for b in 0..t.k_pred {
            let c = t.get(a, b);
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (rows[a] as f64 * cols[b] as f64)).ln();
            }
        }
    }
    Ok((mi / (hu * hv).sqrt()).clamp(0.0, 1.0))
}

fn comb2(x: u64) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index from pair counts.
pub fn ari(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(y_true, y_pred)?;
    let index: f64 = t.counts.iter().map(|&c| comb2(c)).sum();
    let a: f64 = t.row_sums().iter().map(|&c| comb2(c)).sum();
    let b: f64 = t.col_sums().iter().map(|&c| comb2(c)).sum();
    let total = comb2(t.n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = a * b / total;
    let max = 0.5 * (a + b);
    if max == expected {
        // both partitions trivial in the same way
        return Ok(if index == expected { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
}

pub fn evaluate(y_true: &[usize], y_pred: &[usize]) -> Result<Scores> {
    Ok(Scores {
        acc: acc(y_true, y_pred)?,
        nmi: nmi(y_true, y_pred)?,
        ari: ari(y_true, y_pred)?,
    })
}

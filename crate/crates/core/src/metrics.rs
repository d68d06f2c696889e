//! External cluster-validity measures and cross-method regret.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use crate::error::{Error, Result};

/// Counts of co-occurring (true class, predicted cluster) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    /// `counts[i][j]`: points of true class `i` placed in predicted cluster `j`.
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
}

impl ContingencyTable {
    /// Builds the table, numbering classes and clusters by first appearance.
    pub fn new<T, P>(truth: &[T], pred: &[P]) -> Result<Self>
    where
        T: Eq + Hash,
        P: Eq + Hash,
    {
        if truth.len() != pred.len() {
            return Err(Error::InvalidInput(format!(
                "label lists differ in length: {} vs {}",
                truth.len(),
                pred.len()
            )));
        }
        if truth.is_empty() {
            return Err(Error::InvalidInput("label lists are empty".into()));
        }
        let rows = index_labels(truth);
        let cols = index_labels(pred);
        let n_rows = rows.iter().max().map_or(0, |m| m + 1);
        let n_cols = cols.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![vec![0u64; n_cols]; n_rows];
        for (&r, &c) in rows.iter().zip(&cols) {
            counts[r][c] += 1;
        }
        Ok(Self {
            counts,
            n: truth.len() as u64,
        })
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.counts.first().map_or(0, Vec::len)];
        for row in &self.counts {
            for (o, c) in out.iter_mut().zip(row) {
                *o += c;
            }
        }
        out
    }
}

fn index_labels<L: Eq + Hash>(labels: &[L]) -> Vec<usize> {
    let mut ids: HashMap<&L, usize> = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(l).or_insert(next)
        })
        .collect()
}

fn entropy(marginals: &[u64], n: f64) -> f64 {
    marginals
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information `I(T;P) / sqrt(H(T) H(P))`, natural logs.
///
/// Two constant labelings score 1; exactly one constant labeling scores 0.
pub fn nmi<T, P>(truth: &[T], pred: &[P]) -> Result<f64>
where
    T: Eq + Hash,
    P: Eq + Hash,
{
    let table = ContingencyTable::new(truth, pred)?;
    let n = table.n as f64;
    let rows = table.row_sums();
    let cols = table.col_sums();
    let ht = entropy(&rows, n);
    let hp = entropy(&cols, n);
    if ht == 0.0 && hp == 0.0 {
        return Ok(1.0);
    }
    if ht == 0.0 || hp == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (ht * hp).sqrt()).clamp(0.0, 1.0))
}

fn pairs(c: u64) -> f64 {
    let c = c as f64;
    c * (c - 1.0) / 2.0
}

/// Adjusted Rand index.
///
/// When the expected-index correction leaves a zero denominator (both
/// labelings constant, or both all-singletons) the result is 1 if the two
/// partitions coincide and 0 otherwise.
pub fn ari<T, P>(truth: &[T], pred: &[P]) -> Result<f64>
where
    T: Eq + Hash,
    P: Eq + Hash,
{
    let table = ContingencyTable::new(truth, pred)?;
    let sum_ij: f64 = table.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let sum_a: f64 = table.row_sums().into_iter().map(pairs).sum();
    let sum_b: f64 = table.col_sums().into_iter().map(pairs).sum();
    let total = pairs(table.n);
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        let same = table
            .counts
            .iter()
            .all(|row| row.iter().filter(|&&c| c > 0).count() == 1)
            && table.counts.len() == table.col_sums().len();
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok((sum_ij - expected) / denom)
}

/// Per-dataset normalized regret.
///
/// `scores[dataset][method]` is a method's score (higher is better). Within
/// each dataset the regret `best − score` is divided by its spread so that it
/// spans `[0, 1]`; when all methods tie, every regret is 0.
pub fn normalized_regret(
    scores: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let mut out = BTreeMap::new();
    for (dataset, by_method) in scores {
        if by_method.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "dataset {dataset} needs at least two methods"
            )));
        }
        if let Some((m, _)) = by_method.iter().find(|(_, s)| !s.is_finite()) {
            return Err(Error::InvalidInput(format!("score of {m} on {dataset} is not finite")));
        }
        let best = by_method.values().copied().fold(f64::NEG_INFINITY, f64::max);
        let worst = by_method.values().copied().fold(f64::INFINITY, f64::min);
        let spread = best - worst;
        let regrets = by_method
            .iter()
            .map(|(m, &s)| {
                let r = if spread > 0.0 { (best - s) / spread } else { 0.0 };
                (m.clone(), r)
            })
            .collect();
        out.insert(dataset.clone(), regrets);
    }
    Ok(out)
}

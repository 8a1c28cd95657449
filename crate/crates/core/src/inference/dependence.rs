//! Dependence between the labels of two points: contingency table, batch
//! Matthews correlations and the Kullback–Leibler divergence from the
//! nearest independent joint law.

use super::InferenceError;
use crate::stats::{mean, std_error};

/// Counts indexed by `[label_i][label_j]` with 0 = random, 1 = necessary.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ContingencyTable {
    pub counts: [[u64; 2]; 2],
}

impl ContingencyTable {
    pub fn from_pairs<I: IntoIterator<Item = (bool, bool)>>(pairs: I) -> Self {
        let mut t = ContingencyTable::default();
        for (a, b) in pairs {
            t.counts[a as usize][b as usize] += 1;
        }
        t
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn margins(&self) -> ([u64; 2], [u64; 2]) {
        let c = &self.counts;
        ([c[0][0] + c[0][1], c[1][0] + c[1][1]], [c[0][0] + c[1][0], c[0][1] + c[1][1]])
    }

    /// Expected counts under independence with the observed margins.
    pub fn expected(&self) -> [[f64; 2]; 2] {
        let (rows, cols) = self.margins();
        let n = self.total() as f64;
        let mut e = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                e[a][b] = rows[a] as f64 * cols[b] as f64 / n;
            }
        }
        e
    }

    /// KL(joint ‖ product of marginals) in bits.
    pub fn kl_bits(&self) -> f64 {
        let n = self.total() as f64;
        let e = self.expected();
        let mut kl = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let c = self.counts[a][b] as f64;
                if c > 0.0 {
                    kl += c / n * (c / e[a][b]).log2();
                }
            }
        }
        kl
    }

    /// Matthews (phi) correlation; `None` when a margin is empty.
    pub fn matthews(&self) -> Option<f64> {
        let (rows, cols) = self.margins();
        if rows.contains(&0) || cols.contains(&0) {
            return None;
        }
        let c = |a: usize, b: usize| self.counts[a][b] as f64;
        let denom = (rows[0] as f64 * rows[1] as f64 * cols[0] as f64 * cols[1] as f64).sqrt();
        Some((c(1, 1) * c(0, 0) - c(1, 0) * c(0, 1)) / denom)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DependenceReport {
    pub table: ContingencyTable,
    pub expected: [[f64; 2]; 2],
    pub kl_bits: f64,
    /// Matthews correlation of each non-degenerate batch.
    pub batch_correlations: Vec<f64>,
    pub correlation: f64,
    /// Standard error of `correlation`; NaN with fewer than two batches.
    pub correlation_se: f64,
}

impl DependenceReport {
    /// Report from a bare table; the correlation is that of the whole table.
    pub fn from_table(table: ContingencyTable) -> Result<Self, InferenceError> {
        let correlation = table.matthews().ok_or(InferenceError::DegenerateMarginal)?;
        Ok(DependenceReport {
            table,
            expected: table.expected(),
            kl_bits: table.kl_bits(),
            batch_correlations: Vec::new(),
            correlation,
            correlation_se: f64::NAN,
        })
    }
}

/// Dependence of labels `i` and `j` over joint label samples, split into
/// `batches` consecutive batches for the correlation standard error.
pub fn label_dependence_report(
    samples: &[Vec<bool>],
    i: usize,
    j: usize,
    batches: usize,
) -> Result<DependenceReport, InferenceError> {
    if i == j || batches == 0 {
        return Err(InferenceError::InvalidSettings("need two distinct points and at least one batch".into()));
    }
    if let Some(s) = samples.iter().find(|s| i >= s.len() || j >= s.len()) {
        return Err(InferenceError::IndexOutOfRange(i.max(j).min(s.len())));
    }
    let pairs: Vec<(bool, bool)> = samples.iter().map(|s| (s[i], s[j])).collect();
    let table = ContingencyTable::from_pairs(pairs.iter().copied());
    if table.matthews().is_none() {
        return Err(InferenceError::DegenerateMarginal);
    }
    let size = pairs.len() / batches;
    let batch_correlations: Vec<f64> = if size == 0 {
        Vec::new()
    } else {
        (0..batches)
            .filter_map(|b| ContingencyTable::from_pairs(pairs[b * size..(b + 1) * size].iter().copied()).matthews())
            .collect()
    };
    let (correlation, correlation_se) = if batch_correlations.is_empty() {
        (table.matthews().unwrap_or(f64::NAN), f64::NAN)
    } else {
        (mean(&batch_correlations), std_error(&batch_correlations))
    };
    Ok(DependenceReport {
        table,
        expected: table.expected(),
        kl_bits: table.kl_bits(),
        batch_correlations,
        correlation,
        correlation_se,
    })
}

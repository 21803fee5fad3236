//! Category-discovery evaluation: clustering accuracy under the optimal
//! cluster-to-class matching, split into seen and unseen classes, and
//! homogeneity at any label granularity.
//!
//! Only points selected by the evaluation mask (the unlabeled subset) count.
//! The matching is solved once over all evaluated points and then restricted
//! to old-class and new-class points.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("no points selected for evaluation")]
    EmptyEvaluation,
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Predictions and ground truth for one evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalInput {
    pub predicted: Vec<usize>,
    pub truth: Vec<usize>,
    /// Point belongs to a seen class.
    pub old_mask: Vec<bool>,
    /// Point takes part in the evaluation.
    pub eval_mask: Vec<bool>,
}

impl EvalInput {
    pub fn new(
        predicted: Vec<usize>,
        truth: Vec<usize>,
        old_mask: Vec<bool>,
        eval_mask: Vec<bool>,
    ) -> Result<Self> {
        let n = predicted.len();
        if truth.len() != n || old_mask.len() != n || eval_mask.len() != n {
            return Err(MetricsError::LengthMismatch(format!(
                "predicted {n}, truth {}, old mask {}, eval mask {}",
                truth.len(),
                old_mask.len(),
                eval_mask.len()
            )));
        }
        Ok(Self {
            predicted,
            truth,
            old_mask,
            eval_mask,
        })
    }

    /// Evaluates every point.
    pub fn all(predicted: Vec<usize>, truth: Vec<usize>, old_mask: Vec<bool>) -> Result<Self> {
        let n = predicted.len();
        Self::new(predicted, truth, old_mask, vec![true; n])
    }
}

/// Cluster-by-class count table over dense ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contingency {
    /// Original cluster id of each row.
    pub clusters: Vec<usize>,
    /// Original class id of each column.
    pub classes: Vec<usize>,
    pub counts: Vec<Vec<u64>>,
}

impl Contingency {
    pub fn new(predicted: &[usize], truth: &[usize]) -> Self {
        let dense = |ids: &[usize]| -> BTreeMap<usize, usize> {
            let mut m: BTreeMap<usize, usize> = ids.iter().map(|&c| (c, 0)).collect();
            for (slot, v) in m.values_mut().enumerate() {
                *v = slot;
            }
            m
        };
        let rows = dense(predicted);
        let cols = dense(truth);
        let mut counts = vec![vec![0u64; cols.len()]; rows.len()];
        for (p, t) in predicted.iter().zip(truth) {
            counts[rows[p]][cols[t]] += 1;
        }
        Self {
            clusters: rows.into_keys().collect(),
            classes: cols.into_keys().collect(),
            counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.classes.len())
            .map(|c| self.counts.iter().map(|r| r[c]).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub acc_all: f64,
    /// `None` when no evaluated point belongs to a seen class.
    pub acc_old: Option<f64>,
    /// `None` when no evaluated point belongs to an unseen class.
    pub acc_new: Option<f64>,
    pub homogeneity: f64,
    pub n_eval: usize,
    pub n_old: usize,
    pub n_new: usize,
    /// Matched class for each contingency row, if any.
    pub matching: Vec<(usize, Option<usize>)>,
    pub contingency: Contingency,
}

/// Accuracies and homogeneity of the masked points.
pub fn evaluate(input: &EvalInput) -> Result<EvalReport> {
    let idx: Vec<usize> = (0..input.predicted.len())
        .filter(|&i| input.eval_mask[i])
        .collect();
    if idx.is_empty() {
        return Err(MetricsError::EmptyEvaluation);
    }
    let pred: Vec<usize> = idx.iter().map(|&i| input.predicted[i]).collect();
    let truth: Vec<usize> = idx.iter().map(|&i| input.truth[i]).collect();
    let table = Contingency::new(&pred, &truth);

    let weights: Vec<Vec<i64>> = table
        .counts
        .iter()
        .map(|r| r.iter().map(|&c| c as i64).collect())
        .collect();
    let rows_to_cols = max_weight_matching(&weights);
    let matched_class: BTreeMap<usize, usize> = rows_to_cols
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| (table.clusters[r], table.classes[c])))
        .collect();

    let mut hits = [0usize; 2];
    let mut sizes = [0usize; 2];
    for &i in &idx {
        let group = usize::from(!input.old_mask[i]);
        sizes[group] += 1;
        if matched_class.get(&input.predicted[i]) == Some(&input.truth[i]) {
            hits[group] += 1;
        }
    }
    let frac = |h: usize, n: usize| (n > 0).then(|| h as f64 / n as f64);

    Ok(EvalReport {
        acc_all: (hits[0] + hits[1]) as f64 / idx.len() as f64,
        acc_old: frac(hits[0], sizes[0]),
        acc_new: frac(hits[1], sizes[1]),
        homogeneity: homogeneity_of(&table),
        n_eval: idx.len(),
        n_old: sizes[0],
        n_new: sizes[1],
        matching: rows_to_cols
            .iter()
            .enumerate()
            .map(|(r, c)| (table.clusters[r], c.map(|c| table.classes[c])))
            .collect(),
        contingency: table,
    })
}

/// `(all, old, new)` accuracies; see [`evaluate`].
pub fn clustering_accuracy(input: &EvalInput) -> Result<(f64, Option<f64>, Option<f64>)> {
    let r = evaluate(input)?;
    Ok((r.acc_all, r.acc_old, r.acc_new))
}

/// `1 - H(class | cluster) / H(class)` with natural logs; 1 when `H(class) = 0`.
pub fn homogeneity(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(format!(
            "predicted {}, truth {}",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(MetricsError::EmptyEvaluation);
    }
    Ok(homogeneity_of(&Contingency::new(predicted, truth)))
}

fn homogeneity_of(table: &Contingency) -> f64 {
    let n = table.total() as f64;
    let plogp = |c: u64, of: f64| {
        if c == 0 {
            0.0
        } else {
            let p = c as f64 / of;
            p * p.ln()
        }
    };
    let h_c: f64 = -table.col_sums().iter().map(|&c| plogp(c, n)).sum::<f64>();
    if h_c <= 0.0 {
        return 1.0;
    }
    let h_ck: f64 = -table
        .counts
        .iter()
        .zip(table.row_sums())
        .map(|(row, nk)| {
            row.iter().map(|&c| plogp(c, nk as f64)).sum::<f64>() * nk as f64 / n
        })
        .sum::<f64>();
    (1.0 - h_ck / h_c).clamp(0.0, 1.0)
}

/// Homogeneity against each label level, in the given (coarse to fine) order.
pub fn granularity_eval(predicted: &[usize], truth_levels: &[Vec<usize>]) -> Result<Vec<f64>> {
    truth_levels
        .iter()
        .map(|level| homogeneity(predicted, level))
        .collect()
}

/// Row-to-column matching maximising the total weight of a rectangular matrix.
///
/// The matrix is padded to a square with zero-weight rows or columns; rows
/// matched to padding get `None`.
pub fn max_weight_matching(weights: &[Vec<i64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    if n == 0 {
        return Vec::new();
    }
    let cost: Vec<Vec<i64>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    if r < rows && c < cols {
                        -weights[r][c]
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect();
    let assign = min_cost_assignment(&cost);
    (0..rows)
        .map(|r| Some(assign[r]).filter(|&c| c < cols))
        .collect()
}

/// Hungarian algorithm with potentials, `O(n^3)`, on a square cost matrix.
///
/// Returns the column assigned to each row.
pub fn min_cost_assignment(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    assert!(cost.iter().all(|r| r.len() == n), "cost matrix must be square");
    // 1-based with a virtual column 0, following the classic formulation
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = i64::MAX;
            let mut col1 = 0;
            for c in 1..=n {
                if used[c] {
                    continue;
                }
                let cur = cost[r0 - 1][c - 1] - u[r0] - v[c];
                if cur < minv[c] {
                    minv[c] = cur;
                    way[c] = col0;
                }
                if minv[c] < delta {
                    delta = minv[c];
                    col1 = c;
                }
            }
            for c in 0..=n {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![0; n];
    for c in 1..=n {
        result[owner[c] - 1] = c - 1;
    }
    result
}

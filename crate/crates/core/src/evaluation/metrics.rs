//! Classification metrics: one-vs-rest macro AUC (rank statistic, ties
//! count half), balanced accuracy, worsening sensitivity and PPV, confusion
//! matrices. Undefined values come back as `None` rather than NaN so
//! callers can flag them.

use crate::labels::N_CLASSES;
use crate::util::Matrix;

/// Argmax class per row; ties resolve to the smaller class index.
pub fn argmax_predictions(proba: &Matrix) -> Vec<usize> {
    (0..proba.n_rows())
        .map(|i| {
            let mut best = 0usize;
            for c in 1..proba.n_cols() {
                if proba.get(i, c) > proba.get(i, best) {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Argmax with a worsening-probability override: predict worsening whenever
/// its probability reaches `threshold`, otherwise argmax over the rest.
pub fn threshold_predictions(proba: &Matrix, worsening_threshold: f64) -> Vec<usize> {
    (0..proba.n_rows())
        .map(|i| {
            if proba.get(i, 2) >= worsening_threshold {
                2
            } else if proba.get(i, 0) >= proba.get(i, 1) {
                0
            } else {
                1
            }
        })
        .collect()
}

/// Binary rank AUC with ties contributing 0.5; `None` when either class is
/// empty. The midrank formulation is exactly the concordant-pair count:
/// AUC = (#concordant + 0.5 #tied) / (n_pos * n_neg).
pub fn binary_auc(scores: &[f64], is_positive: &[bool]) -> Option<f64> {
    let n = scores.len();
    let n_pos = is_positive.iter().filter(|p| **p).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    // Midranks over tied blocks (1-based ranks; ties share the mean rank).
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0; // mean of ranks i+1..=j
        for &idx in &order[i..j] {
            if is_positive[idx] {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// One-vs-rest AUC per class, macro-averaged over the classes present in
/// `y_true` (absent classes are skipped; `None` when nothing is computable).
pub fn auc_ovr_macro(y_true: &[usize], proba: &Matrix) -> Option<f64> {
    assert_eq!(y_true.len(), proba.n_rows(), "length mismatch");
    let mut total = 0.0;
    let mut used = 0usize;
    for c in 0..N_CLASSES {
        let is_pos: Vec<bool> = y_true.iter().map(|&y| y == c).collect();
        let scores: Vec<f64> = (0..proba.n_rows()).map(|i| proba.get(i, c)).collect();
        if let Some(auc) = binary_auc(&scores, &is_pos) {
            total += auc;
            used += 1;
        }
    }
    (used > 0).then(|| total / used as f64)
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize]) -> [[usize; N_CLASSES]; N_CLASSES] {
    assert_eq!(y_true.len(), y_pred.len(), "length mismatch");
    let mut cm = [[0usize; N_CLASSES]; N_CLASSES];
    for (t, p) in y_true.iter().zip(y_pred.iter()) {
        cm[*t][*p] += 1;
    }
    cm
}

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> Option<f64> {
    if y_true.is_empty() {
        return None;
    }
    let hits = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count();
    Some(hits as f64 / y_true.len() as f64)
}

/// Mean per-class recall over the classes present in `y_true`.
pub fn balanced_accuracy(y_true: &[usize], y_pred: &[usize]) -> Option<f64> {
    if y_true.is_empty() {
        return None;
    }
    let cm = confusion_matrix(y_true, y_pred);
    let mut total = 0.0;
    let mut used = 0usize;
    for c in 0..N_CLASSES {
        let row_sum: usize = cm[c].iter().sum();
        if row_sum > 0 {
            total += cm[c][c] as f64 / row_sum as f64;
            used += 1;
        }
    }
    (used > 0).then(|| total / used as f64)
}

/// Recall for one class; `None` when the class never occurs in `y_true`.
pub fn sensitivity_class(y_true: &[usize], y_pred: &[usize], class: usize) -> Option<f64> {
    let n_true = y_true.iter().filter(|&&y| y == class).count();
    if n_true == 0 {
        return None;
    }
    let hits = y_true
        .iter()
        .zip(y_pred)
        .filter(|(t, p)| **t == class && **p == class)
        .count();
    Some(hits as f64 / n_true as f64)
}

/// Precision for one class; `None` (undefined, flagged by callers) when the
/// class is never predicted.
pub fn ppv_class(y_true: &[usize], y_pred: &[usize], class: usize) -> Option<f64> {
    let n_pred = y_pred.iter().filter(|&&p| p == class).count();
    if n_pred == 0 {
        return None;
    }
    let hits = y_true
        .iter()
        .zip(y_pred)
        .filter(|(t, p)| **t == class && **p == class)
        .count();
    Some(hits as f64 / n_pred as f64)
}

pub const WORSENING: usize = 2;

pub fn sensitivity_worsening(y_true: &[usize], y_pred: &[usize]) -> Option<f64> {
    sensitivity_class(y_true, y_pred, WORSENING)
}

pub fn ppv_worsening(y_true: &[usize], y_pred: &[usize]) -> Option<f64> {
    ppv_class(y_true, y_pred, WORSENING)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn proba_from_rows(rows: &[[f64; 3]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn perfect_separation_gives_one() {
        let y = vec![0, 1, 2, 1, 0, 2];
        let rows: Vec<[f64; 3]> = y
            .iter()
            .map(|&c| {
                let mut r = [0.05; 3];
                r[c] = 0.9;
                r
            })
            .collect();
        let p = proba_from_rows(&rows);
        assert_eq!(auc_ovr_macro(&y, &p), Some(1.0));
        let preds = argmax_predictions(&p);
        assert_eq!(balanced_accuracy(&y, &preds), Some(1.0));
    }

    #[test]
    fn constant_scores_give_half() {
        let y = vec![0, 1, 2, 1, 1, 2];
        let p = proba_from_rows(&vec![[1.0 / 3.0; 3]; 6]);
        assert_eq!(auc_ovr_macro(&y, &p), Some(0.5));
    }

    #[test]
    fn absent_class_skipped() {
        let y = vec![1, 1, 2, 2];
        let rows = [
            [0.2, 0.6, 0.2],
            [0.1, 0.8, 0.1],
            [0.3, 0.2, 0.5],
            [0.2, 0.1, 0.7],
        ];
        let p = proba_from_rows(&rows);
        // Class 0 absent: macro over classes 1 and 2 only (both = 1.0 here).
        assert_eq!(auc_ovr_macro(&y, &p), Some(1.0));
    }

    /// Rank implementation equals the O(n^2) pair-count oracle exactly.
    #[test]
    fn auc_matches_pair_count_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for trial in 0..50 {
            let n = rng.random_range(5..200);
            let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            if (0..3).any(|c| !y.contains(&c)) {
                continue;
            }
            // Coarse grid scores force plenty of ties.
            let rows: Vec<[f64; 3]> = (0..n)
                .map(|_| {
                    let a = rng.random_range(0..5) as f64 / 4.0;
                    let b = rng.random_range(0..5) as f64 / 4.0;
                    let c = rng.random_range(0..5) as f64 / 4.0;
                    [a, b, c]
                })
                .collect();
            let p = proba_from_rows(&rows);
            let got = auc_ovr_macro(&y, &p).unwrap();
            let oracle = oracle_auc_ovr(&y, &rows);
            assert_eq!(got, oracle, "trial {trial}");
        }
    }

    fn oracle_auc_ovr(y: &[usize], rows: &[[f64; 3]]) -> f64 {
        let mut total = 0.0;
        let mut used = 0;
        for c in 0..3 {
            let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
            let neg: Vec<usize> = (0..y.len()).filter(|&i| y[i] != c).collect();
            if pos.is_empty() || neg.is_empty() {
                continue;
            }
            let mut num = 0.0;
            for &i in &pos {
                for &j in &neg {
                    num += if rows[i][c] > rows[j][c] {
                        1.0
                    } else if rows[i][c] == rows[j][c] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
            total += num / (pos.len() * neg.len()) as f64;
            used += 1;
        }
        total / used as f64
    }

    #[test]
    fn balanced_accuracy_is_mean_recall_and_diag_accuracy() {
        let y = vec![0, 0, 1, 1, 1, 2, 2, 2, 2];
        let p = vec![0, 1, 1, 1, 0, 2, 2, 1, 2];
        let cm = confusion_matrix(&y, &p);
        let acc = accuracy(&y, &p).unwrap();
        let diag: usize = (0..3).map(|c| cm[c][c]).sum();
        assert_eq!(acc, diag as f64 / y.len() as f64);
        let bacc = balanced_accuracy(&y, &p).unwrap();
        let manual = (1.0 / 2.0 + 2.0 / 3.0 + 3.0 / 4.0) / 3.0;
        assert!((bacc - manual).abs() < 1e-12);
    }

    #[test]
    fn ppv_undefined_when_no_worsening_predicted() {
        let y = vec![2, 1, 1];
        let p = vec![1, 1, 1];
        assert_eq!(ppv_worsening(&y, &p), None);
        assert_eq!(sensitivity_worsening(&y, &p), Some(0.0));
        // No worsening truths: sensitivity undefined instead.
        assert_eq!(sensitivity_worsening(&[1, 0], &[2, 2]), None);
    }

    proptest! {
        /// AUC is invariant under strictly monotone transforms of scores.
        #[test]
        fn auc_monotone_invariance(seed in 0u64..300) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 40;
            let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let rows: Vec<[f64;3]> = (0..n).map(|_| {
                [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()]
            }).collect();
            let p = proba_from_rows(&rows);
            // x -> x^3 + 2x is strictly increasing.
            let transformed: Vec<[f64;3]> = rows.iter()
                .map(|r| [t(r[0]), t(r[1]), t(r[2])])
                .collect();
            let pt = proba_from_rows(&transformed);
            let a = auc_ovr_macro(&y, &p);
            let b = auc_ovr_macro(&y, &pt);
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (x, z) => prop_assert_eq!(x, z),
            }
        }
    }

    fn t(x: f64) -> f64 {
        x * x * x + 2.0 * x
    }
}

//! Iterative variance-inflation-factor screening on train rows.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifRemoval {
    pub step: usize,
    pub column: String,
    /// VIF at removal; serialized as a string so +inf survives JSON.
    pub vif: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifScreenResult {
    /// Indices into the original column order, ascending.
    pub retained_indices: Vec<usize>,
    pub retained_columns: Vec<String>,
    pub removals: Vec<VifRemoval>,
    pub threshold: f64,
}

/// VIF per column of `m`: 1/(1-R^2_j) from regressing column j on all other
/// columns plus an intercept. Constant columns and perfectly explained
/// columns report +inf. Collinearity among the *other* columns is handled
/// by a pseudo-inverse, which still yields the exact projection R^2.
pub fn compute_vifs(m: &Matrix) -> Vec<f64> {
    let n = m.n_rows();
    let p = m.n_cols();
    if n < 2 || p < 2 {
        return vec![1.0; p];
    }

    // Standardize: with centered, unit-variance columns the regression of
    // column j on the rest reduces to correlation algebra.
    let mut means = vec![0.0; p];
    let mut sds = vec![0.0; p];
    for j in 0..p {
        let col = m.column(j);
        let mu = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1) as f64;
        means[j] = mu;
        sds[j] = var.sqrt();
    }

    let live: Vec<usize> = (0..p).filter(|j| sds[*j] > 1e-12).collect();
    let q = live.len();
    let mut vifs = vec![f64::INFINITY; p]; // constants stay infinite
    if q == 0 {
        return vifs;
    }
    if q == 1 {
        vifs[live[0]] = 1.0;
        return vifs;
    }

    let mut z = DMatrix::<f64>::zeros(n, q);
    for (jj, &j) in live.iter().enumerate() {
        for r in 0..n {
            z[(r, jj)] = (m.get(r, j) - means[j]) / sds[j];
        }
    }
    let corr = (z.transpose() * &z) / (n - 1) as f64;

    for (jj, &j) in live.iter().enumerate() {
        let others: Vec<usize> = (0..q).filter(|k| *k != jj).collect();
        let a = corr.select_rows(others.as_slice()).select_columns(others.as_slice());
        let b = DVector::from_iterator(q - 1, others.iter().map(|&k| corr[(jj, k)]));
        let beta = match a.clone().svd(true, true).pseudo_inverse(1e-12) {
            Ok(pinv) => pinv * &b,
            Err(_) => DVector::zeros(q - 1),
        };
        let r2 = b.dot(&beta).clamp(0.0, 1.0);
        vifs[j] = if 1.0 - r2 < 1e-12 {
            f64::INFINITY
        } else {
            1.0 / (1.0 - r2)
        };
    }
    vifs
}

/// Iteratively removes the single highest-VIF column while any eligible
/// VIF exceeds the threshold. Ties (e.g. two identical columns, both +inf)
/// drop the column with the larger canonical index. Columns named in
/// `protected` have their VIFs computed and reported but are never removed
/// (the outcome anchors and demographics are not screening candidates).
pub fn vif_screen(
    train: &Matrix,
    columns: &[String],
    threshold: f64,
    protected: &BTreeSet<String>,
) -> Result<VifScreenResult> {
    if columns.len() != train.n_cols() {
        return Err(Error::Validation(format!(
            "column names ({}) do not match matrix width ({})",
            columns.len(),
            train.n_cols()
        )));
    }
    if train.n_cols() < 2 {
        return Err(Error::Validation("VIF screening needs at least 2 columns".into()));
    }

    let mut retained: Vec<usize> = (0..columns.len()).collect();
    let mut removals = Vec::new();
    let mut step = 0;
    loop {
        let sub = train.select_columns(&retained);
        let vifs = compute_vifs(&sub);
        // Highest eligible VIF wins; ties resolve to the larger index.
        let worst = (0..retained.len())
            .filter(|&a| !protected.contains(&columns[retained[a]]))
            .max_by(|&a, &b| {
                vifs[a]
                    .partial_cmp(&vifs[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(retained[a].cmp(&retained[b]))
            });
        let Some(w) = worst else { break };
        if vifs[w].is_finite() && vifs[w] <= threshold {
            break;
        }
        if retained.len() <= 2 {
            // Never screen below two columns; report and stop.
            if vifs[w] > threshold {
                removals.push(VifRemoval {
                    step,
                    column: columns[retained[w]].clone(),
                    vif: vifs[w],
                });
                retained.remove(w);
            }
            break;
        }
        step += 1;
        removals.push(VifRemoval {
            step,
            column: columns[retained[w]].clone(),
            vif: vifs[w],
        });
        retained.remove(w);
    }

    Ok(VifScreenResult {
        retained_columns: retained.iter().map(|&i| columns[i].clone()).collect(),
        retained_indices: retained,
        removals,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn identical_columns_one_removed_as_infinite() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let a: f64 = rng.random();
                let b: f64 = rng.random();
                vec![a, a, b]
            })
            .collect();
        let m = Matrix::from_rows(&rows);
        let res = vif_screen(&m, &names(3), 10.0, &BTreeSet::new()).unwrap();
        assert_eq!(res.removals.len(), 1);
        // Later-ordered duplicate goes first.
        assert_eq!(res.removals[0].column, "c1");
        assert!(res.removals[0].vif.is_infinite());
        assert_eq!(res.retained_indices, vec![0, 2]);
    }

    #[test]
    fn orthogonal_columns_all_kept_with_unit_vif() {
        // Exactly orthogonal after centering.
        let rows = vec![
            vec![1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, -1.0],
        ];
        let m = Matrix::from_rows(&rows);
        let vifs = compute_vifs(&m);
        for v in &vifs {
            assert!((v - 1.0).abs() < 1e-9, "{v}");
        }
        let res = vif_screen(&m, &names(3), 10.0, &BTreeSet::new()).unwrap();
        assert!(res.removals.is_empty());
        assert_eq!(res.retained_indices, vec![0, 1, 2]);
    }

    #[test]
    fn protected_columns_survive_screening() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let a: f64 = rng.random();
                let b: f64 = rng.random();
                vec![a, a, b]
            })
            .collect();
        let m = Matrix::from_rows(&rows);
        // c0 duplicates c1 but c1 is protected; c0 must go instead.
        let protected: BTreeSet<String> = ["c1".to_string()].into_iter().collect();
        let res = vif_screen(&m, &names(3), 10.0, &protected).unwrap();
        assert_eq!(res.removals.len(), 1);
        assert_eq!(res.removals[0].column, "c0");
        assert_eq!(res.retained_indices, vec![1, 2]);
    }

    /// Every reported VIF matches 1/(1-R^2) from an independent
    /// normal-equations solve (Gaussian elimination, no shared code).
    #[test]
    fn vif_matches_normal_equations_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 200;
        let p = 10;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let base: f64 = rng.random::<f64>() * 2.0 - 1.0;
                (0..p)
                    .map(|j| base * (j as f64 * 0.1) + rng.random::<f64>())
                    .collect()
            })
            .collect();
        let m = Matrix::from_rows(&rows);
        let vifs = compute_vifs(&m);
        for j in 0..p {
            let oracle = oracle_vif(&rows, j);
            assert!(
                (vifs[j] - oracle).abs() <= 1e-8 * oracle.max(1.0),
                "col {j}: {} vs oracle {}",
                vifs[j],
                oracle
            );
        }
    }

    /// Plain normal equations with partial-pivot Gaussian elimination.
    fn oracle_vif(rows: &[Vec<f64>], target: usize) -> f64 {
        let n = rows.len();
        let p = rows[0].len();
        // Design: intercept + all columns except `target`.
        let k = p; // p-1 predictors + intercept
        let mut xtx = vec![vec![0.0; k]; k];
        let mut xty = vec![0.0; k];
        let design_row = |row: &Vec<f64>| -> Vec<f64> {
            let mut d = Vec::with_capacity(k);
            d.push(1.0);
            for (j, v) in row.iter().enumerate() {
                if j != target {
                    d.push(*v);
                }
            }
            d
        };
        for row in rows {
            let d = design_row(row);
            let y = row[target];
            for a in 0..k {
                xty[a] += d[a] * y;
                for b in 0..k {
                    xtx[a][b] += d[a] * d[b];
                }
            }
        }
        let beta = gauss_solve(&mut xtx, &mut xty);
        let mut ssr = 0.0;
        let mut sum = 0.0;
        for row in rows {
            sum += row[target];
        }
        let mean = sum / n as f64;
        let mut sst = 0.0;
        for row in rows {
            let d = design_row(row);
            let yhat: f64 = d.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            ssr += (row[target] - yhat) * (row[target] - yhat);
            sst += (row[target] - mean) * (row[target] - mean);
        }
        let r2 = 1.0 - ssr / sst;
        1.0 / (1.0 - r2)
    }

    fn gauss_solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
                .unwrap();
            a.swap(col, pivot);
            b.swap(col, pivot);
            let diag = a[col][col];
            for row in (col + 1)..n {
                let f = a[row][col] / diag;
                for c in col..n {
                    a[row][c] -= f * a[col][c];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut acc = b[row];
            for c in (row + 1)..n {
                acc -= a[row][c] * x[c];
            }
            x[row] = acc / a[row][row];
        }
        x
    }
}

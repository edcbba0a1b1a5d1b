//! Split-aware standardization.
//!
//! Tree-family models keep bounded [0,1] ratio columns and the most recent
//! CES-D score on their original scales and z-score counts, rates, deltas
//! and remaining lags; the elastic-net family standardizes every column so
//! the L1 penalty applies uniformly. Parameters always come from train rows
//! and are frozen for val/test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::ModelFamily;
use crate::util::Matrix;

/// SD floor substituted for constant columns, which therefore scale to 0.
const SD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalePolicy {
    ZScore,
    Passthrough,
}

/// Columns left on their original scale for tree-family models: bounded
/// [0,1] ratios (including their lags and the gender indicators) plus the
/// most recent CES-D score.
const TREE_PASSTHROUGH: [&str; 7] = [
    "prior_cesd",
    "gender_male",
    "gender_female",
    "overnight_ratio",
    "social_ratio",
    "lag_overnight_ratio",
    "lag_social_ratio",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub columns: Vec<String>,
    pub policies: Vec<ScalePolicy>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Constant train columns (scaled output is 0 everywhere).
    pub constant_columns: Vec<String>,
    pub family: ModelFamily,
}

/// Estimates per-column mean and SD on train rows only.
pub fn fit_scaler(train: &Matrix, columns: &[String], family: ModelFamily) -> Result<Scaler> {
    if columns.len() != train.n_cols() {
        return Err(Error::Validation(format!(
            "column names ({}) do not match matrix width ({})",
            columns.len(),
            train.n_cols()
        )));
    }
    if train.n_rows() == 0 {
        return Err(Error::Validation("cannot fit a scaler on zero train rows".into()));
    }
    let n = train.n_rows() as f64;
    let mut means = Vec::with_capacity(columns.len());
    let mut sds = Vec::with_capacity(columns.len());
    let mut constant_columns = Vec::new();
    let mut policies = Vec::with_capacity(columns.len());
    for (j, name) in columns.iter().enumerate() {
        let col = train.column(j);
        let mu = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        let sd = var.sqrt();
        means.push(mu);
        sds.push(sd);
        let policy = match family {
            ModelFamily::ElasticNet => ScalePolicy::ZScore,
            ModelFamily::Gbdt => {
                if TREE_PASSTHROUGH.contains(&name.as_str()) {
                    ScalePolicy::Passthrough
                } else {
                    ScalePolicy::ZScore
                }
            }
        };
        if policy == ScalePolicy::ZScore && sd <= SD_FLOOR {
            constant_columns.push(name.clone());
        }
        policies.push(policy);
    }
    Ok(Scaler {
        columns: columns.to_vec(),
        policies,
        means,
        sds,
        constant_columns,
        family,
    })
}

/// Applies frozen parameters to any matrix with the same columns.
pub fn apply_scaler(scaler: &Scaler, m: &Matrix) -> Result<Matrix> {
    if m.n_cols() != scaler.columns.len() {
        return Err(Error::Validation(format!(
            "matrix width {} does not match scaler ({})",
            m.n_cols(),
            scaler.columns.len()
        )));
    }
    let mut out = m.clone();
    for j in 0..m.n_cols() {
        if scaler.policies[j] == ScalePolicy::Passthrough {
            continue;
        }
        let mu = scaler.means[j];
        let sd = scaler.sds[j].max(SD_FLOOR);
        for r in 0..m.n_rows() {
            out.set(r, j, (m.get(r, j) - mu) / sd);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_col_matrix() -> (Matrix, Vec<String>) {
        // Column 0 behaves like a count (mean 40, sd 10); column 1 is a
        // bounded ratio.
        let rows = vec![
            vec![30.0, 0.2],
            vec![50.0, 0.4],
            vec![40.0, 0.6],
            vec![40.0, 0.8],
        ];
        (
            Matrix::from_rows(&rows),
            vec!["mean_daily_screens".into(), "overnight_ratio".into()],
        )
    }

    #[test]
    fn zscore_maps_mean_plus_sd_to_one() {
        let (m, cols) = two_col_matrix();
        let scaler = fit_scaler(&m, &cols, ModelFamily::Gbdt).unwrap();
        assert!((scaler.means[0] - 40.0).abs() < 1e-12);
        let sd = scaler.sds[0];
        let scaled = apply_scaler(&scaler, &m).unwrap();
        // value 50 -> (50-40)/sd
        assert!((scaled.get(1, 0) - 10.0 / sd).abs() < 1e-12);
    }

    #[test]
    fn tree_family_leaves_bounded_ratio_untouched() {
        let (m, cols) = two_col_matrix();
        let scaler = fit_scaler(&m, &cols, ModelFamily::Gbdt).unwrap();
        let scaled = apply_scaler(&scaler, &m).unwrap();
        for r in 0..m.n_rows() {
            assert_eq!(scaled.get(r, 1), m.get(r, 1));
        }
        // Elastic net standardizes everything.
        let scaler = fit_scaler(&m, &cols, ModelFamily::ElasticNet).unwrap();
        let scaled = apply_scaler(&scaler, &m).unwrap();
        assert!(scaled.get(0, 1) < 0.0);
    }

    #[test]
    fn constant_column_scales_to_zero_and_is_logged() {
        let rows = vec![vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 3.0]];
        let m = Matrix::from_rows(&rows);
        let cols = vec!["age".to_string(), "mean_daily_screens".to_string()];
        let scaler = fit_scaler(&m, &cols, ModelFamily::Gbdt).unwrap();
        assert_eq!(scaler.constant_columns, vec!["age".to_string()]);
        let scaled = apply_scaler(&scaler, &m).unwrap();
        for r in 0..3 {
            assert_eq!(scaled.get(r, 0), 0.0);
        }
    }
}

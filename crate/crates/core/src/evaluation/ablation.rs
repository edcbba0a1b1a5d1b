//! Nested feature ablation with paired-bootstrap significance.
//!
//! Conditions add cumulatively: (1) most recent CES-D only, (2) plus
//! current-period behavioral and demographic features, (3) plus behavioral
//! lags, (4) plus the person-level mean. Each adjacent step is tested with
//! a paired percentile bootstrap of the AUC difference on shared test
//! resamples; the three step p-values form the Holm correction family.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bootstrap::{
    bootstrap_ci, paired_delta_bootstrap, BootstrapConfig, MetricResult, PairedBootstrap,
};
use super::metrics::auc_ovr_macro;
use super::SplitTag;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::labels::LabeledDataset;
use crate::learners::{ClassWeights, ModelFamily, ModelParams};
use crate::stats::holm_bonferroni;
use crate::util::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCondition {
    pub name: String,
    pub n_features: usize,
    pub auc: MetricResult,
    /// Paired comparison against the previous condition (absent for the
    /// first condition).
    pub delta: Option<PairedBootstrap>,
    pub p_raw: Option<f64>,
    pub p_holm: Option<f64>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub conditions: Vec<AblationCondition>,
    pub alpha: f64,
}

/// The four canonical nested conditions as column-index sets over a feature
/// matrix (columns missing after screening are simply absent).
pub fn canonical_conditions(matrix: &FeatureMatrix) -> Vec<(String, Vec<usize>)> {
    let find = |name: &str| matrix.column_index(name);
    let mut c1 = Vec::new();
    if let Some(i) = find("prior_cesd") {
        c1.push(i);
    }
    let mut c2 = c1.clone();
    for name in ["age", "gender_male", "gender_female"] {
        if let Some(i) = find(name) {
            c2.push(i);
        }
    }
    for (i, name) in matrix.columns.iter().enumerate() {
        let behavioral_level_or_delta = !name.starts_with("lag_")
            && !matches!(
                name.as_str(),
                "prior_cesd" | "person_mean_cesd" | "age" | "gender_male" | "gender_female"
            );
        if behavioral_level_or_delta && !c2.contains(&i) {
            c2.push(i);
        }
    }
    let mut c3 = c2.clone();
    for (i, name) in matrix.columns.iter().enumerate() {
        if name.starts_with("lag_") {
            c3.push(i);
        }
    }
    let mut c4 = c3.clone();
    if let Some(i) = find("person_mean_cesd") {
        c4.push(i);
    }
    vec![
        ("prior_cesd_only".to_string(), c1),
        ("plus_behavioral".to_string(), c2),
        ("plus_lags".to_string(), c3),
        ("plus_person_mean".to_string(), c4),
    ]
}

/// Macro-AUC of one condition's test probabilities over resampled indices.
fn auc_metric<'a>(
    proba: &'a Matrix,
    y_test: &'a [usize],
) -> impl Fn(&[usize]) -> Option<f64> + Sync + 'a {
    move |idx: &[usize]| {
        let yt: Vec<usize> = idx.iter().map(|&i| y_test[i]).collect();
        auc_ovr_macro(&yt, &proba.select_rows(idx))
    }
}

/// Runs the ablation over an already-scaled matrix. `conditions` must be
/// nested (each column set a superset of the previous).
pub fn ablation_run(
    labeled: &LabeledDataset,
    scaled: &Matrix,
    conditions: &[(String, Vec<usize>)],
    model: &ModelParams,
    bootstrap: &BootstrapConfig,
    alpha: f64,
) -> Result<AblationTable> {
    if conditions.len() < 2 {
        return Err(Error::Config("ablation needs at least 2 conditions".into()));
    }
    for (name, cols) in conditions {
        if cols.is_empty() {
            return Err(Error::Config(format!(
                "ablation condition `{name}` has no columns (screened out?)"
            )));
        }
    }
    for w in conditions.windows(2) {
        let (prev, next) = (&w[0].1, &w[1].1);
        if !prev.iter().all(|c| next.contains(c)) {
            return Err(Error::Config(format!(
                "ablation conditions must be nested: `{}` is not a superset of `{}`",
                w[1].0, w[0].0
            )));
        }
    }

    let y = labeled.class_indices();
    let train_idx = labeled.matrix.row_indices_with_tag(SplitTag::Train);
    let test_idx = labeled.matrix.row_indices_with_tag(SplitTag::Test);
    if test_idx.is_empty() {
        return Err(Error::Degenerate("no test rows for ablation".into()));
    }
    let y_train: Vec<usize> = train_idx.iter().map(|&i| y[i]).collect();
    let y_test: Vec<usize> = test_idx.iter().map(|&i| y[i]).collect();
    let class_weights = ClassWeights::balanced(&y_train)?;
    let standardized = model.family() == ModelFamily::ElasticNet;

    // Fit each condition and keep its test probabilities.
    let test_probas: Vec<Matrix> = conditions
        .par_iter()
        .map(|(name, cols)| -> Result<Matrix> {
            let col_names: Vec<String> = cols
                .iter()
                .map(|&c| labeled.matrix.columns[c].clone())
                .collect();
            let x_train = scaled.select_rows(&train_idx).select_columns(cols);
            let x_test = scaled.select_rows(&test_idx).select_columns(cols);
            let fitted = model
                .fit(&x_train, &y_train, &class_weights, &col_names, standardized)
                .map_err(|e| Error::Validation(format!("condition `{name}`: {e}")))?;
            fitted.predict_proba(&x_test)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(conditions.len());
    let mut p_raws = Vec::new();
    for (i, (name, cols)) in conditions.iter().enumerate() {
        let auc = bootstrap_ci(
            auc_metric(&test_probas[i], &y_test),
            y_test.len(),
            bootstrap,
        )?;
        let delta = if i == 0 {
            None
        } else {
            Some(paired_delta_bootstrap(
                auc_metric(&test_probas[i - 1], &y_test),
                auc_metric(&test_probas[i], &y_test),
                y_test.len(),
                bootstrap,
            )?)
        };
        let p_raw = delta.as_ref().and_then(|d| d.p_leq_zero);
        if let Some(p) = p_raw {
            p_raws.push(p);
        }
        rows.push(AblationCondition {
            name: name.clone(),
            n_features: cols.len(),
            auc,
            delta,
            p_raw,
            p_holm: None,
            significant: false,
        });
    }

    // Holm family: every adjacent-step comparison in this run.
    let adjusted = holm_bonferroni(&p_raws)?;
    let mut cursor = 0;
    for row in rows.iter_mut() {
        if row.p_raw.is_some() {
            row.p_holm = Some(adjusted[cursor]);
            row.significant = adjusted[cursor] < alpha;
            cursor += 1;
        }
    }

    Ok(AblationTable {
        conditions: rows,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{feature_columns, FeatureRow, N_FEATURES};
    use crate::labels::{LabelOp, TrajectoryLabel};

    /// Minimal labeled dataset with constant person_mean so conditions 3
    /// and 4 produce identical models.
    fn tiny_labeled(n_per_split: usize) -> (LabeledDataset, Matrix) {
        let columns = feature_columns();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut deltas = Vec::new();
        let splits = [SplitTag::Train, SplitTag::Val, SplitTag::Test];
        let mut k = 0u32;
        for tag in splits {
            for i in 0..n_per_split {
                k += 1;
                let mut values = vec![0.0; N_FEATURES];
                // prior_cesd drives the label deterministically.
                let score = (i % 3) as f64;
                values[0] = score * 10.0;
                values[1] = 42.0; // constant person mean
                rows.push(FeatureRow {
                    participant_id: format!("p{:02}", i % 6),
                    period_index: k,
                    split: tag,
                    values,
                    degenerate: false,
                    delta_gap: false,
                    has_predecessor: true,
                });
                let label = TrajectoryLabel::ALL[(score as usize) % 3];
                labels.push(label);
                deltas.push(score - 1.0);
            }
        }
        let matrix = FeatureMatrix { columns, rows };
        let scaled = matrix.to_matrix();
        (
            LabeledDataset {
                matrix,
                labels,
                deltas,
                op: LabelOp::SevCrossing,
                label_config_hash: "test".into(),
                distribution: Default::default(),
                thresholds: Default::default(),
                tercile_cuts: None,
            },
            scaled,
        )
    }

    #[test]
    fn canonical_conditions_are_nested_with_expected_sizes() {
        let (labeled, _) = tiny_labeled(9);
        let conds = canonical_conditions(&labeled.matrix);
        assert_eq!(conds.len(), 4);
        assert_eq!(conds[0].1.len(), 1);
        assert_eq!(conds[1].1.len(), 21);
        assert_eq!(conds[2].1.len(), 38);
        assert_eq!(conds[3].1.len(), 39);
        for w in conds.windows(2) {
            assert!(w[0].1.iter().all(|c| w[1].1.contains(c)));
        }
    }

    #[test]
    fn identical_adjacent_conditions_give_zero_delta_p_one() {
        let (labeled, scaled) = tiny_labeled(30);
        // person_mean_cesd is constant, so adding it (condition 4 vs 3)
        // cannot change the fit: the z-scored column is identically zero.
        let conds = canonical_conditions(&labeled.matrix);
        let model = ModelParams::ElasticNet(crate::learners::ElasticNetParams {
            c: 1.0,
            l1_ratio: 0.5,
            tol: 1e-8,
            max_epochs: 2000,
            seed: 0,
        });
        let train_idx = labeled.matrix.row_indices_with_tag(SplitTag::Train);
        let train = scaled.select_rows(&train_idx);
        let scaler = crate::features::fit_scaler(
            &train,
            &labeled.matrix.columns,
            crate::learners::ModelFamily::ElasticNet,
        )
        .unwrap();
        let scaled = crate::features::apply_scaler(&scaler, &scaled).unwrap();
        let table = ablation_run(
            &labeled,
            &scaled,
            &conds,
            &model,
            &BootstrapConfig {
                n_resamples: 200,
                seed: 42,
            },
            0.05,
        )
        .unwrap();
        let last = &table.conditions[3];
        let d = last.delta.as_ref().unwrap();
        assert_eq!(d.delta_point, Some(0.0));
        assert_eq!(last.p_raw, Some(1.0));
        assert!(!last.significant);
    }

    #[test]
    fn non_nested_conditions_rejected() {
        let (labeled, scaled) = tiny_labeled(12);
        let conds = vec![("a".to_string(), vec![0, 1]), ("b".to_string(), vec![2, 3])];
        let model = ModelParams::ElasticNet(Default::default());
        let err = ablation_run(
            &labeled,
            &scaled,
            &conds,
            &model,
            &BootstrapConfig::default(),
            0.05,
        )
        .unwrap_err();
        assert!(err.to_string().contains("nested"));
    }
}

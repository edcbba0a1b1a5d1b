//! Repeated leave-group-out cross-validation (cold-start scenario).
//!
//! Whole participants are held out; every train-derived statistic (VIF set,
//! scaler, class weights, the model itself) is refit from the held-in
//! participants' train+val rows, and held-out rows receive the population
//! mean as their person-level symptom anchor. Evaluation uses the held-out
//! participants' test-split rows, keeping fold metrics comparable with the
//! primary temporal evaluation. Hyperparameters stay fixed from the primary
//! grid search; each fold gets a derived deterministic fitting seed.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{
    argmax_predictions, auc_ovr_macro, balanced_accuracy, ppv_worsening, sensitivity_worsening,
};
use super::SplitTag;
use crate::error::{Error, Result};
use crate::features::{apply_scaler, fit_scaler, vif_screen, COL_PERSON_MEAN_CESD};
use crate::labels::LabeledDataset;
use crate::learners::{ClassWeights, ModelFamily, ModelParams};
use crate::util::{derive_seed3, mean};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogoPlan {
    pub n_repeats: usize,
    pub n_folds: usize,
    pub master_seed: u64,
    /// assignments[repeat][fold] = held-out participant ids (sorted).
    pub assignments: Vec<Vec<Vec<String>>>,
}

impl LogoPlan {
    /// Shuffles participants per repeat (seeded) and chunks them into folds
    /// whose sizes differ by at most one, larger folds first
    /// (96 participants over 5 folds gives 20,19,19,19,19).
    pub fn new(
        participants: &[String],
        n_repeats: usize,
        n_folds: usize,
        master_seed: u64,
    ) -> Result<LogoPlan> {
        if n_folds < 2 || participants.len() < n_folds {
            return Err(Error::Config(format!(
                "cannot split {} participants into {n_folds} folds",
                participants.len()
            )));
        }
        let mut assignments = Vec::with_capacity(n_repeats);
        for repeat in 0..n_repeats {
            let mut order: Vec<String> = participants.to_vec();
            order.sort(); // canonical order before the seeded shuffle
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed3(master_seed, 0x1060, repeat as u64));
            for i in (1..order.len()).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
            let n = order.len();
            let base = n / n_folds;
            let extra = n % n_folds;
            let mut folds = Vec::with_capacity(n_folds);
            let mut at = 0usize;
            for f in 0..n_folds {
                let size = base + usize::from(f < extra);
                let mut fold: Vec<String> = order[at..at + size].to_vec();
                fold.sort();
                folds.push(fold);
                at += size;
            }
            assignments.push(folds);
        }
        Ok(LogoPlan {
            n_repeats,
            n_folds,
            master_seed,
            assignments,
        })
    }

    pub fn fold_sizes(&self, repeat: usize) -> Vec<usize> {
        self.assignments[repeat].iter().map(|f| f.len()).collect()
    }
}

/// Point metrics for one fold. Undefined values (no worsening truths in the
/// held-out group, no worsening predictions) stay `None` and render blank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogoFoldResult {
    pub repeat: usize,
    pub fold: usize,
    pub held_out_participants: usize,
    pub held_out_observations: usize,
    pub train_n: usize,
    pub val_n: usize,
    pub auc: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub sensitivity_worsening: Option<f64>,
    pub ppv_worsening: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LogoMetricSummary {
    pub mean: Option<f64>,
    /// Per-repeat means (mean over that repeat's folds).
    pub per_repeat: Vec<Option<f64>>,
    pub repeat_min: Option<f64>,
    pub repeat_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogoSummary {
    pub folds: Vec<LogoFoldResult>,
    pub auc: LogoMetricSummary,
    pub balanced_accuracy: LogoMetricSummary,
    pub sensitivity_worsening: LogoMetricSummary,
    pub ppv_worsening: LogoMetricSummary,
}

fn summarize(
    folds: &[LogoFoldResult],
    n_repeats: usize,
    get: impl Fn(&LogoFoldResult) -> Option<f64>,
) -> LogoMetricSummary {
    let defined: Vec<f64> = folds.iter().filter_map(&get).collect();
    let mean_all = (!defined.is_empty()).then(|| mean(&defined));
    let mut per_repeat = Vec::with_capacity(n_repeats);
    for r in 0..n_repeats {
        let vals: Vec<f64> = folds
            .iter()
            .filter(|f| f.repeat == r)
            .filter_map(&get)
            .collect();
        per_repeat.push((!vals.is_empty()).then(|| mean(&vals)));
    }
    let reps: Vec<f64> = per_repeat.iter().flatten().copied().collect();
    LogoMetricSummary {
        mean: mean_all,
        per_repeat,
        repeat_min: reps.iter().copied().reduce(f64::min),
        repeat_max: reps.iter().copied().reduce(f64::max),
    }
}

/// Runs the full 5x5 (by default) leave-group-out evaluation.
pub fn logo_cv(
    labeled: &LabeledDataset,
    plan: &LogoPlan,
    model: &ModelParams,
    vif_threshold: f64,
    vif_protected: &BTreeSet<String>,
) -> Result<LogoSummary> {
    let tasks: Vec<(usize, usize)> = (0..plan.n_repeats)
        .flat_map(|r| (0..plan.n_folds).map(move |f| (r, f)))
        .collect();

    let folds: Vec<LogoFoldResult> = tasks
        .par_iter()
        .map(|&(repeat, fold)| {
            run_fold(labeled, plan, model, vif_threshold, vif_protected, repeat, fold)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(LogoSummary {
        auc: summarize(&folds, plan.n_repeats, |f| f.auc),
        balanced_accuracy: summarize(&folds, plan.n_repeats, |f| f.balanced_accuracy),
        sensitivity_worsening: summarize(&folds, plan.n_repeats, |f| f.sensitivity_worsening),
        ppv_worsening: summarize(&folds, plan.n_repeats, |f| f.ppv_worsening),
        folds,
    })
}

fn run_fold(
    labeled: &LabeledDataset,
    plan: &LogoPlan,
    model: &ModelParams,
    vif_threshold: f64,
    vif_protected: &BTreeSet<String>,
    repeat: usize,
    fold: usize,
) -> Result<LogoFoldResult> {
    let held_out: BTreeSet<&str> = plan.assignments[repeat][fold]
        .iter()
        .map(|s| s.as_str())
        .collect();
    let y = labeled.class_indices();

    let mut fit_rows = Vec::new();
    let mut eval_rows = Vec::new();
    let mut train_n = 0usize;
    let mut val_n = 0usize;
    for (i, row) in labeled.matrix.rows.iter().enumerate() {
        if held_out.contains(row.participant_id.as_str()) {
            if row.split == SplitTag::Test {
                eval_rows.push(i);
            }
        } else {
            match row.split {
                SplitTag::Train => {
                    fit_rows.push(i);
                    train_n += 1;
                }
                SplitTag::Val => {
                    fit_rows.push(i);
                    val_n += 1;
                }
                SplitTag::Test => {}
            }
        }
    }
    if fit_rows.is_empty() || eval_rows.is_empty() {
        return Err(Error::Degenerate(format!(
            "repeat {repeat} fold {fold}: empty fit or eval set"
        )));
    }

    // Population mean of the held-in participants' person-level anchors
    // (one value per participant, not per row).
    let mut seen = BTreeSet::new();
    let mut person_means = Vec::new();
    for &i in &fit_rows {
        let row = &labeled.matrix.rows[i];
        if seen.insert(row.participant_id.as_str()) {
            person_means.push(row.values[COL_PERSON_MEAN_CESD]);
        }
    }
    let population_mean = mean(&person_means);

    let raw = labeled.matrix.to_matrix();
    let mut raw_override = raw.clone();
    for &i in &eval_rows {
        raw_override.set(i, COL_PERSON_MEAN_CESD, population_mean);
    }

    // Refit the whole preprocessing stack on the held-in rows.
    let fit_raw = raw_override.select_rows(&fit_rows);
    let screen = vif_screen(&fit_raw, &labeled.matrix.columns, vif_threshold, vif_protected)?;
    let cols = &screen.retained_indices;
    let col_names = screen.retained_columns.clone();
    let fit_x = fit_raw.select_columns(cols);
    let scaler = fit_scaler(&fit_x, &col_names, model.family())?;
    let fit_scaled = apply_scaler(&scaler, &fit_x)?;
    let eval_scaled = apply_scaler(
        &scaler,
        &raw_override.select_rows(&eval_rows).select_columns(cols),
    )?;

    let y_fit: Vec<usize> = fit_rows.iter().map(|&i| y[i]).collect();
    let y_eval: Vec<usize> = eval_rows.iter().map(|&i| y[i]).collect();
    let class_weights = ClassWeights::balanced(&y_fit)?;
    let fold_seed = derive_seed3(plan.master_seed, repeat as u64, fold as u64);
    let standardized = model.family() == ModelFamily::ElasticNet;
    let fitted = model.with_seed(fold_seed).fit(
        &fit_scaled,
        &y_fit,
        &class_weights,
        &col_names,
        standardized,
    )?;
    let proba = fitted.predict_proba(&eval_scaled)?;
    let preds = argmax_predictions(&proba);

    Ok(LogoFoldResult {
        repeat,
        fold,
        held_out_participants: held_out.len(),
        held_out_observations: eval_rows.len(),
        train_n,
        val_n,
        auc: auc_ovr_macro(&y_eval, &proba),
        balanced_accuracy: balanced_accuracy(&y_eval, &preds),
        sensitivity_worsening: sensitivity_worsening(&y_eval, &preds),
        ppv_worsening: ppv_worsening(&y_eval, &preds),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_fold_sizes_96_participants() {
        let pids: Vec<String> = (0..96).map(|i| format!("p{i:04}")).collect();
        let plan = LogoPlan::new(&pids, 5, 5, 42).unwrap();
        for r in 0..5 {
            let mut sizes = plan.fold_sizes(r);
            assert_eq!(sizes, vec![20, 19, 19, 19, 19]);
            sizes.sort();
            // Folds partition all participants.
            let mut all: Vec<&String> = plan.assignments[r].iter().flatten().collect();
            all.sort();
            all.dedup();
            assert_eq!(all.len(), 96);
        }
        // Reshuffled across repeats.
        assert_ne!(plan.assignments[0], plan.assignments[1]);
    }

    #[test]
    fn plan_is_deterministic_per_seed() {
        let pids: Vec<String> = (0..30).map(|i| format!("p{i:02}")).collect();
        let a = LogoPlan::new(&pids, 3, 5, 7).unwrap();
        let b = LogoPlan::new(&pids, 3, 5, 7).unwrap();
        assert_eq!(a, b);
        let c = LogoPlan::new(&pids, 3, 5, 8).unwrap();
        assert_ne!(a.assignments, c.assignments);
    }

    #[test]
    fn summary_mean_is_arithmetic_mean_of_folds() {
        let folds: Vec<LogoFoldResult> = (0..6)
            .map(|i| LogoFoldResult {
                repeat: i / 3,
                fold: i % 3,
                held_out_participants: 5,
                held_out_observations: 20,
                train_n: 100,
                val_n: 30,
                auc: Some(0.7 + i as f64 * 0.02),
                balanced_accuracy: Some(0.6),
                sensitivity_worsening: if i == 2 { None } else { Some(0.5) },
                ppv_worsening: Some(0.3),
            })
            .collect();
        let s = summarize(&folds, 2, |f| f.auc);
        let expect = (0..6).map(|i| 0.7 + i as f64 * 0.02).sum::<f64>() / 6.0;
        assert!((s.mean.unwrap() - expect).abs() < 1e-12);
        assert!((s.per_repeat[0].unwrap() - 0.72).abs() < 1e-12);
        assert!((s.per_repeat[1].unwrap() - 0.78).abs() < 1e-12);
        assert_eq!(s.repeat_min, s.per_repeat[0]);
        assert_eq!(s.repeat_max, s.per_repeat[1]);
        // Undefined fold values are skipped, not zero-filled.
        let sens = summarize(&folds, 2, |f| f.sensitivity_worsening);
        assert!((sens.mean.unwrap() - 0.5).abs() < 1e-12);
    }
}

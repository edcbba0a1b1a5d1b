//! Deployment scenarios: assessment staleness, subgroup reports, and
//! two-model prediction agreement.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_ci, BootstrapConfig, MetricResult};
use super::metrics::{
    accuracy, argmax_predictions, auc_ovr_macro, balanced_accuracy, confusion_matrix,
    ppv_worsening, sensitivity_worsening, threshold_predictions,
};
use super::SplitTag;
use crate::error::{Error, Result};
use crate::features::{apply_scaler, Scaler, COL_PRIOR_CESD};
use crate::labels::{LabeledDataset, N_CLASSES};
use crate::learners::TrainedModel;
use crate::util::{quantile_sorted, Matrix};

/// The four headline metrics with bootstrap intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub auc: MetricResult,
    pub balanced_accuracy: MetricResult,
    pub sensitivity_worsening: MetricResult,
    pub ppv_worsening: MetricResult,
}

/// Evaluates predictions with bootstrap CIs over the given rows. A metric
/// whose full-sample value is undefined (e.g. PPV with zero worsening
/// predictions) comes back as an undefined result to be flagged, not an
/// error; a defined metric whose resamples are mostly degenerate still
/// errors, because its interval would be meaningless.
pub fn evaluate_with_bootstrap(
    y_true: &[usize],
    proba: &Matrix,
    y_pred: &[usize],
    config: &BootstrapConfig,
) -> Result<(MetricBlock, [[usize; N_CLASSES]; N_CLASSES])> {
    let n = y_true.len();
    let identity: Vec<usize> = (0..n).collect();
    let metric =
        |f: &(dyn Fn(&[usize]) -> Option<f64> + Sync)| -> Result<MetricResult> {
            if f(&identity).is_none() {
                return Ok(MetricResult::undefined(config));
            }
            bootstrap_ci(f, n, config)
        };
    let auc = metric(&|idx: &[usize]| {
        let yt: Vec<usize> = idx.iter().map(|&i| y_true[i]).collect();
        auc_ovr_macro(&yt, &proba.select_rows(idx))
    })?;
    let bacc = metric(&|idx: &[usize]| {
        let yt: Vec<usize> = idx.iter().map(|&i| y_true[i]).collect();
        let yp: Vec<usize> = idx.iter().map(|&i| y_pred[i]).collect();
        balanced_accuracy(&yt, &yp)
    })?;
    let sens = metric(&|idx: &[usize]| {
        let yt: Vec<usize> = idx.iter().map(|&i| y_true[i]).collect();
        let yp: Vec<usize> = idx.iter().map(|&i| y_pred[i]).collect();
        sensitivity_worsening(&yt, &yp)
    })?;
    let ppv = metric(&|idx: &[usize]| {
        let yt: Vec<usize> = idx.iter().map(|&i| y_true[i]).collect();
        let yp: Vec<usize> = idx.iter().map(|&i| y_pred[i]).collect();
        ppv_worsening(&yt, &yp)
    })?;
    Ok((
        MetricBlock {
            auc,
            balanced_accuracy: bacc,
            sensitivity_worsening: sens,
            ppv_worsening: ppv,
        },
        confusion_matrix(y_true, y_pred),
    ))
}

/// Decision rule: plain argmax, or a worsening-probability override.
pub fn decide(proba: &Matrix, worsening_threshold: Option<f64>) -> Vec<usize> {
    match worsening_threshold {
        None => argmax_predictions(proba),
        Some(t) => threshold_predictions(proba, t),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StalenessResult {
    /// Periods of staleness (1 = 4 weeks, 2 = 8 weeks).
    pub k_periods: usize,
    pub n_evaluated: usize,
    /// Test rows dropped for lacking a k-back assessment.
    pub n_dropped: usize,
    pub metrics: MetricBlock,
    pub confusion: [[usize; N_CLASSES]; N_CLASSES],
}

/// Re-evaluates an already-trained model with each test row's most recent
/// CES-D replaced by the participant's value from `k_periods` earlier.
/// Labels and every other feature stay unchanged; k = 0 is the identity
/// (debug only).
#[allow(clippy::too_many_arguments)]
pub fn staleness_scenario(
    labeled: &LabeledDataset,
    cohort: &crate::datamodel::Cohort,
    model: &TrainedModel,
    scaler: &Scaler,
    retained_cols: &[usize],
    k_periods: usize,
    bootstrap: &BootstrapConfig,
    worsening_threshold: Option<f64>,
) -> Result<StalenessResult> {
    let raw = labeled.matrix.to_matrix();
    let y = labeled.class_indices();
    let test_idx = labeled.matrix.row_indices_with_tag(SplitTag::Test);

    let mut kept_rows = Vec::new();
    let mut kept_y = Vec::new();
    let mut n_dropped = 0usize;
    let mut raw_stale = raw.clone();
    for &i in &test_idx {
        let row = &labeled.matrix.rows[i];
        let part = cohort
            .participants
            .get(&row.participant_id)
            .ok_or_else(|| Error::Validation(format!("unknown participant {}", row.participant_id)))?;
        let pos = part
            .assessments
            .iter()
            .position(|a| a.assessment_index == row.period_index)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "participant {}: assessment {} missing",
                    row.participant_id, row.period_index
                ))
            })?;
        if pos < k_periods {
            n_dropped += 1;
            continue;
        }
        let stale_value = part.assessments[pos - k_periods].cesd as f64;
        raw_stale.set(i, COL_PRIOR_CESD, stale_value);
        kept_rows.push(i);
        kept_y.push(y[i]);
    }
    if kept_rows.is_empty() {
        return Err(Error::Degenerate(format!(
            "staleness k={k_periods}: every test row lacks {k_periods}-back history"
        )));
    }

    let x = raw_stale.select_rows(&kept_rows).select_columns(retained_cols);
    let scaled = apply_scaler(scaler, &x)?;
    let proba = model.predict_proba(&scaled)?;
    let preds = decide(&proba, worsening_threshold);
    let (metrics, confusion) = evaluate_with_bootstrap(&kept_y, &proba, &preds, bootstrap)?;
    Ok(StalenessResult {
        k_periods,
        n_evaluated: kept_rows.len(),
        n_dropped,
        metrics,
        confusion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubgroupAxis {
    Sex,
    RaceBinary,
    Ethnicity,
    AgeTercile,
    IncomeBand,
}

impl SubgroupAxis {
    pub const ALL: [SubgroupAxis; 5] = [
        SubgroupAxis::Sex,
        SubgroupAxis::RaceBinary,
        SubgroupAxis::Ethnicity,
        SubgroupAxis::AgeTercile,
        SubgroupAxis::IncomeBand,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SubgroupAxis::Sex => "sex",
            SubgroupAxis::RaceBinary => "race",
            SubgroupAxis::Ethnicity => "ethnicity",
            SubgroupAxis::AgeTercile => "age_tercile",
            SubgroupAxis::IncomeBand => "income_band",
        }
    }

    pub fn parse(s: &str) -> Option<SubgroupAxis> {
        match s {
            "sex" => Some(SubgroupAxis::Sex),
            "race" => Some(SubgroupAxis::RaceBinary),
            "ethnicity" => Some(SubgroupAxis::Ethnicity),
            "age_tercile" => Some(SubgroupAxis::AgeTercile),
            "income_band" => Some(SubgroupAxis::IncomeBand),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupRow {
    pub axis: String,
    pub group: String,
    pub n_participants: usize,
    pub n_observations: usize,
    pub n_worsening: usize,
    /// Suppressed groups (below min-n) carry no metrics.
    pub suppressed: bool,
    pub metrics: Option<MetricBlock>,
    pub confusion: Option<[[usize; N_CLASSES]; N_CLASSES]>,
    pub note: String,
}

/// Age tercile cuts (1/3 and 2/3 quantiles) over the participants present
/// in the dataset.
pub fn age_tercile_cuts(ages: &[f64]) -> (f64, f64) {
    let mut sorted = ages.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite ages"));
    (
        quantile_sorted(&sorted, 1.0 / 3.0),
        quantile_sorted(&sorted, 2.0 / 3.0),
    )
}

/// Group key for one participant under one axis. `None` means the
/// participant is excluded from between-group comparison on this axis
/// (e.g. gender "other", income "unknown") but still counts in `overall`.
fn group_of(
    axis: SubgroupAxis,
    demo: &crate::datamodel::Demographics,
    age_cuts: (f64, f64),
) -> Option<String> {
    use crate::datamodel::{Ethnicity, Gender, IncomeBand};
    match axis {
        SubgroupAxis::Sex => match demo.gender {
            Gender::Female => Some("female".into()),
            Gender::Male => Some("male".into()),
            Gender::Other => None,
        },
        SubgroupAxis::RaceBinary => {
            if demo.race == vec!["white".to_string()] {
                Some("white".into())
            } else {
                Some("non_white".into())
            }
        }
        SubgroupAxis::Ethnicity => match demo.ethnicity {
            Ethnicity::Hispanic => Some("hispanic".into()),
            Ethnicity::NonHispanic => Some("non_hispanic".into()),
        },
        SubgroupAxis::AgeTercile => {
            let age = demo.age_years as f64;
            Some(if age <= age_cuts.0 {
                "younger".into()
            } else if age <= age_cuts.1 {
                "middle".into()
            } else {
                "older".into()
            })
        }
        SubgroupAxis::IncomeBand => match demo.income_band {
            IncomeBand::Below25k => Some("below_25k".into()),
            IncomeBand::From25kTo100k => Some("25k_to_100k".into()),
            IncomeBand::Above100k => Some("above_100k".into()),
            IncomeBand::Unknown => None,
        },
    }
}

/// Disaggregates already-made test predictions by demographics. No
/// refitting or threshold tuning: predictions are identical to the primary
/// evaluation's.
pub fn subgroup_report(
    labeled: &LabeledDataset,
    cohort: &crate::datamodel::Cohort,
    test_proba: &Matrix,
    test_preds: &[usize],
    axes: &[SubgroupAxis],
    min_n: usize,
    bootstrap: &BootstrapConfig,
) -> Result<Vec<SubgroupRow>> {
    let test_idx = labeled.matrix.row_indices_with_tag(SplitTag::Test);
    if test_idx.len() != test_preds.len() || test_proba.n_rows() != test_preds.len() {
        return Err(Error::Validation(
            "subgroup report needs one prediction per test row".into(),
        ));
    }
    let y = labeled.class_indices();
    let y_test: Vec<usize> = test_idx.iter().map(|&i| y[i]).collect();

    // Participant ages over the labeled cohort define the tercile cuts.
    let mut seen = std::collections::BTreeSet::new();
    let mut ages = Vec::new();
    for row in &labeled.matrix.rows {
        if seen.insert(row.participant_id.as_str()) {
            let demo = &cohort
                .participants
                .get(&row.participant_id)
                .ok_or_else(|| {
                    Error::Validation(format!("unknown participant {}", row.participant_id))
                })?
                .demographics;
            ages.push(demo.age_years as f64);
        }
    }
    let age_cuts = age_tercile_cuts(&ages);

    let mut rows = Vec::new();
    // Overall row first.
    rows.push(make_subgroup_row(
        "overall",
        "all",
        &test_idx,
        labeled,
        &y_test,
        test_proba,
        test_preds,
        (0..test_idx.len()).collect(),
        min_n,
        bootstrap,
        String::new(),
    )?);

    for axis in axes {
        // Deterministic group ordering: BTreeMap keyed by group name.
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (slot, &i) in test_idx.iter().enumerate() {
            let row = &labeled.matrix.rows[i];
            let demo = &cohort.participants[&row.participant_id].demographics;
            if let Some(g) = group_of(*axis, demo, age_cuts) {
                groups.entry(g).or_default().push(slot);
            }
        }
        for (group, slots) in groups {
            rows.push(make_subgroup_row(
                axis.as_str(),
                &group,
                &test_idx,
                labeled,
                &y_test,
                test_proba,
                test_preds,
                slots,
                min_n,
                bootstrap,
                String::new(),
            )?);
        }
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn make_subgroup_row(
    axis: &str,
    group: &str,
    test_idx: &[usize],
    labeled: &LabeledDataset,
    y_test: &[usize],
    test_proba: &Matrix,
    test_preds: &[usize],
    slots: Vec<usize>,
    min_n: usize,
    bootstrap: &BootstrapConfig,
    mut note: String,
) -> Result<SubgroupRow> {
    let mut participants = std::collections::BTreeSet::new();
    for &s in &slots {
        participants.insert(labeled.matrix.rows[test_idx[s]].participant_id.as_str());
    }
    let yt: Vec<usize> = slots.iter().map(|&s| y_test[s]).collect();
    let n_worsening = yt.iter().filter(|&&c| c == 2).count();
    if slots.len() < min_n {
        return Ok(SubgroupRow {
            axis: axis.to_string(),
            group: group.to_string(),
            n_participants: participants.len(),
            n_observations: slots.len(),
            n_worsening,
            suppressed: true,
            metrics: None,
            confusion: None,
            note: format!("suppressed: fewer than {min_n} observations"),
        });
    }
    let proba = test_proba.select_rows(&slots);
    let preds: Vec<usize> = slots.iter().map(|&s| test_preds[s]).collect();
    let (metrics, confusion) = evaluate_with_bootstrap(&yt, &proba, &preds, bootstrap)?;
    if n_worsening == 0 {
        note = "no worsening events in group; sensitivity undefined".to_string();
    }
    Ok(SubgroupRow {
        axis: axis.to_string(),
        group: group.to_string(),
        n_participants: participants.len(),
        n_observations: slots.len(),
        n_worsening,
        suppressed: false,
        metrics: Some(metrics),
        confusion: Some(confusion),
        note,
    })
}

/// Two-model comparison (the two-feature vs full-model analysis): headline
/// metrics for both plus prediction agreement and its cross-tabulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub name_a: String,
    pub name_b: String,
    pub metrics_a: MetricBlock,
    pub metrics_b: MetricBlock,
    /// Fraction of test rows where both models pick the same class.
    pub agreement: MetricResult,
    /// agreement_by_class[c] = (n agreeing, n total) among rows with true
    /// class c.
    pub agreement_by_class: [(usize, usize); N_CLASSES],
    /// cross_tab[a][b]: rows predicted a by model A and b by model B.
    pub cross_tab: [[usize; N_CLASSES]; N_CLASSES],
}

pub fn compare_models(
    name_a: &str,
    name_b: &str,
    y_true: &[usize],
    proba_a: &Matrix,
    preds_a: &[usize],
    proba_b: &Matrix,
    preds_b: &[usize],
    bootstrap: &BootstrapConfig,
) -> Result<ModelComparison> {
    let n = y_true.len();
    if preds_a.len() != n || preds_b.len() != n {
        return Err(Error::Validation("prediction lengths differ".into()));
    }
    let (metrics_a, _) = evaluate_with_bootstrap(y_true, proba_a, preds_a, bootstrap)?;
    let (metrics_b, _) = evaluate_with_bootstrap(y_true, proba_b, preds_b, bootstrap)?;
    let agreement = bootstrap_ci(
        |idx: &[usize]| {
            let pa: Vec<usize> = idx.iter().map(|&i| preds_a[i]).collect();
            let pb: Vec<usize> = idx.iter().map(|&i| preds_b[i]).collect();
            accuracy(&pa, &pb)
        },
        n,
        bootstrap,
    )?;
    let mut agreement_by_class = [(0usize, 0usize); N_CLASSES];
    let mut cross_tab = [[0usize; N_CLASSES]; N_CLASSES];
    for i in 0..n {
        cross_tab[preds_a[i]][preds_b[i]] += 1;
        agreement_by_class[y_true[i]].1 += 1;
        if preds_a[i] == preds_b[i] {
            agreement_by_class[y_true[i]].0 += 1;
        }
    }
    Ok(ModelComparison {
        name_a: name_a.to_string(),
        name_b: name_b.to_string(),
        metrics_a,
        metrics_b,
        agreement,
        agreement_by_class,
        cross_tab,
    })
}

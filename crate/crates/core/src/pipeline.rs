//! End-to-end run orchestration:
//! ingest -> inclusion -> split -> featurize -> VIF -> scale -> label ->
//! grid search (balanced accuracy on val) -> refit -> evaluate -> optional
//! scenarios -> report directory with manifest.
//!
//! Every stage error is wrapped with its stage name so the CLI can emit a
//! machine-readable failure record.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{model_size_key, InputSpec, RunConfig};
use crate::datamodel::{apply_inclusion, load_cohort, synth_cohort, write_cohort, Cohort, SynthConfig};
use crate::error::{Error, Result};
use crate::evaluation::ablation::{ablation_run, canonical_conditions};
use crate::evaluation::logo::{logo_cv, LogoPlan};
use crate::evaluation::metrics::{
    argmax_predictions, auc_ovr_macro, balanced_accuracy, confusion_matrix, ppv_worsening,
    sensitivity_worsening,
};
use crate::evaluation::report::{
    write_report, FileEntry, IntervalKind, Manifest, ModelRow, RunCounts, RunReport, ScenarioRow,
};
use crate::evaluation::scenarios::{
    compare_models, decide, evaluate_with_bootstrap, staleness_scenario, subgroup_report,
    MetricBlock, SubgroupAxis,
};
use crate::evaluation::{temporal_split, MetricResult, SplitParams, SplitTag};
use crate::features::{
    apply_scaler, build_design_matrix, fit_scaler, labelable_row_keys, vif_screen, FeatureMatrix,
    FeatureParams, COL_PRIOR_CESD, DELTAS_START, N_DELTAS,
};
use crate::labels::{label_dataset, LabeledDataset, TrajectoryLabel};
use crate::learners::{
    gain_importance, odds_ratios, BaselineKind, BaselinePredictor, BaselineTrainRow, ClassWeights,
    ModelFamily, ModelFile, ModelParams, TrainedModel,
};
use crate::stats::{icc_oneway, within_person_correlations};
use crate::util::{sha256_hex, Matrix};

pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub report: RunReport,
    pub selected: ModelParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateManifest {
    pub version: u32,
    pub kind: String,
    pub seed: u64,
    pub synth_config_hash: String,
    pub created_unix: u64,
    pub files: BTreeMap<String, FileEntry>,
    pub participants: usize,
    pub assessments: usize,
    pub events: usize,
    pub embeddings: usize,
}

/// Generates a synthetic cohort and writes the four input files plus a
/// manifest with content hashes.
pub fn simulate(synth: &SynthConfig, seed: u64, out_dir: &Path) -> Result<SimulateManifest> {
    let cohort = synth_cohort(synth, seed)?;
    let file_names = write_cohort(&cohort, out_dir)?;
    let mut files = BTreeMap::new();
    for name in &file_names {
        let path = out_dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        files.insert(
            name.clone(),
            FileEntry {
                sha256: sha256_hex(&bytes),
                rows: bytes.iter().filter(|b| **b == b'\n').count(),
            },
        );
    }
    let manifest = SimulateManifest {
        version: 1,
        kind: "simulate".to_string(),
        seed,
        synth_config_hash: sha256_hex(
            serde_json::to_string(synth).expect("synth config serializes").as_bytes(),
        ),
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        files,
        participants: cohort.n_participants(),
        assessments: cohort.n_assessments(),
        events: cohort.participants.values().map(|p| p.screen_records.len()).sum(),
        embeddings: cohort.participants.values().map(|p| p.embeddings.len()).sum(),
    };
    let path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Validation(format!("manifest serialization: {e}")))?;
    std::fs::write(&path, json).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(manifest)
}

fn point_block(
    y_true: &[usize],
    proba: &Matrix,
    y_pred: &[usize],
) -> MetricBlock {
    MetricBlock {
        auc: MetricResult::point_only(auc_ovr_macro(y_true, proba)),
        balanced_accuracy: MetricResult::point_only(balanced_accuracy(y_true, y_pred)),
        sensitivity_worsening: MetricResult::point_only(sensitivity_worsening(y_true, y_pred)),
        ppv_worsening: MetricResult::point_only(ppv_worsening(y_true, y_pred)),
    }
}

/// Previous-row true label per matrix row (participant-wise), for the
/// last-value-carried-forward baseline.
fn previous_labels(labeled: &LabeledDataset) -> Vec<Option<TrajectoryLabel>> {
    let mut prev: BTreeMap<&str, TrajectoryLabel> = BTreeMap::new();
    let mut out = Vec::with_capacity(labeled.n_rows());
    for (i, row) in labeled.matrix.rows.iter().enumerate() {
        out.push(prev.get(row.participant_id.as_str()).copied());
        prev.insert(row.participant_id.as_str(), labeled.labels[i]);
    }
    out
}

/// Runs the full pipeline into `out_dir`.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    let config_hash = config.hash();
    let mut flags: Vec<String> = Vec::new();

    // ---- ingest ------------------------------------------------------
    let cohort0: Cohort = match &config.inputs {
        InputSpec::Files {
            events,
            assessments,
            demographics,
            embeddings,
        } => {
            let (cohort, _report) =
                load_cohort(events, assessments, demographics, embeddings.as_deref())
                    .map_err(|e| e.at_stage("ingest"))?;
            cohort
        }
        InputSpec::Synth { synth } => {
            synth_cohort(synth, config.seed).map_err(|e| e.at_stage("ingest"))?
        }
    };

    // ---- inclusion ----------------------------------------------------
    let criteria = config.inclusion.to_criteria(config.split_fractions);
    let (cohort, exclusion) =
        apply_inclusion(&cohort0, &criteria).map_err(|e| e.at_stage("inclusion"))?;

    // ---- split --------------------------------------------------------
    let keys = labelable_row_keys(&cohort, &exclusion.excluded_periods);
    let split_params = SplitParams {
        fractions: config.split_fractions,
        min_rows: (1, 1, 1),
    };
    let splits = temporal_split(&keys, &split_params).map_err(|e| e.at_stage("split"))?;

    // ---- featurize ----------------------------------------------------
    let feature_params = FeatureParams {
        session_gap_seconds: config.session_gap_seconds,
    };
    let matrix = build_design_matrix(&cohort, &splits, &exclusion.excluded_periods, &feature_params)
        .map_err(|e| e.at_stage("featurize"))?;

    // ---- label --------------------------------------------------------
    let op = config.label.to_label_op(config.seed)?;
    let labeled = label_dataset(&matrix, &cohort, op).map_err(|e| e.at_stage("label"))?;
    let y = labeled.class_indices();

    let train_idx = matrix.row_indices_with_tag(SplitTag::Train);
    let val_idx = matrix.row_indices_with_tag(SplitTag::Val);
    let test_idx = matrix.row_indices_with_tag(SplitTag::Test);
    let y_train: Vec<usize> = train_idx.iter().map(|&i| y[i]).collect();
    let y_val: Vec<usize> = val_idx.iter().map(|&i| y[i]).collect();
    let y_test: Vec<usize> = test_idx.iter().map(|&i| y[i]).collect();

    // ---- vif ----------------------------------------------------------
    let raw = matrix.to_matrix();
    let train_raw = raw.select_rows(&train_idx);
    let vif_protected = crate::features::anchor_columns();
    let screen = vif_screen(&train_raw, &matrix.columns, config.vif_threshold, &vif_protected)
        .map_err(|e| e.at_stage("vif"))?;
    if !screen.removals.is_empty() {
        flags.push(format!(
            "vif_removed:{}",
            screen
                .removals
                .iter()
                .map(|r| r.column.as_str())
                .collect::<Vec<_>>()
                .join("+")
        ));
    }
    let retained = screen.retained_indices.clone();
    let retained_names = screen.retained_columns.clone();

    // ---- scale ----------------------------------------------------------
    // One scaler over all 39 columns (per-column parameters, so restricting
    // to the retained set is identical to refitting on it); a second handle
    // restricted to retained columns serves the model and scenario paths.
    let family = config.model.family()?;
    let scaler_full = fit_scaler(&train_raw, &matrix.columns, family)
        .map_err(|e| e.at_stage("scale"))?;
    let scaled39 = apply_scaler(&scaler_full, &raw).map_err(|e| e.at_stage("scale"))?;
    if !scaler_full.constant_columns.is_empty() {
        flags.push(format!(
            "constant_train_columns:{}",
            scaler_full.constant_columns.join("+")
        ));
    }
    let scaler_retained = fit_scaler(
        &train_raw.select_columns(&retained),
        &retained_names,
        family,
    )
    .map_err(|e| e.at_stage("scale"))?;

    let scaled_model = scaled39.select_columns(&retained);
    let x_train = scaled_model.select_rows(&train_idx);
    let x_val = scaled_model.select_rows(&val_idx);
    let x_test = scaled_model.select_rows(&test_idx);
    let standardized = family == ModelFamily::ElasticNet;

    // ---- grid search ----------------------------------------------------
    let class_weights = ClassWeights::balanced(&y_train).map_err(|e| e.at_stage("grid_search"))?;
    let candidates = config.model.candidates(config.seed)?;
    let val_scores: Vec<Option<f64>> = candidates
        .par_iter()
        .map(|params| -> Result<Option<f64>> {
            let fitted = params.fit(&x_train, &y_train, &class_weights, &retained_names, standardized)?;
            let proba = fitted.predict_proba(&x_val)?;
            let preds = argmax_predictions(&proba);
            Ok(balanced_accuracy(&y_val, &preds))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_stage("grid_search"))?;

    let mut best: Option<(usize, f64)> = None;
    for (i, score) in val_scores.iter().enumerate() {
        let Some(s) = score else { continue };
        let better = match best {
            None => true,
            Some((bi, bs)) => {
                *s > bs
                    || (*s == bs
                        && model_size_key(&candidates[i]) < model_size_key(&candidates[bi]))
            }
        };
        if better {
            best = Some((i, *s));
        }
    }
    let (best_idx, _) = best.ok_or_else(|| {
        Error::Degenerate("no grid candidate produced a defined validation score".into())
    })?;
    let selected = candidates[best_idx];

    // ---- refit + evaluate ----------------------------------------------
    let model = selected
        .fit(&x_train, &y_train, &class_weights, &retained_names, standardized)
        .map_err(|e| e.at_stage("refit"))?;
    let proba_test = model.predict_proba(&x_test).map_err(|e| e.at_stage("refit"))?;
    let preds_test = decide(&proba_test, config.worsening_threshold);
    let (model_metrics, model_confusion) =
        evaluate_with_bootstrap(&y_test, &proba_test, &preds_test, &config.bootstrap)
            .map_err(|e| e.at_stage("evaluate"))?;

    let mut table2 = Vec::new();
    let mut model_flags = Vec::new();
    if model_metrics.ppv_worsening.point.is_none() {
        model_flags.push("ppv_undefined".to_string());
    }
    table2.push(ModelRow {
        name: family.as_str().to_string(),
        is_baseline: false,
        metrics: model_metrics,
        confusion: model_confusion,
        flags: model_flags,
    });

    // Rule-based baselines (point estimates, no intervals).
    let baseline_train: Vec<BaselineTrainRow<'_>> = train_idx
        .iter()
        .map(|&i| BaselineTrainRow {
            participant_id: matrix.rows[i].participant_id.as_str(),
            prior_cesd: matrix.rows[i].values[COL_PRIOR_CESD] as u8,
            label: labeled.labels[i],
        })
        .collect();
    let prev_labels = previous_labels(&labeled);
    for kind in BaselineKind::ALL {
        let predictor =
            BaselinePredictor::fit(kind, &baseline_train).map_err(|e| e.at_stage("evaluate"))?;
        let mut preds = Vec::with_capacity(test_idx.len());
        let mut score_rows = Vec::with_capacity(test_idx.len());
        let mut fallbacks = 0usize;
        for &i in &test_idx {
            let row = &matrix.rows[i];
            let p = predictor
                .predict(
                    &row.participant_id,
                    row.values[COL_PRIOR_CESD] as u8,
                    prev_labels[i],
                )
                .map_err(|e| e.at_stage("evaluate"))?;
            preds.push(p.label.index());
            score_rows.push(p.scores.to_vec());
            fallbacks += p.fallback as usize;
        }
        let proba = Matrix::from_rows(&score_rows);
        let mut flags = Vec::new();
        if fallbacks > 0 {
            flags.push(format!("fallback_rows:{fallbacks}"));
        }
        let metrics = point_block(&y_test, &proba, &preds);
        if metrics.ppv_worsening.point.is_none() {
            flags.push("ppv_undefined".to_string());
        }
        table2.push(ModelRow {
            name: kind.as_str().to_string(),
            is_baseline: true,
            metrics,
            confusion: confusion_matrix(&y_test, &preds),
            flags,
        });
    }

    // ---- two-feature comparison -----------------------------------------
    let two_feature = {
        let wanted = ["prior_cesd", "person_mean_cesd"];
        let cols: Vec<usize> = wanted
            .iter()
            .filter_map(|w| retained_names.iter().position(|c| c == w))
            .collect();
        if cols.len() == 2 {
            let names: Vec<String> = cols.iter().map(|&c| retained_names[c].clone()).collect();
            let x2_train = x_train.select_columns(&cols);
            let x2_test = x_test.select_columns(&cols);
            let m2 = selected
                .fit(&x2_train, &y_train, &class_weights, &names, standardized)
                .map_err(|e| e.at_stage("two_feature"))?;
            let proba2 = m2.predict_proba(&x2_test).map_err(|e| e.at_stage("two_feature"))?;
            let preds2 = decide(&proba2, config.worsening_threshold);
            Some(
                compare_models(
                    "two_feature",
                    "full",
                    &y_test,
                    &proba2,
                    &preds2,
                    &proba_test,
                    &preds_test,
                    &config.bootstrap,
                )
                .map_err(|e| e.at_stage("two_feature"))?,
            )
        } else {
            flags.push("two_feature_skipped:anchor_columns_screened_out".to_string());
            None
        }
    };

    // ---- scenarios --------------------------------------------------------
    let ablation = if config.scenarios.ablate {
        let mut conditions = canonical_conditions(&matrix);
        for (_, cols) in conditions.iter_mut() {
            cols.retain(|c| retained.contains(c));
        }
        Some(
            ablation_run(
                &labeled,
                &scaled39,
                &conditions,
                &selected,
                &config.bootstrap,
                0.05,
            )
            .map_err(|e| e.at_stage("ablation"))?,
        )
    } else {
        None
    };

    let mut table4: Vec<ScenarioRow> = Vec::new();
    let mut logo_summary = None;
    if config.scenarios.logo || !config.scenarios.stale.is_empty() {
        table4.push(ScenarioRow {
            scenario: "full".to_string(),
            n_observations: test_idx.len(),
            metrics: model_metrics,
            interval: IntervalKind::Bootstrap,
            flags: Vec::new(),
        });
    }
    if config.scenarios.logo {
        let mut participants: Vec<String> = matrix
            .rows
            .iter()
            .map(|r| r.participant_id.clone())
            .collect();
        participants.sort();
        participants.dedup();
        let plan = LogoPlan::new(
            &participants,
            config.scenarios.logo_repeats,
            config.scenarios.logo_folds,
            config.seed,
        )
        .map_err(|e| e.at_stage("logo"))?;
        let summary = logo_cv(&labeled, &plan, &selected, config.vif_threshold, &vif_protected)
            .map_err(|e| e.at_stage("logo"))?;
        let range = |s: &crate::evaluation::logo::LogoMetricSummary| MetricResult {
            point: s.mean,
            ci_low: s.repeat_min,
            ci_high: s.repeat_max,
            n_resamples: 0,
            n_degenerate: 0,
            seed: config.seed,
        };
        let mut fold_flags = Vec::new();
        let undefined_sens = summary
            .folds
            .iter()
            .filter(|f| f.sensitivity_worsening.is_none())
            .count();
        if undefined_sens > 0 {
            fold_flags.push(format!("folds_with_undefined_sensitivity:{undefined_sens}"));
        }
        let undefined_ppv = summary
            .folds
            .iter()
            .filter(|f| f.ppv_worsening.is_none())
            .count();
        if undefined_ppv > 0 {
            fold_flags.push(format!("folds_with_undefined_ppv:{undefined_ppv}"));
        }
        table4.push(ScenarioRow {
            scenario: "cold_start".to_string(),
            n_observations: summary.folds.iter().map(|f| f.held_out_observations).sum(),
            metrics: MetricBlock {
                auc: range(&summary.auc),
                balanced_accuracy: range(&summary.balanced_accuracy),
                sensitivity_worsening: range(&summary.sensitivity_worsening),
                ppv_worsening: range(&summary.ppv_worsening),
            },
            interval: IntervalKind::RepeatRange,
            flags: fold_flags,
        });
        logo_summary = Some(summary);
    }
    for &k in &config.scenarios.stale {
        let res = staleness_scenario(
            &labeled,
            &cohort,
            &model,
            &scaler_retained,
            &retained,
            k,
            &config.bootstrap,
            config.worsening_threshold,
        )
        .map_err(|e| e.at_stage("staleness"))?;
        let mut sflags = vec![format!("rows_dropped:{}", res.n_dropped)];
        if res.metrics.ppv_worsening.point.is_none() {
            sflags.push("ppv_undefined".to_string());
        }
        table4.push(ScenarioRow {
            scenario: format!("stale_{}_periods", k),
            n_observations: res.n_evaluated,
            metrics: res.metrics,
            interval: IntervalKind::Bootstrap,
            flags: sflags,
        });
    }

    let subgroups = if config.scenarios.subgroups {
        Some(
            subgroup_report(
                &labeled,
                &cohort,
                &proba_test,
                &preds_test,
                &SubgroupAxis::ALL,
                config.scenarios.subgroup_min_n,
                &config.bootstrap,
            )
            .map_err(|e| e.at_stage("subgroups"))?,
        )
    } else {
        None
    };

    // ---- descriptive statistics ------------------------------------------
    let mut icc = Vec::new();
    {
        let score_groups: Vec<Vec<f64>> = cohort
            .participants
            .values()
            .map(|p| p.assessments.iter().map(|a| a.cesd as f64).collect())
            .collect();
        icc.push((
            "cesd".to_string(),
            icc_oneway(&score_groups).map_err(|e| e.at_stage("stats"))?,
        ));
        let delta_groups: Vec<Vec<f64>> = cohort
            .participants
            .values()
            .map(|p| {
                p.assessments
                    .windows(2)
                    .map(|w| w[1].cesd as f64 - w[0].cesd as f64)
                    .collect()
            })
            .collect();
        icc.push((
            "cesd_change".to_string(),
            icc_oneway(&delta_groups).map_err(|e| e.at_stage("stats"))?,
        ));
    }

    let within_person = within_person_tables(&matrix);

    let (importance, odds) = match &model {
        TrainedModel::Gbdt(m) => (Some(gain_importance(m)), None),
        TrainedModel::ElasticNet(m) => (
            None,
            Some(odds_ratios(m, 2).map_err(|e| e.at_stage("stats"))?),
        ),
    };

    // ---- write artifacts ---------------------------------------------------
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let mut extra_files = BTreeMap::new();
    let mut put = |name: &str, contents: String| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, contents.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        extra_files.insert(
            name.to_string(),
            FileEntry {
                sha256: sha256_hex(contents.as_bytes()),
                rows: contents.lines().count().saturating_sub(1),
            },
        );
        Ok(())
    };

    put("labeled.csv", labeled_csv(&labeled))?;
    put(
        "model.json",
        ModelFile::wrap(model.clone()).to_json()?,
    )?;
    put(
        "scaler.json",
        serde_json::to_string_pretty(&scaler_full)
            .map_err(|e| Error::Validation(format!("scaler serialization: {e}")))?,
    )?;
    put(
        "vif_log.json",
        serde_json::to_string_pretty(&screen)
            .map_err(|e| Error::Validation(format!("vif serialization: {e}")))?,
    )?;
    {
        let mut s = String::from("candidate,params,val_balanced_accuracy,selected\n");
        for (i, params) in candidates.iter().enumerate() {
            let compact = serde_json::to_string(params)
                .map_err(|e| Error::Validation(format!("grid serialization: {e}")))?;
            s.push_str(&format!(
                "{},\"{}\",{},{}\n",
                i,
                compact.replace('"', "'"),
                val_scores[i].map(|v| format!("{v:.6}")).unwrap_or_default(),
                (i == best_idx) as u8
            ));
        }
        put("grid.csv", s)?;
    }

    let report = RunReport {
        config_hash: config_hash.clone(),
        seed: config.seed,
        label: op.name().to_string(),
        model_family: family.as_str().to_string(),
        selected_params: serde_json::to_value(selected)
            .map_err(|e| Error::Validation(format!("params serialization: {e}")))?,
        table2,
        table4,
        ablation,
        logo: logo_summary,
        subgroups,
        two_feature,
        icc,
        within_person,
        importance,
        odds_ratios: odds,
        distribution: labeled.distribution.clone(),
        flags,
    };
    let counts = RunCounts {
        participants: cohort.n_participants(),
        rows_train: train_idx.len(),
        rows_val: val_idx.len(),
        rows_test: test_idx.len(),
        excluded_periods: exclusion.excluded_periods.len(),
        removed_participants: exclusion.removed_participants.len(),
    };
    let mut manifest = write_report(&report, &counts, out_dir)?;
    // Fold the audit files into the manifest and rewrite it.
    manifest.files.extend(extra_files);
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Validation(format!("manifest serialization: {e}")))?;
    let mpath = out_dir.join(crate::evaluation::report::MANIFEST_NAME);
    std::fs::write(&mpath, manifest_json)
        .map_err(|e| Error::io(mpath.display().to_string(), e))?;

    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        manifest,
        report,
        selected,
    })
}

/// Within-person correlation summaries for the nine behavioral delta
/// columns against the concurrent CES-D change, per participant.
fn within_person_tables(
    matrix: &FeatureMatrix,
) -> Vec<(String, crate::stats::WithinPersonCorrSummary)> {
    let mut out = Vec::new();
    for d in 0..N_DELTAS {
        let col = DELTAS_START + d;
        let name = matrix.columns[col].clone();
        let mut pairs: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        let mut prev_by_pid: BTreeMap<&str, (u32, f64)> = BTreeMap::new();
        for row in &matrix.rows {
            let pid = row.participant_id.as_str();
            if let Some(&(_, prev_cesd)) = prev_by_pid.get(pid) {
                if row.has_predecessor {
                    let entry = pairs.entry(pid.to_string()).or_default();
                    entry.0.push(row.values[col]);
                    entry.1.push(row.values[COL_PRIOR_CESD] - prev_cesd);
                }
            }
            prev_by_pid.insert(pid, (row.period_index, row.values[COL_PRIOR_CESD]));
        }
        out.push((name, within_person_correlations(&pairs, 3)));
    }
    out
}

/// Features + label + label-config hash, one row per observation.
fn labeled_csv(labeled: &LabeledDataset) -> String {
    let mut s = String::from("participant_id,period_index,split");
    for c in &labeled.matrix.columns {
        s.push(',');
        s.push_str(c);
    }
    s.push_str(",label,label_config_hash\n");
    for (i, row) in labeled.matrix.rows.iter().enumerate() {
        s.push_str(&format!(
            "{},{},{}",
            row.participant_id,
            row.period_index,
            row.split.as_str()
        ));
        for v in &row.values {
            s.push_str(&format!(",{v}"));
        }
        s.push_str(&format!(
            ",{},{}\n",
            labeled.labels[i].as_str(),
            labeled.label_config_hash
        ));
    }
    s
}

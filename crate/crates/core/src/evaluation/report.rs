//! Report assembly and serialization.
//!
//! One CSV per table analogue (table2, table4, s2 confusion, s4 ablation,
//! s6 LOGO, s9 subgroups, s5 two-feature comparison) plus per-figure data
//! exports and a JSON manifest carrying the config hash, seeds, row counts
//! and a content hash per file. Timestamps exist only in the manifest, so
//! rerunning an identical config reproduces every CSV byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ablation::AblationTable;
use super::logo::LogoSummary;
use super::scenarios::{MetricBlock, ModelComparison, SubgroupRow};
use super::SplitTag;
use crate::error::{Error, Result};
use crate::labels::N_CLASSES;
use crate::stats::{IccResult, WithinPersonCorrSummary};
use crate::util::sha256_hex;

pub const CLASS_NAMES: [&str; N_CLASSES] = ["improving", "stable", "worsening"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub name: String,
    pub is_baseline: bool,
    pub metrics: MetricBlock,
    pub confusion: [[usize; N_CLASSES]; N_CLASSES],
    pub flags: Vec<String>,
}

/// How a table4 row's interval column was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Bootstrap,
    /// Min/max of per-repeat means (the cold-start row).
    RepeatRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub scenario: String,
    pub n_observations: usize,
    pub metrics: MetricBlock,
    pub interval: IntervalKind,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub seed: u64,
    pub label: String,
    pub model_family: String,
    pub selected_params: serde_json::Value,
    pub table2: Vec<ModelRow>,
    pub table4: Vec<ScenarioRow>,
    pub ablation: Option<AblationTable>,
    pub logo: Option<LogoSummary>,
    pub subgroups: Option<Vec<SubgroupRow>>,
    pub two_feature: Option<ModelComparison>,
    /// ("cesd" | "cesd_change", result).
    pub icc: Vec<(String, IccResult)>,
    /// Per-feature within-person correlation summaries.
    pub within_person: Vec<(String, WithinPersonCorrSummary)>,
    /// Gain importance (tree family runs).
    pub importance: Option<BTreeMap<String, f64>>,
    /// Worsening odds ratios (elastic-net runs).
    pub odds_ratios: Option<Vec<(String, f64)>>,
    /// Per-split label distribution [improving, stable, worsening].
    pub distribution: BTreeMap<SplitTag, [usize; 3]>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub sha256: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCounts {
    pub participants: usize,
    pub rows_train: usize,
    pub rows_val: usize,
    pub rows_test: usize,
    pub excluded_periods: usize,
    pub removed_participants: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub label: String,
    pub model_family: String,
    pub selected_params: serde_json::Value,
    /// Wall-clock creation time; the only timestamp in the whole output.
    pub created_unix: u64,
    pub files: BTreeMap<String, FileEntry>,
    pub counts: RunCounts,
    pub flags: Vec<String>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

fn fmt(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.6}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn metric_cells(m: &MetricBlock) -> String {
    let cell = |r: &super::bootstrap::MetricResult| {
        format!("{},{},{}", fmt_opt(r.point), fmt_opt(r.ci_low), fmt_opt(r.ci_high))
    };
    format!(
        "{},{},{},{}",
        cell(&m.balanced_accuracy),
        cell(&m.auc),
        cell(&m.sensitivity_worsening),
        cell(&m.ppv_worsening)
    )
}

const METRIC_HEADER: &str = "balanced_accuracy,balanced_accuracy_ci_low,balanced_accuracy_ci_high,\
auc_ovr,auc_ovr_ci_low,auc_ovr_ci_high,\
sensitivity_worsening,sensitivity_worsening_ci_low,sensitivity_worsening_ci_high,\
ppv_worsening,ppv_worsening_ci_low,ppv_worsening_ci_high";

/// Writes every table/figure file plus the manifest; returns the manifest.
pub fn write_report(report: &RunReport, counts: &RunCounts, out_dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let mut files = BTreeMap::new();
    let mut put = |name: &str, contents: String| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, contents.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        files.insert(
            name.to_string(),
            FileEntry {
                sha256: sha256_hex(contents.as_bytes()),
                rows: contents.lines().count().saturating_sub(1),
            },
        );
        Ok(())
    };

    // table2: per-model metrics with CIs, baselines as point estimates.
    {
        let mut s = format!("model,is_baseline,{METRIC_HEADER},flags\n");
        for row in &report.table2 {
            s.push_str(&format!(
                "{},{},{},{}\n",
                row.name,
                row.is_baseline as u8,
                metric_cells(&row.metrics),
                row.flags.join(";")
            ));
        }
        put("table2.csv", s)?;
    }

    // s2: confusion matrices, one row per (model, true class).
    {
        let mut s = String::from(
            "model,true_class,pred_improving,pred_stable,pred_worsening,row_total\n",
        );
        for row in &report.table2 {
            for t in 0..N_CLASSES {
                let cells = row.confusion[t];
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    row.name,
                    CLASS_NAMES[t],
                    cells[0],
                    cells[1],
                    cells[2],
                    cells.iter().sum::<usize>()
                ));
            }
        }
        put("s2_confusion.csv", s)?;
    }

    if !report.table4.is_empty() {
        let mut s = format!("scenario,n_observations,{METRIC_HEADER},interval,flags\n");
        for row in &report.table4 {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                row.scenario,
                row.n_observations,
                metric_cells(&row.metrics),
                match row.interval {
                    IntervalKind::Bootstrap => "bootstrap",
                    IntervalKind::RepeatRange => "repeat_range",
                },
                row.flags.join(";")
            ));
        }
        put("table4.csv", s)?;
    }

    if let Some(ablation) = &report.ablation {
        let mut s = String::from(
            "condition,n_features,auc,auc_ci_low,auc_ci_high,delta_auc,delta_ci_low,\
             delta_ci_high,p_raw,p_holm,significant\n",
        );
        for c in &ablation.conditions {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                c.name,
                c.n_features,
                fmt_opt(c.auc.point),
                fmt_opt(c.auc.ci_low),
                fmt_opt(c.auc.ci_high),
                fmt_opt(c.delta.as_ref().and_then(|d| d.delta_point)),
                fmt_opt(c.delta.as_ref().and_then(|d| d.ci_low)),
                fmt_opt(c.delta.as_ref().and_then(|d| d.ci_high)),
                fmt_opt(c.p_raw),
                fmt_opt(c.p_holm),
                c.significant as u8
            ));
        }
        put("s4_ablation.csv", s.clone())?;
        // Figure export carries the same per-condition AUC series.
        let mut f = String::from("label,condition,auc,ci_low,ci_high,p_holm,significant\n");
        for c in &ablation.conditions {
            f.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                report.label,
                c.name,
                fmt_opt(c.auc.point),
                fmt_opt(c.auc.ci_low),
                fmt_opt(c.auc.ci_high),
                fmt_opt(c.p_holm),
                c.significant as u8
            ));
        }
        put("fig2_ablation.csv", f)?;
    }

    if let Some(logo) = &report.logo {
        let mut s = String::from(
            "repeat,fold,held_out_participants,held_out_observations,train_n,val_n,\
             auc,balanced_accuracy,sensitivity_worsening,ppv_worsening\n",
        );
        for f in &logo.folds {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                f.repeat + 1,
                f.fold + 1,
                f.held_out_participants,
                f.held_out_observations,
                f.train_n,
                f.val_n,
                fmt_opt(f.auc),
                fmt_opt(f.balanced_accuracy),
                fmt_opt(f.sensitivity_worsening),
                fmt_opt(f.ppv_worsening)
            ));
        }
        put("s6_logo.csv", s)?;

        let mut s = String::from(
            "row,auc,balanced_accuracy,sensitivity_worsening,ppv_worsening\n",
        );
        for r in 0..logo.auc.per_repeat.len() {
            s.push_str(&format!(
                "repeat_{},{},{},{},{}\n",
                r + 1,
                fmt_opt(logo.auc.per_repeat[r]),
                fmt_opt(logo.balanced_accuracy.per_repeat[r]),
                fmt_opt(logo.sensitivity_worsening.per_repeat[r]),
                fmt_opt(logo.ppv_worsening.per_repeat[r])
            ));
        }
        s.push_str(&format!(
            "mean,{},{},{},{}\n",
            fmt_opt(logo.auc.mean),
            fmt_opt(logo.balanced_accuracy.mean),
            fmt_opt(logo.sensitivity_worsening.mean),
            fmt_opt(logo.ppv_worsening.mean)
        ));
        s.push_str(&format!(
            "repeat_min,{},{},{},{}\n",
            fmt_opt(logo.auc.repeat_min),
            fmt_opt(logo.balanced_accuracy.repeat_min),
            fmt_opt(logo.sensitivity_worsening.repeat_min),
            fmt_opt(logo.ppv_worsening.repeat_min)
        ));
        s.push_str(&format!(
            "repeat_max,{},{},{},{}\n",
            fmt_opt(logo.auc.repeat_max),
            fmt_opt(logo.balanced_accuracy.repeat_max),
            fmt_opt(logo.sensitivity_worsening.repeat_max),
            fmt_opt(logo.ppv_worsening.repeat_max)
        ));
        put("s6_logo_summary.csv", s)?;
    }

    if let Some(subgroups) = &report.subgroups {
        let mut s = format!(
            "axis,group,n_participants,n_observations,n_worsening,suppressed,{METRIC_HEADER},note\n"
        );
        for row in subgroups {
            let cells = row
                .metrics
                .as_ref()
                .map(metric_cells)
                .unwrap_or_else(|| ",".repeat(11));
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.axis,
                row.group,
                row.n_participants,
                row.n_observations,
                row.n_worsening,
                row.suppressed as u8,
                cells,
                row.note
            ));
        }
        put("s9_subgroups.csv", s)?;
    }

    if let Some(cmp) = &report.two_feature {
        let mut s = format!("model,{METRIC_HEADER},agreement,agreement_ci_low,agreement_ci_high\n");
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            cmp.name_a,
            metric_cells(&cmp.metrics_a),
            fmt_opt(cmp.agreement.point),
            fmt_opt(cmp.agreement.ci_low),
            fmt_opt(cmp.agreement.ci_high)
        ));
        s.push_str(&format!("{},{},,,\n", cmp.name_b, metric_cells(&cmp.metrics_b)));
        for t in 0..N_CLASSES {
            s.push_str(&format!(
                "agreement_true_{},,,,,,,,,,,,,{:.6},,\n",
                CLASS_NAMES[t],
                cmp.agreement_by_class[t].0 as f64 / cmp.agreement_by_class[t].1.max(1) as f64
            ));
        }
        put("s5_two_feature.csv", s)?;
    }

    {
        let mut s = String::from("measure,icc,ms_between,ms_within,k_bar,n_groups,n_obs,negative\n");
        for (name, icc) in &report.icc {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                name,
                fmt(icc.icc),
                fmt(icc.ms_between),
                fmt(icc.ms_within),
                fmt(icc.k_bar),
                icc.n_groups,
                icc.n_obs,
                icc.negative as u8
            ));
        }
        put("fig1_icc.csv", s)?;
    }

    if let Some(importance) = &report.importance {
        let mut entries: Vec<(&String, &f64)> = importance.iter().collect();
        entries.sort_by(|a, b| b.1.partial_cmp(a.1).unwrap().then(a.0.cmp(b.0)));
        let mut s = String::from("feature,gain_share\n");
        for (name, share) in entries {
            s.push_str(&format!("{name},{}\n", fmt(*share)));
        }
        put("fig3_importance.csv", s)?;
    }

    if let Some(odds) = &report.odds_ratios {
        let mut s = String::from("feature,odds_ratio\n");
        for (name, or) in odds {
            s.push_str(&format!("{name},{}\n", fmt(*or)));
        }
        put("fig4_odds_ratios.csv", s)?;
    }

    {
        let mut s = String::from("feature,participant_id,r\n");
        for (feature, summary) in &report.within_person {
            for (pid, r) in &summary.per_participant {
                s.push_str(&format!("{feature},{pid},{}\n", fmt(*r)));
            }
        }
        put("fig5_withinperson.csv", s)?;

        let mut s = String::from(
            "feature,n_included,n_excluded_zero_variance,n_excluded_short,mean_r,sd_r,\
             pct_positive,mean_abs_r\n",
        );
        for (feature, summary) in &report.within_person {
            s.push_str(&format!(
                "{feature},{},{},{},{},{},{},{}\n",
                summary.n_included,
                summary.n_excluded_zero_variance,
                summary.n_excluded_short,
                fmt(summary.mean_r),
                fmt(summary.sd_r),
                fmt(summary.pct_positive),
                fmt(summary.mean_abs_r)
            ));
        }
        put("fig5_summary.csv", s)?;
    }

    let manifest = Manifest {
        version: 1,
        config_hash: report.config_hash.clone(),
        seed: report.seed,
        label: report.label.clone(),
        model_family: report.model_family.clone(),
        selected_params: report.selected_params.clone(),
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        files,
        counts: counts.clone(),
        flags: report.flags.clone(),
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Validation(format!("manifest serialization: {e}")))?;
    let path = out_dir.join(MANIFEST_NAME);
    std::fs::write(&path, manifest_json).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(manifest)
}

/// Loads a manifest and verifies every listed file's content hash.
pub fn verify_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Validation(format!("manifest parse: {e}")))?;
    for (name, entry) in &manifest.files {
        let fpath = dir.join(name);
        let bytes =
            std::fs::read(&fpath).map_err(|e| Error::io(fpath.display().to_string(), e))?;
        let hash = sha256_hex(&bytes);
        if hash != entry.sha256 {
            return Err(Error::Validation(format!(
                "content hash mismatch for {name}: manifest {} vs file {hash}",
                entry.sha256
            )));
        }
    }
    Ok(manifest)
}

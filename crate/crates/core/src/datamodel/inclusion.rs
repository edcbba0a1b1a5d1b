//! Cohort inclusion filtering.
//!
//! A participant stays in when they have enough surveys overall and enough
//! usable material for each chunk of the chronological 60/20/20 split; an
//! observation period whose metadata missingness exceeds the threshold is
//! flagged and excluded from feature construction (the participant stays
//! unless the flags push them below the split minima).

use std::collections::BTreeSet;

use serde::Serialize;

use super::Cohort;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclusionCriteria {
    pub min_surveys: usize,
    pub min_train: usize,
    pub min_val: usize,
    pub min_test: usize,
    pub max_missingness: f64,
    /// Split fractions used for the survey-count check (val and test take
    /// the floor; train takes the remainder).
    pub fractions: (f64, f64, f64),
}

impl Default for InclusionCriteria {
    fn default() -> Self {
        InclusionCriteria {
            min_surveys: 10,
            min_train: 6,
            min_val: 2,
            min_test: 2,
            max_missingness: 0.10,
            fractions: (0.6, 0.2, 0.2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ExclusionReason {
    /// Fewer completed surveys than `min_surveys`.
    MinSurveys { n_surveys: usize },
    /// Survey split (after docking flagged periods) fails the per-split
    /// minimum counts.
    SplitMinimum {
        train: usize,
        val: usize,
        test: usize,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExclusionReport {
    pub removed_participants: Vec<(String, ExclusionReason)>,
    /// (participant, period index) pairs excluded from featurization.
    /// A period is identified by the assessment that closes it.
    pub excluded_periods: BTreeSet<(String, u32)>,
    pub retained_participants: usize,
}

/// Applies the inclusion rules, returning the filtered cohort and a report
/// listing every exclusion with its reason. Idempotent: reapplying to the
/// output is a no-op.
pub fn apply_inclusion(
    cohort: &Cohort,
    criteria: &InclusionCriteria,
) -> Result<(Cohort, ExclusionReport)> {
    let (train_frac, val_frac, test_frac) = criteria.fractions;
    let total = train_frac + val_frac + test_frac;
    if !(total - 1.0).abs().le(&1e-9) || val_frac < 0.0 || test_frac < 0.0 {
        return Err(Error::Config(format!(
            "split fractions must be non-negative and sum to 1 (got {:?})",
            criteria.fractions
        )));
    }

    let mut out = cohort.clone();
    let mut report = ExclusionReport::default();

    let pids: Vec<String> = out.participants.keys().cloned().collect();
    for pid in pids {
        let part = &out.participants[&pid];
        let n_surveys = part.assessments.len();

        // Flag periods first; the flags count against the split check.
        let mut flagged = 0usize;
        for a in &part.assessments {
            if a.assessment_index >= 1 && a.missingness > criteria.max_missingness {
                report
                    .excluded_periods
                    .insert((pid.clone(), a.assessment_index));
                flagged += 1;
            }
        }

        if n_surveys < criteria.min_surveys {
            report
                .removed_participants
                .push((pid.clone(), ExclusionReason::MinSurveys { n_surveys }));
            out.participants.remove(&pid);
            continue;
        }

        // Each flagged period costs one usable observation in the
        // chronological split.
        let n_eff = n_surveys.saturating_sub(flagged);
        let val = (val_frac * n_eff as f64).floor() as usize;
        let test = (test_frac * n_eff as f64).floor() as usize;
        let train = n_eff.saturating_sub(val + test);
        if train < criteria.min_train || val < criteria.min_val || test < criteria.min_test {
            report
                .removed_participants
                .push((pid.clone(), ExclusionReason::SplitMinimum { train, val, test }));
            out.participants.remove(&pid);
        }
    }

    // Drop flags belonging to removed participants so the report matches the
    // surviving cohort.
    report
        .excluded_periods
        .retain(|(pid, _)| out.participants.contains_key(pid));
    report.retained_participants = out.participants.len();

    if out.participants.is_empty() {
        return Err(Error::Degenerate(
            "no participants survive inclusion; pipeline is undefined on an empty cohort".into(),
        ));
    }
    Ok((out, report))
}

//! Descriptive and inferential statistics: one-way random-effects ICC,
//! within-person correlation summaries, and the Holm-Bonferroni step-down
//! correction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::pearson;

/// One-way random-effects ICC(1,1) by the ANOVA method of moments, with the
/// unbalanced-design mean group size
/// k_bar = (N - sum(n_i^2)/N) / (G - 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IccResult {
    pub icc: f64,
    pub ms_between: f64,
    pub ms_within: f64,
    pub k_bar: f64,
    pub n_groups: usize,
    pub n_obs: usize,
    /// Negative estimates are reported as computed, not clipped.
    pub negative: bool,
}

pub fn icc_oneway(groups: &[Vec<f64>]) -> Result<IccResult> {
    let n_groups = groups.len();
    if n_groups < 2 {
        return Err(Error::Degenerate("ICC needs at least 2 groups".into()));
    }
    let n_obs: usize = groups.iter().map(|g| g.len()).sum();
    if groups.iter().all(|g| g.len() < 2) {
        return Err(Error::Degenerate(
            "every group has a single observation; within-group variance undefined".into(),
        ));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::Degenerate("empty group in ICC input".into()));
    }

    let grand_mean: f64 = groups.iter().flatten().sum::<f64>() / n_obs as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m: f64 = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (m - grand_mean) * (m - grand_mean);
        ss_within += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    }
    let ms_between = ss_between / (n_groups - 1) as f64;
    let ms_within = ss_within / (n_obs - n_groups) as f64;
    let sum_sq: f64 = groups.iter().map(|g| (g.len() * g.len()) as f64).sum();
    let k_bar = (n_obs as f64 - sum_sq / n_obs as f64) / (n_groups - 1) as f64;

    let denom = ms_between + (k_bar - 1.0) * ms_within;
    let icc = if denom == 0.0 {
        0.0
    } else {
        (ms_between - ms_within) / denom
    };
    Ok(IccResult {
        icc,
        ms_between,
        ms_within,
        k_bar,
        n_groups,
        n_obs,
        negative: icc < 0.0,
    })
}

/// Per-feature summary of within-person Pearson correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithinPersonCorrSummary {
    /// (participant, r), participants sorted.
    pub per_participant: Vec<(String, f64)>,
    pub mean_r: f64,
    pub sd_r: f64,
    pub pct_positive: f64,
    pub mean_abs_r: f64,
    pub n_included: usize,
    /// Zero variance in either series.
    pub n_excluded_zero_variance: usize,
    /// Fewer than `min_pairs` paired deltas.
    pub n_excluded_short: usize,
}

/// Pearson r per participant between two aligned delta series, excluding
/// participants with zero variance in either series or fewer than
/// `min_pairs` pairs (r is unstable below ~3 points).
pub fn within_person_correlations(
    pairs_by_participant: &BTreeMap<String, (Vec<f64>, Vec<f64>)>,
    min_pairs: usize,
) -> WithinPersonCorrSummary {
    let mut per_participant = Vec::new();
    let mut n_excluded_zero_variance = 0;
    let mut n_excluded_short = 0;
    for (pid, (a, b)) in pairs_by_participant {
        assert_eq!(a.len(), b.len(), "unaligned delta series for {pid}");
        if a.len() < min_pairs {
            n_excluded_short += 1;
            continue;
        }
        match pearson(a, b) {
            Some(r) => per_participant.push((pid.clone(), r)),
            None => n_excluded_zero_variance += 1,
        }
    }
    let rs: Vec<f64> = per_participant.iter().map(|(_, r)| *r).collect();
    let n_included = rs.len();
    let mean_r = crate::util::mean(&rs);
    let sd_r = crate::util::sample_sd(&rs);
    let pct_positive = if n_included == 0 {
        0.0
    } else {
        rs.iter().filter(|r| **r > 0.0).count() as f64 / n_included as f64
    };
    let mean_abs_r = if n_included == 0 {
        0.0
    } else {
        rs.iter().map(|r| r.abs()).sum::<f64>() / n_included as f64
    };
    WithinPersonCorrSummary {
        per_participant,
        mean_r,
        sd_r,
        pct_positive,
        mean_abs_r,
        n_included,
        n_excluded_zero_variance,
        n_excluded_short,
    }
}

/// Holm-Bonferroni step-down adjustment. Sorted ascending, the i-th p-value
/// (1-based) becomes max over j <= i of min(1, (m - j + 1) p_(j)); the
/// output is returned in the original order.
pub fn holm_bonferroni(p_values: &[f64]) -> Result<Vec<f64>> {
    for p in p_values {
        if !(0.0..=1.0).contains(p) {
            return Err(Error::Validation(format!("p-value {p} outside [0,1]")));
        }
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).expect("p in [0,1]"));
    let mut adjusted = vec![0.0; m];
    let mut running_max: f64 = 0.0;
    for (rank, &idx) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * p_values[idx]).min(1.0);
        running_max = running_max.max(scaled);
        adjusted[idx] = running_max;
    }
    Ok(adjusted)
}

//! Leakage-safe split construction, metrics with bootstrap CIs, the ablation
//! driver, leave-group-out CV, deployment scenarios and report assembly.

pub mod ablation;
pub mod bootstrap;
pub mod logo;
pub mod metrics;
pub mod report;
pub mod scenarios;

pub use bootstrap::{bootstrap_ci, paired_delta_bootstrap, BootstrapConfig, MetricResult, PairedBootstrap};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        }
    }
}

/// Chronological split parameters. `val` and `test` take the floor of their
/// fractions; the remainder goes to train.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    pub fractions: (f64, f64, f64),
    /// Hard per-participant row minima checked after rounding. The pipeline
    /// runs with (1,1,1): the survey-level 6/2/2 rule is enforced by
    /// inclusion, and participants near the survey minimum legitimately
    /// carry fewer than two val/test rows.
    pub min_rows: (usize, usize, usize),
}

impl Default for SplitParams {
    fn default() -> Self {
        SplitParams {
            fractions: (0.6, 0.2, 0.2),
            min_rows: (1, 1, 1),
        }
    }
}

/// Per-(participant, period) split tags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub tags: BTreeMap<(String, u32), SplitTag>,
}

impl SplitAssignment {
    pub fn tag(&self, participant_id: &str, period_index: u32) -> Option<SplitTag> {
        self.tags.get(&(participant_id.to_string(), period_index)).copied()
    }
}

/// Assigns each participant's chronologically ordered rows to
/// train/val/test. Row keys must be grouped per participant and ordered by
/// period index (as produced by `features::labelable_row_keys`).
///
/// Counts per participant: `val = floor(vf * n)`, `test = floor(tf * n)`,
/// train takes the remainder, so earlier observations always train and the
/// chronological ordering invariant holds by construction.
pub fn temporal_split(
    row_keys: &[(String, u32)],
    params: &SplitParams,
) -> Result<SplitAssignment> {
    let (tf, vf, sf) = params.fractions;
    if tf < 0.0 || vf < 0.0 || sf < 0.0 || (tf + vf + sf - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions must be non-negative and sum to 1, got {:?}",
            params.fractions
        )));
    }

    let mut by_participant: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for (pid, period) in row_keys {
        let rows = by_participant.entry(pid.as_str()).or_default();
        if let Some(last) = rows.last() {
            if *last >= *period {
                return Err(Error::Validation(format!(
                    "row keys for participant {pid} not in increasing period order"
                )));
            }
        }
        rows.push(*period);
    }

    let mut tags = BTreeMap::new();
    for (pid, periods) in by_participant {
        let n = periods.len();
        let n_val = (vf * n as f64).floor() as usize;
        let n_test = (sf * n as f64).floor() as usize;
        let n_train = n - n_val - n_test;
        let (min_train, min_val, min_test) = params.min_rows;
        if n_train < min_train || n_val < min_val || n_test < min_test {
            return Err(Error::Validation(format!(
                "participant {pid}: split {n_train}/{n_val}/{n_test} violates minima \
                 {min_train}/{min_val}/{min_test} (inclusion should prevent this)"
            )));
        }
        for (i, period) in periods.iter().enumerate() {
            let tag = if i < n_train {
                SplitTag::Train
            } else if i < n_train + n_val {
                SplitTag::Val
            } else {
                SplitTag::Test
            };
            tags.insert((pid.to_string(), *period), tag);
        }
    }
    Ok(SplitAssignment { tags })
}

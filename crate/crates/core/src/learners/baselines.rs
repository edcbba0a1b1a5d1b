//! Rule-based baselines anchoring model performance.
//!
//! All four are parameter-free at predict time beyond train-derived
//! per-person state. They emit pseudo-probability scores (one-hot with a
//! configurable soft margin) so ranking metrics stay computable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::labels::{severity_band, SeverityBand, TrajectoryLabel};
use crate::util::mean;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    AllStable,
    PersonModal,
    LastValueCarriedForward,
    RegressionToPersonMean,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::AllStable,
        BaselineKind::PersonModal,
        BaselineKind::LastValueCarriedForward,
        BaselineKind::RegressionToPersonMean,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineKind::AllStable => "all_stable",
            BaselineKind::PersonModal => "person_modal",
            BaselineKind::LastValueCarriedForward => "last_value_carried_forward",
            BaselineKind::RegressionToPersonMean => "regression_to_person_mean",
        }
    }
}

/// One training observation as the baselines see it.
#[derive(Debug, Clone)]
pub struct BaselineTrainRow<'a> {
    pub participant_id: &'a str,
    pub prior_cesd: u8,
    pub label: TrajectoryLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselinePredictor {
    pub kind: BaselineKind,
    /// Score assigned to the predicted class; the rest splits evenly.
    pub soft_margin: f64,
    /// person_modal state: most frequent train label per participant.
    modal: BTreeMap<String, TrajectoryLabel>,
    /// regression_to_person_mean state: typical severity band per
    /// participant, from the mean train CES-D.
    typical_band: BTreeMap<String, SeverityBand>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselinePrediction {
    pub label: TrajectoryLabel,
    pub scores: [f64; 3],
    /// Participant missing from train state; fell back to all-stable.
    pub fallback: bool,
}

impl BaselinePredictor {
    pub fn fit(kind: BaselineKind, train_rows: &[BaselineTrainRow<'_>]) -> Result<Self> {
        let mut modal = BTreeMap::new();
        let mut typical_band = BTreeMap::new();

        let mut label_counts: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
        let mut cesd_values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for row in train_rows {
            label_counts.entry(row.participant_id).or_insert([0; 3])[row.label.index()] += 1;
            cesd_values
                .entry(row.participant_id)
                .or_default()
                .push(row.prior_cesd as f64);
        }
        for (pid, counts) in label_counts {
            let max = counts.iter().max().copied().unwrap_or(0);
            let winners: Vec<usize> = (0..3).filter(|&c| counts[c] == max).collect();
            let label = if winners.len() == 1 {
                TrajectoryLabel::from_index(winners[0]).expect("index in range")
            } else {
                TrajectoryLabel::Stable // ties resolve to stable
            };
            modal.insert(pid.to_string(), label);
        }
        for (pid, values) in cesd_values {
            let m = mean(&values).round().clamp(0.0, 60.0) as u8;
            typical_band.insert(pid.to_string(), severity_band(m)?);
        }

        Ok(BaselinePredictor {
            kind,
            soft_margin: 0.9,
            modal,
            typical_band,
        })
    }

    fn one_hot(&self, label: TrajectoryLabel) -> [f64; 3] {
        let rest = (1.0 - self.soft_margin) / 2.0;
        let mut scores = [rest; 3];
        scores[label.index()] = self.soft_margin;
        scores
    }

    /// Predicts one row. `previous_label` is the participant's previous
    /// period's true label, if any (used by last-value-carried-forward; it
    /// is observable at prediction time because it describes an already
    /// completed fortnight).
    pub fn predict(
        &self,
        participant_id: &str,
        current_cesd: u8,
        previous_label: Option<TrajectoryLabel>,
    ) -> Result<BaselinePrediction> {
        let (label, fallback) = match self.kind {
            BaselineKind::AllStable => (TrajectoryLabel::Stable, false),
            BaselineKind::PersonModal => match self.modal.get(participant_id) {
                Some(l) => (*l, false),
                None => (TrajectoryLabel::Stable, true),
            },
            BaselineKind::LastValueCarriedForward => {
                (previous_label.unwrap_or(TrajectoryLabel::Stable), false)
            }
            BaselineKind::RegressionToPersonMean => match self.typical_band.get(participant_id) {
                Some(typical) => {
                    let current = severity_band(current_cesd)?;
                    let label = match current.cmp(typical) {
                        // Below the typical band: returning means moving up.
                        std::cmp::Ordering::Less => TrajectoryLabel::Worsening,
                        std::cmp::Ordering::Greater => TrajectoryLabel::Improving,
                        std::cmp::Ordering::Equal => TrajectoryLabel::Stable,
                    };
                    (label, false)
                }
                None => (TrajectoryLabel::Stable, true),
            },
        };
        Ok(BaselinePrediction {
            label,
            scores: self.one_hot(label),
            fallback,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(pid: &str, cesd: u8, label: TrajectoryLabel) -> BaselineTrainRow<'_> {
        BaselineTrainRow {
            participant_id: pid,
            prior_cesd: cesd,
            label,
        }
    }

    #[test]
    fn all_stable_always_stable() {
        let b = BaselinePredictor::fit(BaselineKind::AllStable, &[]).unwrap();
        let p = b.predict("anyone", 40, None).unwrap();
        assert_eq!(p.label, TrajectoryLabel::Stable);
        assert_eq!(p.scores[1], 0.9);
        assert!((p.scores[0] - 0.05).abs() < 1e-12);
        assert!((p.scores[2] - 0.05).abs() < 1e-12);
        assert!(!p.fallback);
    }

    #[test]
    fn regression_to_mean_covers_all_band_pairs() {
        // Typical bands: minimal (mean 8), moderate (mean 20), severe (mean 30).
        let train = vec![
            row("p_min", 8, TrajectoryLabel::Stable),
            row("p_mod", 20, TrajectoryLabel::Stable),
            row("p_sev", 30, TrajectoryLabel::Stable),
        ];
        let b = BaselinePredictor::fit(BaselineKind::RegressionToPersonMean, &train).unwrap();
        // Current scores hitting each band: 10 (minimal), 20 (moderate), 30 (severe).
        let current = [10u8, 20, 30];
        let expected = [
            // typical minimal
            [
                TrajectoryLabel::Stable,
                TrajectoryLabel::Improving,
                TrajectoryLabel::Improving,
            ],
            // typical moderate
            [
                TrajectoryLabel::Worsening,
                TrajectoryLabel::Stable,
                TrajectoryLabel::Improving,
            ],
            // typical severe
            [
                TrajectoryLabel::Worsening,
                TrajectoryLabel::Worsening,
                TrajectoryLabel::Stable,
            ],
        ];
        for (t, pid) in ["p_min", "p_mod", "p_sev"].iter().enumerate() {
            for (c, cesd) in current.iter().enumerate() {
                let p = b.predict(pid, *cesd, None).unwrap();
                assert_eq!(p.label, expected[t][c], "typical {t}, current {c}");
            }
        }
        // Current minimal, typical severe: must move up to return.
        let p = b.predict("p_sev", 5, None).unwrap();
        assert_eq!(p.label, TrajectoryLabel::Worsening);
    }

    #[test]
    fn lvcf_shifts_by_one() {
        let b = BaselinePredictor::fit(BaselineKind::LastValueCarriedForward, &[]).unwrap();
        // True sequence S, W, S -> predictions Stable, Stable, Worsening.
        let seq = [
            TrajectoryLabel::Stable,
            TrajectoryLabel::Worsening,
            TrajectoryLabel::Stable,
        ];
        let mut prev = None;
        let mut preds = Vec::new();
        for label in seq {
            preds.push(b.predict("p", 10, prev).unwrap().label);
            prev = Some(label);
        }
        assert_eq!(
            preds,
            vec![
                TrajectoryLabel::Stable,
                TrajectoryLabel::Stable,
                TrajectoryLabel::Worsening
            ]
        );
    }

    #[test]
    fn person_modal_majority_tie_and_fallback() {
        let train = vec![
            row("p1", 10, TrajectoryLabel::Worsening),
            row("p1", 12, TrajectoryLabel::Worsening),
            row("p1", 14, TrajectoryLabel::Improving),
            // p2 ties improving vs worsening.
            row("p2", 10, TrajectoryLabel::Worsening),
            row("p2", 12, TrajectoryLabel::Improving),
        ];
        let b = BaselinePredictor::fit(BaselineKind::PersonModal, &train).unwrap();
        assert_eq!(
            b.predict("p1", 10, None).unwrap().label,
            TrajectoryLabel::Worsening
        );
        assert_eq!(
            b.predict("p2", 10, None).unwrap().label,
            TrajectoryLabel::Stable
        );
        let unknown = b.predict("p9", 10, None).unwrap();
        assert_eq!(unknown.label, TrajectoryLabel::Stable);
        assert!(unknown.fallback);
    }
}

//! Period segmentation, sessionization and per-period behavioral aggregates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ObservationPeriod, PeriodFeatures};
use crate::datamodel::{AssessmentRecord, EmbeddingRecord, ScreenRecord};
use crate::error::{Error, Result};

const DAY: i64 = 86_400;
const OVERNIGHT_END_SEC: i64 = 6 * 3600;

/// A maximal run of screen records whose consecutive gaps never exceed the
/// session gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub start_ts: i64,
    pub end_ts: i64,
    pub n_screens: usize,
    /// Distinct apps touched, sorted.
    pub apps: Vec<String>,
}

/// Segments one participant's assessments into observation periods.
/// Period `k` spans `(ts[k-1], ts[k]]`; the first assessment anchors no
/// period. Fewer than two assessments yield an empty list.
pub fn segment_periods(
    assessments: &[AssessmentRecord],
    excluded: &BTreeSet<(String, u32)>,
) -> Result<Vec<ObservationPeriod>> {
    if assessments.len() < 2 {
        return Ok(Vec::new());
    }
    let mut periods = Vec::with_capacity(assessments.len() - 1);
    for pair in assessments.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        if cur.ts <= prev.ts {
            return Err(Error::Validation(format!(
                "participant {}: assessment timestamps not strictly increasing at index {}",
                cur.participant_id, cur.assessment_index
            )));
        }
        periods.push(ObservationPeriod {
            participant_id: cur.participant_id.clone(),
            period_index: cur.assessment_index,
            start_ts: prev.ts,
            end_ts: cur.ts,
            n_active_days: 0,
            excluded: excluded.contains(&(cur.participant_id.clone(), cur.assessment_index)),
        });
    }
    Ok(periods)
}

/// Groups sorted records into sessions. A gap strictly greater than
/// `gap_seconds` closes the current session; every record belongs to exactly
/// one session.
pub fn sessionize(records: &[ScreenRecord], gap_seconds: i64) -> Vec<Session> {
    let mut sessions = Vec::new();
    let mut iter = records.iter();
    let Some(first) = iter.next() else {
        return sessions;
    };
    let mut start = first.ts;
    let mut end = first.ts;
    let mut n_screens = 1usize;
    let mut apps: BTreeSet<&str> = BTreeSet::from([first.app_id.as_str()]);
    for rec in iter {
        debug_assert!(rec.ts >= end, "records must be sorted");
        if rec.ts - end > gap_seconds {
            sessions.push(Session {
                start_ts: start,
                end_ts: end,
                n_screens,
                apps: apps.iter().map(|a| a.to_string()).collect(),
            });
            start = rec.ts;
            n_screens = 0;
            apps.clear();
        }
        end = rec.ts;
        n_screens += 1;
        apps.insert(rec.app_id.as_str());
    }
    sessions.push(Session {
        start_ts: start,
        end_ts: end,
        n_screens,
        apps: apps.iter().map(|a| a.to_string()).collect(),
    });
    sessions
}

/// Mean cosine distance of each vector from the arithmetic mean vector.
/// Result lies in [0, 2]. Empty input is defined as 0 (callers flag it);
/// a zero mean vector makes the cosine undefined and is an error.
pub fn clip_dispersion(vectors: &[&[f64]]) -> Result<f64> {
    if vectors.is_empty() {
        return Ok(0.0);
    }
    let dim = vectors[0].len();
    let mut mean = vec![0.0; dim];
    for v in vectors {
        if v.len() != dim {
            return Err(Error::Validation(format!(
                "embedding dimension mismatch: {} != {dim}",
                v.len()
            )));
        }
        if v.iter().all(|x| *x == 0.0) {
            return Err(Error::Validation("zero embedding vector".into()));
        }
        for (m, x) in mean.iter_mut().zip(v.iter()) {
            *m += x;
        }
    }
    let n = vectors.len() as f64;
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mean_norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
    if mean_norm <= 0.0 {
        return Err(Error::Degenerate(
            "mean embedding vector is zero; cosine distance undefined".into(),
        ));
    }
    let mut total = 0.0;
    for v in vectors {
        let dot: f64 = v.iter().zip(mean.iter()).map(|(a, b)| a * b).sum();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        total += 1.0 - dot / (norm * mean_norm);
    }
    Ok(total / n)
}

fn local_day(ts: i64, utc_offset: i64) -> i64 {
    (ts + utc_offset).div_euclid(DAY)
}

fn local_second_of_day(ts: i64, utc_offset: i64) -> i64 {
    (ts + utc_offset).rem_euclid(DAY)
}

/// Computes the per-period behavioral aggregates from records and embedding
/// vectors restricted to `[period.start_ts, period.end_ts)`.
///
/// Zero active days in a non-excluded period yields all-zero features with
/// the degenerate flag set, so downstream matrices stay dense.
pub fn compute_period_features(
    records: &[ScreenRecord],
    embeddings: &[EmbeddingRecord],
    period: &ObservationPeriod,
    utc_offset: i64,
    gap_seconds: i64,
) -> Result<PeriodFeatures> {
    debug_assert!(records
        .iter()
        .all(|r| r.ts >= period.start_ts && r.ts < period.end_ts));

    // Local calendar days intersecting the half-open period window.
    let calendar_days = (local_day(period.end_ts - 1, utc_offset)
        - local_day(period.start_ts, utc_offset)
        + 1)
    .max(1) as f64;

    if records.is_empty() {
        return Ok(PeriodFeatures {
            degenerate: true,
            ..PeriodFeatures::default()
        });
    }

    let total_screens = records.len() as f64;
    let mut day_screens: BTreeMap<i64, usize> = BTreeMap::new();
    let mut day_apps: BTreeMap<i64, BTreeSet<&str>> = BTreeMap::new();
    let mut overnight = 0usize;
    let mut social = 0usize;
    for r in records {
        let d = local_day(r.ts, utc_offset);
        *day_screens.entry(d).or_insert(0) += 1;
        day_apps.entry(d).or_default().insert(r.app_id.as_str());
        if local_second_of_day(r.ts, utc_offset) < OVERNIGHT_END_SEC {
            overnight += 1;
        }
        if r.is_social {
            social += 1;
        }
    }
    let n_active_days = day_screens.len();
    let active = n_active_days as f64;

    let sessions = sessionize(records, gap_seconds);
    // A session counts toward the local day it starts on.
    let mut day_sessions: BTreeMap<i64, usize> = BTreeMap::new();
    for s in &sessions {
        *day_sessions.entry(local_day(s.start_ts, utc_offset)).or_insert(0) += 1;
    }

    let mean_daily_screens = total_screens / active;
    let mean_daily_unique_apps =
        day_apps.values().map(|s| s.len() as f64).sum::<f64>() / active;
    // Mean of per-day session counts over active days; days with records but
    // no session start contribute zero.
    let mean_daily_sessions = day_screens
        .keys()
        .map(|d| *day_sessions.get(d).unwrap_or(&0) as f64)
        .sum::<f64>()
        / active;
    let sessions_per_screen = sessions.len() as f64 / total_screens;
    let overnight_ratio = overnight as f64 / total_screens;
    let social_ratio = social as f64 / total_screens;
    let social_screens = mean_daily_screens * social_ratio;
    let active_day_ratio = active / calendar_days;

    let vecs: Vec<&[f64]> = embeddings
        .iter()
        .filter(|e| e.ts >= period.start_ts && e.ts < period.end_ts)
        .map(|e| e.vector.as_slice())
        .collect();
    let clip_dispersion = clip_dispersion(&vecs)?;

    Ok(PeriodFeatures {
        mean_daily_screens,
        mean_daily_unique_apps,
        mean_daily_sessions,
        sessions_per_screen,
        overnight_ratio,
        social_ratio,
        social_screens,
        clip_dispersion,
        active_day_ratio,
        n_active_days: n_active_days as u32,
        degenerate: false,
    })
}

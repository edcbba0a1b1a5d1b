//! Design-matrix assembly: levels, within-person deltas, lags, CES-D
//! anchors, demographics and split tags.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::periods::{compute_period_features, segment_periods};
use super::{
    feature_columns, FeatureMatrix, FeatureRow, PeriodFeatures, COL_AGE, COL_GENDER_FEMALE,
    COL_GENDER_MALE, COL_PERSON_MEAN_CESD, COL_PRIOR_CESD, DELTAS_START, LAGS_START, LEVELS_START,
    N_DELTAS, N_FEATURES, N_LEVELS,
};
use crate::datamodel::{Cohort, Gender, Participant};
use crate::error::{Error, Result};
use crate::evaluation::{SplitAssignment, SplitTag};
use crate::util::mean;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    /// Inter-record gap (seconds) that closes a phone-use session. Three
    /// missed 5-second captures by default.
    pub session_gap_seconds: i64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            session_gap_seconds: 15,
        }
    }
}

/// Row keys (participant, period_index) that can carry a label: the period
/// is not excluded, and a next assessment exists to label against. Grouped
/// per participant in chronological order — the exact row set and order of
/// [`build_design_matrix`].
pub fn labelable_row_keys(
    cohort: &Cohort,
    excluded: &BTreeSet<(String, u32)>,
) -> Vec<(String, u32)> {
    let mut keys = Vec::new();
    for (pid, part) in &cohort.participants {
        let n = part.assessments.len();
        if n < 3 {
            continue;
        }
        // Position i closes period i; the label needs assessment i+1.
        for i in 1..=(n - 2) {
            let period_index = part.assessments[i].assessment_index;
            if !excluded.contains(&(pid.clone(), period_index)) {
                keys.push((pid.clone(), period_index));
            }
        }
    }
    keys
}

struct PeriodSlot {
    /// Position of the closing assessment within the participant's series.
    position: usize,
    period_index: u32,
    features: PeriodFeatures,
}

/// Builds the 39-column design matrix. `splits` must cover exactly the row
/// set of [`labelable_row_keys`] for the same cohort and exclusion flags.
///
/// Per row: behavioral levels for the period, within-person deltas against
/// the most recent non-excluded period (zero for each participant's first
/// row; bridging an excluded period sets the gap flag), lags carrying that
/// previous period's levels and deltas, the closing assessment's CES-D as
/// `prior_cesd`, and the participant's train-row mean CES-D as
/// `person_mean_cesd` (train rows only, so val/test carry no information
/// into it).
pub fn build_design_matrix(
    cohort: &Cohort,
    splits: &SplitAssignment,
    excluded: &BTreeSet<(String, u32)>,
    params: &FeatureParams,
) -> Result<FeatureMatrix> {
    let columns = feature_columns();
    let mut rows: Vec<FeatureRow> = Vec::new();

    for (pid, part) in &cohort.participants {
        let n = part.assessments.len();
        if n < 3 {
            continue;
        }
        let slots = featurize_periods(pid, part, excluded, params, n - 2)?;
        let mut participant_rows = assemble_rows(pid, part, splits, &slots)?;

        // person_mean_cesd from train rows only.
        let train_prior: Vec<f64> = participant_rows
            .iter()
            .filter(|r| r.split == SplitTag::Train)
            .map(|r| r.values[COL_PRIOR_CESD])
            .collect();
        if train_prior.is_empty() {
            return Err(Error::Validation(format!(
                "participant {pid} has zero train rows; inclusion should prevent this"
            )));
        }
        let person_mean = mean(&train_prior);
        for row in participant_rows.iter_mut() {
            row.values[COL_PERSON_MEAN_CESD] = person_mean;
        }
        rows.extend(participant_rows);
    }

    Ok(FeatureMatrix { columns, rows })
}

/// Period features for every non-excluded period closing at positions
/// 1..=last_position (inclusive), in order.
fn featurize_periods(
    pid: &str,
    part: &Participant,
    excluded: &BTreeSet<(String, u32)>,
    params: &FeatureParams,
    last_position: usize,
) -> Result<Vec<PeriodSlot>> {
    let mut periods = segment_periods(&part.assessments, excluded)?;
    let offset = part.demographics.utc_offset_seconds;
    let mut slots = Vec::new();
    for (j, period) in periods.iter_mut().enumerate() {
        let position = j + 1; // closing assessment position
        if position > last_position || period.excluded {
            continue;
        }
        let records = &part.screen_records;
        let lo = records.partition_point(|r| r.ts < period.start_ts);
        let hi = records.partition_point(|r| r.ts < period.end_ts);
        let embeddings = &part.embeddings;
        let elo = embeddings.partition_point(|e| e.ts < period.start_ts);
        let ehi = embeddings.partition_point(|e| e.ts < period.end_ts);
        let features = compute_period_features(
            &records[lo..hi],
            &embeddings[elo..ehi],
            period,
            offset,
            params.session_gap_seconds,
        )
        .map_err(|e| {
            Error::Validation(format!("participant {pid}, period {}: {e}", period.period_index))
        })?;
        period.n_active_days = features.n_active_days;
        slots.push(PeriodSlot {
            position,
            period_index: period.period_index,
            features,
        });
    }
    Ok(slots)
}

fn assemble_rows(
    pid: &str,
    part: &Participant,
    splits: &SplitAssignment,
    slots: &[PeriodSlot],
) -> Result<Vec<FeatureRow>> {
    let demo = &part.demographics;
    let mut rows = Vec::with_capacity(slots.len());
    let mut prev: Option<(usize, [f64; N_LEVELS], f64, [f64; N_DELTAS])> = None;

    for slot in slots {
        let levels = slot.features.levels();
        let adr = slot.features.active_day_ratio;
        let (deltas, lags, has_predecessor, delta_gap) = match &prev {
            None => ([0.0; N_DELTAS], [0.0; N_LEVELS + N_DELTAS], false, false),
            Some((prev_pos, prev_levels, prev_adr, prev_deltas)) => {
                let mut deltas = [0.0; N_DELTAS];
                for i in 0..N_LEVELS {
                    deltas[i] = levels[i] - prev_levels[i];
                }
                deltas[N_DELTAS - 1] = adr - prev_adr;
                let mut lags = [0.0; N_LEVELS + N_DELTAS];
                lags[..N_LEVELS].copy_from_slice(prev_levels);
                lags[N_LEVELS..].copy_from_slice(prev_deltas);
                (deltas, lags, true, *prev_pos != slot.position - 1)
            }
        };

        let split = splits.tag(pid, slot.period_index).ok_or_else(|| {
            Error::Validation(format!(
                "no split tag for participant {pid}, period {}; \
                 temporal_split must run on the same row set",
                slot.period_index
            ))
        })?;

        let mut values = vec![0.0; N_FEATURES];
        values[COL_PRIOR_CESD] = part.assessments[slot.position].cesd as f64;
        // person_mean_cesd filled by the caller once train rows are known.
        values[COL_AGE] = demo.age_years as f64;
        values[COL_GENDER_MALE] = (demo.gender == Gender::Male) as u8 as f64;
        values[COL_GENDER_FEMALE] = (demo.gender == Gender::Female) as u8 as f64;
        values[LEVELS_START..LEVELS_START + N_LEVELS].copy_from_slice(&levels);
        values[DELTAS_START..DELTAS_START + N_DELTAS].copy_from_slice(&deltas);
        values[LAGS_START..LAGS_START + N_LEVELS + N_DELTAS].copy_from_slice(&lags);

        rows.push(FeatureRow {
            participant_id: pid.to_string(),
            period_index: slot.period_index,
            split,
            values,
            degenerate: slot.features.degenerate,
            delta_gap,
            has_predecessor,
        });
        prev = Some((slot.position, levels, adr, deltas));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{
        AssessmentRecord, Demographics, Ethnicity, IncomeBand, Participant, ScreenRecord,
    };
    use crate::evaluation::{temporal_split, SplitParams};
    use std::collections::BTreeMap;

    const DAY: i64 = 86_400;

    /// Hand-built cohort: each participant has 7 assessments (6 periods,
    /// 5 labelable rows). In period j (1-based), records form 2 sessions per
    /// day on the first 2 days, each session `base + j` screens; the second
    /// session each day is social.
    fn fixture_cohort(n_participants: usize) -> Cohort {
        let mut participants = BTreeMap::new();
        for p in 0..n_participants {
            let pid = format!("p{p}");
            let cesds = [8u8, 10, 12, 20, 25, 30, 18];
            let assessments: Vec<AssessmentRecord> = (0..7)
                .map(|k| AssessmentRecord {
                    participant_id: pid.clone(),
                    assessment_index: k as u32,
                    ts: 1_000 * DAY + k as i64 * 14 * DAY,
                    cesd: cesds[k],
                    missingness: 0.0,
                })
                .collect();
            let mut screen_records = Vec::new();
            for j in 1..=6i64 {
                let start = 1_000 * DAY + (j - 1) * 14 * DAY;
                let n_screens = 10 + j + p as i64;
                for day in 0..2 {
                    for (session, hour, social) in [(0, 10, false), (1, 14, true)] {
                        let _ = session;
                        for s in 0..n_screens {
                            screen_records.push(ScreenRecord {
                                participant_id: pid.clone(),
                                ts: start + day * DAY + hour * 3600 + s * 5,
                                app_id: if social { "soc".into() } else { "app".into() },
                                is_social: social,
                            });
                        }
                    }
                }
            }
            participants.insert(
                pid.clone(),
                Participant {
                    demographics: Demographics {
                        participant_id: pid.clone(),
                        age_years: 30 + p as u32,
                        gender: if p == 0 { Gender::Female } else { Gender::Male },
                        race: vec!["white".into()],
                        ethnicity: Ethnicity::NonHispanic,
                        income_band: IncomeBand::Below25k,
                        utc_offset_seconds: 0,
                    },
                    assessments,
                    screen_records,
                    embeddings: Vec::new(),
                },
            );
        }
        Cohort {
            participants,
            embedding_dim: None,
        }
        .finalize()
        .unwrap()
    }

    fn build(cohort: &Cohort, excluded: &BTreeSet<(String, u32)>) -> FeatureMatrix {
        let keys = labelable_row_keys(cohort, excluded);
        let splits = temporal_split(&keys, &SplitParams::default()).unwrap();
        build_design_matrix(cohort, &splits, excluded, &FeatureParams::default()).unwrap()
    }

    #[test]
    fn matrix_matches_manual_construction() {
        let cohort = fixture_cohort(3);
        let matrix = build(&cohort, &BTreeSet::new());
        assert_eq!(matrix.columns.len(), N_FEATURES);
        // 3 participants x 5 labelable rows.
        assert_eq!(matrix.n_rows(), 15);

        // Spreadsheet-style expectations for participant p0.
        // Period j: screens/day = 2 sessions * (11 + j... base 10 + j + 0);
        // n = 10 + j; per day 2n screens; mean_daily_screens = 2n;
        // mean_daily_sessions = 2; unique apps/day = 2;
        // sessions_per_screen = 4 sessions / 4n screens = 1/n;
        // social_ratio = 0.5; social_screens = n; active_day_ratio = 2/14.
        let level = |j: f64| {
            let n = 10.0 + j;
            [2.0 * n, 2.0, 2.0, 1.0 / n, 0.0, 0.5, n, 0.0]
        };

        let rows: Vec<&FeatureRow> = matrix
            .rows
            .iter()
            .filter(|r| r.participant_id == "p0")
            .collect();
        assert_eq!(rows.len(), 5);

        // Row for period 1: first row, so deltas and lags are all zero.
        let r1 = rows[0];
        assert_eq!(r1.period_index, 1);
        assert!(!r1.has_predecessor);
        assert_eq!(r1.values[COL_PRIOR_CESD], 10.0); // closing assessment k=1
        assert_eq!(r1.values[COL_AGE], 30.0);
        assert_eq!(r1.values[COL_GENDER_MALE], 0.0);
        assert_eq!(r1.values[COL_GENDER_FEMALE], 1.0);
        let l1 = level(1.0);
        for i in 0..N_LEVELS {
            assert!(
                (r1.values[LEVELS_START + i] - l1[i]).abs() < 1e-12,
                "level {i}: {} vs {}",
                r1.values[LEVELS_START + i],
                l1[i]
            );
        }
        for i in 0..N_DELTAS {
            assert_eq!(r1.values[DELTAS_START + i], 0.0);
        }
        for i in 0..(N_LEVELS + N_DELTAS) {
            assert_eq!(r1.values[LAGS_START + i], 0.0);
        }

        // Row for period 3: deltas = level(3)-level(2); lags carry period 2.
        let r3 = rows[2];
        assert_eq!(r3.period_index, 3);
        let (l3, l2) = (level(3.0), level(2.0));
        for i in 0..N_LEVELS {
            assert!((r3.values[LEVELS_START + i] - l3[i]).abs() < 1e-12);
            assert!((r3.values[DELTAS_START + i] - (l3[i] - l2[i])).abs() < 1e-12);
            assert!((r3.values[LAGS_START + i] - l2[i]).abs() < 1e-12);
        }
        // active_day_ratio_delta: constant 2/14 each period -> 0.
        assert!(r3.values[DELTAS_START + N_DELTAS - 1].abs() < 1e-15);

        // person_mean_cesd from the 3 train rows (prior_cesd 10, 12, 20).
        let expected_mean = (10.0 + 12.0 + 20.0) / 3.0;
        for r in &rows {
            assert!((r.values[COL_PERSON_MEAN_CESD] - expected_mean).abs() < 1e-12);
        }
        // Splits: 5 rows -> 3 train, 1 val, 1 test in period order.
        let tags: Vec<SplitTag> = rows.iter().map(|r| r.split).collect();
        assert_eq!(
            tags,
            [
                SplitTag::Train,
                SplitTag::Train,
                SplitTag::Train,
                SplitTag::Val,
                SplitTag::Test
            ]
        );
    }

    #[test]
    fn delta_lag_identities_hold_everywhere() {
        let cohort = fixture_cohort(3);
        let matrix = build(&cohort, &BTreeSet::new());
        let mut by_pid: BTreeMap<&str, Vec<&FeatureRow>> = BTreeMap::new();
        for r in &matrix.rows {
            by_pid.entry(r.participant_id.as_str()).or_default().push(r);
        }
        for rows in by_pid.values() {
            for w in rows.windows(2) {
                let (prev, cur) = (w[0], w[1]);
                for i in 0..N_LEVELS {
                    let delta = cur.values[DELTAS_START + i];
                    let expect = cur.values[LEVELS_START + i] - prev.values[LEVELS_START + i];
                    assert!((delta - expect).abs() < 1e-12);
                    assert_eq!(cur.values[LAGS_START + i], prev.values[LEVELS_START + i]);
                }
                for i in 0..N_DELTAS {
                    assert_eq!(
                        cur.values[LAGS_START + N_LEVELS + i],
                        prev.values[DELTAS_START + i]
                    );
                }
            }
        }
    }

    #[test]
    fn excluded_period_bridged_with_gap_flag() {
        let cohort = fixture_cohort(1);
        let mut excluded = BTreeSet::new();
        excluded.insert(("p0".to_string(), 2));
        // Four rows survive; tag them by hand (the default splitter would
        // floor val/test to zero at this size).
        let keys = labelable_row_keys(&cohort, &excluded);
        let mut splits = SplitAssignment::default();
        for (i, k) in keys.into_iter().enumerate() {
            let tag = match i {
                0 | 1 => SplitTag::Train,
                2 => SplitTag::Val,
                _ => SplitTag::Test,
            };
            splits.tags.insert(k, tag);
        }
        let matrix =
            build_design_matrix(&cohort, &splits, &excluded, &FeatureParams::default()).unwrap();
        // Rows: periods 1, 3, 4, 5 (period 2 excluded).
        let periods: Vec<u32> = matrix.rows.iter().map(|r| r.period_index).collect();
        assert_eq!(periods, vec![1, 3, 4, 5]);
        let r3 = &matrix.rows[1];
        assert!(r3.delta_gap, "delta across the excluded period must be flagged");
        // Delta bridges period 1: level(3) - level(1) = 2*(13-11) = 4.
        assert!((r3.values[DELTAS_START] - 4.0).abs() < 1e-12);
        // Lags carry period 1's levels.
        assert!((r3.values[LAGS_START] - 22.0).abs() < 1e-12);
        let r4 = &matrix.rows[2];
        assert!(!r4.delta_gap);
    }

    #[test]
    fn zero_train_rows_is_error() {
        let cohort = fixture_cohort(1);
        let keys = labelable_row_keys(&cohort, &BTreeSet::new());
        // Tag everything as test: person mean has no train rows to use.
        let mut splits = SplitAssignment::default();
        for k in keys {
            splits.tags.insert(k, SplitTag::Test);
        }
        let err = build_design_matrix(
            &cohort,
            &splits,
            &BTreeSet::new(),
            &FeatureParams::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("zero train rows"));
    }
}

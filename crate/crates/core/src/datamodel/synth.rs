//! Seeded synthetic-cohort generator.
//!
//! Stands in for the (private) study data. Symptom series follow a
//! random-intercept + AR(1) model so the between/within variance split,
//! carryover and mean reversion are all directly configurable; screen-event
//! streams are simulated session by session at the 5-second capture cadence,
//! with per-participant behavioral coupling of configurable sign mixture so
//! that within-person feature/symptom correlations have planted
//! heterogeneity. Output is a deterministic function of `(config, seed)`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{
    AssessmentRecord, Cohort, Demographics, EmbeddingRecord, Ethnicity, Gender, IncomeBand,
    Participant, ScreenRecord,
};
use crate::error::{Error, Result};
use crate::util::{derive_seed, derive_seed3};

const DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_participants: usize,
    pub assessments_per_participant: u32,
    /// Nominal days between assessments.
    pub interval_days: f64,
    /// Uniform jitter (+/- days) applied to each interval.
    pub jitter_days: f64,

    pub cesd_population_mean: f64,
    /// Variance of stable person means (between-person component).
    pub between_person_variance: f64,
    /// Stationary variance of the within-person process.
    pub within_person_variance: f64,
    /// AR(1) carryover of the within-person deviation, in [0, 1).
    pub ar1_coefficient: f64,
    /// Log-normal spread of per-person within SDs (0 = homogeneous);
    /// normalized so the average within variance stays on target.
    pub within_sd_heterogeneity: f64,

    /// Strength of the behavior <-> symptom coupling (0 = independent).
    pub coupling_strength: f64,
    /// Share of participants whose coupling is positive.
    pub coupling_positive_share: f64,

    pub sessions_per_day: f64,
    pub screens_per_session: f64,
    pub active_day_probability: f64,
    /// Share of sessions starting in the local 00:00-06:00 window.
    pub overnight_share: f64,
    /// Baseline share of sessions spent in social apps.
    pub social_share: f64,
    pub n_apps: usize,
    pub n_social_apps: usize,

    pub embedding_dim: usize,
    /// Emit an embedding for every n-th screenshot (0 = no embeddings).
    pub embedding_stride: usize,
    pub embedding_noise: f64,

    /// Ordinary per-period metadata missingness is Uniform(0, this).
    pub missingness_max: f64,
    /// Probability that a period instead draws missingness above the 10%
    /// exclusion threshold (exercises the excluded-period path).
    pub excluded_period_rate: f64,

    pub start_epoch: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_participants: 96,
            assessments_per_participant: 21,
            interval_days: 14.0,
            jitter_days: 1.0,
            cesd_population_mean: 16.0,
            between_person_variance: 48.8,
            within_person_variance: 15.2,
            ar1_coefficient: 0.3,
            within_sd_heterogeneity: 0.3,
            coupling_strength: 0.8,
            coupling_positive_share: 0.57,
            sessions_per_day: 3.0,
            screens_per_session: 6.0,
            active_day_probability: 0.95,
            overnight_share: 0.08,
            social_share: 0.35,
            n_apps: 12,
            n_social_apps: 4,
            embedding_dim: 16,
            embedding_stride: 5,
            embedding_noise: 0.35,
            missingness_max: 0.08,
            excluded_period_rate: 0.0,
            start_epoch: 1_592_211_600, // 2020-06-15T09:00:00Z
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Config(msg));
        if self.n_participants == 0 {
            return err("n_participants must be positive".into());
        }
        if self.assessments_per_participant < 2 {
            return err("assessments_per_participant must be at least 2".into());
        }
        // Zero variances are legitimate configurations (constant series /
        // null generators); only negative or non-finite values are errors.
        for (name, v) in [
            ("between_person_variance", self.between_person_variance),
            ("within_person_variance", self.within_person_variance),
        ] {
            if !v.is_finite() || v < 0.0 {
                return err(format!("{name} must be a non-negative finite number, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.ar1_coefficient) {
            return err(format!(
                "ar1_coefficient must lie in [0,1), got {}",
                self.ar1_coefficient
            ));
        }
        if self.jitter_days < 0.0 || self.jitter_days * 2.0 >= self.interval_days {
            return err("jitter_days must be non-negative and below half the interval".into());
        }
        for (name, v) in [
            ("coupling_positive_share", self.coupling_positive_share),
            ("active_day_probability", self.active_day_probability),
            ("overnight_share", self.overnight_share),
            ("missingness_max", self.missingness_max),
            ("excluded_period_rate", self.excluded_period_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return err(format!("{name} must lie in [0,1], got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.social_share) && self.social_share != 0.0 {
            return err(format!("social_share must lie in [0,1), got {}", self.social_share));
        }
        if self.n_social_apps > self.n_apps || self.n_apps == 0 {
            return err("need 0 < n_social_apps <= n_apps".into());
        }
        if self.embedding_stride > 0 && self.embedding_dim == 0 {
            return err("embedding_dim must be positive when embeddings are emitted".into());
        }
        Ok(())
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn poisson_draw(rng: &mut ChaCha8Rng, rate: f64) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Generates a cohort. Deterministic: the same `(config, seed)` always
/// yields a byte-identical serialized cohort.
pub fn synth_cohort(config: &SynthConfig, seed: u64) -> Result<Cohort> {
    config.validate()?;

    let app_ids: Vec<String> = (0..config.n_apps).map(|a| format!("app_{a:02}")).collect();
    // Fixed per-app embedding directions, shared across the cohort.
    let mut app_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, APP_DIR_STREAM));
    let app_dirs: Vec<Vec<f64>> = (0..config.n_apps)
        .map(|_| unit_vector(&mut app_rng, config.embedding_dim.max(1)))
        .collect();

    let sigma_within = config.within_person_variance.sqrt();
    let h = config.within_sd_heterogeneity;

    let mut participants = BTreeMap::new();
    for i in 0..config.n_participants {
        let pid = format!("p{i:04}");
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed3(seed, 1, i as u64));
        let normal = Normal::new(0.0, 1.0).expect("unit normal");

        let demographics = draw_demographics(&pid, &mut rng);

        let person_mean =
            config.cesd_population_mean + config.between_person_variance.sqrt() * normal.sample(&mut rng);
        // E[sd_mult^2] = 1, so the population-average within variance stays
        // on target under heterogeneity.
        let sd_mult = if h > 0.0 {
            (h * normal.sample(&mut rng) - h * h).exp()
        } else {
            1.0
        };
        let sigma_i = sigma_within * sd_mult;
        let coupling_sign = if rng.random::<f64>() < config.coupling_positive_share {
            1.0
        } else {
            -1.0
        };

        // Assessment schedule: 14 +/- jitter days apart, strictly increasing.
        let n_assess = config.assessments_per_participant;
        let mut times = Vec::with_capacity(n_assess as usize);
        let mut t = config.start_epoch + (rng.random::<f64>() * config.interval_days * DAY as f64) as i64;
        for _ in 0..n_assess {
            times.push(t);
            let jitter = (rng.random::<f64>() * 2.0 - 1.0) * config.jitter_days;
            t += ((config.interval_days + jitter) * DAY as f64).round() as i64;
        }

        // Within-person AR(1) deviations at assessment times.
        let phi = config.ar1_coefficient;
        let mut deviations = Vec::with_capacity(n_assess as usize);
        let mut e = sigma_i * normal.sample(&mut rng);
        if sigma_i == 0.0 {
            e = 0.0;
        }
        for k in 0..n_assess {
            if k > 0 {
                let innovation_sd = sigma_i * (1.0 - phi * phi).sqrt();
                e = phi * e + innovation_sd * normal.sample(&mut rng);
            }
            deviations.push(e);
        }

        let mut assessments = Vec::with_capacity(n_assess as usize);
        for k in 0..n_assess {
            let raw = person_mean + deviations[k as usize];
            let cesd = raw.round().clamp(0.0, 60.0) as u8;
            let missingness = if k == 0 {
                0.0
            } else if rng.random::<f64>() < config.excluded_period_rate {
                0.11 + rng.random::<f64>() * 0.09
            } else {
                rng.random::<f64>() * config.missingness_max
            };
            assessments.push(AssessmentRecord {
                participant_id: pid.clone(),
                assessment_index: k,
                ts: times[k as usize],
                cesd,
                missingness,
            });
        }

        // Screen events, period by period. Behavior during period k couples
        // to the symptom deviation at the assessment closing it, so feature
        // deltas and symptom deltas co-move with the participant's sign.
        let mut screen_records = Vec::new();
        let mut embeddings = Vec::new();
        let mut screen_counter = 0usize;
        let kappa = config.coupling_strength;
        for k in 1..n_assess as usize {
            let window = (times[k - 1], times[k]);
            let z = if sigma_i > 0.0 { deviations[k] / sigma_i } else { 0.0 };
            let session_rate = config.sessions_per_day * (0.25 * coupling_sign * kappa * z).exp();
            let social_p = if config.social_share > 0.0 {
                sigmoid(logit(config.social_share) + coupling_sign * kappa * z)
            } else {
                0.0
            };
            simulate_period_events(
                config,
                &pid,
                window,
                session_rate,
                social_p,
                &app_ids,
                &app_dirs,
                &mut screen_counter,
                &mut screen_records,
                &mut embeddings,
                &mut rng,
            );
        }

        participants.insert(
            pid,
            Participant {
                demographics,
                assessments,
                screen_records,
                embeddings,
            },
        );
    }

    Cohort {
        participants,
        embedding_dim: None,
    }
    .finalize()
}

// Demographic marginals loosely shaped like a US community adult panel.
fn draw_demographics(pid: &str, rng: &mut ChaCha8Rng) -> Demographics {
    let age_years = rng.random_range(20..=78);
    let g: f64 = rng.random();
    let gender = if g < 0.583 {
        Gender::Female
    } else if g < 0.979 {
        Gender::Male
    } else {
        Gender::Other
    };
    let mut race = Vec::new();
    if rng.random::<f64>() < 0.75 {
        race.push("white".to_string());
    }
    if rng.random::<f64>() < 0.167 {
        race.push("black".to_string());
    }
    if rng.random::<f64>() < 0.073 {
        race.push("asian".to_string());
    }
    if rng.random::<f64>() < 0.062 {
        race.push("native_american".to_string());
    }
    if race.is_empty() {
        race.push("other".to_string());
    }
    race.sort();
    race.dedup();
    let ethnicity = if rng.random::<f64>() < 0.167 {
        Ethnicity::Hispanic
    } else {
        Ethnicity::NonHispanic
    };
    let inc: f64 = rng.random();
    let income_band = if inc < 0.396 {
        IncomeBand::Below25k
    } else if inc < 0.625 {
        IncomeBand::From25kTo100k
    } else if inc < 0.937 {
        IncomeBand::Above100k
    } else {
        IncomeBand::Unknown
    };
    Demographics {
        participant_id: pid.to_string(),
        age_years,
        gender,
        race,
        ethnicity,
        income_band,
        utc_offset_seconds: 0,
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate_period_events(
    config: &SynthConfig,
    pid: &str,
    window: (i64, i64),
    session_rate: f64,
    social_p: f64,
    app_ids: &[String],
    app_dirs: &[Vec<f64>],
    screen_counter: &mut usize,
    screen_records: &mut Vec<ScreenRecord>,
    embeddings: &mut Vec<EmbeddingRecord>,
    rng: &mut ChaCha8Rng,
) {
    let (start, end) = window;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let first_day = start.div_euclid(DAY);
    let last_day = (end - 1).div_euclid(DAY);
    for day in first_day..=last_day {
        if rng.random::<f64>() >= config.active_day_probability {
            continue;
        }
        let n_sessions = poisson_draw(rng, session_rate);
        for _ in 0..n_sessions {
            let start_sec = if rng.random::<f64>() < config.overnight_share {
                rng.random_range(0..6 * 3600)
            } else {
                rng.random_range(6 * 3600..24 * 3600)
            };
            let session_start = day * DAY + start_sec;
            let n_screens = 1 + poisson_draw(rng, config.screens_per_session - 1.0);
            let is_social = rng.random::<f64>() < social_p;
            let app_idx = if is_social {
                rng.random_range(0..config.n_social_apps)
            } else {
                rng.random_range(config.n_social_apps..config.n_apps)
            };
            for s in 0..n_screens {
                let ts = session_start + s as i64 * 5;
                if ts < start || ts >= end || ts <= 0 {
                    continue;
                }
                screen_records.push(ScreenRecord {
                    participant_id: pid.to_string(),
                    ts,
                    app_id: app_ids[app_idx].clone(),
                    is_social,
                });
                *screen_counter += 1;
                if config.embedding_stride > 0 && *screen_counter % config.embedding_stride == 0 {
                    let dir = &app_dirs[app_idx];
                    let mut v: Vec<f64> = dir
                        .iter()
                        .map(|d| d + config.embedding_noise * normal.sample(rng))
                        .collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 1e-9 {
                        for x in v.iter_mut() {
                            *x /= norm;
                        }
                        embeddings.push(EmbeddingRecord {
                            participant_id: pid.to_string(),
                            ts,
                            vector: v,
                        });
                    }
                }
            }
        }
    }
}

// Stream tag for the cohort-level app directions, distinct from the
// per-participant streams (which use tag 1 + participant index).
const APP_DIR_STREAM: u64 = 0x5eed_0a99;

//! Input record types, cohort container, ingestion, inclusion filtering and
//! the seeded synthetic-cohort generator.

mod inclusion;
mod ingest;
mod synth;

pub use inclusion::{apply_inclusion, ExclusionReason, ExclusionReport, InclusionCriteria};
pub use ingest::{load_cohort, write_cohort, LoadReport};
pub use synth::{synth_cohort, SynthConfig};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One screenshot / app-foreground event. The capture cadence is roughly one
/// record per five seconds while the screen is on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenRecord {
    pub participant_id: String,
    /// UTC epoch seconds; strictly positive.
    pub ts: i64,
    pub app_id: String,
    /// App-category flag (social platform or not), assigned upstream.
    pub is_social: bool,
}

/// Embedding vector for one screenshot. Only the scalar dispersion derived
/// from these enters the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub participant_id: String,
    pub ts: i64,
    pub vector: Vec<f64>,
}

/// One fortnightly symptom assessment. `missingness` is the metadata-log
/// missingness fraction for the period this assessment closes (computed
/// upstream; 0 for the first assessment, which closes no period).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    pub participant_id: String,
    pub assessment_index: u32,
    pub ts: i64,
    /// Symptom sum score, 0..=60.
    pub cesd: u8,
    pub missingness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    Other,
}

impl Gender {
    pub fn parse(s: &str) -> Option<Gender> {
        match s {
            "male" => Some(Gender::Male),
            "female" => Some(Gender::Female),
            "other" => Some(Gender::Other),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ethnicity {
    Hispanic,
    NonHispanic,
}

impl Ethnicity {
    pub fn parse(s: &str) -> Option<Ethnicity> {
        match s {
            "hispanic" => Some(Ethnicity::Hispanic),
            "non_hispanic" => Some(Ethnicity::NonHispanic),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Ethnicity::Hispanic => "hispanic",
            Ethnicity::NonHispanic => "non_hispanic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncomeBand {
    Below25k,
    From25kTo100k,
    Above100k,
    Unknown,
}

impl IncomeBand {
    pub fn parse(s: &str) -> Option<IncomeBand> {
        match s {
            "below_25k" => Some(IncomeBand::Below25k),
            "25k_to_100k" => Some(IncomeBand::From25kTo100k),
            "above_100k" => Some(IncomeBand::Above100k),
            "unknown" => Some(IncomeBand::Unknown),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            IncomeBand::Below25k => "below_25k",
            IncomeBand::From25kTo100k => "25k_to_100k",
            IncomeBand::Above100k => "above_100k",
            IncomeBand::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub participant_id: String,
    pub age_years: u32,
    pub gender: Gender,
    /// Select-all-that-apply race categories, kept sorted.
    pub race: Vec<String>,
    pub ethnicity: Ethnicity,
    pub income_band: IncomeBand,
    /// Local-clock offset from UTC in seconds; drives the overnight window.
    pub utc_offset_seconds: i64,
}

/// Everything known about one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub demographics: Demographics,
    /// Sorted by assessment_index (strictly increasing, as are timestamps).
    pub assessments: Vec<AssessmentRecord>,
    /// Sorted by (ts, app_id).
    pub screen_records: Vec<ScreenRecord>,
    /// Sorted by ts.
    pub embeddings: Vec<EmbeddingRecord>,
}

/// A validated, canonically ordered cohort. Immutable after construction;
/// safe to share across threads read-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub participants: BTreeMap<String, Participant>,
    /// Embedding dimension shared by every vector in the cohort, if any.
    pub embedding_dim: Option<usize>,
}

impl Cohort {
    /// Metadata missingness for the period closed by assessment `index`.
    pub fn missingness(&self, participant_id: &str, index: u32) -> Option<f64> {
        self.participants
            .get(participant_id)
            .and_then(|p| p.assessments.iter().find(|a| a.assessment_index == index))
            .map(|a| a.missingness)
    }

    pub fn n_participants(&self) -> usize {
        self.participants.len()
    }

    pub fn n_assessments(&self) -> usize {
        self.participants.values().map(|p| p.assessments.len()).sum()
    }

    /// Sorts records into canonical order and checks cross-record
    /// invariants. Called by every constructor path (ingest and synth).
    pub fn finalize(mut self) -> Result<Cohort> {
        let mut dim: Option<usize> = self.embedding_dim;
        for (pid, part) in self.participants.iter_mut() {
            part.assessments
                .sort_by_key(|a| (a.assessment_index, a.ts));
            part.screen_records
                .sort_by(|a, b| (a.ts, &a.app_id).cmp(&(b.ts, &b.app_id)));
            part.embeddings.sort_by_key(|e| e.ts);

            let mut prev: Option<(u32, i64)> = None;
            for a in &part.assessments {
                if a.cesd > 60 {
                    return Err(Error::Validation(format!(
                        "participant {pid}: cesd {} outside range 0-60",
                        a.cesd
                    )));
                }
                if !(0.0..=1.0).contains(&a.missingness) {
                    return Err(Error::Validation(format!(
                        "participant {pid}: missingness {} outside [0,1]",
                        a.missingness
                    )));
                }
                if let Some((pi, pt)) = prev {
                    if a.assessment_index == pi {
                        return Err(Error::Validation(format!(
                            "participant {pid}: duplicate assessment_index {pi}"
                        )));
                    }
                    if a.ts <= pt {
                        return Err(Error::Validation(format!(
                            "participant {pid}: assessment timestamps not strictly increasing at index {}",
                            a.assessment_index
                        )));
                    }
                }
                prev = Some((a.assessment_index, a.ts));
            }

            for r in &part.screen_records {
                if r.ts <= 0 {
                    return Err(Error::Validation(format!(
                        "participant {pid}: non-positive screen record timestamp {}",
                        r.ts
                    )));
                }
            }

            for e in &part.embeddings {
                if e.vector.iter().all(|v| *v == 0.0) {
                    return Err(Error::Validation(format!(
                        "participant {pid}: zero embedding vector at ts {}",
                        e.ts
                    )));
                }
                match dim {
                    None => dim = Some(e.vector.len()),
                    Some(d) if d != e.vector.len() => {
                        return Err(Error::Validation(format!(
                            "participant {pid}: embedding dimension {} != cohort dimension {d}",
                            e.vector.len()
                        )));
                    }
                    _ => {}
                }
            }
        }
        self.embedding_dim = dim;
        Ok(self)
    }
}

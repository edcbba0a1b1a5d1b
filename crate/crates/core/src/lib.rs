//! Within-person symptom trajectory prediction.
//!
//! This crate turns raw smartphone screen-event streams and fortnightly
//! CES-D assessments into a 39-column design matrix, labels each fortnight
//! as improving / stable / worsening under one of three operationalizations,
//! fits in-repo learners (elastic-net multinomial regression, multiclass
//! gradient-boosted trees) against rule-based baselines, and evaluates them
//! with leakage-safe temporal and person-level designs: percentile bootstrap
//! CIs, nested feature ablation with Holm correction, leave-group-out
//! cross-validation, assessment-staleness scenarios, and subgroup reports.
//!
//! A seeded synthetic cohort generator stands in for study data, so every
//! stage is verifiable end to end on a laptop.
//!
//! Pipeline order (see [`pipeline::run`]):
//! ingest -> inclusion -> period segmentation -> temporal split ->
//! featurize -> VIF screen -> scale -> label -> grid search -> refit ->
//! evaluate (+ optional scenarios).

pub mod config;
pub mod datamodel;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod labels;
pub mod learners;
pub mod pipeline;
pub mod stats;
pub mod util;

pub use error::{Error, Result};

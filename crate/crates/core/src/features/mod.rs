//! Design-matrix construction: period segmentation, sessionization, the five
//! behavioral domains, deltas and lags, CES-D anchors, VIF screening and
//! split-aware standardization.
//!
//! # Column catalog
//!
//! The model consumes exactly [`N_FEATURES`] = 39 inputs, in this canonical
//! order:
//!
//! | indices | contents                                                    |
//! |---------|-------------------------------------------------------------|
//! | 0       | `prior_cesd` (most recent score at prediction time)          |
//! | 1       | `person_mean_cesd` (train-only per-person mean)               |
//! | 2..=4   | `age`, `gender_male`, `gender_female`                         |
//! | 5..=12  | 8 behavioral levels                                           |
//! | 13..=21 | 9 behavioral deltas (8 levels + `active_day_ratio_delta`)     |
//! | 22..=38 | 17 lags (previous period's levels then deltas)                |
//!
//! The two screened-out candidates (`active_day_ratio` level,
//! `overnight_screens`) are never constructed; `active_day_ratio` exists only
//! internally so its delta can be emitted.

mod matrix;
mod periods;
mod scaler;
mod vif;

pub use matrix::{build_design_matrix, labelable_row_keys, FeatureParams};
pub use periods::{clip_dispersion, compute_period_features, segment_periods, sessionize, Session};
pub use scaler::{apply_scaler, fit_scaler, ScalePolicy, Scaler};
pub use vif::{compute_vifs, vif_screen, VifRemoval, VifScreenResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::SplitTag;
use crate::util::Matrix;

pub const N_FEATURES: usize = 39;

pub const COL_PRIOR_CESD: usize = 0;
pub const COL_PERSON_MEAN_CESD: usize = 1;
pub const COL_AGE: usize = 2;
pub const COL_GENDER_MALE: usize = 3;
pub const COL_GENDER_FEMALE: usize = 4;
pub const LEVELS_START: usize = 5;
pub const N_LEVELS: usize = 8;
pub const DELTAS_START: usize = LEVELS_START + N_LEVELS; // 13
pub const N_DELTAS: usize = 9;
pub const LAGS_START: usize = DELTAS_START + N_DELTAS; // 22
pub const N_LAGS: usize = N_LEVELS + N_DELTAS; // 17

/// Behavioral level names in canonical order.
pub const BEHAVIORAL_LEVELS: [&str; N_LEVELS] = [
    "mean_daily_screens",
    "mean_daily_unique_apps",
    "mean_daily_sessions",
    "sessions_per_screen",
    "overnight_ratio",
    "social_ratio",
    "social_screens",
    "clip_dispersion",
];

/// Outcome anchors and demographics: reported by the VIF screen but never
/// removal candidates (screening targets the behavioral columns).
pub fn anchor_columns() -> std::collections::BTreeSet<String> {
    [
        "prior_cesd",
        "person_mean_cesd",
        "age",
        "gender_male",
        "gender_female",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// The canonical 39 feature names.
pub fn feature_columns() -> Vec<String> {
    let mut cols = Vec::with_capacity(N_FEATURES);
    cols.push("prior_cesd".to_string());
    cols.push("person_mean_cesd".to_string());
    cols.push("age".to_string());
    cols.push("gender_male".to_string());
    cols.push("gender_female".to_string());
    for name in BEHAVIORAL_LEVELS {
        cols.push(name.to_string());
    }
    for name in BEHAVIORAL_LEVELS {
        cols.push(format!("{name}_delta"));
    }
    cols.push("active_day_ratio_delta".to_string());
    for name in BEHAVIORAL_LEVELS {
        cols.push(format!("lag_{name}"));
    }
    for name in BEHAVIORAL_LEVELS {
        cols.push(format!("lag_{name}_delta"));
    }
    cols.push("lag_active_day_ratio_delta".to_string());
    debug_assert_eq!(cols.len(), N_FEATURES);
    cols
}

/// One fortnightly observation window, anchored by the assessment closing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationPeriod {
    pub participant_id: String,
    /// Index of the assessment that closes this period (>= 1).
    pub period_index: u32,
    pub start_ts: i64,
    pub end_ts: i64,
    /// Days with any recorded screen activity; filled during featurization.
    pub n_active_days: u32,
    /// Excluded from feature construction (metadata missingness rule).
    pub excluded: bool,
}

/// Raw per-period behavioral aggregates, before deltas/lags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodFeatures {
    pub mean_daily_screens: f64,
    pub mean_daily_unique_apps: f64,
    pub mean_daily_sessions: f64,
    pub sessions_per_screen: f64,
    pub overnight_ratio: f64,
    pub social_ratio: f64,
    pub social_screens: f64,
    pub clip_dispersion: f64,
    /// Internal only: just its delta is a model input.
    pub active_day_ratio: f64,
    pub n_active_days: u32,
    /// Zero recorded activity in a non-excluded period.
    pub degenerate: bool,
}

impl PeriodFeatures {
    /// Levels in canonical column order.
    pub fn levels(&self) -> [f64; N_LEVELS] {
        [
            self.mean_daily_screens,
            self.mean_daily_unique_apps,
            self.mean_daily_sessions,
            self.sessions_per_screen,
            self.overnight_ratio,
            self.social_ratio,
            self.social_screens,
            self.clip_dispersion,
        ]
    }
}

/// One aligned observation row of the design matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub participant_id: String,
    pub period_index: u32,
    pub split: SplitTag,
    /// Exactly [`N_FEATURES`] values in canonical column order.
    pub values: Vec<f64>,
    /// Period had zero recorded activity (all behavioral values zeroed).
    pub degenerate: bool,
    /// Deltas/lags bridge one or more excluded periods.
    pub delta_gap: bool,
    /// A prior non-excluded period exists (first rows have none; their
    /// deltas and lags are zero by convention).
    pub has_predecessor: bool,
}

/// The full design matrix plus row metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values as a dense matrix (row order preserved).
    pub fn to_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows.len(), self.columns.len());
        for (r, row) in self.rows.iter().enumerate() {
            for (c, v) in row.values.iter().enumerate() {
                m.set(r, c, *v);
            }
        }
        m
    }

    pub fn row_indices_with_tag(&self, tag: SplitTag) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, row)| row.split == tag)
            .map(|(i, _)| i)
            .collect()
    }

    /// Serializes to CSV in the fixed canonical column order.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
        );
        let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
        write!(w, "participant_id,period_index,split,degenerate,delta_gap").map_err(io_err)?;
        for c in &self.columns {
            write!(w, ",{c}").map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
        for row in &self.rows {
            write!(
                w,
                "{},{},{},{},{}",
                row.participant_id,
                row.period_index,
                row.split.as_str(),
                row.degenerate as u8,
                row.delta_gap as u8
            )
            .map_err(io_err)?;
            for v in &row.values {
                write!(w, ",{v}").map_err(io_err)?;
            }
            writeln!(w).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }
}

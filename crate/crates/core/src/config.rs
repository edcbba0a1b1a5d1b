//! Run configuration: inputs, label choice, model family and hyperparameter
//! grids, seeds and scenario toggles. Fully serializable (TOML or JSON);
//! the SHA-256 of the canonical JSON form stamps every output manifest.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::datamodel::{InclusionCriteria, SynthConfig};
use crate::error::{Error, Result};
use crate::evaluation::BootstrapConfig;
use crate::labels::LabelOp;
use crate::learners::{ElasticNetParams, GbdtParams, ModelFamily, ModelParams};
use crate::util::{derive_seed, sha256_hex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    /// Read the four input files from disk.
    Files {
        events: PathBuf,
        assessments: PathBuf,
        demographics: PathBuf,
        embeddings: Option<PathBuf>,
    },
    /// Generate a synthetic cohort in memory.
    Synth { synth: SynthConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelChoice {
    /// sev_crossing | personal_sd | balanced_tercile
    pub op: String,
    /// Stable-zone width multiplier for personal_sd.
    pub k: f64,
    /// Tercile tie seed; derived from the run seed when absent.
    pub tie_seed: Option<u64>,
}

impl Default for LabelChoice {
    fn default() -> Self {
        LabelChoice {
            op: "sev_crossing".to_string(),
            k: 1.0,
            tie_seed: None,
        }
    }
}

impl LabelChoice {
    pub fn to_label_op(&self, run_seed: u64) -> Result<LabelOp> {
        match self.op.as_str() {
            "sev_crossing" => Ok(LabelOp::SevCrossing),
            "personal_sd" => Ok(LabelOp::PersonalSd { k: self.k }),
            "balanced_tercile" => Ok(LabelOp::BalancedTercile {
                tie_seed: self.tie_seed.unwrap_or_else(|| derive_seed(run_seed, 0x7e2c)),
            }),
            other => Err(Error::Config(format!(
                "unknown label operationalization `{other}` \
                 (sev_crossing | personal_sd | balanced_tercile)"
            ))),
        }
    }
}

/// Cartesian hyperparameter grid for the tree booster. Shipped defaults
/// bracket the depth-3/depth-5 x 50/100-round region that grid search
/// lands in on this task family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtGrid {
    pub learning_rate: Vec<f64>,
    pub max_depth: Vec<usize>,
    pub n_estimators: Vec<usize>,
    pub min_child_weight: Vec<f64>,
    pub min_child_samples: Vec<usize>,
    pub subsample: Vec<f64>,
    pub colsample_bytree: Vec<f64>,
    pub reg_alpha: Vec<f64>,
    pub reg_lambda: Vec<f64>,
    pub num_leaves: Vec<usize>,
}

impl Default for GbdtGrid {
    fn default() -> Self {
        GbdtGrid {
            learning_rate: vec![0.01, 0.05],
            max_depth: vec![3, 5],
            n_estimators: vec![50, 100],
            min_child_weight: vec![1.0],
            min_child_samples: vec![1],
            subsample: vec![1.0],
            colsample_bytree: vec![1.0],
            reg_alpha: vec![0.0],
            reg_lambda: vec![1.0],
            num_leaves: vec![0],
        }
    }
}

impl GbdtGrid {
    pub fn enumerate(&self, seed: u64) -> Vec<GbdtParams> {
        let mut out = Vec::new();
        for &learning_rate in &self.learning_rate {
            for &max_depth in &self.max_depth {
                for &n_estimators in &self.n_estimators {
                    for &min_child_weight in &self.min_child_weight {
                        for &min_child_samples in &self.min_child_samples {
                            for &subsample in &self.subsample {
                                for &colsample_bytree in &self.colsample_bytree {
                                    for &reg_alpha in &self.reg_alpha {
                                        for &reg_lambda in &self.reg_lambda {
                                            for &num_leaves in &self.num_leaves {
                                                out.push(GbdtParams {
                                                    learning_rate,
                                                    max_depth,
                                                    n_estimators,
                                                    min_child_weight,
                                                    min_child_samples,
                                                    subsample,
                                                    colsample_bytree,
                                                    reg_alpha,
                                                    reg_lambda,
                                                    num_leaves,
                                                    seed,
                                                });
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElasticNetGrid {
    pub c: Vec<f64>,
    pub l1_ratio: Vec<f64>,
    pub tol: f64,
    pub max_epochs: usize,
}

impl Default for ElasticNetGrid {
    fn default() -> Self {
        ElasticNetGrid {
            c: vec![0.1, 0.5],
            l1_ratio: vec![0.5, 0.9],
            tol: 1e-6,
            max_epochs: 2000,
        }
    }
}

impl ElasticNetGrid {
    pub fn enumerate(&self, seed: u64) -> Vec<ElasticNetParams> {
        let mut out = Vec::new();
        for &c in &self.c {
            for &l1_ratio in &self.l1_ratio {
                out.push(ElasticNetParams {
                    c,
                    l1_ratio,
                    tol: self.tol,
                    max_epochs: self.max_epochs,
                    seed,
                });
            }
        }
        out
    }
}

/// Grid-selection tie rule: prefer the smaller model. Trees: fewer
/// estimators, then shallower, then fewer leaves. Elastic net: larger
/// penalty (smaller C), then sparser (larger l1_ratio).
pub fn model_size_key(params: &ModelParams) -> (u64, u64, u64) {
    match params {
        ModelParams::Gbdt(p) => {
            let leaves = if p.num_leaves == 0 {
                1u64 << p.max_depth.min(32)
            } else {
                p.num_leaves as u64
            };
            (p.n_estimators as u64, p.max_depth as u64, leaves)
        }
        ModelParams::ElasticNet(p) => (
            (p.c * 1e9) as u64,
            ((1.0 - p.l1_ratio) * 1e9) as u64,
            0,
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelChoice {
    /// gbdt | elasticnet
    pub family: String,
    pub gbdt: GbdtGrid,
    pub elasticnet: ElasticNetGrid,
}

impl Default for ModelChoice {
    fn default() -> Self {
        ModelChoice {
            family: "gbdt".to_string(),
            gbdt: GbdtGrid::default(),
            elasticnet: ElasticNetGrid::default(),
        }
    }
}

impl ModelChoice {
    pub fn family(&self) -> Result<ModelFamily> {
        ModelFamily::parse(&self.family)
            .ok_or_else(|| Error::Config(format!("unknown model family `{}`", self.family)))
    }

    pub fn candidates(&self, seed: u64) -> Result<Vec<ModelParams>> {
        Ok(match self.family()? {
            ModelFamily::Gbdt => self
                .gbdt
                .enumerate(seed)
                .into_iter()
                .map(ModelParams::Gbdt)
                .collect(),
            ModelFamily::ElasticNet => self
                .elasticnet
                .enumerate(seed)
                .into_iter()
                .map(ModelParams::ElasticNet)
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InclusionSettings {
    pub min_surveys: usize,
    pub min_train: usize,
    pub min_val: usize,
    pub min_test: usize,
    pub max_missingness: f64,
}

impl Default for InclusionSettings {
    fn default() -> Self {
        let c = InclusionCriteria::default();
        InclusionSettings {
            min_surveys: c.min_surveys,
            min_train: c.min_train,
            min_val: c.min_val,
            min_test: c.min_test,
            max_missingness: c.max_missingness,
        }
    }
}

impl InclusionSettings {
    pub fn to_criteria(&self, fractions: (f64, f64, f64)) -> InclusionCriteria {
        InclusionCriteria {
            min_surveys: self.min_surveys,
            min_train: self.min_train,
            min_val: self.min_val,
            min_test: self.min_test,
            max_missingness: self.max_missingness,
            fractions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioToggles {
    pub ablate: bool,
    pub logo: bool,
    pub logo_repeats: usize,
    pub logo_folds: usize,
    /// Staleness offsets in assessment periods (1 = 4 weeks, 2 = 8 weeks).
    pub stale: Vec<usize>,
    pub subgroups: bool,
    pub subgroup_min_n: usize,
}

impl Default for ScenarioToggles {
    fn default() -> Self {
        ScenarioToggles {
            ablate: false,
            logo: false,
            logo_repeats: 5,
            logo_folds: 5,
            stale: Vec::new(),
            subgroups: false,
            subgroup_min_n: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: InputSpec,
    pub label: LabelChoice,
    pub model: ModelChoice,
    pub seed: u64,
    pub bootstrap: BootstrapConfig,
    pub inclusion: InclusionSettings,
    pub split_fractions: (f64, f64, f64),
    pub session_gap_seconds: i64,
    pub vif_threshold: f64,
    pub scenarios: ScenarioToggles,
    /// Decision-threshold override for the worsening class (argmax when
    /// absent). Adjustable without retraining.
    pub worsening_threshold: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: InputSpec::Synth {
                synth: SynthConfig::default(),
            },
            label: LabelChoice::default(),
            model: ModelChoice::default(),
            seed: 42,
            bootstrap: BootstrapConfig::default(),
            inclusion: InclusionSettings::default(),
            split_fractions: (0.6, 0.2, 0.2),
            session_gap_seconds: 15,
            vif_threshold: 10.0,
            scenarios: ScenarioToggles::default(),
            worsening_threshold: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))
    }

    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }
}

//! In-repo learners: elastic-net multinomial logistic regression and
//! multiclass gradient-boosted trees, plus the four rule-based baselines
//! and model introspection (gain importance, odds ratios).

pub mod baselines;
pub mod elasticnet;
pub mod gbdt;

pub use baselines::{BaselineKind, BaselinePredictor, BaselineTrainRow};
pub use elasticnet::{
    fit_elasticnet, kkt_max_violation, odds_ratios, ElasticNetModel, ElasticNetParams,
};
pub use gbdt::{fit_gbdt, gain_importance, GbdtModel, GbdtParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::N_CLASSES;
use crate::util::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    ElasticNet,
    Gbdt,
}

impl ModelFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelFamily::ElasticNet => "elasticnet",
            ModelFamily::Gbdt => "gbdt",
        }
    }

    pub fn parse(s: &str) -> Option<ModelFamily> {
        match s {
            "elasticnet" | "elastic_net" => Some(ModelFamily::ElasticNet),
            "gbdt" => Some(ModelFamily::Gbdt),
            _ => None,
        }
    }
}

/// Balanced class weights: n_total / (n_classes * n_class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub weights: [f64; N_CLASSES],
}

impl ClassWeights {
    pub fn balanced(train_labels: &[usize]) -> Result<ClassWeights> {
        let mut counts = [0usize; N_CLASSES];
        for &y in train_labels {
            if y >= N_CLASSES {
                return Err(Error::Validation(format!("class index {y} out of range")));
            }
            counts[y] += 1;
        }
        let n_total = train_labels.len();
        if n_total == 0 {
            return Err(Error::Degenerate("no training labels".into()));
        }
        let mut weights = [0.0; N_CLASSES];
        for c in 0..N_CLASSES {
            if counts[c] == 0 {
                return Err(Error::Degenerate(format!(
                    "class {c} absent from training labels; balanced weights undefined"
                )));
            }
            weights[c] = n_total as f64 / (N_CLASSES as f64 * counts[c] as f64);
        }
        Ok(ClassWeights { weights })
    }

    pub fn uniform() -> ClassWeights {
        ClassWeights {
            weights: [1.0; N_CLASSES],
        }
    }

    /// Per-row sample weights.
    pub fn per_row(&self, labels: &[usize]) -> Vec<f64> {
        labels.iter().map(|&y| self.weights[y]).collect()
    }
}

/// Hyperparameters for either family, behind one fit surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelParams {
    ElasticNet(ElasticNetParams),
    Gbdt(GbdtParams),
}

impl ModelParams {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelParams::ElasticNet(_) => ModelFamily::ElasticNet,
            ModelParams::Gbdt(_) => ModelFamily::Gbdt,
        }
    }

    /// Replaces the fitting seed (used to derive per-fold seeds).
    pub fn with_seed(mut self, seed: u64) -> ModelParams {
        match &mut self {
            ModelParams::ElasticNet(p) => p.seed = seed,
            ModelParams::Gbdt(p) => p.seed = seed,
        }
        self
    }

    /// Fits on an already-scaled matrix. `standardized` records whether the
    /// scaler z-scored every column (elastic-net policy).
    pub fn fit(
        &self,
        x: &Matrix,
        y: &[usize],
        class_weights: &ClassWeights,
        columns: &[String],
        standardized: bool,
    ) -> Result<TrainedModel> {
        Ok(match self {
            ModelParams::ElasticNet(p) => TrainedModel::ElasticNet(fit_elasticnet(
                x,
                y,
                p,
                class_weights,
                columns,
                standardized,
            )?),
            ModelParams::Gbdt(p) => {
                TrainedModel::Gbdt(fit_gbdt(x, y, p, class_weights, columns)?)
            }
        })
    }
}

/// A fitted model of either family, behind one predict surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TrainedModel {
    ElasticNet(ElasticNetModel),
    Gbdt(GbdtModel),
}

impl TrainedModel {
    pub fn columns(&self) -> &[String] {
        match self {
            TrainedModel::ElasticNet(m) => &m.columns,
            TrainedModel::Gbdt(m) => &m.columns,
        }
    }

    pub fn family(&self) -> ModelFamily {
        match self {
            TrainedModel::ElasticNet(_) => ModelFamily::ElasticNet,
            TrainedModel::Gbdt(_) => ModelFamily::Gbdt,
        }
    }

    /// Three-class probabilities; rows sum to 1 within 1e-9. Deterministic.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        if x.n_cols() != self.columns().len() {
            return Err(Error::Validation(format!(
                "input has {} columns, model expects {}",
                x.n_cols(),
                self.columns().len()
            )));
        }
        if !x.all_finite() {
            return Err(Error::Validation("non-finite value in prediction input".into()));
        }
        Ok(match self {
            TrainedModel::ElasticNet(m) => m.predict_proba(x),
            TrainedModel::Gbdt(m) => m.predict_proba(x),
        })
    }
}

/// Versioned on-disk wrapper.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub model: TrainedModel,
}

impl ModelFile {
    pub const CURRENT_VERSION: u32 = 1;

    pub fn wrap(model: TrainedModel) -> ModelFile {
        ModelFile {
            format_version: Self::CURRENT_VERSION,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Validation(format!("model serialization failed: {e}")))
    }

    pub fn from_json(json: &str) -> Result<ModelFile> {
        let file: ModelFile = serde_json::from_str(json)
            .map_err(|e| Error::Validation(format!("model deserialization failed: {e}")))?;
        if file.format_version != Self::CURRENT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        Ok(file)
    }
}

/// Numerically stable softmax over one row of raw scores.
pub(crate) fn softmax3(scores: [f64; N_CLASSES]) -> [f64; N_CLASSES] {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut exp = [0.0; N_CLASSES];
    let mut sum = 0.0;
    for c in 0..N_CLASSES {
        exp[c] = (scores[c] - max).exp();
        sum += exp[c];
    }
    for e in exp.iter_mut() {
        *e /= sum;
    }
    exp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_weights_match_definition() {
        let y = vec![1, 1, 1, 1, 0, 2, 1, 1];
        let w = ClassWeights::balanced(&y).unwrap();
        assert!((w.weights[0] - 8.0 / 3.0).abs() < 1e-12);
        assert!((w.weights[1] - 8.0 / (3.0 * 6.0)).abs() < 1e-12);
        assert!((w.weights[2] - 8.0 / 3.0).abs() < 1e-12);
        assert!(ClassWeights::balanced(&[1, 1, 1]).is_err());
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax3([1.0, -2.0, 700.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[2] > 0.999);
    }
}

//! Percentile bootstrap over test observations.
//!
//! Each resample draws its indices from a generator seeded by
//! hash(seed, resample_id), so intervals are reproducible and independent
//! of thread scheduling. Resamples on which the metric is undefined (for
//! example a class vanished) are skipped and counted; more than 50%
//! degenerate resamples abort with guidance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{derive_seed, quantile_sorted};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_resamples: 1000,
            seed: 42,
        }
    }
}

/// Point estimate with a 95% percentile interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub point: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n_resamples: usize,
    pub n_degenerate: usize,
    pub seed: u64,
}

impl MetricResult {
    pub fn undefined(config: &BootstrapConfig) -> MetricResult {
        MetricResult {
            point: None,
            ci_low: None,
            ci_high: None,
            n_resamples: config.n_resamples,
            n_degenerate: 0,
            seed: config.seed,
        }
    }

    /// A point value with no interval (rule-based baseline rows).
    pub fn point_only(value: Option<f64>) -> MetricResult {
        MetricResult {
            point: value,
            ci_low: None,
            ci_high: None,
            n_resamples: 0,
            n_degenerate: 0,
            seed: 0,
        }
    }
}

fn resample_indices(n: usize, seed: u64, resample_id: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, resample_id));
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Bootstraps `metric` (a function of observation indices; `None` means
/// undefined on that resample) over `n_obs` observations.
pub fn bootstrap_ci<F>(metric: F, n_obs: usize, config: &BootstrapConfig) -> Result<MetricResult>
where
    F: Fn(&[usize]) -> Option<f64> + Sync,
{
    if n_obs < 2 {
        return Err(Error::Degenerate(format!(
            "bootstrap needs at least 2 observations, got {n_obs}"
        )));
    }
    let identity: Vec<usize> = (0..n_obs).collect();
    let point = metric(&identity);

    let values: Vec<Option<f64>> = (0..config.n_resamples as u64)
        .into_par_iter()
        .map(|b| metric(&resample_indices(n_obs, config.seed, b)))
        .collect();
    let mut kept: Vec<f64> = values.iter().filter_map(|v| *v).collect();
    let n_degenerate = config.n_resamples - kept.len();
    if n_degenerate * 2 > config.n_resamples {
        return Err(Error::Degenerate(format!(
            "{n_degenerate} of {} bootstrap resamples were degenerate (metric undefined); \
             the test set is too small or too imbalanced for stable intervals — use more \
             observations or fewer strata",
            config.n_resamples
        )));
    }
    kept.sort_by(|a, b| a.partial_cmp(b).expect("finite metric values"));
    let (ci_low, ci_high) = if kept.is_empty() {
        (None, None)
    } else {
        (
            Some(quantile_sorted(&kept, 0.025)),
            Some(quantile_sorted(&kept, 0.975)),
        )
    };
    if let (Some(lo), Some(hi)) = (ci_low, ci_high) {
        debug_assert!(lo <= hi);
    }
    Ok(MetricResult {
        point,
        ci_low,
        ci_high,
        n_resamples: config.n_resamples,
        n_degenerate,
        seed: config.seed,
    })
}

/// Paired bootstrap for a metric difference: both conditions are evaluated
/// on the same resampled indices. `p_leq_zero` is the fraction of valid
/// resamples where the difference (b - a) fails to exceed zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedBootstrap {
    pub delta_point: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub p_leq_zero: Option<f64>,
    pub n_resamples: usize,
    pub n_degenerate: usize,
}

pub fn paired_delta_bootstrap<FA, FB>(
    metric_a: FA,
    metric_b: FB,
    n_obs: usize,
    config: &BootstrapConfig,
) -> Result<PairedBootstrap>
where
    FA: Fn(&[usize]) -> Option<f64> + Sync,
    FB: Fn(&[usize]) -> Option<f64> + Sync,
{
    if n_obs < 2 {
        return Err(Error::Degenerate(format!(
            "paired bootstrap needs at least 2 observations, got {n_obs}"
        )));
    }
    let identity: Vec<usize> = (0..n_obs).collect();
    let delta_point = match (metric_a(&identity), metric_b(&identity)) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    };

    let deltas: Vec<Option<f64>> = (0..config.n_resamples as u64)
        .into_par_iter()
        .map(|bi| {
            let idx = resample_indices(n_obs, config.seed, bi);
            match (metric_a(&idx), metric_b(&idx)) {
                (Some(a), Some(b)) => Some(b - a),
                _ => None,
            }
        })
        .collect();
    let mut kept: Vec<f64> = deltas.iter().filter_map(|v| *v).collect();
    let n_degenerate = config.n_resamples - kept.len();
    if n_degenerate * 2 > config.n_resamples {
        return Err(Error::Degenerate(format!(
            "{n_degenerate} of {} paired resamples were degenerate; test split cannot \
             support this comparison",
            config.n_resamples
        )));
    }
    let p_leq_zero = if kept.is_empty() {
        None
    } else {
        Some(kept.iter().filter(|d| **d <= 0.0).count() as f64 / kept.len() as f64)
    };
    kept.sort_by(|a, b| a.partial_cmp(b).expect("finite deltas"));
    let (ci_low, ci_high) = if kept.is_empty() {
        (None, None)
    } else {
        (
            Some(quantile_sorted(&kept, 0.025)),
            Some(quantile_sorted(&kept, 0.975)),
        )
    };
    Ok(PairedBootstrap {
        delta_point,
        ci_low,
        ci_high,
        p_leq_zero,
        n_resamples: config.n_resamples,
        n_degenerate,
    })
}

//! Elastic-net multinomial logistic regression.
//!
//! Minimizes
//!
//! ```text
//!   sum_i w_i * CE(softmax(W x_i + b), y_i)
//!     + (1/C) * [ l1_ratio * ||W||_1  +  (1 - l1_ratio)/2 * ||W||_2^2 ]
//! ```
//!
//! by accelerated proximal gradient (FISTA) with a power-iterated Lipschitz
//! estimate, sufficient-decrease backtracking and objective restarts.
//! Intercepts are unpenalized. The solver is full-batch and deterministic:
//! the `seed` parameter exists for interface stability but no randomness is
//! consumed.

use serde::{Deserialize, Serialize};

use super::{softmax3, ClassWeights};
use crate::error::{Error, Result};
use crate::labels::N_CLASSES;
use crate::util::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetParams {
    /// Inverse regularization strength.
    pub c: f64,
    pub l1_ratio: f64,
    pub tol: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for ElasticNetParams {
    fn default() -> Self {
        ElasticNetParams {
            c: 0.1,
            l1_ratio: 0.9,
            tol: 1e-6,
            max_epochs: 2000,
            seed: 42,
        }
    }
}

impl ElasticNetParams {
    fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::Config(format!("C must be positive, got {}", self.c)));
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::Config(format!(
                "l1_ratio must lie in [0,1], got {}",
                self.l1_ratio
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetModel {
    pub columns: Vec<String>,
    /// Row-major (class, feature) coefficients, 3 x p.
    pub coefficients: Vec<f64>,
    pub intercepts: [f64; N_CLASSES],
    pub c: f64,
    pub l1_ratio: f64,
    /// Whether the training matrix was fully z-score standardized;
    /// odds-ratio reporting refuses to run otherwise.
    pub standardized: bool,
    pub converged: bool,
    pub epochs_run: usize,
    /// Objective value per epoch.
    pub trace: Vec<f64>,
}

impl ElasticNetModel {
    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn coefficient(&self, class: usize, feature: usize) -> f64 {
        self.coefficients[class * self.n_features() + feature]
    }

    pub fn predict_proba(&self, x: &Matrix) -> Matrix {
        let p = self.n_features();
        let mut out = Matrix::zeros(x.n_rows(), N_CLASSES);
        for r in 0..x.n_rows() {
            let row = x.row(r);
            let mut scores = [0.0; N_CLASSES];
            for (c, score) in scores.iter_mut().enumerate() {
                let coef = &self.coefficients[c * p..(c + 1) * p];
                *score = self.intercepts[c]
                    + row.iter().zip(coef.iter()).map(|(a, b)| a * b).sum::<f64>();
            }
            let probs = softmax3(scores);
            for c in 0..N_CLASSES {
                out.set(r, c, probs[c]);
            }
        }
        out
    }
}

/// Smooth part of the objective (weighted cross-entropy + ridge) and its
/// gradient with respect to coefficients and intercepts.
fn smooth_value_and_grad(
    x: &Matrix,
    y: &[usize],
    weights: &[f64],
    coef: &[f64],
    intercepts: &[f64; N_CLASSES],
    ridge: f64,
) -> (f64, Vec<f64>, [f64; N_CLASSES]) {
    let p = x.n_cols();
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; N_CLASSES * p];
    let mut grad_b = [0.0; N_CLASSES];
    for i in 0..x.n_rows() {
        let row = x.row(i);
        let mut scores = [0.0; N_CLASSES];
        for (c, score) in scores.iter_mut().enumerate() {
            let w_c = &coef[c * p..(c + 1) * p];
            *score = intercepts[c] + row.iter().zip(w_c.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
        let probs = softmax3(scores);
        loss -= weights[i] * probs[y[i]].max(1e-300).ln();
        for c in 0..N_CLASSES {
            let r = weights[i] * (probs[c] - if y[i] == c { 1.0 } else { 0.0 });
            grad_b[c] += r;
            let g_c = &mut grad_w[c * p..(c + 1) * p];
            for (g, v) in g_c.iter_mut().zip(row.iter()) {
                *g += r * v;
            }
        }
    }
    if ridge > 0.0 {
        for (g, w) in grad_w.iter_mut().zip(coef.iter()) {
            loss += 0.5 * ridge * w * w;
            *g += ridge * w;
        }
    }
    (loss, grad_w, grad_b)
}

fn l1_norm(coef: &[f64]) -> f64 {
    coef.iter().map(|w| w.abs()).sum()
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Largest eigenvalue of X~' X~ where X~ has rows sqrt(w_i) * [x_i, 1],
/// by deterministic power iteration.
fn weighted_gram_spectral_norm(x: &Matrix, weights: &[f64]) -> f64 {
    let p = x.n_cols() + 1;
    let mut v = vec![1.0 / (p as f64).sqrt(); p];
    let mut lambda = 0.0;
    for _ in 0..60 {
        // u = X~ v ; z = X~' u
        let mut z = vec![0.0; p];
        for i in 0..x.n_rows() {
            let row = x.row(i);
            let mut u = v[p - 1]; // intercept column
            for (a, b) in row.iter().zip(v.iter()) {
                u += a * b;
            }
            u *= weights[i];
            for (zj, a) in z.iter_mut().zip(row.iter()) {
                *zj += u * a;
            }
            z[p - 1] += u;
        }
        let norm = z.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm <= 0.0 {
            return 0.0;
        }
        lambda = norm;
        for (vj, zj) in v.iter_mut().zip(z.iter()) {
            *vj = zj / norm;
        }
    }
    lambda
}

/// Fits the model. `x` must already be standardized (the elastic-net scaler
/// policy z-scores every column); `standardized` records that fact for
/// odds-ratio reporting.
pub fn fit_elasticnet(
    x: &Matrix,
    y: &[usize],
    params: &ElasticNetParams,
    class_weights: &ClassWeights,
    columns: &[String],
    standardized: bool,
) -> Result<ElasticNetModel> {
    params.validate()?;
    if x.n_rows() != y.len() {
        return Err(Error::Validation(format!(
            "{} rows vs {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    if x.n_rows() == 0 {
        return Err(Error::Degenerate("cannot fit on zero rows".into()));
    }
    if columns.len() != x.n_cols() {
        return Err(Error::Validation("column names do not match matrix width".into()));
    }
    if !x.all_finite() {
        return Err(Error::Validation("non-finite value in training matrix".into()));
    }
    let distinct: std::collections::BTreeSet<usize> = y.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::Degenerate(
            "training labels contain a single class; nothing to discriminate".into(),
        ));
    }
    if distinct.iter().any(|&c| c >= N_CLASSES) {
        return Err(Error::Validation("class index out of range".into()));
    }

    let p = x.n_cols();
    let weights = class_weights.per_row(y);
    let ridge = (1.0 - params.l1_ratio) / params.c;
    let lambda1 = params.l1_ratio / params.c;

    let mut lipschitz = 0.5 * weighted_gram_spectral_norm(x, &weights) + ridge;
    if !lipschitz.is_finite() || lipschitz <= 0.0 {
        lipschitz = 1.0;
    }
    // Headroom over the power-iteration estimate; backtracking doubles
    // further if the sufficient-decrease check ever fails.
    lipschitz *= 1.05;

    let objective = |coef: &[f64], b: &[f64; N_CLASSES]| -> f64 {
        let (f, _, _) = smooth_value_and_grad(x, y, &weights, coef, b, ridge);
        f + lambda1 * l1_norm(coef)
    };

    let mut coef = vec![0.0; N_CLASSES * p];
    let mut intercepts = [0.0; N_CLASSES];
    let mut coef_prev = coef.clone();
    let mut intercepts_prev = intercepts;
    let mut extrap_coef = coef.clone();
    let mut extrap_b = intercepts;
    let mut momentum = 1.0f64;
    let mut obj_prev = objective(&coef, &intercepts);

    let mut trace = Vec::with_capacity(params.max_epochs.min(4096));
    let mut converged = false;
    let mut epochs_run = 0;

    for epoch in 0..params.max_epochs {
        epochs_run = epoch + 1;
        let (f_v, grad_w, grad_b) =
            smooth_value_and_grad(x, y, &weights, &extrap_coef, &extrap_b, ridge);

        // Proximal step with sufficient-decrease backtracking on L.
        let (mut new_coef, mut new_b);
        loop {
            let step = 1.0 / lipschitz;
            new_coef = extrap_coef.clone();
            for (w, g) in new_coef.iter_mut().zip(grad_w.iter()) {
                *w = soft_threshold(*w - step * g, step * lambda1);
            }
            new_b = extrap_b;
            for (b, g) in new_b.iter_mut().zip(grad_b.iter()) {
                *b -= step * g;
            }
            let (f_new, _, _) = smooth_value_and_grad(x, y, &weights, &new_coef, &new_b, ridge);
            let mut quad = f_v;
            let mut sq = 0.0;
            for ((w_new, w_old), g) in new_coef.iter().zip(extrap_coef.iter()).zip(grad_w.iter()) {
                let d = w_new - w_old;
                quad += g * d;
                sq += d * d;
            }
            for c in 0..N_CLASSES {
                let d = new_b[c] - extrap_b[c];
                quad += grad_b[c] * d;
                sq += d * d;
            }
            quad += 0.5 * lipschitz * sq;
            if f_new <= quad + 1e-12 * quad.abs().max(1.0) || lipschitz > 1e18 {
                break;
            }
            lipschitz *= 2.0;
        }

        // Convergence on maximum parameter change.
        let mut max_change = 0.0f64;
        for (a, b) in new_coef.iter().zip(coef.iter()) {
            max_change = max_change.max((a - b).abs());
        }
        for c in 0..N_CLASSES {
            max_change = max_change.max((new_b[c] - intercepts[c]).abs());
        }

        let obj = objective(&new_coef, &new_b);
        trace.push(obj);

        // FISTA momentum with restart when the objective rises.
        if obj > obj_prev {
            momentum = 1.0;
            extrap_coef.copy_from_slice(&new_coef);
            extrap_b = new_b;
        } else {
            let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next_momentum;
            for j in 0..new_coef.len() {
                extrap_coef[j] = new_coef[j] + beta * (new_coef[j] - coef_prev[j]);
            }
            for c in 0..N_CLASSES {
                extrap_b[c] = new_b[c] + beta * (new_b[c] - intercepts_prev[c]);
            }
            momentum = next_momentum;
        }

        coef_prev.copy_from_slice(&coef);
        intercepts_prev = intercepts;
        coef = new_coef;
        intercepts = new_b;
        obj_prev = obj.min(obj_prev);

        if max_change < params.tol {
            converged = true;
            break;
        }
    }

    Ok(ElasticNetModel {
        columns: columns.to_vec(),
        coefficients: coef,
        intercepts,
        c: params.c,
        l1_ratio: params.l1_ratio,
        standardized,
        converged,
        epochs_run,
        trace,
    })
}

/// Maximum KKT violation at the fitted point: zero coefficients need
/// |smooth gradient| <= l1 weight, nonzero ones need
/// gradient + l1 weight * sign = 0, and intercepts are stationary.
pub fn kkt_max_violation(
    model: &ElasticNetModel,
    x: &Matrix,
    y: &[usize],
    class_weights: &ClassWeights,
) -> f64 {
    let weights = class_weights.per_row(y);
    let ridge = (1.0 - model.l1_ratio) / model.c;
    let lambda1 = model.l1_ratio / model.c;
    let (_, grad_w, grad_b) = smooth_value_and_grad(
        x,
        y,
        &weights,
        &model.coefficients,
        &model.intercepts,
        ridge,
    );
    let mut worst = 0.0f64;
    for (w, g) in model.coefficients.iter().zip(grad_w.iter()) {
        let v = if *w == 0.0 {
            (g.abs() - lambda1).max(0.0)
        } else {
            (g + lambda1 * w.signum()).abs()
        };
        worst = worst.max(v);
    }
    for g in grad_b {
        worst = worst.max(g.abs());
    }
    worst
}

/// Worsening-class odds ratios: exp of the standardized coefficients,
/// ordered by |log OR| descending. Refuses models fit on non-standardized
/// features, where the exponent has no per-SD interpretation.
pub fn odds_ratios(model: &ElasticNetModel, class: usize) -> Result<Vec<(String, f64)>> {
    if !model.standardized {
        return Err(Error::Validation(
            "odds ratios require a model fit on fully standardized features".into(),
        ));
    }
    if class >= N_CLASSES {
        return Err(Error::Validation(format!("class index {class} out of range")));
    }
    let mut out: Vec<(String, f64)> = model
        .columns
        .iter()
        .enumerate()
        .map(|(j, name)| (name.clone(), model.coefficient(class, j).exp()))
        .collect();
    out.sort_by(|a, b| {
        let ka = a.1.ln().abs();
        let kb = b.1.ln().abs();
        kb.partial_cmp(&ka)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("f{i}")).collect()
    }

    /// Three well-separated Gaussian blobs in 2D.
    fn blobs(n_per: usize, spread: f64, seed: u64) -> (Matrix, Vec<usize>) {
        let centers = [(-6.0, 0.0), (0.0, 6.0), (6.0, -2.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (c, (cx, cy)) in centers.iter().enumerate() {
            for _ in 0..n_per {
                rows.push(vec![
                    cx + spread * (rng.random::<f64>() - 0.5),
                    cy + spread * (rng.random::<f64>() - 0.5),
                ]);
                y.push(c);
            }
        }
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn extreme_penalty_shrinks_to_weighted_prior() {
        let (x, y) = blobs(30, 1.0, 3);
        let params = ElasticNetParams {
            c: 1e-9,
            l1_ratio: 1.0,
            tol: 1e-10,
            max_epochs: 5000,
            seed: 0,
        };
        let cw = ClassWeights::balanced(&y).unwrap();
        let model = fit_elasticnet(&x, &y, &params, &cw, &names(2), true).unwrap();
        assert!(model.coefficients.iter().all(|w| *w == 0.0));
        // Balanced weights make the weighted prior uniform.
        let probs = model.predict_proba(&x);
        for c in 0..3 {
            assert!((probs.get(0, c) - 1.0 / 3.0).abs() < 1e-3, "{}", probs.get(0, c));
        }
    }

    #[test]
    fn separable_blobs_reach_high_train_accuracy() {
        let (x, y) = blobs(40, 1.0, 7);
        let params = ElasticNetParams {
            c: 1.0,
            l1_ratio: 0.5,
            tol: 1e-8,
            max_epochs: 4000,
            seed: 0,
        };
        let cw = ClassWeights::balanced(&y).unwrap();
        let model = fit_elasticnet(&x, &y, &params, &cw, &names(2), true).unwrap();
        let probs = model.predict_proba(&x);
        let mut per_class_hits = [0usize; 3];
        let mut per_class_n = [0usize; 3];
        for i in 0..y.len() {
            let pred = (0..3)
                .max_by(|&a, &b| probs.get(i, a).partial_cmp(&probs.get(i, b)).unwrap())
                .unwrap();
            per_class_n[y[i]] += 1;
            if pred == y[i] {
                per_class_hits[y[i]] += 1;
            }
        }
        let bacc: f64 = (0..3)
            .map(|c| per_class_hits[c] as f64 / per_class_n[c] as f64)
            .sum::<f64>()
            / 3.0;
        assert!(bacc >= 0.95, "balanced accuracy {bacc}");
    }

    #[test]
    fn smooth_gradient_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (x, y) = blobs(10, 3.0, 5);
        let cw = ClassWeights::balanced(&y).unwrap();
        let weights = cw.per_row(&y);
        let ridge = 0.7;
        let p = x.n_cols();
        for _ in 0..10 {
            let coef: Vec<f64> = (0..3 * p).map(|_| rng.random::<f64>() - 0.5).collect();
            let b = [
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            ];
            let (_, grad_w, grad_b) = smooth_value_and_grad(&x, &y, &weights, &coef, &b, ridge);
            let eps = 1e-6;
            for idx in 0..coef.len() {
                let mut plus = coef.clone();
                plus[idx] += eps;
                let mut minus = coef.clone();
                minus[idx] -= eps;
                let (fp, _, _) = smooth_value_and_grad(&x, &y, &weights, &plus, &b, ridge);
                let (fm, _, _) = smooth_value_and_grad(&x, &y, &weights, &minus, &b, ridge);
                let fd = (fp - fm) / (2.0 * eps);
                let rel = (grad_w[idx] - fd).abs() / grad_w[idx].abs().max(fd.abs()).max(1e-8);
                assert!(rel <= 1e-4, "coef {idx}: grad {} vs fd {fd}", grad_w[idx]);
            }
            for c in 0..3 {
                let mut bp = b;
                bp[c] += eps;
                let mut bm = b;
                bm[c] -= eps;
                let (fp, _, _) = smooth_value_and_grad(&x, &y, &weights, &coef, &bp, ridge);
                let (fm, _, _) = smooth_value_and_grad(&x, &y, &weights, &coef, &bm, ridge);
                let fd = (fp - fm) / (2.0 * eps);
                let rel = (grad_b[c] - fd).abs() / grad_b[c].abs().max(fd.abs()).max(1e-8);
                assert!(rel <= 1e-4);
            }
        }
    }

    #[test]
    fn kkt_holds_at_convergence() {
        for seed in 0..10u64 {
            let (x, y) = blobs(25, 4.0, 100 + seed);
            let params = ElasticNetParams {
                c: 0.5,
                l1_ratio: 0.6,
                tol: 1e-10,
                max_epochs: 20_000,
                seed,
            };
            let cw = ClassWeights::balanced(&y).unwrap();
            let model = fit_elasticnet(&x, &y, &params, &cw, &names(2), true).unwrap();
            assert!(model.converged, "seed {seed} did not converge");
            let viol = kkt_max_violation(&model, &x, &y, &cw);
            assert!(viol <= 1e-4, "seed {seed}: KKT violation {viol}");
        }
    }

    #[test]
    fn doubling_weights_with_compensating_c_keeps_decisions() {
        let (x, y) = blobs(30, 5.0, 21);
        let cw = ClassWeights::balanced(&y).unwrap();
        let doubled = ClassWeights {
            weights: [
                cw.weights[0] * 2.0,
                cw.weights[1] * 2.0,
                cw.weights[2] * 2.0,
            ],
        };
        let base = fit_elasticnet(
            &x,
            &y,
            &ElasticNetParams {
                c: 0.8,
                l1_ratio: 0.5,
                tol: 1e-9,
                max_epochs: 8000,
                seed: 0,
            },
            &cw,
            &names(2),
            true,
        )
        .unwrap();
        // Doubling all sample weights scales the data term by 2; halving C
        // doubles the penalty, so the whole objective scales by 2 and the
        // argmin is unchanged.
        let comp = fit_elasticnet(
            &x,
            &y,
            &ElasticNetParams {
                c: 0.4,
                l1_ratio: 0.5,
                tol: 1e-9,
                max_epochs: 8000,
                seed: 0,
            },
            &doubled,
            &names(2),
            true,
        )
        .unwrap();
        let pa = base.predict_proba(&x);
        let pb = comp.predict_proba(&x);
        for i in 0..x.n_rows() {
            let am = (0..3)
                .max_by(|&a, &b| pa.get(i, a).partial_cmp(&pa.get(i, b)).unwrap())
                .unwrap();
            let bm = (0..3)
                .max_by(|&a, &b| pb.get(i, a).partial_cmp(&pb.get(i, b)).unwrap())
                .unwrap();
            assert_eq!(am, bm, "row {i} decision changed");
        }
        for (a, b) in base.coefficients.iter().zip(comp.coefficients.iter()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn degenerate_and_invalid_inputs_error() {
        let (x, _) = blobs(5, 1.0, 1);
        let y_single = vec![1usize; 15];
        let cw = ClassWeights::uniform();
        assert!(fit_elasticnet(
            &x,
            &y_single,
            &ElasticNetParams::default(),
            &cw,
            &names(2),
            true
        )
        .is_err());

        let bad = Matrix::from_rows(&[vec![f64::NAN, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(fit_elasticnet(
            &bad,
            &[0, 1, 2],
            &ElasticNetParams::default(),
            &cw,
            &names(2),
            true
        )
        .is_err());
    }

    #[test]
    fn odds_ratio_identities() {
        let model = ElasticNetModel {
            columns: names(2),
            coefficients: vec![0.0, 0.0, 0.0, 0.0, 2.0f64.ln(), 0.0],
            intercepts: [0.0; 3],
            c: 1.0,
            l1_ratio: 0.5,
            standardized: true,
            converged: true,
            epochs_run: 1,
            trace: vec![],
        };
        let ors = odds_ratios(&model, 2).unwrap();
        assert_eq!(ors[0].0, "f0");
        assert!((ors[0].1 - 2.0).abs() < 1e-12);
        assert!((ors[1].1 - 1.0).abs() < 1e-12);

        let raw = ElasticNetModel {
            standardized: false,
            ..model
        };
        assert!(odds_ratios(&raw, 2).is_err());
    }

    #[test]
    fn planted_positive_predictor_ranks_first() {
        // Feature 0 strongly raises class-2 odds; feature 1 is noise.
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..400 {
            let signal: f64 = rng.random::<f64>() * 2.0 - 1.0;
            let noise: f64 = rng.random::<f64>() * 2.0 - 1.0;
            let score = 3.0 * signal;
            let class = if score + 0.3 * (rng.random::<f64>() - 0.5) > 0.8 {
                2
            } else if score < -0.8 {
                0
            } else {
                1
            };
            rows.push(vec![signal, noise]);
            y.push(class);
        }
        let x = Matrix::from_rows(&rows);
        let cw = ClassWeights::balanced(&y).unwrap();
        let model = fit_elasticnet(
            &x,
            &y,
            &ElasticNetParams {
                c: 1.0,
                l1_ratio: 0.5,
                tol: 1e-8,
                max_epochs: 5000,
                seed: 0,
            },
            &cw,
            &names(2),
            true,
        )
        .unwrap();
        let ors = odds_ratios(&model, 2).unwrap();
        assert_eq!(ors[0].0, "f0");
        assert!(ors[0].1 > 1.0);
    }
}

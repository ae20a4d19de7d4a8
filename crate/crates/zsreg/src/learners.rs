//! Base learners shared by every zero-shot method: ridge regression solved
//! through centered normal equations, an epsilon-insensitive linear
//! regressor solved by a deterministic smoothed full-batch descent, and
//! grid-search hyperparameter tuning over seeded inner folds.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_spd;

/// A fitted linear model: one weight per feature plus an intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Array1<f64>,
    pub intercept: f64,
}

impl LinearModel {
    /// Model that ignores the features and predicts a constant.
    pub fn constant(n_features: usize, value: f64) -> Self {
        LinearModel {
            weights: Array1::zeros(n_features),
            intercept: value,
        }
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn predict_one(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.weights.dot(&x) + self.intercept
    }

    pub fn predict(&self, x: &Array2<f64>) -> Array1<f64> {
        x.dot(&self.weights) + self.intercept
    }

    /// The parameter vector in the fixed ordering `(w_1, …, w_d, intercept)`.
    pub fn parameter_vector(&self) -> Array1<f64> {
        let mut v = Array1::zeros(self.weights.len() + 1);
        v.slice_mut(ndarray::s![..self.weights.len()])
            .assign(&self.weights);
        v[self.weights.len()] = self.intercept;
        v
    }

    pub fn is_finite(&self) -> bool {
        self.intercept.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

/// Which base-learner family a `RegressorSpec` configures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerFamily {
    Ridge,
    EpsilonInsensitive,
}

impl LearnerFamily {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerFamily::Ridge => "ridge",
            LearnerFamily::EpsilonInsensitive => "eps_insensitive",
        }
    }
}

/// Base-learner configuration: family, regularization grid and the knobs of
/// the tuning procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub family: LearnerFamily,
    /// Regularization values tried by the grid search (`alpha` for ridge,
    /// `c` for the epsilon-insensitive learner). Must be positive.
    pub grid: Vec<f64>,
    pub inner_folds: usize,
    pub epsilon: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Opt-in z-scoring of features inside the tuning path. Off by default;
    /// meant for real CSV data with heterogeneous scales.
    pub standardize: bool,
}

impl RegressorSpec {
    /// Ridge with the default grid `{e^-3, …, e^3}`.
    pub fn ridge() -> Self {
        RegressorSpec {
            family: LearnerFamily::Ridge,
            grid: (-3..=3).map(|k| (k as f64).exp()).collect(),
            inner_folds: 3,
            epsilon: 0.0,
            max_iter: 10_000,
            tol: 1e-6,
            standardize: false,
        }
    }

    /// Epsilon-insensitive linear regression with the default grid
    /// `{10^-3, …, 10^3}`.
    pub fn eps_insensitive() -> Self {
        RegressorSpec {
            family: LearnerFamily::EpsilonInsensitive,
            grid: (-3..=3).map(|k| 10f64.powi(k)).collect(),
            inner_folds: 3,
            epsilon: 0.0,
            max_iter: 10_000,
            tol: 1e-6,
            standardize: false,
        }
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.grid = grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::invalid("RegressorSpec", "empty regularization grid"));
        }
        if self.grid.iter().any(|g| !g.is_finite() || *g <= 0.0) {
            return Err(Error::invalid(
                "RegressorSpec",
                "grid values must be finite and positive",
            ));
        }
        if self.inner_folds == 0 {
            return Err(Error::invalid("RegressorSpec", "inner_folds must be >= 1"));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::invalid("RegressorSpec", "epsilon must be >= 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("RegressorSpec", "max_iter must be >= 1"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::invalid("RegressorSpec", "tol must be > 0"));
        }
        Ok(())
    }
}

fn check_xy(x: &Array2<f64>, y: &Array1<f64>, context: &'static str) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context,
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::invalid(context, "need at least one row"));
    }
    Ok(())
}

/// Ridge regression with an unpenalized intercept, solved by centering the
/// data and applying the normal equations `(Xc^T Xc + alpha I) w = Xc^T yc`.
pub fn fit_ridge(x: &Array2<f64>, y: &Array1<f64>, alpha: f64) -> Result<LinearModel> {
    fit_ridge_opts(x, y, alpha, true)
}

/// Ridge with an explicit choice of whether to fit the intercept. With
/// `fit_intercept = false` the uncentered system is solved and the intercept
/// is fixed at zero.
pub fn fit_ridge_opts(
    x: &Array2<f64>,
    y: &Array1<f64>,
    alpha: f64,
    fit_intercept: bool,
) -> Result<LinearModel> {
    check_xy(x, y, "fit_ridge")?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid("fit_ridge", "alpha must be finite and > 0"));
    }
    let d = x.ncols();

    let (xc, yc, x_mean, y_mean);
    if fit_intercept {
        x_mean = x.mean_axis(Axis(0)).expect("nonempty");
        y_mean = y.mean().expect("nonempty");
        xc = x - &x_mean;
        yc = y - y_mean;
    } else {
        x_mean = Array1::zeros(d);
        y_mean = 0.0;
        xc = x.clone();
        yc = y.clone();
    }

    let mut gram = xc.t().dot(&xc);
    for i in 0..d {
        gram[[i, i]] += alpha;
    }
    let weights = solve_spd(&gram, &xc.t().dot(&yc))?;
    let intercept = y_mean - x_mean.dot(&weights);
    let model = LinearModel { weights, intercept };
    debug_assert!(model.is_finite());
    Ok(model)
}

/// Result of an epsilon-insensitive fit; `converged` is false when the
/// iteration budget ran out before the objective stabilized.
#[derive(Debug, Clone)]
pub struct EpsFit {
    pub model: LinearModel,
    pub converged: bool,
}

/// Epsilon-insensitive linear regression:
/// minimize `0.5 ||w||^2 + c * sum_i max(0, |x_i . w + b - y_i| - epsilon)`.
///
/// Solved by full-batch gradient descent with backtracking on a smoothed
/// hinge, tightening the smoothing over a fixed continuation schedule. The
/// whole procedure is deterministic.
pub fn fit_eps_insensitive(
    x: &Array2<f64>,
    y: &Array1<f64>,
    c: f64,
    spec: &RegressorSpec,
) -> Result<EpsFit> {
    fit_eps_insensitive_opts(x, y, c, spec, true)
}

pub fn fit_eps_insensitive_opts(
    x: &Array2<f64>,
    y: &Array1<f64>,
    c: f64,
    spec: &RegressorSpec,
    fit_intercept: bool,
) -> Result<EpsFit> {
    check_xy(x, y, "fit_eps_insensitive")?;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(
            "fit_eps_insensitive",
            "c must be finite and > 0",
        ));
    }
    spec.validate()?;
    let eps = spec.epsilon;
    let d = x.ncols();

    let objective = |w: &Array1<f64>, b: f64| -> f64 {
        let r = x.dot(w) + b - y;
        0.5 * w.dot(w) + c * r.iter().map(|r| (r.abs() - eps).max(0.0)).sum::<f64>()
    };

    // Smoothed hinge h_mu(z): 0 for z <= 0, z^2/(4 mu) below 2 mu, z - mu
    // beyond; its derivative stays in [0, 1].
    let smoothed = |w: &Array1<f64>, b: f64, mu: f64| -> (f64, Array1<f64>, f64) {
        let r = x.dot(w) + b - y;
        let mut value = 0.5 * w.dot(w);
        let mut factors = Array1::zeros(r.len());
        for (i, ri) in r.iter().enumerate() {
            let z = ri.abs() - eps;
            if z <= 0.0 {
                continue;
            }
            let (h, dh) = if z < 2.0 * mu {
                (z * z / (4.0 * mu), z / (2.0 * mu))
            } else {
                (z - mu, 1.0)
            };
            value += c * h;
            factors[i] = c * dh * ri.signum();
        }
        let grad_w = x.t().dot(&factors) + w;
        let grad_b = if fit_intercept { factors.sum() } else { 0.0 };
        (value, grad_w, grad_b)
    };

    let mut w = Array1::zeros(d);
    let mut b = if fit_intercept {
        y.mean().expect("nonempty")
    } else {
        0.0
    };
    let mut best = (objective(&w, b), w.clone(), b);

    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let stages: Vec<f64> = (1..=6).map(|k| scale * 10f64.powi(-k)).collect();
    let budget = (spec.max_iter / stages.len()).max(1);
    let mut converged = true;

    for (si, &mu) in stages.iter().enumerate() {
        let last_stage = si + 1 == stages.len();
        let (mut value, mut grad_w, mut grad_b) = smoothed(&w, b, mu);
        let mut step = 1.0 / (1.0 + c);
        let mut stage_converged = false;
        for _ in 0..budget {
            let grad_sq = grad_w.dot(&grad_w) + grad_b * grad_b;
            if grad_sq <= f64::EPSILON {
                stage_converged = true;
                break;
            }
            // Backtracking line search on the smoothed objective.
            step *= 2.0;
            let mut accepted = None;
            for _ in 0..60 {
                let w_next = &w - &(step * &grad_w);
                let b_next = b - step * grad_b;
                let (v_next, g_w, g_b) = smoothed(&w_next, b_next, mu);
                if v_next <= value - 0.5 * step * grad_sq {
                    accepted = Some((w_next, b_next, v_next, g_w, g_b));
                    break;
                }
                step *= 0.5;
            }
            let Some((w_next, b_next, v_next, g_w, g_b)) = accepted else {
                stage_converged = true;
                break;
            };
            let decrease = value - v_next;
            w = w_next;
            b = b_next;
            value = v_next;
            grad_w = g_w;
            grad_b = g_b;
            let true_value = objective(&w, b);
            if true_value < best.0 {
                best = (true_value, w.clone(), b);
            }
            if decrease < spec.tol {
                stage_converged = true;
                break;
            }
        }
        if last_stage && !stage_converged {
            converged = false;
        }
    }

    let model = LinearModel {
        weights: best.1,
        intercept: best.2,
    };
    Ok(EpsFit { model, converged })
}

/// How grid search treats the intercept of the candidate fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterceptMode {
    /// Always fit an unpenalized intercept.
    Fit,
    /// Never fit an intercept (the model is a pure linear map).
    Omit,
    /// Try both variants per grid value and pick by inner-fold MSE.
    Select,
}

/// Outcome of `grid_search_fit`: the refitted model plus tuning metadata.
#[derive(Debug, Clone)]
pub struct GridSearchFit {
    pub model: LinearModel,
    pub chosen_reg: f64,
    /// Folds actually used; smaller than `spec.inner_folds` when there were
    /// fewer rows than folds.
    pub folds_used: usize,
    pub converged: bool,
    /// Whether the chosen model carries an intercept term.
    pub with_intercept: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub(crate) reg: f64,
    pub(crate) with_intercept: bool,
    pub(crate) cv_mse: f64,
}

struct Scaler {
    mean: Array1<f64>,
    std: Array1<f64>,
}

impl Scaler {
    fn fit(x: &Array2<f64>) -> Scaler {
        let mean = x.mean_axis(Axis(0)).expect("nonempty");
        let mut std = x.std_axis(Axis(0), 0.0);
        std.mapv_inplace(|s| if s > 0.0 { s } else { 1.0 });
        Scaler { mean, std }
    }

    fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.mean) / &self.std
    }

    fn restore(&self, model: LinearModel) -> LinearModel {
        let weights = &model.weights / &self.std;
        let intercept = model.intercept - weights.dot(&self.mean);
        LinearModel { weights, intercept }
    }
}

fn fit_family(
    x: &Array2<f64>,
    y: &Array1<f64>,
    reg: f64,
    spec: &RegressorSpec,
    with_intercept: bool,
) -> Result<(LinearModel, bool)> {
    match spec.family {
        LearnerFamily::Ridge => Ok((fit_ridge_opts(x, y, reg, with_intercept)?, true)),
        LearnerFamily::EpsilonInsensitive => {
            let fit = fit_eps_insensitive_opts(x, y, reg, spec, with_intercept)?;
            Ok((fit.model, fit.converged))
        }
    }
}

/// Balanced fold labels for `n` rows, shuffled with a ChaCha stream seeded
/// from `seed`.
fn fold_labels(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut labels = vec![0usize; n];
    for (pos, &row) in order.iter().enumerate() {
        labels[row] = pos % folds;
    }
    labels
}

/// Scores every candidate on the same seeded inner folds. Exposed within
/// the crate so tests can check the argmin property directly.
pub(crate) fn cv_candidates(
    x: &Array2<f64>,
    y: &Array1<f64>,
    spec: &RegressorSpec,
    seed: u64,
    mode: InterceptMode,
    folds: usize,
) -> Result<Vec<Candidate>> {
    let labels = fold_labels(x.nrows(), folds, seed);
    let mut grid = spec.grid.clone();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));

    let variants: &[bool] = match mode {
        InterceptMode::Fit => &[true],
        InterceptMode::Omit => &[false],
        InterceptMode::Select => &[false, true],
    };

    let mut out = Vec::with_capacity(grid.len() * variants.len());
    for &reg in &grid {
        for &with_intercept in variants {
            let mut total_se = 0.0;
            let mut total_n = 0usize;
            for fold in 0..folds {
                let train: Vec<usize> = (0..x.nrows()).filter(|i| labels[*i] != fold).collect();
                let val: Vec<usize> = (0..x.nrows()).filter(|i| labels[*i] == fold).collect();
                if train.is_empty() || val.is_empty() {
                    continue;
                }
                let x_train = x.select(Axis(0), &train);
                let y_train = y.select(Axis(0), &train);
                let (model, _) = fit_family(&x_train, &y_train, reg, spec, with_intercept)?;
                for &i in &val {
                    let err = model.predict_one(x.row(i)) - y[i];
                    total_se += err * err;
                }
                total_n += val.len();
            }
            let cv_mse = if total_n > 0 {
                total_se / total_n as f64
            } else {
                f64::INFINITY
            };
            out.push(Candidate {
                reg,
                with_intercept,
                cv_mse,
            });
        }
    }
    Ok(out)
}

/// Grid-search tuning: for each grid value the mean MSE over seeded inner
/// folds is computed, and the model is refit on all rows with the winning
/// value. Ties break toward the smaller regularization value.
pub fn grid_search_fit(
    x: &Array2<f64>,
    y: &Array1<f64>,
    spec: &RegressorSpec,
    seed: u64,
) -> Result<GridSearchFit> {
    grid_search_fit_with(x, y, spec, seed, InterceptMode::Fit)
}

/// `grid_search_fit` with an explicit intercept policy. `Select` widens the
/// candidate set to both intercept variants per grid value, judged by the
/// same inner-fold MSE; ties prefer the smaller regularization first and
/// the intercept-free variant second.
pub fn grid_search_fit_with(
    x: &Array2<f64>,
    y: &Array1<f64>,
    spec: &RegressorSpec,
    seed: u64,
    mode: InterceptMode,
) -> Result<GridSearchFit> {
    check_xy(x, y, "grid_search_fit")?;
    spec.validate()?;

    let (x_fit, scaler) = if spec.standardize {
        let scaler = Scaler::fit(x);
        (scaler.transform(x), Some(scaler))
    } else {
        (x.clone(), None)
    };

    let n = x_fit.nrows();
    let folds = spec.inner_folds.min(n);
    let smallest = spec.grid.iter().cloned().fold(f64::INFINITY, f64::min);

    let (reg, with_intercept) = if folds < 2 {
        // No validation split possible; fall back to the least shrinkage.
        (smallest, !matches!(mode, InterceptMode::Omit))
    } else {
        let candidates = cv_candidates(&x_fit, y, spec, seed, mode, folds)?;
        let best = candidates
            .iter()
            .min_by(|a, b| {
                a.cv_mse
                    .total_cmp(&b.cv_mse)
                    .then(a.reg.total_cmp(&b.reg))
                    .then(a.with_intercept.cmp(&b.with_intercept))
            })
            .expect("non-empty grid");
        (best.reg, best.with_intercept)
    };

    let (model, converged) = fit_family(&x_fit, y, reg, spec, with_intercept)?;
    let model = match &scaler {
        Some(s) => s.restore(model),
        None => model,
    };
    Ok(GridSearchFit {
        model,
        chosen_reg: reg,
        folds_used: folds,
        converged,
        with_intercept,
    })
}

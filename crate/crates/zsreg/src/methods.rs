//! The three zero-shot regression strategies.
//!
//! * baseline: side information appended to the features, one global model;
//! * SR: per-target feature models aggregated by inverse-distance weighting
//!   over side information;
//! * MPLC: per-target feature models whose parameter vectors become the
//!   training targets of a second-level regression on side information; a
//!   fresh model is instantiated for every unobserved target.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::TaskView;
use crate::error::{Error, Result};
use crate::learners::{
    grid_search_fit, grid_search_fit_with, InterceptMode, LinearModel, RegressorSpec,
};
use crate::seeding::derive_seed;

/// Distance between side-information vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    Manhattan,
    Euclidean,
}

impl Distance {
    pub fn compute(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        match self {
            Distance::Manhattan => a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum(),
            Distance::Euclidean => a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Distance::Manhattan => "Manhattan",
            Distance::Euclidean => "Euclidean",
        }
    }
}

/// How many observed targets SR aggregates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighbors {
    /// Every observed target, weighted by inverse distance. The far ones
    /// fade out on their own, so no `k` needs tuning.
    All,
    K(usize),
}

impl Default for Neighbors {
    fn default() -> Self {
        Neighbors::All
    }
}

/// Settings of the similarity-based relationship method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrConfig {
    pub distance: Distance,
    #[serde(default)]
    pub k: Neighbors,
}

impl SrConfig {
    pub fn new(distance: Distance) -> Self {
        SrConfig {
            distance,
            k: Neighbors::All,
        }
    }
}

/// Which zero-shot method to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSpec {
    Baseline,
    Sr(SrConfig),
    Mplc,
}

impl MethodSpec {
    pub fn name(&self) -> String {
        match self {
            MethodSpec::Baseline => "baseline".into(),
            MethodSpec::Sr(cfg) => match cfg.k {
                Neighbors::All => format!("SR ({})", cfg.distance.name()),
                Neighbors::K(k) => format!("SR-{}nn ({})", k, cfg.distance.name()),
            },
            MethodSpec::Mplc => "MPLC".into(),
        }
    }
}

/// One fitted feature model per observed target, index-aligned with the
/// observed side-information rows.
#[derive(Debug, Clone)]
pub struct TargetModels {
    pub models: Vec<LinearModel>,
    /// Targets that had fewer than two instances and received an
    /// intercept-only fallback fit.
    pub intercept_only: Vec<usize>,
}

impl TargetModels {
    pub fn n_targets(&self) -> usize {
        self.models.len()
    }
}

/// The second-level models of MPLC: one regression over side information
/// per model parameter, ordered `(w_1, …, w_ax, intercept)`.
#[derive(Debug, Clone)]
pub struct MplcModels {
    pub param_models: Vec<LinearModel>,
    /// Feature dimension of the instantiated first-level models.
    pub n_features: usize,
}

impl MplcModels {
    pub fn n_params(&self) -> usize {
        self.param_models.len()
    }
}

/// Concatenates each instance's features with its target's side information.
pub fn baseline_features(x: &Array2<f64>, s: &Array2<f64>, target_of: &[usize]) -> Array2<f64> {
    let (n, ax) = (x.nrows(), x.ncols());
    let a_s = s.ncols();
    let mut joined = Array2::zeros((n, ax + a_s));
    for i in 0..n {
        joined
            .slice_mut(ndarray::s![i, ..ax])
            .assign(&x.row(i));
        joined
            .slice_mut(ndarray::s![i, ax..])
            .assign(&s.row(target_of[i]));
    }
    joined
}

/// Baseline: treat side information as common features and fit one model
/// on the joined matrix.
pub fn fit_baseline(
    x: &Array2<f64>,
    s: &Array2<f64>,
    y: &Array1<f64>,
    target_of: &[usize],
    spec: &RegressorSpec,
    seed: u64,
) -> Result<LinearModel> {
    check_assignment(x, target_of, s.nrows())?;
    let joined = baseline_features(x, s, target_of);
    Ok(grid_search_fit(&joined, y, spec, seed)?.model)
}

/// Fits one feature model per observed target, from that target's rows only.
/// Targets with a single instance get an intercept-only model predicting
/// that value; targets with no instances are an error.
pub fn fit_per_target(
    x: &Array2<f64>,
    y: &Array1<f64>,
    target_of: &[usize],
    n_targets: usize,
    spec: &RegressorSpec,
    seed: u64,
) -> Result<TargetModels> {
    check_assignment(x, target_of, n_targets)?;
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            context: "fit_per_target y",
            expected: x.nrows(),
            actual: y.len(),
        });
    }

    let mut rows_of = vec![Vec::new(); n_targets];
    for (i, &t) in target_of.iter().enumerate() {
        rows_of[t].push(i);
    }

    let fits: Result<Vec<(LinearModel, bool)>> = rows_of
        .par_iter()
        .enumerate()
        .map(|(t, rows)| {
            if rows.is_empty() {
                return Err(Error::invalid(
                    "fit_per_target",
                    format!("target {t} has no instances"),
                ));
            }
            if rows.len() < 2 {
                let mean = rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64;
                return Ok((LinearModel::constant(x.ncols(), mean), true));
            }
            let x_t = x.select(Axis(0), rows);
            let y_t = y.select(Axis(0), rows);
            let fit = grid_search_fit(&x_t, &y_t, spec, derive_seed(seed, t as u64))?;
            Ok((fit.model, false))
        })
        .collect();
    let fits = fits?;

    let intercept_only = fits
        .iter()
        .enumerate()
        .filter_map(|(t, (_, fallback))| fallback.then_some(t))
        .collect();
    Ok(TargetModels {
        models: fits.into_iter().map(|(m, _)| m).collect(),
        intercept_only,
    })
}

/// SR prediction for one unobserved instance: the inverse-distance weighted
/// average of the selected observed-target model predictions.
///
/// If any observed target matches the new side information exactly, the
/// unweighted mean over the exact matches is returned (the limit of the
/// weighting as the distance vanishes).
pub fn sr_predict(
    models: &TargetModels,
    s_observed: &Array2<f64>,
    s_new: ArrayView1<'_, f64>,
    x_new: ArrayView1<'_, f64>,
    config: &SrConfig,
) -> Result<f64> {
    let m = models.n_targets();
    if m == 0 {
        return Err(Error::invalid("sr_predict", "no observed targets"));
    }
    if s_observed.nrows() != m {
        return Err(Error::DimensionMismatch {
            context: "sr_predict side rows",
            expected: m,
            actual: s_observed.nrows(),
        });
    }

    let distances: Vec<f64> = (0..m)
        .map(|t| config.distance.compute(s_observed.row(t), s_new))
        .collect();

    let exact: Vec<usize> = (0..m).filter(|&t| distances[t] == 0.0).collect();
    if !exact.is_empty() {
        let sum: f64 = exact
            .iter()
            .map(|&t| models.models[t].predict_one(x_new))
            .sum();
        return Ok(sum / exact.len() as f64);
    }

    let selected: Vec<usize> = match config.k {
        Neighbors::All => (0..m).collect(),
        Neighbors::K(k) => {
            if k == 0 || k > m {
                return Err(Error::invalid(
                    "sr_predict",
                    format!("k = {k} outside 1..={m}"),
                ));
            }
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
            order.truncate(k);
            order
        }
    };

    let mut weighted = 0.0;
    let mut total = 0.0;
    for &t in &selected {
        let similarity = 1.0 / distances[t];
        weighted += similarity * models.models[t].predict_one(x_new);
        total += similarity;
    }
    Ok(weighted / total)
}

/// MPLC training step two: one regression problem per model parameter, with
/// the observed targets as rows, their side information as features and the
/// parameter values across `models` as responses.
///
/// Each parameter model runs its own grid search; the search also decides
/// between an intercepted and an intercept-free variant by inner-fold MSE,
/// so purely multiplicative structure (parameters proportional to side
/// information) is recovered exactly while offset structure keeps its
/// intercept.
pub fn fit_mplc(
    models: &TargetModels,
    s_observed: &Array2<f64>,
    spec: &RegressorSpec,
    seed: u64,
) -> Result<MplcModels> {
    let m = models.n_targets();
    if m < 2 {
        return Err(Error::invalid(
            "fit_mplc",
            format!("need at least 2 observed targets, have {m}"),
        ));
    }
    if s_observed.nrows() != m {
        return Err(Error::DimensionMismatch {
            context: "fit_mplc side rows",
            expected: m,
            actual: s_observed.nrows(),
        });
    }
    let n_features = models.models[0].n_features();
    if models
        .models
        .iter()
        .any(|model| model.n_features() != n_features)
    {
        return Err(Error::invalid(
            "fit_mplc",
            "observed models disagree on feature dimension",
        ));
    }
    let p = n_features + 1;

    // Row t of this matrix is the parameter vector of observed target t.
    let mut params = Array2::zeros((m, p));
    for (t, model) in models.models.iter().enumerate() {
        params.row_mut(t).assign(&model.parameter_vector());
    }

    let param_models: Result<Vec<LinearModel>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let theta_j = params.column(j).to_owned();
            let fit = grid_search_fit_with(
                s_observed,
                &theta_j,
                spec,
                derive_seed(seed, j as u64),
                InterceptMode::Select,
            )?;
            Ok(fit.model)
        })
        .collect();

    Ok(MplcModels {
        param_models: param_models?,
        n_features,
    })
}

/// MPLC prediction: evaluate every parameter model at the new side
/// information, assemble the implied linear model, apply it to the features.
pub fn mplc_predict(
    g: &MplcModels,
    s_new: ArrayView1<'_, f64>,
    x_new: ArrayView1<'_, f64>,
) -> Result<f64> {
    if x_new.len() != g.n_features {
        return Err(Error::DimensionMismatch {
            context: "mplc_predict features",
            expected: g.n_features,
            actual: x_new.len(),
        });
    }
    let mut prediction = 0.0;
    for (j, model) in g.param_models.iter().enumerate() {
        let theta_j = model.predict_one(s_new);
        if j < g.n_features {
            prediction += theta_j * x_new[j];
        } else {
            prediction += theta_j;
        }
    }
    Ok(prediction)
}

/// A method fitted on an observed view, ready to predict unobserved cells.
#[derive(Debug, Clone)]
pub enum FittedMethod {
    Baseline(LinearModel),
    Sr {
        models: TargetModels,
        s_observed: Array2<f64>,
        config: SrConfig,
    },
    Mplc(MplcModels),
}

impl FittedMethod {
    /// Fits `spec` on the observed side of a projection.
    pub fn fit(
        spec: &MethodSpec,
        observed: &TaskView,
        learner: &RegressorSpec,
        seed: u64,
    ) -> Result<Self> {
        match spec {
            MethodSpec::Baseline => Ok(FittedMethod::Baseline(fit_baseline(
                &observed.x,
                &observed.s,
                &observed.y,
                &observed.target_of,
                learner,
                seed,
            )?)),
            MethodSpec::Sr(config) => {
                let models = fit_per_target(
                    &observed.x,
                    &observed.y,
                    &observed.target_of,
                    observed.n_targets(),
                    learner,
                    seed,
                )?;
                Ok(FittedMethod::Sr {
                    models,
                    s_observed: observed.s.clone(),
                    config: *config,
                })
            }
            MethodSpec::Mplc => {
                let models = fit_per_target(
                    &observed.x,
                    &observed.y,
                    &observed.target_of,
                    observed.n_targets(),
                    learner,
                    seed,
                )?;
                Ok(FittedMethod::Mplc(fit_mplc(
                    &models,
                    &observed.s,
                    learner,
                    derive_seed(seed, 0x4d50_4c43),
                )?))
            }
        }
    }

    /// Predicts one unobserved instance given its features and its target's
    /// side information.
    pub fn predict(
        &self,
        x_new: ArrayView1<'_, f64>,
        s_new: ArrayView1<'_, f64>,
    ) -> Result<f64> {
        match self {
            FittedMethod::Baseline(model) => {
                let mut joined = Array1::zeros(x_new.len() + s_new.len());
                joined.slice_mut(ndarray::s![..x_new.len()]).assign(&x_new);
                joined.slice_mut(ndarray::s![x_new.len()..]).assign(&s_new);
                Ok(model.predict_one(joined.view()))
            }
            FittedMethod::Sr {
                models,
                s_observed,
                config,
            } => sr_predict(models, s_observed, s_new, x_new, config),
            FittedMethod::Mplc(g) => mplc_predict(g, s_new, x_new),
        }
    }
}

fn check_assignment(x: &Array2<f64>, target_of: &[usize], n_targets: usize) -> Result<()> {
    if target_of.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            context: "target assignment",
            expected: x.nrows(),
            actual: target_of.len(),
        });
    }
    if let Some(&t) = target_of.iter().find(|&&t| t >= n_targets) {
        return Err(Error::invalid(
            "target assignment",
            format!("target index {t} out of range (m = {n_targets})"),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// The two-observed-target toy: y = x1 on the first target, y = x2 on
    /// the second, with orthogonal within-target designs so the per-target
    /// fits are exact in the small-regularization limit.
    fn toy_training() -> (Array2<f64>, Array1<f64>, Vec<usize>, Array2<f64>) {
        let x = array![
            [-2.0, 1.0],
            [-1.0, -2.0],
            [1.0, 2.0],
            [2.0, -1.0],
            [1.0, -2.0],
            [-2.0, -1.0],
            [2.0, 1.0],
            [-1.0, 2.0],
        ];
        let y = array![-2.0, -1.0, 1.0, 2.0, -2.0, -1.0, 1.0, 2.0];
        let target_of = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let s = array![[1.0, 0.0], [0.0, 1.0]];
        (x, y, target_of, s)
    }

    fn tiny_grid() -> RegressorSpec {
        RegressorSpec::ridge().with_grid(vec![1e-8, 1e-4, 1e-2])
    }

    fn exact_toy_models() -> TargetModels {
        TargetModels {
            models: vec![
                LinearModel {
                    weights: array![1.0, 0.0],
                    intercept: 0.0,
                },
                LinearModel {
                    weights: array![0.0, 1.0],
                    intercept: 0.0,
                },
            ],
            intercept_only: vec![],
        }
    }

    #[test]
    fn baseline_without_side_info_equals_plain_regression() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((30, 3), |_| rng.gen_range(-2.0..2.0));
        let y = Array1::from_shape_fn(30, |i| x[[i, 0]] - x[[i, 2]] + 0.5);
        let s = Array2::zeros((2, 0));
        let target_of: Vec<usize> = (0..30).map(|i| i % 2).collect();
        let spec = RegressorSpec::ridge();
        let baseline = fit_baseline(&x, &s, &y, &target_of, &spec, 3).unwrap();
        let plain = grid_search_fit(&x, &y, &spec, 3).unwrap().model;
        assert_eq!(baseline, plain);
    }

    #[test]
    fn baseline_toy_ignores_side_info_and_misses_the_product_structure() {
        let (x, y, target_of, s) = toy_training();
        let model = fit_baseline(&x, &s, &y, &target_of, &tiny_grid(), 0).unwrap();
        // Side-information columns get near-zero weight; the fit averages
        // the two feature columns.
        assert!(model.weights[2].abs() < 1e-2, "{:?}", model.weights);
        assert!(model.weights[3].abs() < 1e-2, "{:?}", model.weights);
        assert!((model.weights[0] - 0.5).abs() < 1e-2);
        assert!((model.weights[1] - 0.5).abs() < 1e-2);

        let query = array![1.2, 1.3, 1.0, 1.0];
        let prediction = model.predict_one(query.view());
        assert!(
            (prediction - 2.5).abs() > 1.0,
            "baseline {prediction} unexpectedly close to 2.5"
        );
    }

    #[test]
    fn per_target_constant_response_gives_intercept_only_prediction() {
        let x = array![[1.0], [2.0], [3.0], [10.0]];
        let y = array![4.0, 4.0, 4.0, 4.0];
        let models =
            fit_per_target(&x, &y, &[0, 0, 0, 0], 1, &RegressorSpec::ridge(), 0).unwrap();
        let pred = models.models[0].predict_one(array![100.0].view());
        assert!((pred - 4.0).abs() < 1e-6);
    }

    #[test]
    fn per_target_single_instance_falls_back_to_constant() {
        let x = array![[1.0], [2.0], [3.0]];
        let y = array![5.0, 1.0, 2.0];
        let models = fit_per_target(&x, &y, &[0, 1, 1], 2, &RegressorSpec::ridge(), 0).unwrap();
        assert_eq!(models.intercept_only, vec![0]);
        assert!((models.models[0].predict_one(array![9.0].view()) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn per_target_empty_target_is_an_error() {
        let x = array![[1.0], [2.0]];
        let y = array![1.0, 2.0];
        assert!(fit_per_target(&x, &y, &[0, 0], 2, &RegressorSpec::ridge(), 0).is_err());
    }

    #[test]
    fn per_target_toy_recovers_unit_weights() {
        let (x, y, target_of, _) = toy_training();
        let models = fit_per_target(&x, &y, &target_of, 2, &tiny_grid(), 0).unwrap();
        assert!((models.models[0].weights[0] - 1.0).abs() < 1e-5);
        assert!(models.models[0].weights[1].abs() < 1e-5);
        assert!(models.models[0].intercept.abs() < 1e-5);
        assert!(models.models[1].weights[0].abs() < 1e-5);
        assert!((models.models[1].weights[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn sr_single_target_returns_its_prediction() {
        let models = TargetModels {
            models: vec![LinearModel {
                weights: array![2.0],
                intercept: 1.0,
            }],
            intercept_only: vec![],
        };
        let s_obs = array![[5.0]];
        let cfg = SrConfig::new(Distance::Euclidean);
        let pred = sr_predict(
            &models,
            &s_obs,
            array![-3.0].view(),
            array![4.0].view(),
            &cfg,
        )
        .unwrap();
        assert_eq!(pred, 9.0);
    }

    #[test]
    fn sr_toy_equidistant_targets_average_to_1_25() {
        let models = exact_toy_models();
        let s_obs = array![[1.0, 0.0], [0.0, 1.0]];
        let x_new = array![1.2, 1.3];
        let s_new = array![1.0, 1.0];
        for distance in [Distance::Manhattan, Distance::Euclidean] {
            let cfg = SrConfig::new(distance);
            let pred =
                sr_predict(&models, &s_obs, s_new.view(), x_new.view(), &cfg).unwrap();
            assert!((pred - 1.25).abs() < 1e-12, "{distance:?}: {pred}");
        }
    }

    #[test]
    fn sr_matches_direct_formula_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let m = 5;
            let models = TargetModels {
                models: (0..m)
                    .map(|_| LinearModel {
                        weights: array![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
                        intercept: rng.gen_range(-1.0..1.0),
                    })
                    .collect(),
                intercept_only: vec![],
            };
            let s_obs = Array2::from_shape_fn((m, 3), |_| rng.gen_range(-2.0..2.0));
            let s_new = Array1::from_shape_fn(3, |_| rng.gen_range(-2.0..2.0));
            let x_new = Array1::from_shape_fn(2, |_| rng.gen_range(-2.0..2.0));
            let cfg = SrConfig::new(Distance::Manhattan);
            let got =
                sr_predict(&models, &s_obs, s_new.view(), x_new.view(), &cfg).unwrap();

            // Scalar re-evaluation of the weighted-average formula.
            let mut num = 0.0;
            let mut den = 0.0;
            for t in 0..m {
                let mut d = 0.0;
                for j in 0..3 {
                    d += (s_obs[[t, j]] - s_new[j]).abs();
                }
                let delta = 1.0 / d;
                let f = models.models[t].weights[0] * x_new[0]
                    + models.models[t].weights[1] * x_new[1]
                    + models.models[t].intercept;
                num += delta * f;
                den += delta;
            }
            assert!((got - num / den).abs() < 1e-12);
        }
    }

    #[test]
    fn sr_exact_side_match_uses_unweighted_mean_of_matches() {
        let models = exact_toy_models();
        let s_obs = array![[1.0, 0.0], [0.0, 1.0]];
        let cfg = SrConfig::new(Distance::Manhattan);
        let pred = sr_predict(
            &models,
            &s_obs,
            array![1.0, 0.0].view(),
            array![1.2, 1.3].view(),
            &cfg,
        )
        .unwrap();
        // Exactly matches target 0, so only its model speaks.
        assert_eq!(pred, 1.2);

        // All targets at distance zero: unweighted mean of all predictions.
        let s_same = array![[1.0, 1.0], [1.0, 1.0]];
        let pred = sr_predict(
            &models,
            &s_same,
            array![1.0, 1.0].view(),
            array![1.2, 1.3].view(),
            &cfg,
        )
        .unwrap();
        assert!((pred - 1.25).abs() < 1e-12);
    }

    #[test]
    fn sr_k1_equals_nearest_target_model() {
        let models = exact_toy_models();
        let s_obs = array![[1.0, 0.0], [0.0, 1.0]];
        let cfg = SrConfig {
            distance: Distance::Euclidean,
            k: Neighbors::K(1),
        };
        let pred = sr_predict(
            &models,
            &s_obs,
            array![0.9, 0.05].view(),
            array![1.2, 1.3].view(),
            &cfg,
        )
        .unwrap();
        assert_eq!(pred, 1.2); // nearest is target 0, whose model returns x1
    }

    #[test]
    fn sr_prediction_stays_in_neighbor_prediction_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let m = rng.gen_range(2..7);
            let models = TargetModels {
                models: (0..m)
                    .map(|_| LinearModel {
                        weights: array![rng.gen_range(-3.0..3.0)],
                        intercept: rng.gen_range(-2.0..2.0),
                    })
                    .collect(),
                intercept_only: vec![],
            };
            let s_obs = Array2::from_shape_fn((m, 2), |_| rng.gen_range(-2.0..2.0));
            let s_new = Array1::from_shape_fn(2, |_| rng.gen_range(-2.0..2.0));
            let x_new = Array1::from_shape_fn(1, |_| rng.gen_range(-2.0..2.0));
            let cfg = SrConfig::new(Distance::Euclidean);
            let pred =
                sr_predict(&models, &s_obs, s_new.view(), x_new.view(), &cfg).unwrap();
            let preds: Vec<f64> = models
                .models
                .iter()
                .map(|f| f.predict_one(x_new.view()))
                .collect();
            let lo = preds.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = preds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(pred >= lo - 1e-9 && pred <= hi + 1e-9);
        }
    }

    #[test]
    fn method_predictions_are_invariant_to_target_order() {
        let models = exact_toy_models();
        let s_obs = array![[1.0, 0.0], [0.0, 1.0]];
        let swapped_models = TargetModels {
            models: vec![models.models[1].clone(), models.models[0].clone()],
            intercept_only: vec![],
        };
        let s_swapped = array![[0.0, 1.0], [1.0, 0.0]];
        let x_new = array![1.2, 1.3];
        let s_new = array![0.8, 0.4];
        let cfg = SrConfig::new(Distance::Manhattan);
        let a = sr_predict(&models, &s_obs, s_new.view(), x_new.view(), &cfg).unwrap();
        let b = sr_predict(&swapped_models, &s_swapped, s_new.view(), x_new.view(), &cfg)
            .unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn mplc_constant_parameters_give_constant_parameter_models() {
        let shared = LinearModel {
            weights: array![1.5, -0.5],
            intercept: 0.25,
        };
        let models = TargetModels {
            models: vec![shared.clone(), shared.clone(), shared.clone(), shared.clone()],
            intercept_only: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s_obs = Array2::from_shape_fn((4, 2), |_| rng.gen_range(-2.0..2.0));
        let g = fit_mplc(&models, &s_obs, &RegressorSpec::ridge(), 0).unwrap();
        let probe = array![0.3, -1.7];
        let expect = shared.parameter_vector();
        for (j, pm) in g.param_models.iter().enumerate() {
            assert!(
                (pm.predict_one(probe.view()) - expect[j]).abs() < 1e-6,
                "parameter {j}"
            );
        }
        // The assembled model therefore reproduces the shared prediction.
        let x_new = array![0.7, 0.9];
        let direct = shared.predict_one(x_new.view());
        let via_g = mplc_predict(&g, probe.view(), x_new.view()).unwrap();
        assert!((via_g - direct).abs() < 1e-6);
    }

    #[test]
    fn mplc_toy_learns_coordinate_projections() {
        let models = exact_toy_models();
        let s_obs = array![[1.0, 0.0], [0.0, 1.0]];
        let g = fit_mplc(&models, &s_obs, &tiny_grid(), 0).unwrap();
        // g for the first weight behaves like s1, for the second like s2.
        assert!((g.param_models[0].weights[0] - 1.0).abs() < 1e-6);
        assert!(g.param_models[0].weights[1].abs() < 1e-6);
        assert!(g.param_models[0].intercept.abs() < 1e-6);
        assert!((g.param_models[1].weights[1] - 1.0).abs() < 1e-6);

        // Least-squares consistency: solving g(s) = theta_t for s must
        // reproduce the observed side-information rows. With two parameter
        // models over two side features the 2x2 system is solved directly.
        let g11 = g.param_models[0].weights[0];
        let g12 = g.param_models[0].weights[1];
        let g21 = g.param_models[1].weights[0];
        let g22 = g.param_models[1].weights[1];
        let det = g11 * g22 - g12 * g21;
        for (t, theta) in [(0usize, [1.0, 0.0]), (1usize, [0.0, 1.0])] {
            let t1 = theta[0] - g.param_models[0].intercept;
            let t2 = theta[1] - g.param_models[1].intercept;
            let s1 = (g22 * t1 - g12 * t2) / det;
            let s2 = (g11 * t2 - g21 * t1) / det;
            assert!((s1 - s_obs[[t, 0]]).abs() < 1e-5, "target {t}");
            assert!((s2 - s_obs[[t, 1]]).abs() < 1e-5, "target {t}");
        }
    }

    #[test]
    fn mplc_toy_prediction_recovers_the_product() {
        let models = exact_toy_models();
        let s_obs = array![[1.0, 0.0], [0.0, 1.0]];
        let g = fit_mplc(&models, &s_obs, &tiny_grid(), 0).unwrap();
        let pred = mplc_predict(&g, array![1.0, 1.0].view(), array![1.2, 1.3].view()).unwrap();
        assert!((pred - 2.5).abs() < 1e-6, "got {pred}");
    }

    #[test]
    fn mplc_predict_matches_two_step_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let ax = 3;
            let a_s = 2;
            let g = MplcModels {
                param_models: (0..=ax)
                    .map(|_| LinearModel {
                        weights: Array1::from_shape_fn(a_s, |_| rng.gen_range(-2.0..2.0)),
                        intercept: rng.gen_range(-1.0..1.0),
                    })
                    .collect(),
                n_features: ax,
            };
            let s_new = Array1::from_shape_fn(a_s, |_| rng.gen_range(-2.0..2.0));
            let x_new = Array1::from_shape_fn(ax, |_| rng.gen_range(-2.0..2.0));
            let got = mplc_predict(&g, s_new.view(), x_new.view()).unwrap();

            let mut theta = Vec::new();
            for pm in &g.param_models {
                let mut v = pm.intercept;
                for j in 0..a_s {
                    v += pm.weights[j] * s_new[j];
                }
                theta.push(v);
            }
            let mut expect = theta[ax];
            for j in 0..ax {
                expect += theta[j] * x_new[j];
            }
            assert!((got - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn mplc_requires_two_targets() {
        let models = TargetModels {
            models: vec![LinearModel::constant(2, 1.0)],
            intercept_only: vec![],
        };
        let s_obs = array![[1.0, 0.0]];
        assert!(fit_mplc(&models, &s_obs, &RegressorSpec::ridge(), 0).is_err());
    }
}

//! The consistent cross-validation protocol and relative-MSE scoring.
//!
//! Instances and targets are split into folds independently; fold `f` keeps
//! test instances of test targets as the unobserved cells and train
//! instances of train targets as the observed cells. The two mixed blocks
//! (train instance × test target and test instance × train target) are
//! blanked: they appear on neither side, which keeps the split consistent.

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{SplitView, ZeroShotDataset};
use crate::error::{Error, Result};
use crate::learners::RegressorSpec;
use crate::methods::{FittedMethod, MethodSpec};
use crate::seeding::derive_seed;

/// Fold labels for every repetition of the protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CVPlan {
    pub folds: usize,
    pub repetitions: usize,
    /// `instance_folds[rep][i]` is the fold of instance `i` in repetition
    /// `rep`; fold sizes differ by at most one.
    pub instance_folds: Vec<Vec<usize>>,
    /// Same layout for targets; both are redrawn independently per
    /// repetition.
    pub target_folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl CVPlan {
    /// The split view of one `(repetition, fold)` cell.
    pub fn view(&self, dataset: &ZeroShotDataset, rep: usize, fold: usize) -> SplitView {
        let target_labels = &self.target_folds[rep];
        let instance_labels = &self.instance_folds[rep];

        let observed_targets: Vec<usize> = (0..dataset.n_targets())
            .filter(|&t| target_labels[t] != fold)
            .collect();
        let unobserved_targets: Vec<usize> = (0..dataset.n_targets())
            .filter(|&t| target_labels[t] == fold)
            .collect();

        let mut observed_instances = Vec::new();
        let mut unobserved_instances = Vec::new();
        for (i, &t) in dataset.target_of().iter().enumerate() {
            let instance_is_test = instance_labels[i] == fold;
            let target_is_test = target_labels[t] == fold;
            match (instance_is_test, target_is_test) {
                (true, true) => unobserved_instances.push(i),
                (false, false) => observed_instances.push(i),
                _ => {} // blanked cell
            }
        }
        SplitView {
            observed_targets,
            unobserved_targets,
            observed_instances,
            unobserved_instances,
        }
    }
}

fn balanced_labels(n: usize, folds: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut labels = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        labels[i] = pos % folds;
    }
    labels
}

/// The 3-fold × 3-repetition plan of the experimental protocol.
pub fn make_plan(dataset: &ZeroShotDataset, seed: u64) -> Result<CVPlan> {
    make_plan_with(dataset, seed, 3, 3)
}

pub fn make_plan_with(
    dataset: &ZeroShotDataset,
    seed: u64,
    folds: usize,
    repetitions: usize,
) -> Result<CVPlan> {
    if folds < 2 {
        return Err(Error::invalid("make_plan", "need at least 2 folds"));
    }
    if dataset.n_targets() < folds {
        return Err(Error::TooFewTargets {
            targets: dataset.n_targets(),
            folds,
        });
    }
    if dataset.n_instances() < folds {
        return Err(Error::invalid(
            "make_plan",
            format!(
                "too few instances for {folds}-fold instance split (have {})",
                dataset.n_instances()
            ),
        ));
    }

    let mut instance_folds = Vec::with_capacity(repetitions);
    let mut target_folds = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let mut rng_i =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, 2 * rep as u64));
        let mut rng_t =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, 2 * rep as u64 + 1));
        instance_folds.push(balanced_labels(dataset.n_instances(), folds, &mut rng_i));
        target_folds.push(balanced_labels(dataset.n_targets(), folds, &mut rng_t));
    }
    Ok(CVPlan {
        folds,
        repetitions,
        instance_folds,
        target_folds,
        seed,
    })
}

/// Scores of one `(dataset, method, learner)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub dataset_name: String,
    pub method_name: String,
    pub base_learner: String,
    /// `100 * mean(fold MSE) / mean(fold default MSE)`; 100 means no better
    /// than predicting the observed mean.
    pub relative_mse: f64,
    pub per_fold_mse: Vec<f64>,
    pub per_fold_default_mse: Vec<f64>,
}

/// Runs the full plan for one method: per fold, fit on the observed view,
/// predict every unobserved cell, score against the default predictor (the
/// mean of the observed responses, recomputed per fold).
pub fn evaluate(
    dataset: &ZeroShotDataset,
    dataset_name: &str,
    method: &MethodSpec,
    learner: &RegressorSpec,
    plan: &CVPlan,
) -> Result<ScoreRecord> {
    let cells: Vec<(usize, usize)> = (0..plan.repetitions)
        .flat_map(|rep| (0..plan.folds).map(move |fold| (rep, fold)))
        .collect();

    let wrap_err = |message: String| Error::Evaluation {
        dataset: dataset_name.to_string(),
        method: method.name(),
        learner: learner.family.name().to_string(),
        message,
    };

    let fold_scores: Result<Vec<Option<(f64, f64)>>> = cells
        .par_iter()
        .map(|&(rep, fold)| {
            let view = plan.view(dataset, rep, fold);
            if view.unobserved_instances.is_empty() {
                return Ok(None);
            }
            let projection = dataset.project(&view)?;
            let observed = &projection.observed;
            if observed.n_instances() == 0 {
                return Err(wrap_err(format!(
                    "repetition {rep} fold {fold} has no observed cells"
                )));
            }
            let seed = derive_seed(plan.seed, (rep * plan.folds + fold) as u64);
            let fitted = FittedMethod::fit(method, observed, learner, seed)
                .map_err(|e| wrap_err(format!("repetition {rep} fold {fold}: {e}")))?;

            let unobserved = &projection.unobserved;
            let mut se = 0.0;
            for row in 0..unobserved.n_instances() {
                let s_row = unobserved.s.row(unobserved.target_of[row]);
                let prediction = fitted
                    .predict(unobserved.x.row(row), s_row)
                    .map_err(|e| wrap_err(format!("repetition {rep} fold {fold}: {e}")))?;
                let err = prediction - unobserved.y[row];
                se += err * err;
            }
            let mse = se / unobserved.n_instances() as f64;

            let default = observed.y.mean().expect("observed view nonempty");
            let default_mse = unobserved
                .y
                .iter()
                .map(|y| (y - default) * (y - default))
                .sum::<f64>()
                / unobserved.n_instances() as f64;
            Ok(Some((mse, default_mse)))
        })
        .collect();

    let mut per_fold_mse = Vec::new();
    let mut per_fold_default_mse = Vec::new();
    for score in fold_scores?.into_iter().flatten() {
        per_fold_mse.push(score.0);
        per_fold_default_mse.push(score.1);
    }
    if per_fold_mse.is_empty() {
        return Err(wrap_err("no fold produced any unobserved cell".into()));
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let relative_mse = 100.0 * mean(&per_fold_mse) / mean(&per_fold_default_mse);

    Ok(ScoreRecord {
        dataset_name: dataset_name.to_string(),
        method_name: method.name(),
        base_learner: learner.family.name().to_string(),
        relative_mse,
        per_fold_mse,
        per_fold_default_mse,
    })
}

/// Mean of the observed responses; the default predictor all relative
/// scores are measured against.
pub fn default_predictor(y_observed: &Array1<f64>) -> f64 {
    y_observed.mean().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::methods::{Distance, SrConfig};
    use crate::synth::{generate, GenKind, GenSpec};
    use ndarray::{Array1, Array2};
    use rand::Rng;

    fn small_dataset(seed: u64, n: usize, m: usize) -> ZeroShotDataset {
        let spec = GenSpec::new(GenKind::R, m, 3, seed)
            .with_instances(n)
            .with_features(4);
        generate(&spec).unwrap().0
    }

    #[test]
    fn plan_with_three_targets_isolates_one_per_fold() {
        let d = small_dataset(0, 30, 3);
        let plan = make_plan(&d, 7).unwrap();
        for rep in 0..3 {
            for fold in 0..3 {
                let view = plan.view(&d, rep, fold);
                assert_eq!(view.unobserved_targets.len(), 1);
                assert_eq!(view.observed_targets.len(), 2);
            }
        }
    }

    #[test]
    fn each_cell_is_tested_at_most_once_per_repetition() {
        let d = small_dataset(1, 40, 4);
        let plan = make_plan(&d, 3).unwrap();
        for rep in 0..plan.repetitions {
            let mut tested = vec![0usize; d.n_instances()];
            for fold in 0..plan.folds {
                let view = plan.view(&d, rep, fold);
                for &i in &view.unobserved_instances {
                    tested[i] += 1;
                }
            }
            assert!(tested.iter().all(|&c| c <= 1));
        }
    }

    #[test]
    fn observed_unobserved_and_blanked_partition_every_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..10 {
            let n = rng.gen_range(20..60);
            let m = rng.gen_range(3..8);
            let d = small_dataset(50 + trial, n, m);
            let plan = make_plan(&d, trial).unwrap();
            for rep in 0..plan.repetitions {
                for fold in 0..plan.folds {
                    let view = plan.view(&d, rep, fold);
                    let mut seen = vec![0u8; d.n_instances()];
                    for &i in &view.observed_instances {
                        seen[i] += 1;
                    }
                    for &i in &view.unobserved_instances {
                        seen[i] += 1;
                    }
                    // Remaining instances must be exactly the blanked ones:
                    // instance fold and target fold disagree about testing.
                    for i in 0..d.n_instances() {
                        let t = d.target_of()[i];
                        let inst_test = plan.instance_folds[rep][i] == fold;
                        let targ_test = plan.target_folds[rep][t] == fold;
                        let expected = u8::from(inst_test == targ_test);
                        assert_eq!(seen[i], expected, "instance {i}");
                    }
                }
            }
        }
    }

    #[test]
    fn fold_sizes_are_balanced() {
        let d = small_dataset(2, 50, 5);
        let plan = make_plan(&d, 11).unwrap();
        for rep in 0..plan.repetitions {
            let mut counts = vec![0usize; plan.folds];
            for &f in &plan.instance_folds[rep] {
                counts[f] += 1;
            }
            let min = counts.iter().min().unwrap();
            let max = counts.iter().max().unwrap();
            assert!(max - min <= 1);
        }
    }

    #[test]
    fn too_few_targets_is_an_error() {
        let d = small_dataset(3, 20, 2);
        let err = make_plan(&d, 0).unwrap_err();
        assert!(err.to_string().contains("too few targets"));
    }

    #[test]
    fn plans_are_deterministic() {
        let d = small_dataset(4, 25, 4);
        assert_eq!(make_plan(&d, 9).unwrap(), make_plan(&d, 9).unwrap());
        assert_ne!(make_plan(&d, 9).unwrap(), make_plan(&d, 10).unwrap());
    }

    #[test]
    fn mean_predictor_scores_about_100() {
        let d = small_dataset(6, 120, 4);
        let plan = make_plan(&d, 1).unwrap();
        // A baseline with overwhelming shrinkage predicts the observed mean.
        let learner = RegressorSpec::ridge().with_grid(vec![1e12]);
        let record = evaluate(&d, "degenerate", &MethodSpec::Baseline, &learner, &plan).unwrap();
        assert!(
            (record.relative_mse - 100.0).abs() < 5.0,
            "relative {}",
            record.relative_mse
        );
    }

    #[test]
    fn degenerate_r_structure_is_solved_by_baseline_and_mplc() {
        // gamma = 0: the response is the same linear function of x for all
        // targets, so both the baseline and MPLC reach near-zero error.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 200;
        let ax = 5;
        let x = Array2::from_shape_fn((n, ax), |_| rng.gen_range(-2.0..2.0));
        let s = Array2::from_shape_fn((5, 3), |_| rng.gen_range(-2.0..2.0));
        let offsets: Vec<f64> = (0..ax).map(|_| rng.gen_range(1.0..2.0)).collect();
        let target_of: Vec<usize> = (0..n).map(|i| i % 5).collect();
        let y = Array1::from_shape_fn(n, |i| {
            (0..ax).map(|j| offsets[j] * x[[i, j]]).sum::<f64>() + 0.5
        });
        let d = ZeroShotDataset::new(x, s, y, target_of).unwrap();
        let plan = make_plan(&d, 2).unwrap();
        let learner = RegressorSpec::ridge().with_grid(vec![1e-6, 1e-3]);
        for method in [MethodSpec::Baseline, MethodSpec::Mplc] {
            let record = evaluate(&d, "degenerate-r", &method, &learner, &plan).unwrap();
            assert!(
                record.relative_mse < 0.5,
                "{}: {}",
                method.name(),
                record.relative_mse
            );
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let d = small_dataset(7, 90, 3);
        let plan = make_plan(&d, 21).unwrap();
        let learner = RegressorSpec::ridge();
        let method = MethodSpec::Sr(SrConfig::new(Distance::Manhattan));
        let a = evaluate(&d, "d", &method, &learner, &plan).unwrap();
        let b = evaluate(&d, "d", &method, &learner, &plan).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fitting_never_sees_unobserved_responses() {
        // Mutating a test-cell response must not change any fitted model.
        let d = small_dataset(8, 60, 3);
        let plan = make_plan(&d, 5).unwrap();
        let view = plan.view(&d, 0, 0);
        let target_cell = view.unobserved_instances[0];

        let mut y2 = d.y().clone();
        y2[target_cell] += 1000.0;
        let d2 = ZeroShotDataset::new(d.x().clone(), d.s().clone(), y2, d.target_of().to_vec())
            .unwrap();

        let learner = RegressorSpec::ridge();
        for method in [
            MethodSpec::Baseline,
            MethodSpec::Sr(SrConfig::new(Distance::Euclidean)),
            MethodSpec::Mplc,
        ] {
            let obs1 = d.project(&view).unwrap().observed;
            let obs2 = d2.project(&view).unwrap().observed;
            let f1 = FittedMethod::fit(&method, &obs1, &learner, 3).unwrap();
            let f2 = FittedMethod::fit(&method, &obs2, &learner, 3).unwrap();
            let x_probe = d.x().row(target_cell);
            let s_probe = d.s().row(d.target_of()[target_cell]);
            let p1 = f1.predict(x_probe, s_probe).unwrap();
            let p2 = f2.predict(x_probe, s_probe).unwrap();
            assert_eq!(p1, p2, "{} leaked test data", method.name());
        }
    }
}

//! Zero-shot regression with target side information.
//!
//! A *target* (a measurement station, a state, …) is described by side
//! information that is known before any instance of it is observed. This
//! crate predicts the response of instances belonging to targets that have
//! no training data at all, using three strategies:
//!
//! * **baseline** — side information appended to the features, one global
//!   linear model;
//! * **SR** — a model per observed target, aggregated for a new target by
//!   inverse-distance weighting in side-information space;
//! * **MPLC** — a model per observed target, plus a second-level regression
//!   from side information to the model parameters, instantiating a fresh
//!   model for every new target.
//!
//! The crate also ships the synthetic benchmark generators used to compare
//! the methods, a blanked-cell cross-validation protocol that keeps
//! instance and target splits consistent, and the rank-based statistics
//! (Friedman, Nemenyi, Wilcoxon) used to report comparisons.
//!
//! See the `examples/` directory for runnable walkthroughs of each
//! capability, and the `zsreg` binary for the config-driven experiment
//! runner.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod learners;
mod linalg;
pub mod methods;
pub mod seeding;
pub mod stats;
pub mod synth;

pub use dataset::{SplitView, ZeroShotDataset};
pub use error::{Error, Result};
pub use evaluation::{evaluate, make_plan, CVPlan, ScoreRecord};
pub use learners::{
    fit_eps_insensitive, fit_ridge, grid_search_fit, LearnerFamily, LinearModel, RegressorSpec,
};
pub use methods::{
    fit_baseline, fit_mplc, fit_per_target, mplc_predict, sr_predict, Distance, FittedMethod,
    MethodSpec, MplcModels, Neighbors, SrConfig, TargetModels,
};
pub use synth::{draw_uniform_gap, generate, GenKind, GenSpec, GroundTruth};

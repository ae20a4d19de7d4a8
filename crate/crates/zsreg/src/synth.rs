//! Synthetic benchmark generators.
//!
//! Both kinds draw every raw value from the gap distribution on
//! `(-2,-1] ∪ [1,2)` and build the response as a linear function of the
//! features whose coefficients depend on the target's side information:
//!
//! * S-kind: each coefficient is a similarity-weighted average of anchor
//!   coefficients, the similarity being measured between the target's side
//!   information and a set of anchor side-information descriptions;
//! * R-kind: each coefficient is itself an affine function of the side
//!   information.
//!
//! Generation is noiseless, so within one target the response is an exact
//! linear function of the features. The drawn coefficients are returned as
//! a ground truth so tests can re-evaluate any cell independently.

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::ZeroShotDataset;
use crate::error::{Error, Result};
use crate::methods::Distance;

/// Which generator family to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GenKind {
    S,
    R,
}

/// How the S-kind generator turns a distance into a similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityForm {
    /// `1 / distance`, the same convention the SR method uses.
    InverseDistance,
    /// The raw distance itself.
    RawDistance,
}

impl Default for SimilarityForm {
    fn default() -> Self {
        SimilarityForm::InverseDistance
    }
}

/// Size and seed parameters of one synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: GenKind,
    pub n_instances: usize,
    pub n_features: usize,
    pub n_targets: usize,
    pub side_dim: usize,
    /// Anchor count `d` of the S-kind generator; ignored for R-kind.
    pub anchors: usize,
    pub seed: u64,
    #[serde(default)]
    pub s_similarity: SimilarityForm,
}

impl GenSpec {
    pub fn new(kind: GenKind, n_targets: usize, side_dim: usize, seed: u64) -> Self {
        GenSpec {
            kind,
            n_instances: 5000,
            n_features: 50,
            n_targets,
            side_dim,
            anchors: 5,
            seed,
            s_similarity: SimilarityForm::InverseDistance,
        }
    }

    pub fn with_instances(mut self, n: usize) -> Self {
        self.n_instances = n;
        self
    }

    pub fn with_features(mut self, a_x: usize) -> Self {
        self.n_features = a_x;
        self
    }

    /// Dataset name in the `S^{targets,side}` / `R^{targets,side}` scheme.
    pub fn name(&self) -> String {
        let kind = match self.kind {
            GenKind::S => "S",
            GenKind::R => "R",
        };
        format!("{}^{{{},{}}}", kind, self.n_targets, self.side_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_instances == 0
            || self.n_features == 0
            || self.n_targets == 0
            || self.side_dim == 0
        {
            return Err(Error::invalid("GenSpec", "all sizes must be positive"));
        }
        if matches!(self.kind, GenKind::S) && self.anchors == 0 {
            return Err(Error::invalid("GenSpec", "S-kind needs at least one anchor"));
        }
        if self.n_instances < self.n_targets {
            return Err(Error::invalid(
                "GenSpec",
                "need at least one instance per target",
            ));
        }
        Ok(())
    }
}

/// Ground truth of an S-kind dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SGroundTruth {
    /// Anchor coefficients, one row per feature, one column per anchor.
    pub tau: Array2<f64>,
    /// Anchor side-information descriptions, one row per anchor.
    pub mu: Array2<f64>,
    pub delta: Distance,
    pub similarity: SimilarityForm,
    pub beta: f64,
}

impl SGroundTruth {
    /// The coefficient of feature `i` for a target described by `s`.
    pub fn alpha(&self, i: usize, s: ArrayView1<'_, f64>) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..self.mu.nrows() {
            let d = self.delta.compute(s, self.mu.row(k));
            let sim = match self.similarity {
                SimilarityForm::InverseDistance => 1.0 / d,
                SimilarityForm::RawDistance => d,
            };
            num += self.tau[[i, k]] * sim;
            den += sim;
        }
        num / den
    }
}

/// Ground truth of an R-kind dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RGroundTruth {
    /// One row per feature, one column per side-information component.
    pub gamma: Array2<f64>,
    pub feature_offsets: Array1<f64>,
    pub beta: f64,
}

impl RGroundTruth {
    pub fn alpha(&self, i: usize, s: ArrayView1<'_, f64>) -> f64 {
        self.gamma.row(i).dot(&s) + self.feature_offsets[i]
    }
}

/// The drawn coefficients of a generated dataset, enough to re-evaluate any
/// cell exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum GroundTruth {
    S(SGroundTruth),
    R(RGroundTruth),
}

impl GroundTruth {
    /// Recomputes the response of an instance `x` under a target described
    /// by `s`.
    pub fn response(&self, x: ArrayView1<'_, f64>, s: ArrayView1<'_, f64>) -> f64 {
        match self {
            GroundTruth::S(gt) => {
                let mut y = gt.beta;
                for i in 0..x.len() {
                    y += gt.alpha(i, s) * x[i];
                }
                y
            }
            GroundTruth::R(gt) => {
                let mut y = gt.beta;
                for i in 0..x.len() {
                    y += gt.alpha(i, s) * x[i];
                }
                y
            }
        }
    }
}

/// Sidecar written next to generated CSV files so the provenance of a
/// dataset can be checked later.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub spec: GenSpec,
    pub ground_truth: GroundTruth,
}

/// Draws an `rows x cols` matrix from the gap distribution: sign ±1 with
/// probability 1/2, magnitude uniform in `[1, 2)`, so every value lies in
/// `(-2,-1] ∪ [1,2)` and zero is impossible.
pub fn draw_uniform_gap(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut out = Array2::zeros((rows, cols));
    for v in out.iter_mut() {
        *v = draw_gap_value(rng);
    }
    out
}

pub fn draw_uniform_gap_vec(len: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let mut out = Array1::zeros(len);
    for v in out.iter_mut() {
        *v = draw_gap_value(rng);
    }
    out
}

fn draw_gap_value(rng: &mut ChaCha8Rng) -> f64 {
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let magnitude = 1.0 + rng.gen::<f64>(); // [1, 2)
    sign * magnitude
}

/// Generates a dataset plus its ground truth. Instances are assigned to
/// targets round-robin, so counts differ by at most one and the earliest
/// targets take the remainder.
pub fn generate(spec: &GenSpec) -> Result<(ZeroShotDataset, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let x = draw_uniform_gap(spec.n_instances, spec.n_features, &mut rng);
    let s = draw_uniform_gap(spec.n_targets, spec.side_dim, &mut rng);

    let ground_truth = match spec.kind {
        GenKind::S => {
            let tau = draw_uniform_gap(spec.n_features, spec.anchors, &mut rng);
            let mu = draw_uniform_gap(spec.anchors, spec.side_dim, &mut rng);
            let beta = draw_gap_value(&mut rng);
            let delta = if rng.gen_bool(0.5) {
                Distance::Manhattan
            } else {
                Distance::Euclidean
            };
            GroundTruth::S(SGroundTruth {
                tau,
                mu,
                delta,
                similarity: spec.s_similarity,
                beta,
            })
        }
        GenKind::R => {
            let gamma = draw_uniform_gap(spec.n_features, spec.side_dim, &mut rng);
            let feature_offsets = draw_uniform_gap_vec(spec.n_features, &mut rng);
            let beta = draw_gap_value(&mut rng);
            GroundTruth::R(RGroundTruth {
                gamma,
                feature_offsets,
                beta,
            })
        }
    };

    let target_of: Vec<usize> = (0..spec.n_instances).map(|i| i % spec.n_targets).collect();

    // Per-target coefficient vectors are reused across that target's rows.
    let mut coeff = Array2::zeros((spec.n_targets, spec.n_features));
    for t in 0..spec.n_targets {
        for i in 0..spec.n_features {
            coeff[[t, i]] = match &ground_truth {
                GroundTruth::S(gt) => gt.alpha(i, s.row(t)),
                GroundTruth::R(gt) => gt.alpha(i, s.row(t)),
            };
        }
    }
    let beta = match &ground_truth {
        GroundTruth::S(gt) => gt.beta,
        GroundTruth::R(gt) => gt.beta,
    };
    let y = Array1::from_shape_fn(spec.n_instances, |i| {
        coeff.row(target_of[i]).dot(&x.row(i)) + beta
    });

    let dataset = ZeroShotDataset::new(x, s, y, target_of)?;
    Ok((dataset, ground_truth))
}

/// Writes the dataset CSVs plus a `ground_truth.json` sidecar.
pub fn save_generated(
    dataset: &ZeroShotDataset,
    spec: &GenSpec,
    ground_truth: &GroundTruth,
    dir: impl AsRef<std::path::Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    dataset.save_csv_dir(dir)?;
    let file = GroundTruthFile {
        spec: *spec,
        ground_truth: ground_truth.clone(),
    };
    let path = dir.join("ground_truth.json");
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::invalid("ground truth serialization", e.to_string()))?;
    std::fs::write(&path, json).map_err(|e| Error::io(path, e))
}

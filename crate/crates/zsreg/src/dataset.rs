//! Zero-shot task data: instance features, per-target side information and
//! the single response each instance has for its own target, plus the CSV
//! interchange format and observed/unobserved projections.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

/// A zero-shot regression dataset.
///
/// `x` holds one row per instance, `s` one row per target. Each instance
/// belongs to exactly one target (`target_of`), and `y` stores its response
/// in the same stacked order as `x`. The prediction matrix of the dense
/// presentation is recovered as: cell `(i, t)` is defined iff
/// `target_of[i] == t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroShotDataset {
    x: Array2<f64>,
    s: Array2<f64>,
    y: Array1<f64>,
    target_of: Vec<usize>,
    instance_names: Vec<String>,
    target_names: Vec<String>,
}

impl ZeroShotDataset {
    pub fn new(
        x: Array2<f64>,
        s: Array2<f64>,
        y: Array1<f64>,
        target_of: Vec<usize>,
    ) -> Result<Self> {
        Self::with_options(x, s, y, target_of, None, None, false)
    }

    /// Full constructor. `allow_duplicate_side` permits identical side
    /// information rows; with it, exact matches are handled by the SR
    /// zero-distance rule instead of diverging weights.
    pub fn with_options(
        x: Array2<f64>,
        s: Array2<f64>,
        y: Array1<f64>,
        target_of: Vec<usize>,
        instance_names: Option<Vec<String>>,
        target_names: Option<Vec<String>>,
        allow_duplicate_side: bool,
    ) -> Result<Self> {
        let n = x.nrows();
        let m = s.nrows();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                context: "dataset y",
                expected: n,
                actual: y.len(),
            });
        }
        if target_of.len() != n {
            return Err(Error::DimensionMismatch {
                context: "dataset target_of",
                expected: n,
                actual: target_of.len(),
            });
        }
        if m == 0 || n == 0 {
            return Err(Error::invalid("dataset", "need at least one instance and target"));
        }
        if x.iter().any(|v| !v.is_finite())
            || s.iter().any(|v| !v.is_finite())
            || y.iter().any(|v| !v.is_finite())
        {
            return Err(Error::invalid("dataset", "non-finite value in X, S or Y"));
        }

        let mut seen = vec![false; m];
        for (i, &t) in target_of.iter().enumerate() {
            if t >= m {
                return Err(Error::invalid(
                    "dataset",
                    format!("instance {i} assigned to target {t}, but only {m} targets exist"),
                ));
            }
            seen[t] = true;
        }
        if let Some(t) = seen.iter().position(|present| !present) {
            return Err(Error::invalid(
                "dataset",
                format!("target {t} has no instances"),
            ));
        }

        if !allow_duplicate_side {
            for a in 0..m {
                for b in a + 1..m {
                    if s.row(a) == s.row(b) {
                        return Err(Error::invalid(
                            "dataset",
                            format!(
                                "targets {a} and {b} have identical side information; \
                                 pass allow_duplicate_side to accept"
                            ),
                        ));
                    }
                }
            }
        }

        let instance_names =
            instance_names.unwrap_or_else(|| (0..n).map(|i| i.to_string()).collect());
        let target_names =
            target_names.unwrap_or_else(|| (0..m).map(|t| format!("t{t}")).collect());
        if instance_names.len() != n || target_names.len() != m {
            return Err(Error::invalid("dataset", "name lists do not match shapes"));
        }

        Ok(ZeroShotDataset {
            x,
            s,
            y,
            target_of,
            instance_names,
            target_names,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_targets(&self) -> usize {
        self.s.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn side_dim(&self) -> usize {
        self.s.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn s(&self) -> &Array2<f64> {
        &self.s
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn target_of(&self) -> &[usize] {
        &self.target_of
    }

    pub fn instance_names(&self) -> &[String] {
        &self.instance_names
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    /// Loads a dataset from the three-file CSV format.
    pub fn load_csv(
        features: impl AsRef<Path>,
        side: impl AsRef<Path>,
        targets: impl AsRef<Path>,
    ) -> Result<Self> {
        Self::load_csv_with(features, side, targets, false)
    }

    pub fn load_csv_with(
        features: impl AsRef<Path>,
        side: impl AsRef<Path>,
        targets: impl AsRef<Path>,
        allow_duplicate_side: bool,
    ) -> Result<Self> {
        let (instance_names, x) = read_matrix_csv(features.as_ref(), "instance_id")?;
        let (target_names, s) = read_matrix_csv(side.as_ref(), "target_id")?;

        let instance_index: HashMap<&str, usize> = instance_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let target_index: HashMap<&str, usize> = target_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();

        let path = targets.as_ref();
        let mut reader = csv_reader(path)?;
        let header = reader
            .headers()
            .map_err(|e| csv_to_load(path, &e))?
            .clone();
        if header.len() != 3 {
            return Err(Error::Load {
                file: path.to_path_buf(),
                line: 1,
                message: format!(
                    "expected 3 columns (instance_id, target_id, value), found {}",
                    header.len()
                ),
            });
        }

        let n = instance_names.len();
        let mut y = vec![f64::NAN; n];
        let mut target_of = vec![usize::MAX; n];
        let mut assigned_line = vec![0u64; n];
        for record in reader.records() {
            let record = record.map_err(|e| csv_to_load(path, &e))?;
            let line = record.position().map_or(0, |p| p.line());
            let instance = record.get(0).unwrap_or("");
            let target = record.get(1).unwrap_or("");
            let &i = instance_index.get(instance).ok_or_else(|| Error::Load {
                file: path.to_path_buf(),
                line,
                message: format!("unknown instance '{instance}'"),
            })?;
            let &t = target_index.get(target).ok_or_else(|| Error::Load {
                file: path.to_path_buf(),
                line,
                message: format!("unknown target '{target}'"),
            })?;
            let value: f64 = record
                .get(2)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::Load {
                    file: path.to_path_buf(),
                    line,
                    message: format!("non-numeric value '{}'", record.get(2).unwrap_or("")),
                })?;
            if target_of[i] != usize::MAX {
                let message = if target_of[i] == t {
                    format!(
                        "duplicate (instance, target) pair ('{instance}', '{target}'), \
                         first seen on line {}",
                        assigned_line[i]
                    )
                } else {
                    format!(
                        "instance '{instance}' assigned to a second target '{target}' \
                         (first assignment on line {})",
                        assigned_line[i]
                    )
                };
                return Err(Error::Load {
                    file: path.to_path_buf(),
                    line,
                    message,
                });
            }
            y[i] = value;
            target_of[i] = t;
            assigned_line[i] = line;
        }
        if let Some(i) = target_of.iter().position(|&t| t == usize::MAX) {
            return Err(Error::Load {
                file: path.to_path_buf(),
                line: 0,
                message: format!("instance '{}' has no target value", instance_names[i]),
            });
        }

        Self::with_options(
            x,
            s,
            Array1::from(y),
            target_of,
            Some(instance_names),
            Some(target_names),
            allow_duplicate_side,
        )
    }

    /// Writes the three-file CSV format. Floats are printed with the
    /// shortest representation that round-trips, so `load_csv(save_csv(d))`
    /// reproduces `d` exactly.
    pub fn save_csv(
        &self,
        features: impl AsRef<Path>,
        side: impl AsRef<Path>,
        targets: impl AsRef<Path>,
    ) -> Result<()> {
        write_matrix_csv(
            features.as_ref(),
            "instance_id",
            "x",
            &self.instance_names,
            &self.x,
        )?;
        write_matrix_csv(side.as_ref(), "target_id", "s", &self.target_names, &self.s)?;

        let path = targets.as_ref();
        let mut out = String::from("instance_id,target_id,value\n");
        for i in 0..self.n_instances() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.instance_names[i],
                self.target_names[self.target_of[i]],
                self.y[i]
            ));
        }
        write_file(path, &out)
    }

    /// Convenience: write `features.csv`, `side.csv`, `targets.csv` into a
    /// directory.
    pub fn save_csv_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.save_csv(
            dir.join("features.csv"),
            dir.join("side.csv"),
            dir.join("targets.csv"),
        )
    }

    pub fn load_csv_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Self::load_csv(
            dir.join("features.csv"),
            dir.join("side.csv"),
            dir.join("targets.csv"),
        )
    }

    /// Restricts the dataset to a validated split view. Row order follows
    /// the original dataset order on each side; blanked cells (instances
    /// whose target sits on the other side of the split) are excluded by
    /// the view's own validity.
    pub fn project(&self, view: &SplitView) -> Result<Projection> {
        view.validate(self)?;
        Ok(Projection {
            observed: self.slice_view(&view.observed_targets, &view.observed_instances),
            unobserved: self.slice_view(&view.unobserved_targets, &view.unobserved_instances),
        })
    }

    fn slice_view(&self, target_ids: &[usize], instance_ids: &[usize]) -> TaskView {
        let mut target_ids = target_ids.to_vec();
        target_ids.sort_unstable();
        let mut instance_ids = instance_ids.to_vec();
        instance_ids.sort_unstable();

        let local_target: HashMap<usize, usize> = target_ids
            .iter()
            .enumerate()
            .map(|(local, &t)| (t, local))
            .collect();
        let x = self.x.select(Axis(0), &instance_ids);
        let y = self.y.select(Axis(0), &instance_ids);
        let s = self.s.select(Axis(0), &target_ids);
        let target_of = instance_ids
            .iter()
            .map(|&i| local_target[&self.target_of[i]])
            .collect();
        TaskView {
            x,
            y,
            s,
            target_of,
            target_ids,
            instance_ids,
        }
    }
}

/// A consistent observed/unobserved split of targets and instances.
///
/// Instances whose target lies on the other side of the split belong to
/// neither list: those are the blanked cells of the prediction matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitView {
    pub observed_targets: Vec<usize>,
    pub unobserved_targets: Vec<usize>,
    pub observed_instances: Vec<usize>,
    pub unobserved_instances: Vec<usize>,
}

impl SplitView {
    /// A view derived from a target split alone: every instance follows its
    /// target's side.
    pub fn from_target_split(
        dataset: &ZeroShotDataset,
        observed_targets: Vec<usize>,
        unobserved_targets: Vec<usize>,
    ) -> Self {
        let on_observed: Vec<bool> = {
            let mut mask = vec![false; dataset.n_targets()];
            for &t in &observed_targets {
                mask[t] = true;
            }
            mask
        };
        let on_unobserved: Vec<bool> = {
            let mut mask = vec![false; dataset.n_targets()];
            for &t in &unobserved_targets {
                mask[t] = true;
            }
            mask
        };
        let mut observed_instances = Vec::new();
        let mut unobserved_instances = Vec::new();
        for (i, &t) in dataset.target_of().iter().enumerate() {
            if on_observed[t] {
                observed_instances.push(i);
            } else if on_unobserved[t] {
                unobserved_instances.push(i);
            }
        }
        SplitView {
            observed_targets,
            unobserved_targets,
            observed_instances,
            unobserved_instances,
        }
    }

    pub fn validate(&self, dataset: &ZeroShotDataset) -> Result<()> {
        let m = dataset.n_targets();
        let n = dataset.n_instances();

        let mut target_side = vec![0u8; m];
        for &t in &self.observed_targets {
            if t >= m {
                return Err(Error::InvalidSplit(format!("target {t} out of range")));
            }
            if target_side[t] != 0 {
                return Err(Error::InvalidSplit(format!("target {t} listed twice")));
            }
            target_side[t] = 1;
        }
        for &t in &self.unobserved_targets {
            if t >= m {
                return Err(Error::InvalidSplit(format!("target {t} out of range")));
            }
            if target_side[t] != 0 {
                return Err(Error::InvalidSplit(format!(
                    "target {t} on both sides of the split"
                )));
            }
            target_side[t] = 2;
        }

        let mut instance_side = vec![0u8; n];
        for &i in &self.observed_instances {
            if i >= n {
                return Err(Error::InvalidSplit(format!("instance {i} out of range")));
            }
            if instance_side[i] != 0 {
                return Err(Error::InvalidSplit(format!("instance {i} listed twice")));
            }
            instance_side[i] = 1;
            if target_side[dataset.target_of()[i]] != 1 {
                return Err(Error::InvalidSplit(format!(
                    "observed instance {i} belongs to a non-observed target"
                )));
            }
        }
        for &i in &self.unobserved_instances {
            if i >= n {
                return Err(Error::InvalidSplit(format!("instance {i} out of range")));
            }
            if instance_side[i] != 0 {
                return Err(Error::InvalidSplit(format!(
                    "instance {i} on both sides of the split"
                )));
            }
            instance_side[i] = 2;
            if target_side[dataset.target_of()[i]] != 2 {
                return Err(Error::InvalidSplit(format!(
                    "unobserved instance {i} belongs to a non-unobserved target"
                )));
            }
        }
        Ok(())
    }
}

/// One side of a projected split: submatrices in original row order, with
/// target indices remapped to local `s` rows.
#[derive(Debug, Clone)]
pub struct TaskView {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub s: Array2<f64>,
    /// Local target index (row of `s`) for each row of `x`.
    pub target_of: Vec<usize>,
    /// Original dataset target index for each row of `s`.
    pub target_ids: Vec<usize>,
    /// Original dataset instance index for each row of `x`.
    pub instance_ids: Vec<usize>,
}

impl TaskView {
    pub fn n_targets(&self) -> usize {
        self.s.nrows()
    }

    pub fn n_instances(&self) -> usize {
        self.x.nrows()
    }
}

/// Both sides of a split.
#[derive(Debug, Clone)]
pub struct Projection {
    pub observed: TaskView,
    pub unobserved: TaskView,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_to_load(path: &Path, err: &csv::Error) -> Error {
    let line = match err.kind() {
        csv::ErrorKind::UnequalLengths { pos, .. } => pos.as_ref().map_or(0, |p| p.line()),
        _ => err.position().map_or(0, |p| p.line()),
    };
    Error::Load {
        file: path.to_path_buf(),
        line,
        message: match err.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                format!("ragged row: expected {expected_len} fields, found {len}")
            }
            _ => err.to_string(),
        },
    }
}

/// Reads an id column plus numeric columns. Returns ids in file order and
/// the dense value matrix.
fn read_matrix_csv(path: &Path, id_column: &str) -> Result<(Vec<String>, Array2<f64>)> {
    let mut reader = csv_reader(path)?;
    let header = reader
        .headers()
        .map_err(|e| csv_to_load(path, &e))?
        .clone();
    if header.is_empty() {
        return Err(Error::Load {
            file: path.to_path_buf(),
            line: 1,
            message: format!("missing header row (expected '{id_column}', …)"),
        });
    }
    let width = header.len() - 1;

    let mut names = Vec::new();
    let mut values = Vec::new();
    let mut seen = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_to_load(path, &e))?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(0).unwrap_or("").to_string();
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(Error::Load {
                file: path.to_path_buf(),
                line,
                message: format!("duplicate id '{id}' (first seen on line {first})"),
            });
        }
        for field in record.iter().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Load {
                file: path.to_path_buf(),
                line,
                message: format!("non-numeric cell '{field}'"),
            })?;
            values.push(v);
        }
        names.push(id);
    }
    if names.is_empty() {
        return Err(Error::Load {
            file: path.to_path_buf(),
            line: 1,
            message: "no data rows".into(),
        });
    }
    let matrix = Array2::from_shape_vec((names.len(), width), values)
        .expect("row width enforced by the csv reader");
    Ok((names, matrix))
}

fn write_matrix_csv(
    path: &Path,
    id_column: &str,
    prefix: &str,
    names: &[String],
    matrix: &Array2<f64>,
) -> Result<()> {
    let mut out = String::new();
    out.push_str(id_column);
    for j in 0..matrix.ncols() {
        out.push_str(&format!(",{prefix}{j}"));
    }
    out.push('\n');
    for (name, row) in names.iter().zip(matrix.rows()) {
        out.push_str(name);
        for v in row.iter() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(content.as_bytes())
        .map_err(|e| Error::io(path, e))
}

//! Config-driven experiment runner: materializes datasets, evaluates every
//! (dataset × learner × method) cell under the consistent CV protocol, and
//! writes score, rank and significance reports.
//!
//! Runs are resumable: `scores.csv` starts with a comment line carrying the
//! SHA-256 of the config file, and re-invocations with the same config skip
//! every cell whose row already exists.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{array, Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::ZeroShotDataset;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, make_plan_with, ScoreRecord};
use crate::learners::{LearnerFamily, RegressorSpec};
use crate::methods::{Distance, MethodSpec, Neighbors, SrConfig};
use crate::seeding::derive_seed;
use crate::stats::{friedman, nemenyi_cd, rank_rows, wilcoxon_signed_rank, RankTable};
use crate::synth::{generate, save_generated, GenKind, GenSpec};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Resolved relative to the config file's directory.
    pub output_dir: PathBuf,
    #[serde(default)]
    pub cv: CvConfig,
    pub datasets: Vec<DatasetConfig>,
    pub methods: Vec<MethodConfig>,
    pub learners: Vec<LearnerConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    #[serde(default = "three")]
    pub folds: usize,
    #[serde(default = "three")]
    pub repetitions: usize,
}

fn three() -> usize {
    3
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 3,
            repetitions: 3,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Display name; defaults to the generator name or the load directory.
    pub name: Option<String>,
    pub generate: Option<GenerateConfig>,
    pub load: Option<LoadConfig>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub kind: GenKind,
    pub targets: usize,
    pub side: usize,
    pub instances: Option<usize>,
    pub features: Option<usize>,
    pub anchors: Option<usize>,
    /// Defaults to a seed derived from the experiment seed and the dataset's
    /// position.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    pub features: PathBuf,
    pub side: PathBuf,
    pub targets: PathBuf,
    #[serde(default)]
    pub allow_duplicate_side: bool,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: MethodKindConfig,
    pub distance: Option<Distance>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKindConfig {
    Baseline,
    Sr,
    Mplc,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub family: LearnerFamily,
    pub grid: Option<Vec<f64>>,
    pub inner_folds: Option<usize>,
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    #[serde(default)]
    pub standardize: bool,
}

impl MethodConfig {
    pub fn to_spec(&self) -> Result<MethodSpec> {
        match self.kind {
            MethodKindConfig::Baseline | MethodKindConfig::Mplc => {
                if self.distance.is_some() || self.k.is_some() {
                    return Err(Error::Config(format!(
                        "method {:?} takes no distance/k settings",
                        self.kind
                    )));
                }
                Ok(if self.kind == MethodKindConfig::Baseline {
                    MethodSpec::Baseline
                } else {
                    MethodSpec::Mplc
                })
            }
            MethodKindConfig::Sr => {
                let distance = self.distance.ok_or_else(|| {
                    Error::Config("method 'sr' requires a distance (manhattan|euclidean)".into())
                })?;
                let k = match self.k {
                    None => Neighbors::All,
                    Some(k) => Neighbors::K(k),
                };
                Ok(MethodSpec::Sr(SrConfig { distance, k }))
            }
        }
    }
}

impl LearnerConfig {
    pub fn to_spec(&self) -> Result<RegressorSpec> {
        let mut spec = match self.family {
            LearnerFamily::Ridge => RegressorSpec::ridge(),
            LearnerFamily::EpsilonInsensitive => RegressorSpec::eps_insensitive(),
        };
        if let Some(grid) = &self.grid {
            spec.grid = grid.clone();
        }
        if let Some(folds) = self.inner_folds {
            spec.inner_folds = folds;
        }
        if let Some(eps) = self.epsilon {
            spec.epsilon = eps;
        }
        if let Some(iters) = self.max_iter {
            spec.max_iter = iters;
        }
        if let Some(tol) = self.tol {
            spec.tol = tol;
        }
        spec.standardize = self.standardize;
        spec.validate()?;
        Ok(spec)
    }
}

impl ExperimentConfig {
    /// Parses and validates a config file. Syntax errors keep toml's
    /// line/column anchors.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))?;
        config.validate()?;
        let hash = hex_digest(&text);
        Ok((config, hash))
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("no datasets configured".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods configured".into()));
        }
        if self.learners.is_empty() {
            return Err(Error::Config("no learners configured".into()));
        }
        if self.cv.folds < 2 {
            return Err(Error::Config("cv.folds must be at least 2".into()));
        }
        if self.cv.repetitions == 0 {
            return Err(Error::Config("cv.repetitions must be at least 1".into()));
        }
        for (i, d) in self.datasets.iter().enumerate() {
            match (&d.generate, &d.load) {
                (Some(_), Some(_)) => {
                    return Err(Error::Config(format!(
                        "dataset {i}: give either 'generate' or 'load', not both"
                    )))
                }
                (None, None) => {
                    return Err(Error::Config(format!(
                        "dataset {i}: needs a 'generate' or 'load' section"
                    )))
                }
                _ => {}
            }
        }
        for m in &self.methods {
            m.to_spec()?;
        }
        for l in &self.learners {
            l.to_spec()?;
        }
        Ok(())
    }

    pub fn dataset_name(&self, index: usize) -> String {
        let d = &self.datasets[index];
        if let Some(name) = &d.name {
            return name.clone();
        }
        if let Some(g) = &d.generate {
            return self.gen_spec(index, g).name();
        }
        if let Some(l) = &d.load {
            if let Some(stem) = l.targets.parent().and_then(|p| p.file_name()) {
                return stem.to_string_lossy().into_owned();
            }
        }
        format!("dataset{index}")
    }

    fn gen_spec(&self, index: usize, g: &GenerateConfig) -> GenSpec {
        let mut spec = GenSpec::new(
            g.kind,
            g.targets,
            g.side,
            g.seed
                .unwrap_or_else(|| derive_seed(self.seed, 0x6765_6e00 + index as u64)),
        );
        if let Some(n) = g.instances {
            spec = spec.with_instances(n);
        }
        if let Some(ax) = g.features {
            spec = spec.with_features(ax);
        }
        if let Some(d) = g.anchors {
            spec.anchors = d;
        }
        spec
    }
}

fn hex_digest(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Result of a full run.
#[derive(Debug)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub completed: usize,
    pub skipped: usize,
    pub failures: Vec<String>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            2
        }
    }
}

/// Runs a config file end to end. Relative paths inside the config are
/// resolved against the config file's directory. Failing cells are logged
/// and skipped; the run continues.
pub fn run(config_path: &Path) -> Result<RunReport> {
    let (config, hash) = ExperimentConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let output_dir = base.join(&config.output_dir);
    std::fs::create_dir_all(&output_dir).map_err(|e| Error::io(&output_dir, e))?;

    let scores_path = output_dir.join("scores.csv");
    let existing = read_scores_if_hash_matches(&scores_path, &hash)?;
    let mut skipped = 0usize;
    let mut completed = 0usize;
    let mut failures: Vec<String> = Vec::new();
    let mut records: Vec<ScoreRecord> = Vec::new();

    let methods: Vec<(MethodSpec, String)> = config
        .methods
        .iter()
        .map(|m| m.to_spec().map(|s| (s, s.name())))
        .collect::<Result<_>>()?;
    let learners: Vec<(RegressorSpec, String)> = config
        .learners
        .iter()
        .map(|l| {
            l.to_spec().map(|s| {
                let name = s.family.name().to_string();
                (s, name)
            })
        })
        .collect::<Result<_>>()?;

    for (di, dataset_config) in config.datasets.iter().enumerate() {
        let name = config.dataset_name(di);
        let materialized = materialize(&config, di, dataset_config, base).and_then(|d| {
            let plan = make_plan_with(
                &d,
                derive_seed(config.seed, 0x706c_616e + di as u64),
                config.cv.folds,
                config.cv.repetitions,
            )?;
            Ok((d, plan))
        });
        let (dataset, plan) = match materialized {
            Ok(pair) => pair,
            Err(e) => {
                failures.push(format!("dataset {name}: {e}"));
                continue;
            }
        };

        for (learner, learner_name) in &learners {
            for (method, method_name) in &methods {
                let key = (name.clone(), method_name.clone(), learner_name.clone());
                if let Some(record) = existing.get(&key) {
                    records.push(record.clone());
                    skipped += 1;
                    continue;
                }
                match evaluate(&dataset, &name, method, learner, &plan) {
                    Ok(record) => {
                        records.push(record);
                        completed += 1;
                    }
                    Err(e) => failures.push(e.to_string()),
                }
            }
        }
    }

    write_scores_csv(&scores_path, &hash, &records)?;
    write_reports(&output_dir, &records, &methods, &learners)?;

    let log = output_dir.join("errors.log");
    if failures.is_empty() {
        if log.exists() {
            let _ = std::fs::remove_file(&log);
        }
    } else {
        std::fs::write(&log, failures.join("\n") + "\n").map_err(|e| Error::io(&log, e))?;
    }

    Ok(RunReport {
        output_dir,
        completed,
        skipped,
        failures,
    })
}

fn materialize(
    config: &ExperimentConfig,
    index: usize,
    dataset: &DatasetConfig,
    base: &Path,
) -> Result<ZeroShotDataset> {
    if let Some(g) = &dataset.generate {
        let spec = config.gen_spec(index, g);
        return Ok(generate(&spec)?.0);
    }
    let l = dataset.load.as_ref().expect("validated");
    ZeroShotDataset::load_csv_with(
        base.join(&l.features),
        base.join(&l.side),
        base.join(&l.targets),
        l.allow_duplicate_side,
    )
}

fn score_key(r: &ScoreRecord) -> (String, String, String) {
    (
        r.dataset_name.clone(),
        r.method_name.clone(),
        r.base_learner.clone(),
    )
}

fn read_scores_if_hash_matches(
    path: &Path,
    hash: &str,
) -> Result<HashMap<(String, String, String), ScoreRecord>> {
    let mut map = HashMap::new();
    let Ok(text) = std::fs::read_to_string(path) else {
        return Ok(map);
    };
    let Some(first) = text.lines().next() else {
        return Ok(map);
    };
    if first.trim() != format!("# config={hash}") {
        return Ok(map);
    }
    for record in parse_scores(&text)? {
        map.insert(score_key(&record), record);
    }
    Ok(map)
}

/// Parses the body of a `scores.csv` (ignoring `#` comment lines).
pub fn parse_scores(text: &str) -> Result<Vec<ScoreRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Config(format!("scores.csv: {e}")))?;
        if row.len() != 6 {
            return Err(Error::Config(format!(
                "scores.csv: expected 6 fields, found {}",
                row.len()
            )));
        }
        let parse_list = |field: &str| -> Result<Vec<f64>> {
            if field.is_empty() {
                return Ok(Vec::new());
            }
            field
                .split(';')
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Config(format!("scores.csv: bad number '{v}'")))
                })
                .collect()
        };
        records.push(ScoreRecord {
            dataset_name: row[0].to_string(),
            method_name: row[1].to_string(),
            base_learner: row[2].to_string(),
            relative_mse: row[3]
                .parse()
                .map_err(|_| Error::Config(format!("scores.csv: bad number '{}'", &row[3])))?,
            per_fold_mse: parse_list(&row[4])?,
            per_fold_default_mse: parse_list(&row[5])?,
        });
    }
    Ok(records)
}

fn write_scores_csv(path: &Path, hash: &str, records: &[ScoreRecord]) -> Result<()> {
    let mut buffer = Vec::new();
    buffer.extend_from_slice(format!("# config={hash}\n").as_bytes());
    {
        let mut writer = csv::Writer::from_writer(&mut buffer);
        writer
            .write_record([
                "dataset",
                "method",
                "learner",
                "relative_mse",
                "fold_mses",
                "fold_default_mses",
            ])
            .and_then(|_| {
                for r in records {
                    let fold = join_floats(&r.per_fold_mse);
                    let fold_default = join_floats(&r.per_fold_default_mse);
                    writer.write_record([
                        r.dataset_name.as_str(),
                        r.method_name.as_str(),
                        r.base_learner.as_str(),
                        &format!("{}", r.relative_mse),
                        &fold,
                        &fold_default,
                    ])?;
                }
                writer.flush()
            })
            .map_err(|e| Error::Config(format!("writing scores.csv: {e}")))?;
    }
    std::fs::write(path, buffer).map_err(|e| Error::io(path, e))
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// Builds the per-learner rank table over complete dataset rows.
fn learner_rank_table(
    records: &[ScoreRecord],
    learner: &str,
    dataset_order: &[String],
    method_order: &[String],
) -> Option<RankTable> {
    let by_key: HashMap<(&str, &str), f64> = records
        .iter()
        .filter(|r| r.base_learner == learner)
        .map(|r| {
            (
                (r.dataset_name.as_str(), r.method_name.as_str()),
                r.relative_mse,
            )
        })
        .collect();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for dataset in dataset_order {
        let row: Option<Vec<f64>> = method_order
            .iter()
            .map(|m| by_key.get(&(dataset.as_str(), m.as_str())).copied())
            .collect();
        if let Some(row) = row {
            rows.push(row);
            labels.push(dataset.clone());
        }
    }
    if rows.is_empty() {
        return None;
    }
    let scores = Array2::from_shape_vec(
        (rows.len(), method_order.len()),
        rows.into_iter().flatten().collect(),
    )
    .expect("rectangular by construction");
    Some(rank_rows(&scores).with_labels(labels, method_order.to_vec()))
}

fn ordered_unique(values: impl Iterator<Item = String>) -> Vec<String> {
    let mut seen = Vec::new();
    for v in values {
        if !seen.contains(&v) {
            seen.push(v);
        }
    }
    seen
}

/// Pools per-dataset pairwise ranks (1 vs 2) across every learner table for
/// one method pair.
fn pooled_pair_ranks(
    tables: &[(String, RankTable)],
    a: usize,
    b: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut ranks_a = Vec::new();
    let mut ranks_b = Vec::new();
    for (_, table) in tables {
        for i in 0..table.raw_scores.nrows() {
            let pair = rank_rows(&array![[table.raw_scores[[i, a]], table.raw_scores[[i, b]]]]);
            ranks_a.push(pair.ranks[[0, 0]]);
            ranks_b.push(pair.ranks[[0, 1]]);
        }
    }
    (ranks_a, ranks_b)
}

/// Writes ranks.csv, friedman.txt, wilcoxon.csv and report.md from a set of
/// score records. Dataset/method/learner orderings follow the given lists
/// when present, or first appearance in `records` otherwise.
pub fn write_reports(
    output_dir: &Path,
    records: &[ScoreRecord],
    methods: &[(MethodSpec, String)],
    learners: &[(RegressorSpec, String)],
) -> Result<()> {
    let dataset_order = ordered_unique(records.iter().map(|r| r.dataset_name.clone()));
    let method_order = if methods.is_empty() {
        ordered_unique(records.iter().map(|r| r.method_name.clone()))
    } else {
        methods.iter().map(|(_, n)| n.clone()).collect()
    };
    let learner_order = if learners.is_empty() {
        ordered_unique(records.iter().map(|r| r.base_learner.clone()))
    } else {
        learners.iter().map(|(_, n)| n.clone()).collect()
    };

    let tables: Vec<(String, RankTable)> = learner_order
        .iter()
        .filter_map(|l| {
            learner_rank_table(records, l, &dataset_order, &method_order).map(|t| (l.clone(), t))
        })
        .collect();

    write_ranks_csv(&output_dir.join("ranks.csv"), &tables)?;
    write_friedman_txt(&output_dir.join("friedman.txt"), &tables)?;
    write_wilcoxon_csv(&output_dir.join("wilcoxon.csv"), &tables, &method_order)?;
    write_report_md(&output_dir.join("report.md"), &tables, &method_order)
}

fn write_ranks_csv(path: &Path, tables: &[(String, RankTable)]) -> Result<()> {
    let mut buffer = Vec::new();
    {
        let mut writer = csv::Writer::from_writer(&mut buffer);
        let io_err = |e: csv::Error| Error::Config(format!("ranks.csv: {e}"));
        writer
            .write_record(["learner", "dataset", "method", "relative_mse", "rank"])
            .map_err(io_err)?;
        for (learner, table) in tables {
            for (i, dataset) in table.row_labels.iter().enumerate() {
                for (j, method) in table.col_labels.iter().enumerate() {
                    writer
                        .write_record([
                            learner.as_str(),
                            dataset.as_str(),
                            method.as_str(),
                            &format!("{:.2}", table.raw_scores[[i, j]]),
                            &format_rank(table.ranks[[i, j]]),
                        ])
                        .map_err(io_err)?;
                }
            }
            let avg = table.average_ranks();
            for (j, method) in table.col_labels.iter().enumerate() {
                writer
                    .write_record([
                        learner.as_str(),
                        "Avg. Rank",
                        method.as_str(),
                        "",
                        &format!("{:.1}", avg[j]),
                    ])
                    .map_err(io_err)?;
            }
        }
        writer.flush().map_err(|e| Error::Config(format!("ranks.csv: {e}")))?;
    }
    std::fs::write(path, buffer).map_err(|e| Error::io(path, e))
}

fn write_friedman_txt(path: &Path, tables: &[(String, RankTable)]) -> Result<()> {
    let mut out = String::new();
    for (learner, table) in tables {
        let k = table.col_labels.len();
        let n = table.row_labels.len();
        match friedman(table) {
            Ok((stat, p)) => {
                let _ = writeln!(
                    out,
                    "{learner}: Friedman chi2 = {stat:.4} (k = {k}, n = {n}), p = {p:.6}"
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{learner}: Friedman not applicable ({e})");
            }
        }
        match nemenyi_cd(k, n, 0.05) {
            Ok(cd) => {
                let _ = writeln!(out, "{learner}: Nemenyi CD(alpha=0.05) = {cd:.4}");
            }
            Err(e) => {
                let _ = writeln!(out, "{learner}: Nemenyi CD not tabulated ({e})");
            }
        }
    }
    if tables.is_empty() {
        out.push_str("no complete dataset rows; statistics skipped\n");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn write_wilcoxon_csv(
    path: &Path,
    tables: &[(String, RankTable)],
    method_order: &[String],
) -> Result<()> {
    let mut buffer = Vec::new();
    {
        let mut writer = csv::Writer::from_writer(&mut buffer);
        let io_err = |e: csv::Error| Error::Config(format!("wilcoxon.csv: {e}"));
        writer
            .write_record(["method_a", "method_b", "n_pairs", "w", "p_value"])
            .map_err(io_err)?;
        let k = method_order.len();
        for a in 0..k {
            for b in a + 1..k {
                let (ranks_a, ranks_b) = pooled_pair_ranks(tables, a, b);
                let (w, p) = match wilcoxon_signed_rank(&ranks_a, &ranks_b) {
                    Ok(r) => (format!("{}", r.w), format!("{:.6}", r.p_value)),
                    Err(_) => (String::new(), "NA".into()),
                };
                writer
                    .write_record([
                        method_order[a].as_str(),
                        method_order[b].as_str(),
                        &ranks_a.len().to_string(),
                        &w,
                        &p,
                    ])
                    .map_err(io_err)?;
            }
        }
        writer
            .flush()
            .map_err(|e| Error::Config(format!("wilcoxon.csv: {e}")))?;
    }
    std::fs::write(path, buffer).map_err(|e| Error::io(path, e))
}

fn write_report_md(
    path: &Path,
    tables: &[(String, RankTable)],
    method_order: &[String],
) -> Result<()> {
    let mut out = String::from("# Experiment report\n");
    for (learner, table) in tables {
        let _ = writeln!(out, "\n## {learner}\n");
        let mut header = String::from("| dataset |");
        let mut rule = String::from("|---|");
        for m in &table.col_labels {
            let _ = write!(header, " {m} |");
            rule.push_str("---|");
        }
        out.push_str(&header);
        out.push('\n');
        out.push_str(&rule);
        out.push('\n');
        for (i, dataset) in table.row_labels.iter().enumerate() {
            let _ = write!(out, "| {dataset} |");
            for j in 0..table.col_labels.len() {
                let _ = write!(
                    out,
                    " {:.2}({}) |",
                    table.raw_scores[[i, j]],
                    format_rank(table.ranks[[i, j]])
                );
            }
            out.push('\n');
        }
        let _ = write!(out, "| Avg. Rank |");
        for avg in table.average_ranks() {
            let _ = write!(out, " ({avg:.1}) |");
        }
        out.push('\n');
        if let Ok((stat, p)) = friedman(table) {
            let _ = writeln!(out, "\nFriedman chi2 = {stat:.4}, p = {p:.6}");
        }
        if let Ok(cd) = nemenyi_cd(table.col_labels.len(), table.row_labels.len(), 0.05) {
            let _ = writeln!(out, "Nemenyi CD(0.05) = {cd:.4}");
        }
    }

    if method_order.len() >= 2 && !tables.is_empty() {
        let _ = writeln!(out, "\n## Wilcoxon signed-rank p-values (pooled ranks)\n");
        let mut header = String::from("| |");
        let mut rule = String::from("|---|");
        for m in method_order.iter().skip(1) {
            let _ = write!(header, " {m} |");
            rule.push_str("---|");
        }
        out.push_str(&header);
        out.push('\n');
        out.push_str(&rule);
        out.push('\n');
        for a in 0..method_order.len() - 1 {
            let _ = write!(out, "| {} |", method_order[a]);
            for b in 1..method_order.len() {
                if b <= a {
                    out.push_str("  |");
                    continue;
                }
                let (ranks_a, ranks_b) = pooled_pair_ranks(tables, a, b);
                match wilcoxon_signed_rank(&ranks_a, &ranks_b) {
                    Ok(r) => {
                        let _ = write!(out, " {:.4} |", r.p_value);
                    }
                    Err(_) => {
                        let _ = write!(out, " NA |");
                    }
                }
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn format_rank(rank: f64) -> String {
    if rank.fract() == 0.0 {
        format!("{rank:.0}")
    } else {
        format!("{rank:.1}")
    }
}

/// Regenerates the report files from an existing `scores.csv`.
pub fn report_from_scores(scores_path: &Path, output_dir: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(scores_path).map_err(|e| Error::io(scores_path, e))?;
    let records = parse_scores(&text)?;
    if records.is_empty() {
        return Err(Error::Config(format!(
            "{}: no score rows",
            scores_path.display()
        )));
    }
    let dir = output_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| scores_path.parent().unwrap_or(Path::new(".")).to_path_buf());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_reports(&dir, &records, &[], &[])
}

/// The two-observed-target walkthrough dataset: the first target follows the
/// first feature, the second target the second feature, and a third target
/// (side information `(1, 1)`) holds the single probe instance
/// `x = (1.2, 1.3)` with response `x · s = 2.5`.
///
/// Within-target designs are orthogonal with zero column means, so the
/// per-target fits recover the generating weights exactly in the
/// small-regularization limit.
pub fn gen_toy() -> ZeroShotDataset {
    let x = array![
        [-2.0, 1.0],
        [-1.0, -2.0],
        [1.0, 2.0],
        [2.0, -1.0],
        [1.0, -2.0],
        [-2.0, -1.0],
        [2.0, 1.0],
        [-1.0, 2.0],
        [1.2, 1.3],
    ];
    let y = array![-2.0, -1.0, 1.0, 2.0, -2.0, -1.0, 1.0, 2.0, 2.5];
    let target_of = vec![0, 0, 0, 0, 1, 1, 1, 1, 2];
    let s = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
    let target_names = vec!["t1".to_string(), "t2".to_string(), "tu".to_string()];
    let instance_names = (0..9).map(|i| i.to_string()).collect();
    ZeroShotDataset::with_options(
        x,
        s,
        y,
        target_of,
        Some(instance_names),
        Some(target_names),
        false,
    )
    .expect("toy dataset is valid")
}

/// Writes the toy dataset as CSV files into `dir`.
pub fn write_toy(dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    gen_toy().save_csv_dir(dir)
}

/// Generates a dataset and writes it plus its ground-truth sidecar to `dir`.
pub fn write_generated(spec: &GenSpec, dir: impl AsRef<Path>) -> Result<()> {
    let (dataset, ground_truth) = generate(spec)?;
    save_generated(&dataset, spec, &ground_truth, dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::make_plan;

    #[test]
    fn toy_dataset_checks_out() {
        let d = gen_toy();
        assert_eq!(d.n_instances(), 9);
        assert_eq!(d.n_targets(), 3);
        // The probe response equals the product relation x . s.
        assert!((d.y()[8] - (1.2 * 1.0 + 1.3 * 1.0)).abs() < 1e-12);
        assert!((d.y()[8] - 2.5).abs() < 1e-12);
        assert!(make_plan(&d, 0).is_ok());
    }

    #[test]
    fn toy_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        write_toy(dir.path()).unwrap();
        let back = ZeroShotDataset::load_csv_dir(dir.path()).unwrap();
        assert_eq!(back, gen_toy());
    }

    #[test]
    fn config_rejects_missing_sections() {
        let text = "seed = 1\noutput_dir = 'out'\ndatasets = []\nmethods = []\nlearners = []\n";
        let config: ExperimentConfig = toml::from_str(text).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn config_parse_error_carries_location() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "seed = 1\noutput_dir = [broken\n").unwrap();
        let err = ExperimentConfig::load(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn sr_method_requires_distance() {
        let m = MethodConfig {
            kind: MethodKindConfig::Sr,
            distance: None,
            k: None,
        };
        assert!(m.to_spec().is_err());
    }

    fn record(dataset: &str, method: &str, score: f64) -> ScoreRecord {
        ScoreRecord {
            dataset_name: dataset.into(),
            method_name: method.into(),
            base_learner: "ridge".into(),
            relative_mse: score,
            per_fold_mse: vec![score],
            per_fold_default_mse: vec![100.0],
        }
    }

    #[test]
    fn rank_table_average_row_equals_column_means() {
        let records = vec![
            record("a", "m1", 10.0),
            record("a", "m2", 20.0),
            record("b", "m1", 5.0),
            record("b", "m2", 1.0),
        ];
        let table = learner_rank_table(
            &records,
            "ridge",
            &["a".into(), "b".into()],
            &["m1".into(), "m2".into()],
        )
        .unwrap();
        for i in 0..2 {
            let sum: f64 = table.ranks.row(i).sum();
            assert_eq!(sum, 3.0); // k(k+1)/2 with k = 2
        }
        assert_eq!(table.average_ranks(), vec![1.5, 1.5]);
    }

    #[test]
    fn incomplete_dataset_rows_are_dropped_from_stats() {
        let records = vec![
            record("a", "m1", 10.0),
            record("a", "m2", 20.0),
            record("b", "m1", 5.0), // m2 missing for b
        ];
        let table = learner_rank_table(
            &records,
            "ridge",
            &["a".into(), "b".into()],
            &["m1".into(), "m2".into()],
        )
        .unwrap();
        assert_eq!(table.row_labels, vec!["a".to_string()]);
    }

    #[test]
    fn scores_csv_round_trips() {
        let records = vec![
            record("S^{5,5}", "SR (Manhattan)", 12.345678901234),
            record("R^{10,25}", "MPLC", 0.0625),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        write_scores_csv(&path, "deadbeef", &records).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# config=deadbeef\n"));
        let back = parse_scores(&text).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn toy_methods_hit_the_reference_predictions() {
        // End-to-end on the toy: SR averages to 1.25, MPLC recovers 2.5,
        // the baseline stays far from the true value.
        let d = gen_toy();
        let view = crate::dataset::SplitView::from_target_split(&d, vec![0, 1], vec![2]);
        let projection = d.project(&view).unwrap();
        let observed = &projection.observed;
        let learner = RegressorSpec::ridge().with_grid(vec![1e-8, 1e-4, 1e-2]);

        let models = crate::methods::fit_per_target(
            &observed.x,
            &observed.y,
            &observed.target_of,
            observed.n_targets(),
            &learner,
            0,
        )
        .unwrap();
        let x_new = projection.unobserved.x.row(0);
        let s_new = projection.unobserved.s.row(0);

        for distance in [Distance::Manhattan, Distance::Euclidean] {
            let sr = crate::methods::sr_predict(
                &models,
                &observed.s,
                s_new,
                x_new,
                &SrConfig::new(distance),
            )
            .unwrap();
            assert!((sr - 1.25).abs() < 0.01, "SR {sr}");
        }

        let g = crate::methods::fit_mplc(&models, &observed.s, &learner, 1).unwrap();
        let mplc = crate::methods::mplc_predict(&g, s_new, x_new).unwrap();
        assert!((mplc - 2.5).abs() < 0.01, "MPLC {mplc}");

        let baseline = crate::methods::fit_baseline(
            &observed.x,
            &observed.s,
            &observed.y,
            &observed.target_of,
            &learner,
            2,
        )
        .unwrap();
        let mut joined = Array1::zeros(4);
        joined.slice_mut(ndarray::s![..2]).assign(&x_new);
        joined.slice_mut(ndarray::s![2..]).assign(&s_new);
        let base_pred = baseline.predict_one(joined.view());
        assert!((base_pred - 2.5).abs() > 0.5, "baseline {base_pred}");
    }
}

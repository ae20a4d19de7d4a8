//! Rank-based comparison statistics: per-dataset ranking with average ties,
//! the Friedman test, the Nemenyi critical difference, and the Wilcoxon
//! signed-rank test with an exact small-sample distribution.

use ndarray::Array2;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Scores and their per-row ranks (columns = methods, rows = datasets).
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub raw_scores: Array2<f64>,
    pub ranks: Array2<f64>,
}

impl RankTable {
    pub fn with_labels(mut self, rows: Vec<String>, cols: Vec<String>) -> Self {
        assert_eq!(rows.len(), self.raw_scores.nrows());
        assert_eq!(cols.len(), self.raw_scores.ncols());
        self.row_labels = rows;
        self.col_labels = cols;
        self
    }

    /// Column means of the ranks, the paper-style "Avg. Rank" row.
    pub fn average_ranks(&self) -> Vec<f64> {
        let n = self.ranks.nrows() as f64;
        (0..self.ranks.ncols())
            .map(|j| self.ranks.column(j).sum() / n)
            .collect()
    }
}

/// Ranks each row: rank 1 goes to the smallest score, ties share the
/// average of the positions they occupy.
pub fn rank_rows(scores: &Array2<f64>) -> RankTable {
    let mut ranks = Array2::zeros(scores.dim());
    for (row, mut out) in scores.rows().into_iter().zip(ranks.rows_mut()) {
        let k = row.len();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
        let mut pos = 0;
        while pos < k {
            let mut end = pos + 1;
            while end < k && row[order[end]] == row[order[pos]] {
                end += 1;
            }
            // Positions pos..end (0-based) share the average 1-based rank.
            let avg = (pos + end + 1) as f64 / 2.0;
            for &col in &order[pos..end] {
                out[col] = avg;
            }
            pos = end;
        }
    }
    RankTable {
        row_labels: vec![String::new(); scores.nrows()],
        col_labels: vec![String::new(); scores.ncols()],
        raw_scores: scores.clone(),
        ranks,
    }
}

/// Friedman chi-square test over a rank table:
/// `chi2 = 12 n / (k (k+1)) * sum_j (Rbar_j - (k+1)/2)^2`, with a
/// chi-square reference distribution on `k - 1` degrees of freedom.
pub fn friedman(table: &RankTable) -> Result<(f64, f64)> {
    let n = table.ranks.nrows();
    let k = table.ranks.ncols();
    if n < 2 || k < 2 {
        return Err(Error::invalid(
            "friedman",
            format!("need at least 2 rows and 2 columns, have {n}x{k}"),
        ));
    }
    let expected = (k as f64 + 1.0) / 2.0;
    let spread: f64 = (0..k)
        .map(|j| {
            let mean = table.ranks.column(j).sum() / n as f64;
            (mean - expected) * (mean - expected)
        })
        .sum();
    let statistic = 12.0 * n as f64 / (k as f64 * (k as f64 + 1.0)) * spread;

    let p_value = if statistic <= 0.0 {
        1.0
    } else {
        let chi = ChiSquared::new((k - 1) as f64)
            .map_err(|e| Error::invalid("friedman", e.to_string()))?;
        1.0 - chi.cdf(statistic)
    };
    Ok((statistic, p_value))
}

// Studentized-range-based q values for the Nemenyi test at alpha = 0.05 and
// alpha = 0.10, for k = 2..=10 methods.
const NEMENYI_Q_05: [f64; 9] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164,
];
const NEMENYI_Q_10: [f64; 9] = [
    1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920,
];

/// Critical difference of average ranks:
/// `CD = q_alpha(k) * sqrt(k (k+1) / (6 n))`.
pub fn nemenyi_cd(k: usize, n: usize, alpha: f64) -> Result<f64> {
    if !(2..=10).contains(&k) {
        return Err(Error::invalid(
            "nemenyi_cd",
            format!("k = {k} outside the tabulated range 2..=10"),
        ));
    }
    if n == 0 {
        return Err(Error::invalid("nemenyi_cd", "n must be positive"));
    }
    let q = if (alpha - 0.05).abs() < 1e-12 {
        NEMENYI_Q_05[k - 2]
    } else if (alpha - 0.10).abs() < 1e-12 {
        NEMENYI_Q_10[k - 2]
    } else {
        return Err(Error::invalid(
            "nemenyi_cd",
            format!("alpha = {alpha} not tabulated (use 0.05 or 0.10)"),
        ));
    };
    Ok(q * (k as f64 * (k as f64 + 1.0) / (6.0 * n as f64)).sqrt())
}

/// Outcome of the Wilcoxon signed-rank test.
#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    /// `min(T+, T-)`.
    pub w: f64,
    pub t_plus: f64,
    pub t_minus: f64,
    pub p_value: f64,
    /// Pairs left after dropping zero differences.
    pub n_effective: usize,
}

/// Two-sided Wilcoxon signed-rank test on paired scores. Zero differences
/// are dropped; absolute differences are ranked with average ties. The
/// p-value uses the exact conditional distribution up to 25 effective
/// pairs and a tie-corrected normal approximation beyond.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "wilcoxon pairs",
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 5 {
        return Err(Error::invalid(
            "wilcoxon_signed_rank",
            format!("need at least 5 pairs, have {}", a.len()),
        ));
    }

    let diffs: Vec<f64> = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            w: 0.0,
            t_plus: 0.0,
            t_minus: 0.0,
            p_value: 1.0,
            n_effective: 0,
        });
    }

    // Rank |d| with average ties.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut ranks = vec![0.0; n];
    let mut tie_sizes = Vec::new();
    let mut pos = 0;
    while pos < n {
        let mut end = pos + 1;
        while end < n && diffs[order[end]].abs() == diffs[order[pos]].abs() {
            end += 1;
        }
        let avg = (pos + end + 1) as f64 / 2.0;
        for &i in &order[pos..end] {
            ranks[i] = avg;
        }
        tie_sizes.push(end - pos);
        pos = end;
    }

    let t_plus: f64 = diffs
        .iter()
        .zip(ranks.iter())
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let t_minus: f64 = ranks.iter().sum::<f64>() - t_plus;
    let w = t_plus.min(t_minus);

    let p_value = if n <= 25 {
        exact_p(&ranks, w)
    } else {
        normal_p(n, &tie_sizes, w)
    };

    Ok(WilcoxonResult {
        w,
        t_plus,
        t_minus,
        p_value,
        n_effective: n,
    })
}

/// Exact two-sided p-value conditioned on the observed ranks: enumerate the
/// distribution of T+ over all sign assignments by dynamic programming.
/// Ranks are half-integers at worst, so doubling makes them exact indices.
pub(crate) fn exact_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    // counts[s] = number of sign assignments with doubled T+ equal to s.
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in &doubled {
        reach += r;
        for s in (0..=reach).rev() {
            if s >= r && counts[s - r] > 0.0 {
                counts[s] += counts[s - r];
            }
        }
    }
    let w2 = (w * 2.0).round() as usize;
    let below: f64 = counts.iter().take(w2.min(total) + 1).sum();
    let all: f64 = counts.iter().sum();
    (2.0 * below / all).min(1.0)
}

/// Tie-corrected normal approximation with continuity correction.
pub(crate) fn normal_p(n: usize, tie_sizes: &[usize], w: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum::<f64>()
        / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return 1.0;
    }
    // W is the smaller of the two sums, so the correction moves toward the
    // mean.
    let z = (w - mean + 0.5) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * normal.cdf(z)).min(1.0)
}

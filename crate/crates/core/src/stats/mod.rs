//! Numerical primitives shared by the corpus model, the detectors and the
//! analysis harness.
//!
//! Everything here is a pure function over slices. Nothing allocates more
//! than a sorted copy of its input.

mod ols;
mod special;

pub use ols::{ols_fit, Matrix, RegressionFit};
pub use special::{
    ln_gamma, poisson_upper_tail, regularized_gamma_p, regularized_incomplete_beta,
    student_t_two_sided_p,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
    #[error("percentile {0} outside [0, 100]")]
    POutOfRange(f64),
    #[error("q(0, 0) is undefined")]
    BothZero,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },
    #[error("{n_obs} observations cannot fit {n_params} parameters")]
    TooFewObservations { n_obs: usize, n_params: usize },
}

fn sorted_finite(values: &[f64]) -> Result<Vec<f64>, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(StatsError::InvalidInput("NaN in sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

/// Median, averaging the two central order statistics when `values` has even
/// length.
pub fn median(values: &[f64]) -> Result<f64, StatsError> {
    let sorted = sorted_finite(values)?;
    Ok(median_of_sorted(&sorted))
}

pub(crate) fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Percentile by linear interpolation between closest ranks: the value at
/// fractional position `p / 100 * (n - 1)` of the sorted sample.
pub fn percentile(values: &[f64], p: f64) -> Result<f64, StatsError> {
    Ok(percentiles(values, &[p])?[0])
}

/// Several percentiles of the same sample with a single sort.
pub fn percentiles(values: &[f64], ps: &[f64]) -> Result<Vec<f64>, StatsError> {
    if let Some(&bad) = ps.iter().find(|p| !(0.0..=100.0).contains(*p)) {
        return Err(StatsError::POutOfRange(bad));
    }
    let sorted = sorted_finite(values)?;
    Ok(ps.iter().map(|&p| percentile_of_sorted(&sorted, p)).collect())
}

fn percentile_of_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Bounded ratio sigmoid used to compare two non-negative durations.
///
/// `q(a, b) = 2 sqrt(a / b) - 2` for `a <= b` and `-q(b, a)` otherwise, so the
/// result is continuous, antisymmetric and confined to `[-2, 2]`. `q(0, x)`
/// is `-2` and `q(x, 0)` is `+2` for any `x > 0`.
pub fn q_sigmoid(a: f64, b: f64) -> Result<f64, StatsError> {
    QForm::Antisymmetric.eval(a, b)
}

/// Which branch rule the q sigmoid uses for `a > b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QForm {
    /// `-q(b, a)`: continuous at `a = b`, range `[-2, 2]`.
    #[default]
    Antisymmetric,
    /// `2 - q(b, a)`, the literal variant; jumps from 0 to 2 at `a = b` and
    /// ranges over `(2, 4]` above the diagonal. Kept for comparison runs.
    Literal,
}

impl QForm {
    pub fn eval(self, a: f64, b: f64) -> Result<f64, StatsError> {
        if !(a >= 0.0 && b >= 0.0) || a.is_infinite() || b.is_infinite() {
            return Err(StatsError::InvalidInput(format!("q({a}, {b})")));
        }
        if a == 0.0 && b == 0.0 {
            return Err(StatsError::BothZero);
        }
        let lower = |a: f64, b: f64| 2.0 * (a / b).sqrt() - 2.0;
        Ok(if a <= b {
            lower(a, b)
        } else {
            match self {
                QForm::Antisymmetric => -lower(b, a),
                QForm::Literal => 2.0 - lower(b, a),
            }
        })
    }

    /// As [`QForm::eval`], but `q(0, 0)` and invalid inputs map to 0.
    pub fn eval_or_zero(self, a: f64, b: f64) -> f64 {
        self.eval(a, b).unwrap_or(0.0)
    }
}

/// Duration-weighted moving average over time.
///
/// `spans[i]` is the `(start, end)` of item `i`. Each scored item receives the
/// duration-weighted mean of every scored item whose midpoint lies within
/// `window_s / 2` of its own midpoint. Unscored items produce `None` and are
/// skipped as neighbours. If every item in a window has zero duration the
/// plain mean is used.
pub fn smooth_time_weighted(
    spans: &[(f64, f64)],
    scores: &[Option<f64>],
    window_s: f64,
) -> Vec<Option<f64>> {
    assert_eq!(spans.len(), scores.len(), "one score per span");
    assert!(window_s > 0.0, "window must be positive");

    // (midpoint, weight, score) of scored items, ordered by midpoint.
    let mut scored: Vec<(f64, f64, f64)> = spans
        .iter()
        .zip(scores)
        .filter_map(|(&(s, e), score)| score.map(|v| (0.5 * (s + e), (e - s).max(0.0), v)))
        .collect();
    scored.sort_by(|x, y| x.0.total_cmp(&y.0));

    let half = 0.5 * window_s;
    spans
        .iter()
        .zip(scores)
        .map(|(&(s, e), score)| {
            (*score)?;
            let mid = 0.5 * (s + e);
            let lo = scored.partition_point(|x| x.0 < mid - half);
            let hi = scored.partition_point(|x| x.0 <= mid + half);
            let window = &scored[lo..hi];
            if let [only] = window {
                return Some(only.2);
            }
            let weight: f64 = window.iter().map(|x| x.1).sum();
            Some(if weight > 0.0 {
                window.iter().map(|x| x.1 * x.2).sum::<f64>() / weight
            } else {
                window.iter().map(|x| x.2).sum::<f64>() / window.len() as f64
            })
        })
        .collect()
}

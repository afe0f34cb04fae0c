use serde::{Deserialize, Serialize};

use super::special::student_t_two_sided_p;
use super::StatsError;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, data: vec![0.0; nrows * ncols] }
    }

    /// Builds a matrix from equal-length rows. `ncols` is needed to describe
    /// a matrix with no rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], ncols: usize) -> Self {
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), ncols, "ragged design row");
            data.extend_from_slice(row);
        }
        Self { nrows: rows.len(), ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, j)).collect()
    }

    /// Copy with only the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.nrows, cols.len());
        for i in 0..self.nrows {
            for (k, &j) in cols.iter().enumerate() {
                out.set(i, k, self.get(i, j));
            }
        }
        out
    }
}

/// Result of an ordinary least squares fit.
///
/// With an intercept, the first coefficient is the intercept and its label is
/// `"(intercept)"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    #[serde(default)]
    pub label: String,
    pub design_labels: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub n_obs: usize,
    pub df_resid: usize,
}

pub const INTERCEPT_LABEL: &str = "(intercept)";

/// Least squares via Householder QR, with classical t-test p-values.
///
/// A column whose component orthogonal to the preceding columns is below
/// `1e-10` of its own norm makes the design rank deficient; the error names
/// the offending column of `design` (intercept excluded).
pub fn ols_fit(
    design: &Matrix,
    response: &[f64],
    intercept: bool,
    labels: Option<&[String]>,
) -> Result<RegressionFit, StatsError> {
    let n = design.nrows();
    let k = design.ncols();
    if response.len() != n {
        return Err(StatsError::InvalidInput(format!(
            "{} responses for {} design rows",
            response.len(),
            n
        )));
    }
    if let Some(labels) = labels {
        if labels.len() != k {
            return Err(StatsError::InvalidInput(format!("{} labels for {} columns", labels.len(), k)));
        }
    }
    let p = k + usize::from(intercept);
    if n <= p {
        return Err(StatsError::TooFewObservations { n_obs: n, n_params: p });
    }
    if design.data.iter().chain(response).any(|v| !v.is_finite()) {
        return Err(StatsError::InvalidInput("non-finite value in regression data".into()));
    }

    // Column-major working copy: x[j] is column j of the full design.
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(p);
    if intercept {
        x.push(vec![1.0; n]);
    }
    for j in 0..k {
        x.push(design.column(j));
    }
    let full = x.clone();
    let col_norms: Vec<f64> = x.iter().map(|c| norm(c)).collect();
    let mut qty = response.to_vec();
    let mut r = vec![vec![0.0; p]; p];

    for j in 0..p {
        let alpha = norm(&x[j][j..]);
        if col_norms[j] == 0.0 || alpha <= 1e-10 * col_norms[j] {
            return Err(StatsError::RankDeficient { column: j - usize::from(intercept) });
        }
        // Householder vector v = x_j[j..] + sign * alpha * e_1
        let sign = if x[j][j] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = x[j][j..].to_vec();
        v[0] += sign * alpha;
        let vnorm2: f64 = v.iter().map(|a| a * a).sum();
        let reflect = |col: &mut [f64]| {
            let dot: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, a) in col.iter_mut().zip(&v) {
                *c -= f * a;
            }
        };
        for col in x.iter_mut().skip(j) {
            reflect(&mut col[j..]);
        }
        reflect(&mut qty[j..]);
        for (i, row) in r.iter_mut().enumerate().take(j + 1) {
            row[j] = x[j][i];
        }
        r[j][j] = -sign * alpha;
    }

    // Back substitution R b = Q'y.
    let mut coef = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = qty[i];
        for jj in i + 1..p {
            s -= r[i][jj] * coef[jj];
        }
        coef[i] = s / r[i][i];
    }

    let mut ss_res = 0.0;
    for i in 0..n {
        let fitted: f64 = (0..p).map(|j| full[j][i] * coef[j]).sum();
        let e = response[i] - fitted;
        ss_res += e * e;
    }
    let ss_tot = if intercept {
        let mean = response.iter().sum::<f64>() / n as f64;
        response.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>()
    } else {
        response.iter().map(|y| y * y).sum::<f64>()
    };
    let r_squared = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 0.0 };

    let df = n - p;
    let sigma2 = ss_res / df as f64;
    let r_inv = upper_triangular_inverse(&r);
    let mut std_errors = Vec::with_capacity(p);
    let mut p_values = Vec::with_capacity(p);
    for (j, &b) in coef.iter().enumerate() {
        let var: f64 = r_inv[j].iter().map(|a| a * a).sum::<f64>() * sigma2;
        let se = var.sqrt();
        std_errors.push(se);
        let pv = if se > 0.0 {
            student_t_two_sided_p(b / se, df as f64)
        } else if b == 0.0 {
            1.0
        } else {
            0.0
        };
        p_values.push(pv);
    }

    let mut design_labels = Vec::with_capacity(p);
    if intercept {
        design_labels.push(INTERCEPT_LABEL.to_string());
    }
    match labels {
        Some(l) => design_labels.extend(l.iter().cloned()),
        None => design_labels.extend((0..k).map(|j| format!("x{j}"))),
    }

    Ok(RegressionFit {
        label: String::new(),
        design_labels,
        coefficients: coef,
        std_errors,
        p_values,
        r_squared,
        n_obs: n,
        df_resid: df,
    })
}

fn norm(v: &[f64]) -> f64 {
    // scaled to avoid overflow on large columns
    let scale = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * v.iter().map(|a| (a / scale) * (a / scale)).sum::<f64>().sqrt()
}

fn upper_triangular_inverse(r: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = r.len();
    let mut inv = vec![vec![0.0; p]; p];
    for col in 0..p {
        for i in (0..=col).rev() {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in i + 1..=col {
                s -= r[i][k] * inv[k][col];
            }
            inv[i][col] = s / r[i][i];
        }
    }
    inv
}

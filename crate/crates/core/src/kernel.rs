//! Kernel PLS: the NIPALS loop carried out on a centered Gram matrix.
//!
//! The source block only enters through `K = Φ(S) Φ(S)ᵀ`. Each component's
//! score is the dominant eigenvector of `K T Tᵀ`, the Gram matrix is deflated
//! as `K ← (I − ddᵀ) K (I − ddᵀ)` and the target block as `T ← (I − ddᵀ) T`.
//! Prediction evaluates `t* = T₀ᵀ G (Uᵀ K₀ G)⁻¹ Uᵀ k*` where `k*` is the
//! centered vector of kernel values between `s*` and the training inputs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{guarded_solve, power_iteration, project_out, start_vectors};
use crate::matrix::{column_means, subtract_row, SampleMatrix};
use crate::pls::{CROSS_TOLERANCE, SCORE_TOLERANCE};

/// A positive semi-definite kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `x·y`
    Linear,
    /// `exp(−‖x − y‖² / 2σ²)`
    Rbf { sigma: f64 },
    /// `(x·y + offset)^degree`
    Polynomial { degree: u32, offset: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            KernelSpec::Rbf { sigma } => Err(Error::InvalidKernel(format!(
                "rbf width must be positive and finite, got {sigma}"
            ))),
            KernelSpec::Polynomial { degree, offset } if degree >= 1 && offset.is_finite() => {
                Ok(())
            }
            KernelSpec::Polynomial { degree, offset } => Err(Error::InvalidKernel(format!(
                "polynomial kernel needs degree >= 1 and finite offset, got {degree}, {offset}"
            ))),
        }
    }

    /// Short label used in reports, e.g. `rbf`.
    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Rbf { .. } => "rbf",
            KernelSpec::Polynomial { .. } => "polynomial",
        }
    }

    /// Constant subtracted from every kernel value before centering.
    ///
    /// Double centering cancels any constant, and evaluating the Gaussian as
    /// `expm1` keeps full relative precision when σ is much larger than the
    /// data spread.
    fn shift(&self) -> f64 {
        match self {
            KernelSpec::Rbf { .. } => 1.0,
            _ => 0.0,
        }
    }

    fn eval_shifted(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Rbf { sigma } => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * sigma * sigma)).exp_m1()
            }
            KernelSpec::Polynomial { degree, offset } => (dot(x, y) + offset).powi(degree as i32),
        }
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Evaluates `spec` on two vectors of equal length.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim("kernel argument", x.len(), y.len())?;
    Ok(spec.eval_shifted(x, y) + spec.shift())
}

/// Median of the pairwise Euclidean distances between rows.
pub fn median_heuristic(x: &SampleMatrix) -> Result<f64> {
    let m = x.as_matrix();
    let n = m.nrows();
    let mut distances = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            distances.push((m.row(i) - m.row(j)).norm());
        }
    }
    distances.retain(|&d| d > 0.0);
    if distances.is_empty() {
        return Err(Error::DegenerateInput(
            "median heuristic needs at least two distinct inputs".into(),
        ));
    }
    distances.sort_by(f64::total_cmp);
    let mid = distances.len() / 2;
    Ok(if distances.len() % 2 == 0 {
        0.5 * (distances[mid - 1] + distances[mid])
    } else {
        distances[mid]
    })
}

/// Kernel matrix without centering. Mostly useful for inspection and tests.
pub fn raw_gram(spec: &KernelSpec, x: &SampleMatrix) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let rows = rows_of(x);
    let n = rows.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        spec.eval_shifted(&rows[i], &rows[j]) + spec.shift()
    }))
}

fn rows_of(x: &SampleMatrix) -> Vec<Vec<f64>> {
    x.as_matrix()
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect()
}

/// A double-centered Gram matrix with the statistics needed to center test vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    /// Centered values.
    pub values: DMatrix<f64>,
    /// Row means of the uncentered matrix, less [`GramMatrix::shift`].
    pub row_means: DVector<f64>,
    /// Grand mean of the uncentered matrix, less [`GramMatrix::shift`].
    pub grand_mean: f64,
    /// Constant removed from kernel values before the statistics were taken.
    pub shift: f64,
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    /// Centers a vector of (shifted) kernel values against the training set.
    fn center_test(&self, k: &DVector<f64>) -> DVector<f64> {
        let mean = k.mean();
        DVector::from_fn(k.len(), |i, _| {
            k[i] - self.row_means[i] - mean + self.grand_mean
        })
    }
}

/// Double-centered Gram matrix `K − 1K/n − K1/n + 1K1/n²` of the rows of `x`.
pub fn gram(spec: &KernelSpec, x: &SampleMatrix) -> Result<GramMatrix> {
    spec.validate()?;
    let rows = rows_of(x);
    let n = rows.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = spec.eval_shifted(&rows[i], &rows[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    let row_means = column_means(&k);
    let grand_mean = row_means.mean();
    let values = DMatrix::from_fn(n, n, |i, j| {
        k[(i, j)] - row_means[i] - row_means[j] + grand_mean
    });
    Ok(GramMatrix {
        values,
        row_means,
        grand_mean,
        shift: spec.shift(),
    })
}

/// Gram deflation `K − ddᵀK − Kddᵀ + ddᵀKddᵀ` for a unit vector `d`.
pub fn deflate_gram(k: &GramMatrix, d: &DVector<f64>) -> Result<GramMatrix> {
    check_dim("deflation direction", k.size(), d.len())?;
    let norm = d.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnitVector { norm });
    }
    let mut values = k.values.clone();
    deflate_values(&mut values, d);
    Ok(GramMatrix {
        values,
        ..k.clone()
    })
}

fn deflate_values(k: &mut DMatrix<f64>, d: &DVector<f64>) {
    let kd = &*k * d;
    let dkd = d.dot(&kd);
    let n = k.nrows();
    for j in 0..n {
        for i in 0..n {
            k[(i, j)] += -d[i] * kd[j] - kd[i] * d[j] + dkd * d[i] * d[j];
        }
    }
}

/// A fitted kernel PLS regressor. Immutable once fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KplsModel {
    pub(crate) spec: KernelSpec,
    pub(crate) training_inputs: SampleMatrix,
    /// Original centered Gram matrix.
    pub(crate) k0: GramMatrix,
    /// Centered training targets.
    pub(crate) t0: DMatrix<f64>,
    pub(crate) target_mean: DVector<f64>,
    pub(crate) g: DMatrix<f64>,
    pub(crate) u: DMatrix<f64>,
    /// `d_t × n` map from a centered kernel vector to a centered target.
    pub(crate) coefficients: Option<DMatrix<f64>>,
    pub(crate) condition: f64,
}

impl KplsModel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn components(&self) -> usize {
        self.g.ncols()
    }

    pub fn training_size(&self) -> usize {
        self.training_inputs.nrows()
    }

    pub fn source_dim(&self) -> usize {
        self.training_inputs.ncols()
    }

    pub fn target_dim(&self) -> usize {
        self.t0.ncols()
    }

    pub fn scores(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn target_scores(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.k0
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    fn kernel_vector(&self, s_star: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("kpls input", self.source_dim(), s_star.len())?;
        let x = s_star.as_slice();
        let m = self.training_inputs.as_matrix();
        let mut row = vec![0.0; m.ncols()];
        let raw = DVector::from_fn(m.nrows(), |i, _| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = m[(i, j)];
            }
            self.spec.eval_shifted(&row, x)
        });
        Ok(self.k0.center_test(&raw))
    }

    pub fn predict(&self, s_star: &DVector<f64>) -> Result<DVector<f64>> {
        let coef = self.coefficients.as_ref().ok_or(Error::SingularSystem {
            condition: self.condition,
        })?;
        let k = self.kernel_vector(s_star)?;
        Ok(coef * k + &self.target_mean)
    }

    /// Predicts using only the first `k` components.
    pub fn predict_truncated(&self, s_star: &DVector<f64>, k: usize) -> Result<DVector<f64>> {
        let k = k.clamp(1, self.components());
        let kv = self.kernel_vector(s_star)?;
        let (coef, _) = kernel_coefficients(&self.k0.values, &self.t0, &self.g, &self.u, k)?;
        Ok(coef * kv + &self.target_mean)
    }
}

/// Default component count `min(n − 1, 10)`, at least one.
pub fn default_components(n: usize) -> usize {
    n.saturating_sub(1).clamp(1, 10)
}

/// Fits kernel PLS with up to `p` components.
pub fn fit_kpls(
    spec: &KernelSpec,
    s: &SampleMatrix,
    t: &SampleMatrix,
    p: usize,
) -> Result<KplsModel> {
    spec.validate()?;
    check_dim("target row count", s.nrows(), t.nrows())?;
    let n = s.nrows();
    if p == 0 || p > n {
        return Err(Error::InvalidConfig(format!(
            "component count {p} outside 1..={n}"
        )));
    }
    let k0 = gram(spec, s)?;
    let target_mean = column_means(t.as_matrix());
    let t0 = subtract_row(t.as_matrix(), &target_mean);
    let s_norm = k0.values.trace().max(0.0).sqrt();
    let t_norm = t0.norm();
    if t_norm == 0.0 {
        return Err(Error::DegenerateInput(
            "centered target block is zero".into(),
        ));
    }
    if s_norm == 0.0 {
        return Err(Error::DegenerateInput(
            "centered Gram matrix is zero".into(),
        ));
    }

    let mut kk = k0.values.clone();
    let mut tk = t0.clone();
    let mut g_cols = Vec::new();
    let mut u_cols = Vec::new();
    for _ in 0..p {
        let kt = &kk * &tk;
        let cross_sq = tk.component_mul(&kt).sum();
        let cross_norm = cross_sq.max(0.0).sqrt();
        if cross_norm <= CROSS_TOLERANCE * s_norm * t_norm {
            break;
        }
        let starts = start_vectors(tk.ncols()).map(|e| &kt * e);
        let null_tol = 1e-14 * cross_norm * cross_norm;
        let operator = &kt * tk.transpose();
        let Some(dir) = power_iteration(|v| &operator * v, starts, null_tol) else {
            break;
        };
        let c = tk.transpose() * &dir;
        let c_norm = c.norm();
        if c_norm == 0.0 {
            break;
        }
        let c = c / c_norm;
        let ktc = &kt * &c;
        let w_norm_sq = (tk.transpose() * &ktc).dot(&c);
        if !(w_norm_sq > 0.0) {
            break;
        }
        let g = ktc / w_norm_sq.sqrt();
        let g_norm = g.norm();
        if g_norm < SCORE_TOLERANCE * s_norm {
            break;
        }
        let u = &tk * &c;
        let d = &g / g_norm;
        deflate_values(&mut kk, &d);
        project_out(&mut tk, &d);
        g_cols.push(g);
        u_cols.push(u);
    }
    if g_cols.is_empty() {
        return Err(Error::DegenerateInput(
            "first latent component is degenerate".into(),
        ));
    }
    let g = DMatrix::from_columns(&g_cols);
    let u = DMatrix::from_columns(&u_cols);
    let (coefficients, condition) = match kernel_coefficients(&k0.values, &t0, &g, &u, g.ncols()) {
        Ok((coef, cond)) => (Some(coef), cond),
        Err(Error::SingularSystem { condition }) => (None, condition),
        Err(e) => return Err(e),
    };
    Ok(KplsModel {
        spec: *spec,
        training_inputs: s.clone(),
        k0,
        t0,
        target_mean,
        g,
        u,
        coefficients,
        condition,
    })
}

/// `T₀ᵀ G (Uᵀ K₀ G)⁻¹ Uᵀ` restricted to the first `k` components.
fn kernel_coefficients(
    k0: &DMatrix<f64>,
    t0: &DMatrix<f64>,
    g: &DMatrix<f64>,
    u: &DMatrix<f64>,
    k: usize,
) -> Result<(DMatrix<f64>, f64)> {
    let g = g.columns(0, k);
    let u = u.columns(0, k);
    let inner = u.transpose() * (k0 * g);
    let (solved, condition) = guarded_solve(&inner, &u.transpose())?;
    Ok((t0.transpose() * g * solved, condition))
}

/// Free-function form of [`KplsModel::predict`].
pub fn predict_kpls(model: &KplsModel, s_star: &DVector<f64>) -> Result<DVector<f64>> {
    model.predict(s_star)
}

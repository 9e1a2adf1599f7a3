//! Linear partial least squares regression by NIPALS.
//!
//! Each component is extracted in three steps: the unit weight pair `(w, c)`
//! maximizing the squared cross-covariance of `S·w` and `T·c`, the latent
//! scores `g = S·w` and `u = T·c`, and deflation of both blocks along
//! `d = g / ‖g‖`. Prediction uses the closed form
//!
//! ```text
//! t* = T₀ᵀ G (Uᵀ S₀ S₀ᵀ G)⁻¹ Uᵀ S₀ s*
//! ```
//!
//! on the centered training blocks `S₀`, `T₀`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{fix_sign, guarded_solve, power_iteration, project_out, start_vectors};
use crate::matrix::{column_means, subtract_row, SampleMatrix};

/// A component is degenerate when `‖g‖ < SCORE_TOLERANCE · ‖S₀‖_F`.
pub const SCORE_TOLERANCE: f64 = 1e-10;
/// Fitting stops once `‖SᵀT‖_F ≤ CROSS_TOLERANCE · ‖S₀‖_F ‖T₀‖_F`.
pub const CROSS_TOLERANCE: f64 = 1e-12;

/// Preprocessing options for [`fit_pls_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlsOptions {
    /// Scale centered columns to unit standard deviation.
    pub scale_columns: bool,
}

/// Column centering (and optional scaling) applied to one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnTransform {
    pub mean: DVector<f64>,
    pub scale: DVector<f64>,
}

impl ColumnTransform {
    fn fit(m: &DMatrix<f64>, scale_columns: bool) -> Self {
        let mean = column_means(m);
        let scale = if scale_columns && m.nrows() > 1 {
            let n = m.nrows() as f64;
            DVector::from_iterator(
                m.ncols(),
                m.column_iter().enumerate().map(|(j, col)| {
                    let var = col.iter().map(|x| (x - mean[j]).powi(2)).sum::<f64>() / (n - 1.0);
                    if var > 0.0 {
                        var.sqrt()
                    } else {
                        1.0
                    }
                }),
            )
        } else {
            DVector::from_element(m.ncols(), 1.0)
        };
        Self { mean, scale }
    }

    fn apply_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = subtract_row(m, &self.mean);
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col /= self.scale[j];
        }
        out
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        (x - &self.mean).component_div(&self.scale)
    }

    fn invert(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_mul(&self.scale) + &self.mean
    }
}

/// A fitted linear PLS regressor. Immutable once fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlsModel {
    /// Source scores, one column per component.
    pub(crate) g: DMatrix<f64>,
    /// Target scores.
    pub(crate) u: DMatrix<f64>,
    /// Unit source weights.
    pub(crate) w: DMatrix<f64>,
    /// Unit target weights.
    pub(crate) c: DMatrix<f64>,
    /// Unit deflation directions `g / ‖g‖`.
    pub(crate) directions: DMatrix<f64>,
    /// Centered training source block.
    pub(crate) s0: DMatrix<f64>,
    /// Centered training target block.
    pub(crate) t0: DMatrix<f64>,
    pub(crate) source_transform: ColumnTransform,
    pub(crate) target_transform: ColumnTransform,
    /// `d_t × d_s` map from transformed source to transformed target, `None`
    /// when the inner system was singular.
    pub(crate) coefficients: Option<DMatrix<f64>>,
    pub(crate) condition: f64,
}

impl PlsModel {
    pub fn components(&self) -> usize {
        self.g.ncols()
    }

    pub fn source_dim(&self) -> usize {
        self.s0.ncols()
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

    pub fn source_weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn target_weights(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    /// Condition number of the inner `p × p` system.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Predicts the target vector for `s_star`.
    pub fn predict(&self, s_star: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("pls input", self.source_dim(), s_star.len())?;
        let coef = self.coefficients.as_ref().ok_or(Error::SingularSystem {
            condition: self.condition,
        })?;
        let x = self.source_transform.apply(s_star);
        Ok(self.target_transform.invert(&(coef * x)))
    }

    /// Predicts using only the first `k` components.
    pub fn predict_truncated(&self, s_star: &DVector<f64>, k: usize) -> Result<DVector<f64>> {
        check_dim("pls input", self.source_dim(), s_star.len())?;
        let k = k.clamp(1, self.components());
        let (coef, _) = linear_coefficients(&self.s0, &self.t0, &self.g, &self.u, k)?;
        let x = self.source_transform.apply(s_star);
        Ok(self.target_transform.invert(&(coef * x)))
    }
}

fn check_pair(s: &SampleMatrix, t: &SampleMatrix) -> Result<()> {
    check_dim("target row count", s.nrows(), t.nrows())
}

fn dominant_source_weight(cross: &DMatrix<f64>, cross_norm: f64) -> Option<DVector<f64>> {
    let starts = start_vectors(cross.ncols()).map(|e| cross * e);
    let null_tol = 1e-14 * cross_norm * cross_norm;
    power_iteration(|v| cross * (cross.transpose() * v), starts, null_tol)
}

/// Unit weight pair maximizing `cov(S·w, T·c)²`.
///
/// `w` is the dominant eigenvector of `SᵀT TᵀS`, signed so that its first
/// nonzero entry is positive, and `c = TᵀS·w / ‖TᵀS·w‖`. Covariance is the
/// plain cross-product, so callers pass centered blocks.
pub fn max_cov_weights(s: &SampleMatrix, t: &SampleMatrix) -> Result<(DVector<f64>, DVector<f64>)> {
    check_pair(s, t)?;
    let (s, t) = (s.as_matrix(), t.as_matrix());
    if s.norm() == 0.0 {
        return Err(Error::DegenerateInput("source block is zero".into()));
    }
    if t.norm() == 0.0 {
        return Err(Error::DegenerateInput("target block is zero".into()));
    }
    let cross = s.transpose() * t;
    let cross_norm = cross.norm();
    if cross_norm <= CROSS_TOLERANCE * s.norm() * t.norm() {
        return Err(Error::DegenerateInput(
            "source and target blocks have no cross-covariance".into(),
        ));
    }
    let mut w = dominant_source_weight(&cross, cross_norm)
        .ok_or_else(|| Error::DegenerateInput("cross-covariance is numerically zero".into()))?;
    fix_sign(&mut w);
    let c = cross.transpose() * &w;
    let c = &c / c.norm();
    Ok((w, c))
}

/// Latent scores `g = S·w` and `u = T·c`.
pub fn latent_scores(
    s: &SampleMatrix,
    t: &SampleMatrix,
    w: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_pair(s, t)?;
    check_dim("source weight length", s.ncols(), w.len())?;
    check_dim("target weight length", t.ncols(), c.len())?;
    Ok((s.as_matrix() * w, t.as_matrix() * c))
}

/// Removes the rank-one part of `S` and `T` along `d = g / ‖g‖`.
pub fn deflate(
    s: &SampleMatrix,
    t: &SampleMatrix,
    g: &DVector<f64>,
) -> Result<(SampleMatrix, SampleMatrix)> {
    check_pair(s, t)?;
    check_dim("score length", s.nrows(), g.len())?;
    let norm = g.norm();
    let tolerance = SCORE_TOLERANCE * s.as_matrix().norm().max(f64::MIN_POSITIVE);
    if !(norm >= tolerance) {
        return Err(Error::ZeroLatentVector { norm, tolerance });
    }
    let d = g / norm;
    let mut s2 = s.as_matrix().clone();
    let mut t2 = t.as_matrix().clone();
    project_out(&mut s2, &d);
    project_out(&mut t2, &d);
    Ok((SampleMatrix::new(s2)?, SampleMatrix::new(t2)?))
}

/// Fits a PLS model with `p` components and default preprocessing (centering only).
pub fn fit_pls(s: &SampleMatrix, t: &SampleMatrix, p: usize) -> Result<PlsModel> {
    fit_pls_with(s, t, p, PlsOptions::default())
}

/// Fits a PLS model. Fewer than `p` components are returned when the data
/// runs out of covariance or the next score vanishes.
pub fn fit_pls_with(
    s: &SampleMatrix,
    t: &SampleMatrix,
    p: usize,
    options: PlsOptions,
) -> Result<PlsModel> {
    check_pair(s, t)?;
    let n = s.nrows();
    if p == 0 || p > n {
        return Err(Error::InvalidConfig(format!(
            "component count {p} outside 1..={n}"
        )));
    }
    let source_transform = ColumnTransform::fit(s.as_matrix(), options.scale_columns);
    let target_transform = ColumnTransform::fit(t.as_matrix(), options.scale_columns);
    let s0 = source_transform.apply_matrix(s.as_matrix());
    let t0 = target_transform.apply_matrix(t.as_matrix());
    let s_norm = s0.norm();
    let t_norm = t0.norm();
    if s_norm == 0.0 || t_norm == 0.0 {
        return Err(Error::DegenerateInput(
            "centered source or target block is zero".into(),
        ));
    }

    let (ds, dt) = (s0.ncols(), t0.ncols());
    let mut sk = s0.clone();
    let mut tk = t0.clone();
    let mut g_cols = Vec::new();
    let mut u_cols = Vec::new();
    let mut w_cols = Vec::new();
    let mut c_cols = Vec::new();
    let mut d_cols = Vec::new();

    for _ in 0..p {
        let cross = sk.transpose() * &tk;
        let cross_norm = cross.norm();
        if cross_norm <= CROSS_TOLERANCE * s_norm * t_norm {
            break;
        }
        let Some(mut w) = dominant_source_weight(&cross, cross_norm) else {
            break;
        };
        fix_sign(&mut w);
        let g = &sk * &w;
        let g_norm = g.norm();
        if g_norm < SCORE_TOLERANCE * s_norm {
            break;
        }
        let c = cross.transpose() * &w;
        let c = &c / c.norm();
        let u = &tk * &c;
        let d = &g / g_norm;
        project_out(&mut sk, &d);
        project_out(&mut tk, &d);
        g_cols.push(g);
        u_cols.push(u);
        w_cols.push(w);
        c_cols.push(c);
        d_cols.push(d);
    }
    if g_cols.is_empty() {
        return Err(Error::DegenerateInput(
            "first latent component is degenerate".into(),
        ));
    }

    let g = DMatrix::from_columns(&g_cols);
    let u = DMatrix::from_columns(&u_cols);
    let k = g.ncols();
    let (coefficients, condition) = match linear_coefficients(&s0, &t0, &g, &u, k) {
        Ok((coef, cond)) => (Some(coef), cond),
        Err(Error::SingularSystem { condition }) => (None, condition),
        Err(e) => return Err(e),
    };
    debug_assert_eq!(w_cols[0].len(), ds);
    debug_assert_eq!(c_cols[0].len(), dt);
    Ok(PlsModel {
        g,
        u,
        w: DMatrix::from_columns(&w_cols),
        c: DMatrix::from_columns(&c_cols),
        directions: DMatrix::from_columns(&d_cols),
        s0,
        t0,
        source_transform,
        target_transform,
        coefficients,
        condition,
    })
}

/// `T₀ᵀ G (Uᵀ S₀ S₀ᵀ G)⁻¹ Uᵀ S₀` restricted to the first `k` components.
fn linear_coefficients(
    s0: &DMatrix<f64>,
    t0: &DMatrix<f64>,
    g: &DMatrix<f64>,
    u: &DMatrix<f64>,
    k: usize,
) -> Result<(DMatrix<f64>, f64)> {
    let g = g.columns(0, k);
    let u = u.columns(0, k);
    let ut_s = u.transpose() * s0;
    let inner = &ut_s * (s0.transpose() * g);
    let (solved, condition) = guarded_solve(&inner, &ut_s)?;
    Ok((t0.transpose() * g * solved, condition))
}

/// Free-function form of [`PlsModel::predict`].
pub fn predict_pls(model: &PlsModel, s_star: &DVector<f64>) -> Result<DVector<f64>> {
    model.predict(s_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
    }

    fn sm(m: DMatrix<f64>) -> SampleMatrix {
        SampleMatrix::new(m).unwrap()
    }

    /// Singular values above `1e-10` relative to the largest.
    fn numerical_rank(m: &DMatrix<f64>) -> usize {
        let sv = m.clone().singular_values();
        let max = sv.max();
        sv.iter().filter(|&&x| x > 1e-10 * max.max(1.0)).count()
    }

    #[test]
    fn one_dimensional_weights_are_unit() {
        let s = sm(DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]));
        let (w, c) = max_cov_weights(&s, &s).unwrap();
        assert_eq!(w.as_slice(), &[1.0]);
        assert_eq!(c.as_slice(), &[1.0]);
    }

    #[test]
    fn weights_pick_the_correlated_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_matrix(&mut rng, 12, 2);
        let c_true = DVector::from_vec(vec![0.6, 0.8]);
        let col1 = &t * &c_true;
        // second column orthogonal to the whole target block
        let mut noise = random_matrix(&mut rng, 12, 1).column(0).into_owned();
        let basis = t.clone().qr().q();
        noise -= &basis * (basis.transpose() * &noise);
        noise *= 0.3;
        let s = DMatrix::from_columns(&[col1, noise]);
        let (w, _) = max_cov_weights(&sm(s.clone()), &sm(t.clone())).unwrap();
        // oracle: dense eigen-decomposition
        let m = s.transpose() * &t * t.transpose() * &s;
        let eig = m.symmetric_eigen();
        let mut v = eig.eigenvectors.column(eig.eigenvalues.imax()).into_owned();
        fix_sign(&mut v);
        assert!((&w - &v).amax() < 1e-8);
        assert!((w[0] - 1.0).abs() < 1e-6 && w[1].abs() < 1e-6);
    }

    #[test]
    fn weights_match_dense_eigenvector() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_matrix(&mut rng, 8, 4);
        let t = random_matrix(&mut rng, 8, 3);
        let (w, c) = max_cov_weights(&sm(s.clone()), &sm(t.clone())).unwrap();
        let m = s.transpose() * &t * t.transpose() * &s;
        let eig = m.symmetric_eigen();
        let mut v = eig.eigenvectors.column(eig.eigenvalues.imax()).into_owned();
        fix_sign(&mut v);
        assert!((&w - &v).amax() < 1e-8, "w={w} oracle={v}");
        assert!((w.norm() - 1.0).abs() < 1e-14);
        assert!((c.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn weight_errors() {
        let s = sm(DMatrix::from_element(3, 2, 1.0));
        let t = sm(DMatrix::from_element(4, 1, 1.0));
        assert!(matches!(
            max_cov_weights(&s, &t),
            Err(Error::DimensionMismatch { .. })
        ));
        let z = sm(DMatrix::zeros(3, 1));
        assert!(matches!(
            max_cov_weights(&s, &z),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn latent_score_hand_values() {
        let id = sm(DMatrix::identity(2, 2));
        let (g, _) = latent_scores(
            &id,
            &id,
            &DVector::from_vec(vec![1.0, 0.0]),
            &DVector::from_vec(vec![1.0, 0.0]),
        )
        .unwrap();
        assert_eq!(g.as_slice(), &[1.0, 0.0]);

        let s = sm(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let w = DVector::from_vec(vec![h, h]);
        let (g, _) = latent_scores(&s, &s, &w, &w).unwrap();
        let r2 = std::f64::consts::SQRT_2;
        assert!((g[0] - r2).abs() < 1e-15 && (g[1] - 2.0 * r2).abs() < 1e-15);
    }

    #[test]
    fn latent_scores_match_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_matrix(&mut rng, 6, 3);
        let mut w = random_matrix(&mut rng, 3, 1).column(0).into_owned();
        w /= w.norm();
        let (g, _) = latent_scores(&sm(s.clone()), &sm(s.clone()), &w, &w).unwrap();
        for i in 0..6 {
            let mut acc = 0.0;
            for j in 0..3 {
                acc += s[(i, j)] * w[j];
            }
            assert!((g[i] - acc).abs() < 1e-12);
        }
        assert!(matches!(
            latent_scores(&sm(s.clone()), &sm(s), &DVector::zeros(2), &w),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn deflation_annihilates_and_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = sm(random_matrix(&mut rng, 5, 3));
        let t = sm(random_matrix(&mut rng, 5, 2));
        let g = random_matrix(&mut rng, 5, 1).column(0).into_owned();
        let (s1, t1) = deflate(&s, &t, &g).unwrap();
        let d = &g / g.norm();
        assert!((d.transpose() * s1.as_matrix()).amax() < 1e-12);
        assert!((d.transpose() * t1.as_matrix()).amax() < 1e-12);
        let (s2, _) = deflate(&s1, &t1, &g).unwrap();
        assert!((s2.as_matrix() - s1.as_matrix()).amax() < 1e-12);
    }

    #[test]
    fn deflation_lowers_rank_for_scores_in_column_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = random_matrix(&mut rng, 7, 3);
        let g = &s * DVector::from_vec(vec![0.3, -1.0, 0.5]);
        let (s1, _) = deflate(&sm(s.clone()), &sm(s.clone()), &g).unwrap();
        assert_eq!(numerical_rank(&s), 3);
        assert_eq!(numerical_rank(s1.as_matrix()), 2);
    }

    #[test]
    fn zero_score_is_rejected() {
        let s = sm(DMatrix::identity(3, 3));
        assert!(matches!(
            deflate(&s, &s, &DVector::zeros(3)),
            Err(Error::ZeroLatentVector { .. })
        ));
    }

    #[test]
    fn exact_linear_relation_is_reproduced() {
        let s = sm(DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]));
        let t = sm(DMatrix::from_column_slice(3, 1, &[2.0, 4.0, 6.0]));
        let model = fit_pls(&s, &t, 1).unwrap();
        for i in 0..3 {
            let pred = model.predict(&s.row_vector(i)).unwrap();
            assert!((pred[0] - t.as_matrix()[(i, 0)]).abs() < 1e-10);
        }
    }

    #[test]
    fn full_components_match_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let s = random_matrix(&mut rng, 10, 5);
        let t = random_matrix(&mut rng, 10, 3);
        let model = fit_pls(&sm(s.clone()), &sm(t.clone()), 5).unwrap();
        assert_eq!(model.components(), 5);
        // oracle: normal equations on the augmented design [1 S]
        let x = DMatrix::from_fn(10, 6, |i, j| if j == 0 { 1.0 } else { s[(i, j - 1)] });
        let beta = (x.transpose() * &x)
            .cholesky()
            .unwrap()
            .solve(&(x.transpose() * &t));
        for i in 0..10 {
            let expected = (x.row(i) * &beta).transpose();
            let got = model.predict(&s.row(i).transpose()).unwrap();
            assert!((got - expected).amax() < 1e-8);
        }
    }

    #[test]
    fn rank_deficient_source_stops_early() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_matrix(&mut rng, 6, 1);
        let b = random_matrix(&mut rng, 6, 1);
        let s = DMatrix::from_columns(&[
            a.column(0).into_owned(),
            b.column(0).into_owned(),
            (a.column(0) + b.column(0)).into_owned(),
            (a.column(0) * 2.0 - b.column(0)).into_owned(),
        ]);
        let t = random_matrix(&mut rng, 6, 2);
        let model = fit_pls(&sm(s.clone()), &sm(t), 6).unwrap();
        assert!(model.components() < 6);
        assert!(model.components() <= 2);
        let pred = model.predict(&s.row(0).transpose()).unwrap();
        assert!(pred.iter().all(|x| x.is_finite()));
        assert!(model.scores().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn zero_input_on_centered_data_predicts_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let s = random_matrix(&mut rng, 9, 4);
        let s = subtract_row(&s, &column_means(&s));
        let t = random_matrix(&mut rng, 9, 2);
        let t = subtract_row(&t, &column_means(&t));
        let model = fit_pls(&sm(s), &sm(t), 3).unwrap();
        let pred = model.predict(&DVector::zeros(4)).unwrap();
        assert!(pred.amax() < 1e-10);
    }

    #[test]
    fn prediction_dimension_is_checked() {
        let s = sm(DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]));
        let model = fit_pls(&s, &s, 1).unwrap();
        assert!(matches!(
            model.predict(&DVector::zeros(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(fit_pls(&s, &s, 0).is_err());
        assert!(fit_pls(&s, &s, 4).is_err());
    }

    #[test]
    fn column_scaling_keeps_least_squares_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = random_matrix(&mut rng, 8, 2);
        s.column_mut(1).scale_mut(100.0);
        let t = &s * DMatrix::from_row_slice(2, 1, &[1.0, 0.02]);
        let model = fit_pls_with(
            &sm(s.clone()),
            &sm(t.clone()),
            2,
            PlsOptions {
                scale_columns: true,
            },
        )
        .unwrap();
        let pred = model.predict(&s.row(3).transpose()).unwrap();
        assert!((pred[0] - t[(3, 0)]).abs() < 1e-9);
    }

    #[test]
    fn fitting_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sm(random_matrix(&mut rng, 10, 4));
        let t = sm(random_matrix(&mut rng, 10, 3));
        assert_eq!(fit_pls(&s, &t, 3).unwrap(), fit_pls(&s, &t, 3).unwrap());
    }
}

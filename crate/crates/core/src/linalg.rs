//! Small dense helpers shared by the linear and kernel regressors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Successive-iterate tolerance for power iteration.
pub const POWER_TOLERANCE: f64 = 1e-12;
/// Iteration cap for power iteration.
pub const POWER_MAX_ITER: usize = 500;
/// Inner `p × p` systems with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Dominant eigenvector of the operator `apply` by power iteration.
///
/// `starts` are tried in order; a start whose normalized image has norm at
/// most `null_tol` lies in the null space and is skipped. Returns `None` when every
/// start is annihilated. The returned vector has unit norm.
pub fn power_iteration<F>(
    apply: F,
    starts: impl IntoIterator<Item = DVector<f64>>,
    null_tol: f64,
) -> Option<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    for start in starts {
        let norm = start.norm();
        if norm == 0.0 || !norm.is_finite() {
            continue;
        }
        let first = apply(&(start / norm));
        let first_norm = first.norm();
        if first_norm <= null_tol || !first_norm.is_finite() {
            continue;
        }
        let mut v = first / first_norm;
        for _ in 0..POWER_MAX_ITER {
            let next = apply(&v);
            let next_norm = next.norm();
            if next_norm <= null_tol || !next_norm.is_finite() {
                break;
            }
            let next = next / next_norm;
            let delta = (&next - &v).norm();
            v = next;
            if delta < POWER_TOLERANCE {
                break;
            }
        }
        return Some(v);
    }
    None
}

/// Canonical start vectors of dimension `dim`: the all-ones vector, then each basis vector.
pub fn start_vectors(dim: usize) -> impl Iterator<Item = DVector<f64>> {
    std::iter::once(DVector::from_element(dim, 1.0)).chain((0..dim).map(move |j| {
        let mut e = DVector::zeros(dim);
        e[j] = 1.0;
        e
    }))
}

/// Flips `v` so that its first non-negligible component is positive.
pub fn fix_sign(v: &mut DVector<f64>) {
    let scale = v.amax();
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12 * scale) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

/// 2-norm condition number of a square matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `m · x = rhs` after checking the condition of `m`.
pub fn guarded_solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let condition = condition_number(m);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    let x = m
        .clone()
        .full_piv_lu()
        .solve(rhs)
        .ok_or(Error::SingularSystem { condition })?;
    Ok((x, condition))
}

/// `(I - d dᵀ) m`, applied column by column.
pub fn project_out(m: &mut DMatrix<f64>, d: &DVector<f64>) {
    let coeffs = d.transpose() * &*m;
    m.ger(-1.0, d, &coeffs.transpose(), 1.0);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_finds_dominant_direction() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.0, 0.0, 0.0, 1.0]);
        let v = power_iteration(|x| &m * x, start_vectors(3), 0.0).unwrap();
        let eig = m.clone().symmetric_eigen();
        let imax = eig.eigenvalues.imax();
        let expected = eig.eigenvectors.column(imax).into_owned();
        assert!((v.dot(&expected).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_skips_null_start() {
        // ones is annihilated; e1 is not
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let v = power_iteration(|x| &m * x, start_vectors(2), 1e-14).unwrap();
        assert!((v[0].abs() - v[1].abs()).abs() < 1e-12);
        assert!(power_iteration(|x| x * 0.0, start_vectors(2), 0.0).is_none());
    }

    #[test]
    fn guarded_solve_rejects_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            guarded_solve(&m, &DMatrix::identity(2, 2)),
            Err(Error::SingularSystem { .. })
        ));
        let ok = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let (x, cond) = guarded_solve(&ok, &DMatrix::identity(2, 2)).unwrap();
        assert!((cond - 2.0).abs() < 1e-12);
        assert!((x[(1, 1)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sign_fix() {
        let mut v = DVector::from_vec(vec![0.0, -0.5, 0.5]);
        fix_sign(&mut v);
        assert_eq!(v.as_slice(), &[0.0, 0.5, -0.5]);
    }
}

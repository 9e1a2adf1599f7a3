//! Active-set solver for `min ½ xᵀQx − bᵀx` subject to `lo ≤ x ≤ hi`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Lower,
    Upper,
    Free,
}

/// Minimizes the box-constrained convex quadratic with Hessian `q`
/// (symmetric positive semi-definite) and linear term `b`.
///
/// Starts from the unconstrained minimizer clipped to the box (or from the
/// lower bound when `q` is singular). `tol` is the KKT tolerance on the
/// gradient, relative to the largest entry of `q` and `b`.
pub fn box_qp(q: &DMatrix<f64>, b: &DVector<f64>, lo: f64, hi: f64, tol: f64) -> DVector<f64> {
    let n = b.len();
    let (mut x, mut state) = match q.clone().cholesky() {
        Some(chol) => {
            let mut x = chol.solve(b);
            let state = x
                .iter_mut()
                .map(|xi| {
                    if *xi <= lo {
                        *xi = lo;
                        Bound::Lower
                    } else if *xi >= hi {
                        *xi = hi;
                        Bound::Upper
                    } else {
                        Bound::Free
                    }
                })
                .collect();
            (x, state)
        }
        None => (DVector::from_element(n, lo), vec![Bound::Lower; n]),
    };
    let scale = q.diagonal().amax().max(b.amax()).max(f64::MIN_POSITIVE);
    let grad_tol = tol * scale;

    for _ in 0..(20 * n + 50) {
        // minimize over the free set, stepping back onto the box when needed
        for _ in 0..=n {
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == Bound::Free).collect();
            if free.is_empty() {
                break;
            }
            let z = subspace_minimizer(q, b, &x, &free);
            let mut alpha = 1.0f64;
            let mut blocking = None;
            for (k, &i) in free.iter().enumerate() {
                let step = z[k] - x[i];
                let limit = if z[k] < lo {
                    (lo - x[i]) / step
                } else if z[k] > hi {
                    (hi - x[i]) / step
                } else {
                    continue;
                };
                let limit = limit.clamp(0.0, 1.0);
                if limit < alpha {
                    alpha = limit;
                    blocking = Some(i);
                }
            }
            for (k, &i) in free.iter().enumerate() {
                x[i] += alpha * (z[k] - x[i]);
            }
            match blocking {
                None => break,
                Some(_) => {
                    for &i in &free {
                        if x[i] <= lo + 1e-14 * (hi - lo) {
                            x[i] = lo;
                            state[i] = Bound::Lower;
                        } else if x[i] >= hi - 1e-14 * (hi - lo) {
                            x[i] = hi;
                            state[i] = Bound::Upper;
                        }
                    }
                    if let Some(i) = blocking {
                        if state[i] == Bound::Free {
                            state[i] = if z[free.iter().position(|&f| f == i).unwrap()] < lo {
                                x[i] = lo;
                                Bound::Lower
                            } else {
                                x[i] = hi;
                                Bound::Upper
                            };
                        }
                    }
                }
            }
        }

        let grad = q * &x - b;
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..n {
            let violation = match state[i] {
                Bound::Lower => -grad[i],
                Bound::Upper => grad[i],
                Bound::Free => 0.0,
            };
            if violation > grad_tol && worst.is_none_or(|(_, v)| violation > v) {
                worst = Some((i, violation));
            }
        }
        match worst {
            Some((i, _)) => state[i] = Bound::Free,
            None => return x,
        }
    }
    x
}

/// Unconstrained minimizer over `free` with the other variables held at `x`.
fn subspace_minimizer(
    q: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &DVector<f64>,
    free: &[usize],
) -> DVector<f64> {
    let m = free.len();
    let q_ff = DMatrix::from_fn(m, m, |r, c| q[(free[r], free[c])]);
    // Newton step from x within the free coordinates
    let neg_grad = b - q * x;
    let rhs = DVector::from_fn(m, |r, _| neg_grad[free[r]]);
    let x_f = DVector::from_fn(m, |r, _| x[free[r]]);
    if let Some(chol) = q_ff.clone().cholesky() {
        return x_f + chol.solve(&rhs);
    }
    // rank-deficient block: minimum-norm step
    match q_ff.svd(true, true).solve(&rhs, 1e-12) {
        Ok(step) => x_f + step,
        Err(_) => x_f,
    }
}

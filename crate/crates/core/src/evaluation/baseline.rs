//! Gaussian RBF scattered-data interpolation, used as a comparison baseline.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernel::median_heuristic;
use crate::matrix::SampleMatrix;
use crate::retarget::{
    retarget_frame, train_retargeter_with, CorrespondenceSet, FeaturePointFrame, Method,
    RetargetModel, TrainOptions,
};

/// One Gaussian interpolant per output coordinate plus a constant term:
/// `f(x) = Σᵢ αᵢ φ(‖x − cᵢ‖) + β` with `Σᵢ αᵢ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfInterpolant {
    centers: SampleMatrix,
    sigma: f64,
    /// `n × d_t`
    weights: DMatrix<f64>,
    constant: DVector<f64>,
}

impl RbfInterpolant {
    /// Interpolates `(s_i, t_i)` exactly. The width is the median pairwise
    /// distance between inputs, or 1 for a single input.
    pub fn fit(s: &SampleMatrix, t: &SampleMatrix) -> Result<Self> {
        check_dim("target row count", s.nrows(), t.nrows())?;
        let sigma = if s.nrows() == 1 {
            1.0
        } else {
            median_heuristic(s).map_err(|_| Error::SingularSystem {
                condition: f64::INFINITY,
            })?
        };
        Self::fit_with_width(s, t, sigma)
    }

    pub fn fit_with_width(s: &SampleMatrix, t: &SampleMatrix, sigma: f64) -> Result<Self> {
        check_dim("target row count", s.nrows(), t.nrows())?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidKernel(format!("rbf width {sigma}")));
        }
        let n = s.nrows();
        let x = s.as_matrix();
        let mut system = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                system[(i, j)] = gaussian((x.row(i) - x.row(j)).norm_squared(), sigma);
            }
            system[(i, n)] = 1.0;
            system[(n, i)] = 1.0;
        }
        for i in 0..n {
            for j in 0..i {
                if x.row(i) == x.row(j) {
                    return Err(Error::SingularSystem {
                        condition: f64::INFINITY,
                    });
                }
            }
        }
        let mut rhs = DMatrix::zeros(n + 1, t.ncols());
        rhs.rows_mut(0, n).copy_from(t.as_matrix());
        // plain dense solve: Gaussian interpolation matrices are often badly
        // conditioned, and the classic method does not regularize
        let solution = system
            .full_piv_lu()
            .solve(&rhs)
            .filter(|x| x.iter().all(|v| v.is_finite()))
            .ok_or(Error::SingularSystem {
                condition: f64::INFINITY,
            })?;
        Ok(Self {
            centers: s.clone(),
            sigma,
            weights: solution.rows(0, n).into_owned(),
            constant: solution.row(n).transpose(),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let c = self.centers.as_matrix();
        check_dim("interpolant input", c.ncols(), x.len())?;
        let phi = DVector::from_fn(c.nrows(), |i, _| {
            let sq: f64 = c
                .row(i)
                .iter()
                .zip(x.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            gaussian(sq, self.sigma)
        });
        Ok(self.weights.transpose() * phi + &self.constant)
    }
}

fn gaussian(sq_dist: f64, sigma: f64) -> f64 {
    (-sq_dist / (2.0 * sigma * sigma)).exp()
}

/// Trains the interpolation baseline on a correspondence set.
pub fn rbf_baseline_fit(corr: &CorrespondenceSet) -> Result<RetargetModel> {
    train_retargeter_with(corr, &Method::RbfInterpolation, 1, TrainOptions::default())
}

/// Retargets one frame with a baseline model.
pub fn rbf_baseline_predict(
    model: &RetargetModel,
    frame: &FeaturePointFrame,
) -> Result<FeaturePointFrame> {
    retarget_frame(model, frame)
}

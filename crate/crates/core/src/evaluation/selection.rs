//! Leave-one-out choice of the component count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{default_components, fit_kpls, median_heuristic, KernelSpec};
use crate::matrix::SampleMatrix;
use crate::retarget::{CorrespondenceSet, Method, TrainOptions, TrainingData};

/// Errors closer than this (relative to `max(1, best)`) count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Largest component count tried by leave-one-out selection unless configured.
pub const DEFAULT_P_MAX: usize = 24;

/// Multiples of the median pairwise distance tried as Gaussian widths.
pub const WIDTH_MULTIPLIERS: [f64; 3] = [1.0, 2.0, 4.0];

/// How the number of latent components is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentChoice {
    Fixed(usize),
    LeaveOneOut { p_max: usize },
}

impl Default for ComponentChoice {
    fn default() -> Self {
        ComponentChoice::LeaveOneOut {
            p_max: DEFAULT_P_MAX,
        }
    }
}

/// Mean squared leave-one-out prediction error for `p = 1..=p_max`.
///
/// One model with `p_max` components is fitted per held-out row; smaller
/// counts reuse its leading components. A held-out prediction that fails
/// (singular inner system) scores infinity.
pub fn loo_component_errors(
    spec: &KernelSpec,
    s: &SampleMatrix,
    t: &SampleMatrix,
    p_max: usize,
) -> Result<Vec<f64>> {
    let n = s.nrows();
    if n < 3 {
        return Err(Error::TooFewPairs {
            required: 3,
            found: n,
        });
    }
    if p_max == 0 {
        return Err(Error::InvalidConfig("p_max must be positive".into()));
    }
    let mut totals = vec![0.0; p_max];
    for i in 0..n {
        let s_train = s.without_row(i)?;
        let t_train = t.without_row(i)?;
        let model = fit_kpls(spec, &s_train, &t_train, p_max.min(n - 1))?;
        let x = s.row_vector(i);
        let y = t.row_vector(i);
        for (p, total) in totals.iter_mut().enumerate() {
            *total += match model.predict_truncated(&x, p + 1) {
                Ok(pred) => (pred - &y).norm_squared(),
                Err(Error::SingularSystem { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
        }
    }
    Ok(totals.into_iter().map(|e| e / n as f64).collect())
}

/// True when `e` beats `current` by more than the tie tolerance.
fn improves(e: f64, current: f64) -> bool {
    if current.is_finite() {
        e < current - TIE_TOLERANCE * current.max(1.0)
    } else {
        e < current
    }
}

/// Index (as a component count) of the smallest error; ties go to the smaller count.
pub fn pick_components(errors: &[f64]) -> usize {
    let mut best = 0;
    for (i, &e) in errors.iter().enumerate().skip(1) {
        if improves(e, errors[best]) {
            best = i;
        }
    }
    best + 1
}

/// Component count in `1..=p_max` with the lowest leave-one-out error.
pub fn select_components_loo(
    corr: &CorrespondenceSet,
    spec: &KernelSpec,
    p_max: usize,
    options: TrainOptions,
) -> Result<usize> {
    if corr.len() < 3 {
        return Err(Error::TooFewPairs {
            required: 3,
            found: corr.len(),
        });
    }
    let data = TrainingData::build(corr, options)?;
    let errors = loo_component_errors(spec, &data.source, &data.target, p_max)?;
    Ok(pick_components(&errors))
}

/// Leave-one-out component count for `method`, or `None` when the method has
/// no components. Linear PLS is scored through the equivalent linear kernel.
pub fn select_method_components(
    corr: &CorrespondenceSet,
    method: &Method,
    p_max: usize,
    options: TrainOptions,
) -> Result<Option<usize>> {
    if corr.len() < 3 {
        return Err(Error::TooFewPairs {
            required: 3,
            found: corr.len(),
        });
    }
    let data = TrainingData::build(corr, options)?;
    let spec = match method {
        Method::Kpls { kernel } => *kernel,
        Method::KplsRbfMedian => KernelSpec::Rbf {
            sigma: median_heuristic(&data.source)?,
        },
        Method::LinearPls => KernelSpec::Linear,
        Method::RbfInterpolation => return Ok(None),
    };
    let errors = loo_component_errors(&spec, &data.source, &data.target, p_max)?;
    Ok(Some(pick_components(&errors)))
}

/// Component count for `method` on `corr`. Leave-one-out needs three pairs;
/// smaller sets fall back to the default count.
pub fn resolve_components(
    corr: &CorrespondenceSet,
    method: &Method,
    choice: ComponentChoice,
    options: TrainOptions,
) -> Result<usize> {
    match choice {
        ComponentChoice::Fixed(p) => Ok(p),
        ComponentChoice::LeaveOneOut { .. } if corr.len() < 3 => Ok(default_components(corr.len())),
        ComponentChoice::LeaveOneOut { p_max } => {
            Ok(select_method_components(corr, method, p_max, options)?.unwrap_or(1))
        }
    }
}

/// Concrete method and component count for training `method` on `corr`.
///
/// Under leave-one-out selection, [`Method::KplsRbfMedian`] picks its width
/// from [`WIDTH_MULTIPLIERS`] times the median distance jointly with the
/// component count; ties go to the narrower width. Other methods keep their
/// kernel and only resolve the count.
pub fn resolve_method(
    corr: &CorrespondenceSet,
    method: &Method,
    choice: ComponentChoice,
    options: TrainOptions,
) -> Result<(Method, usize)> {
    match (method, choice) {
        (Method::KplsRbfMedian, ComponentChoice::LeaveOneOut { p_max }) if corr.len() >= 3 => {
            let data = TrainingData::build(corr, options)?;
            let median = median_heuristic(&data.source)?;
            let mut best = (f64::INFINITY, median, 1);
            for m in WIDTH_MULTIPLIERS {
                let sigma = m * median;
                let spec = KernelSpec::Rbf { sigma };
                let errors = loo_component_errors(&spec, &data.source, &data.target, p_max)?;
                let p = pick_components(&errors);
                if improves(errors[p - 1], best.0) {
                    best = (errors[p - 1], sigma, p);
                }
            }
            let kernel = KernelSpec::Rbf { sigma: best.1 };
            Ok((Method::Kpls { kernel }, best.2))
        }
        _ => Ok((*method, resolve_components(corr, method, choice, options)?)),
    }
}

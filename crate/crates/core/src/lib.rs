//! Kernel partial least squares regression and its use for retargeting
//! facial animation between face models with different morphology.
//!
//! - [`pls`]: linear PLS by NIPALS with deflation and closed-form prediction.
//! - [`kernel`]: kernels, centered Gram matrices and kernel PLS.
//! - [`retarget`]: feature-point normalization, blendshape rigs and the
//!   frame-by-frame retargeting model.
//! - [`evaluation`]: the cyclic A → B → A protocol, the RMS vertex
//!   displacement error, an RBF interpolation baseline, leave-one-out
//!   component selection and seeded synthetic worlds.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluation;
pub mod kernel;
pub mod linalg;
pub mod matrix;
pub mod pls;
pub mod retarget;

pub use error::{Error, Result};
pub use kernel::{fit_kpls, predict_kpls, KernelSpec, KplsModel};
pub use matrix::SampleMatrix;
pub use pls::{fit_pls, predict_pls, PlsModel};
pub use retarget::{
    retarget_frame, retarget_sequence, train_retargeter, CorrespondenceSet, FaceRig,
    FeaturePointFrame, Method, RetargetModel,
};

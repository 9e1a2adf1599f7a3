//! Feature-point retargeting between face models.
//!
//! Corresponding source and target expressions are normalized, flattened
//! into sample matrices and related by a regressor (kernel PLS by default).
//! Frames of a source sequence are then mapped one at a time.

mod bounded;
pub mod normalize;
pub mod rig;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::evaluation::baseline::RbfInterpolant;
use crate::kernel::{default_components, fit_kpls, median_heuristic, KernelSpec, KplsModel};
use crate::matrix::SampleMatrix;
use crate::pls::{fit_pls, PlsModel};

pub use bounded::box_qp;
pub use normalize::{normalize_frame, Normalizer, RigidTransform};
pub use rig::{apply_blendshapes, solve_blendshape_weights, Blendshape, FaceRig, WeightSolver};

/// A 3D position in model units.
pub type Point = [f64; 3];

/// One animation frame of feature-point positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePointFrame {
    pub time_index: usize,
    pub points: Vec<Point>,
}

impl FeaturePointFrame {
    pub fn new(time_index: usize, points: Vec<Point>) -> Self {
        Self { time_index, points }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::DegenerateFrame);
        }
        for (i, p) in self.points.iter().enumerate() {
            if let Some(k) = p.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { row: i, col: k });
            }
        }
        Ok(())
    }
}

/// Paired source/target expressions; one pair is designated neutral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceSet {
    source_frames: Vec<FeaturePointFrame>,
    target_frames: Vec<FeaturePointFrame>,
    neutral_index: usize,
}

impl CorrespondenceSet {
    pub fn new(
        source_frames: Vec<FeaturePointFrame>,
        target_frames: Vec<FeaturePointFrame>,
        neutral_index: usize,
    ) -> Result<Self> {
        check_dim(
            "target pair count",
            source_frames.len(),
            target_frames.len(),
        )?;
        let n = source_frames.len();
        if n < 2 {
            return Err(Error::TooFewPairs {
                required: 2,
                found: n,
            });
        }
        if neutral_index >= n {
            return Err(Error::InvalidConfig(format!(
                "neutral index {neutral_index} out of range for {n} pairs"
            )));
        }
        for frames in [&source_frames, &target_frames] {
            let l = frames[0].points.len();
            for f in frames {
                check_dim("feature point count", l, f.points.len())?;
                f.validate()?;
            }
        }
        Ok(Self {
            source_frames,
            target_frames,
            neutral_index,
        })
    }

    pub fn len(&self) -> usize {
        self.source_frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_frames.is_empty()
    }

    pub fn source_frames(&self) -> &[FeaturePointFrame] {
        &self.source_frames
    }

    pub fn target_frames(&self) -> &[FeaturePointFrame] {
        &self.target_frames
    }

    pub fn neutral_index(&self) -> usize {
        self.neutral_index
    }

    pub fn neutral_source(&self) -> &FeaturePointFrame {
        &self.source_frames[self.neutral_index]
    }

    pub fn neutral_target(&self) -> &FeaturePointFrame {
        &self.target_frames[self.neutral_index]
    }

    pub fn source_points(&self) -> usize {
        self.source_frames[0].points.len()
    }

    pub fn target_points(&self) -> usize {
        self.target_frames[0].points.len()
    }

    /// The same pairs with source and target swapped.
    pub fn reversed(&self) -> Self {
        Self {
            source_frames: self.target_frames.clone(),
            target_frames: self.source_frames.clone(),
            neutral_index: self.neutral_index,
        }
    }

    /// The pairs without pair `skip`; the neutral designation is kept when possible.
    pub fn without_pair(&self, skip: usize) -> Result<Self> {
        let keep = |frames: &[FeaturePointFrame]| -> Vec<FeaturePointFrame> {
            frames
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, f)| f.clone())
                .collect()
        };
        let neutral = match self.neutral_index {
            i if i == skip => 0,
            i if i > skip => i - 1,
            i => i,
        };
        Self::new(
            keep(&self.source_frames),
            keep(&self.target_frames),
            neutral,
        )
    }
}

/// Regression method mapping normalized source vectors to normalized targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    /// Kernel PLS with a fixed kernel.
    Kpls { kernel: KernelSpec },
    /// Kernel PLS with a Gaussian kernel whose width is the median pairwise
    /// distance between normalized training inputs. Leave-one-out selection
    /// (`evaluation::resolve_method`) may widen it to a multiple of the median.
    KplsRbfMedian,
    /// Linear PLS.
    LinearPls,
    /// Gaussian RBF interpolation (comparison baseline).
    RbfInterpolation,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Kpls { kernel } => format!("kpls_{}", kernel.name()),
            Method::KplsRbfMedian => "kpls_rbf".into(),
            Method::LinearPls => "linear_pls".into(),
            Method::RbfInterpolation => "rbf_interp".into(),
        }
    }
}

/// A fitted regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regressor {
    Kpls(KplsModel),
    Pls(PlsModel),
    RbfInterpolation(RbfInterpolant),
}

impl Regressor {
    pub fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Regressor::Kpls(m) => m.predict(x),
            Regressor::Pls(m) => m.predict(x),
            Regressor::RbfInterpolation(m) => m.predict(x),
        }
    }

    /// Number of latent components, if the regressor has any.
    pub fn components(&self) -> Option<usize> {
        match self {
            Regressor::Kpls(m) => Some(m.components()),
            Regressor::Pls(m) => Some(m.components()),
            Regressor::RbfInterpolation(_) => None,
        }
    }

    /// Fits `method` on already normalized matrices.
    pub fn fit(method: &Method, s: &SampleMatrix, t: &SampleMatrix, p: usize) -> Result<Self> {
        let p = p.min(s.nrows());
        Ok(match method {
            Method::Kpls { kernel } => Regressor::Kpls(fit_kpls(kernel, s, t, p)?),
            Method::KplsRbfMedian => {
                let kernel = KernelSpec::Rbf {
                    sigma: median_heuristic(s)?,
                };
                Regressor::Kpls(fit_kpls(&kernel, s, t, p)?)
            }
            Method::LinearPls => Regressor::Pls(fit_pls(s, t, p)?),
            Method::RbfInterpolation => Regressor::RbfInterpolation(RbfInterpolant::fit(s, t)?),
        })
    }
}

/// Options shared by training entry points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    /// Remove per-frame rotation relative to the neutral frame.
    pub remove_rotation: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            remove_rotation: true,
        }
    }
}

/// Normalizers and normalized training matrices for a correspondence set.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub source_normalizer: Normalizer,
    pub target_normalizer: Normalizer,
    pub source: SampleMatrix,
    pub target: SampleMatrix,
}

impl TrainingData {
    pub fn build(corr: &CorrespondenceSet, options: TrainOptions) -> Result<Self> {
        let source_normalizer =
            Normalizer::from_reference(corr.neutral_source(), options.remove_rotation)?;
        let target_normalizer =
            Normalizer::from_reference(corr.neutral_target(), options.remove_rotation)?;
        let stack = |norm: &Normalizer, frames: &[FeaturePointFrame]| -> Result<SampleMatrix> {
            let rows = frames
                .iter()
                .map(|f| normalize_frame(norm, f))
                .collect::<Result<Vec<_>>>()?;
            SampleMatrix::new(DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| {
                rows[i][j]
            }))
        };
        Ok(Self {
            source: stack(&source_normalizer, corr.source_frames())?,
            target: stack(&target_normalizer, corr.target_frames())?,
            source_normalizer,
            target_normalizer,
        })
    }
}

/// Normalizers and regressor composed into a frame-to-frame map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetargetModel {
    pub source_normalizer: Normalizer,
    pub target_normalizer: Normalizer,
    pub regressor: Regressor,
    pub source_points: usize,
    pub target_points: usize,
}

impl RetargetModel {
    pub fn input_dim(&self) -> usize {
        3 * self.source_points
    }

    pub fn output_dim(&self) -> usize {
        3 * self.target_points
    }
}

/// Trains a kernel PLS retargeter with default options.
pub fn train_retargeter(
    corr: &CorrespondenceSet,
    spec: &KernelSpec,
    p: usize,
) -> Result<RetargetModel> {
    train_retargeter_with(
        corr,
        &Method::Kpls { kernel: *spec },
        p,
        TrainOptions::default(),
    )
}

/// Trains a retargeter with an arbitrary regression method. `p` is capped at
/// the number of pairs and ignored by methods without components.
pub fn train_retargeter_with(
    corr: &CorrespondenceSet,
    method: &Method,
    p: usize,
    options: TrainOptions,
) -> Result<RetargetModel> {
    let data = TrainingData::build(corr, options)?;
    let regressor = Regressor::fit(method, &data.source, &data.target, p)?;
    Ok(RetargetModel {
        source_normalizer: data.source_normalizer,
        target_normalizer: data.target_normalizer,
        regressor,
        source_points: corr.source_points(),
        target_points: corr.target_points(),
    })
}

/// Component count used when none is given.
pub fn default_component_count(corr: &CorrespondenceSet) -> usize {
    default_components(corr.len())
}

/// Maps one source frame onto the target face.
///
/// The prediction is placed at the target's neutral centroid and the
/// rotation removed from the source frame is re-applied.
pub fn retarget_frame(
    model: &RetargetModel,
    frame: &FeaturePointFrame,
) -> Result<FeaturePointFrame> {
    check_dim(
        "source feature point count",
        model.source_points,
        frame.points.len(),
    )?;
    let (x, removed) = model.source_normalizer.normalize(frame)?;
    let y = model.regressor.predict(&x)?;
    let placement = RigidTransform {
        centroid: model.target_normalizer.reference_centroid.into(),
        rotation: removed.rotation,
    };
    Ok(FeaturePointFrame {
        time_index: frame.time_index,
        points: model.target_normalizer.denormalize(&y, &placement)?,
    })
}

/// Retargets every frame, preserving order. Frames are processed in parallel.
pub fn retarget_sequence(
    model: &RetargetModel,
    seq: &[FeaturePointFrame],
) -> Result<Vec<FeaturePointFrame>> {
    seq.par_iter().map(|f| retarget_frame(model, f)).collect()
}

//! Linear blendshape rigs.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::bounded::box_qp;
use super::{FeaturePointFrame, Point};
use crate::error::{check_dim, Error, Result};

/// KKT tolerance of the weight solve, relative to the problem scale.
const KKT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blendshape {
    pub name: String,
    /// Per-vertex offsets from the neutral mesh.
    pub deltas: Vec<Point>,
}

/// A neutral mesh, named blendshape deltas and the vertices used as feature points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RigData")]
pub struct FaceRig {
    neutral_vertices: Vec<Point>,
    blendshapes: Vec<Blendshape>,
    feature_point_indices: Vec<usize>,
}

#[derive(Deserialize)]
struct RigData {
    neutral_vertices: Vec<Point>,
    blendshapes: Vec<Blendshape>,
    feature_point_indices: Vec<usize>,
}

impl TryFrom<RigData> for FaceRig {
    type Error = Error;

    fn try_from(d: RigData) -> Result<Self> {
        FaceRig::new(d.neutral_vertices, d.blendshapes, d.feature_point_indices)
    }
}

impl FaceRig {
    pub fn new(
        neutral_vertices: Vec<Point>,
        blendshapes: Vec<Blendshape>,
        feature_point_indices: Vec<usize>,
    ) -> Result<Self> {
        let v = neutral_vertices.len();
        if v == 0 {
            return Err(Error::InvalidRig("rig has no vertices".into()));
        }
        if neutral_vertices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidRig("non-finite neutral vertex".into()));
        }
        let mut names = HashSet::new();
        for shape in &blendshapes {
            if !names.insert(shape.name.as_str()) {
                return Err(Error::InvalidRig(format!(
                    "duplicate blendshape name {:?}",
                    shape.name
                )));
            }
            if shape.deltas.len() != v {
                return Err(Error::InvalidRig(format!(
                    "blendshape {:?} has {} deltas for {v} vertices",
                    shape.name,
                    shape.deltas.len()
                )));
            }
            if shape.deltas.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::InvalidRig(format!(
                    "blendshape {:?} has a non-finite delta",
                    shape.name
                )));
            }
        }
        if feature_point_indices.is_empty() {
            return Err(Error::InvalidRig("rig has no feature points".into()));
        }
        if let Some(&bad) = feature_point_indices.iter().find(|&&i| i >= v) {
            return Err(Error::InvalidRig(format!(
                "feature point index {bad} out of range for {v} vertices"
            )));
        }
        Ok(Self {
            neutral_vertices,
            blendshapes,
            feature_point_indices,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.neutral_vertices.len()
    }

    pub fn blendshape_count(&self) -> usize {
        self.blendshapes.len()
    }

    pub fn feature_point_count(&self) -> usize {
        self.feature_point_indices.len()
    }

    pub fn neutral_vertices(&self) -> &[Point] {
        &self.neutral_vertices
    }

    pub fn blendshapes(&self) -> &[Blendshape] {
        &self.blendshapes
    }

    pub fn feature_point_indices(&self) -> &[usize] {
        &self.feature_point_indices
    }

    /// Feature points of an arbitrary vertex frame of this rig.
    pub fn feature_points_of(&self, vertices: &[Point], time_index: usize) -> FeaturePointFrame {
        FeaturePointFrame {
            time_index,
            points: self
                .feature_point_indices
                .iter()
                .map(|&i| vertices[i])
                .collect(),
        }
    }

    pub fn neutral_feature_points(&self) -> FeaturePointFrame {
        self.feature_points_of(&self.neutral_vertices, 0)
    }

    /// `3L × B` matrix of blendshape deltas restricted to the feature points.
    pub fn feature_basis(&self) -> DMatrix<f64> {
        let l = self.feature_point_count();
        DMatrix::from_fn(3 * l, self.blendshape_count(), |r, k| {
            self.blendshapes[k].deltas[self.feature_point_indices[r / 3]][r % 3]
        })
    }
}

/// `neutral + Σₖ wₖ·deltaₖ` for every vertex.
pub fn apply_blendshapes(rig: &FaceRig, w: &[f64]) -> Result<Vec<Point>> {
    check_dim("blendshape weight count", rig.blendshape_count(), w.len())?;
    let mut out = rig.neutral_vertices.clone();
    for (shape, &wk) in rig.blendshapes.iter().zip(w) {
        if wk == 0.0 {
            continue;
        }
        for (v, d) in out.iter_mut().zip(&shape.deltas) {
            v[0] += wk * d[0];
            v[1] += wk * d[1];
            v[2] += wk * d[2];
        }
    }
    Ok(out)
}

/// Reusable bounded least-squares solve for one rig.
#[derive(Debug, Clone)]
pub struct WeightSolver {
    basis: DMatrix<f64>,
    normal: DMatrix<f64>,
    neutral: DVector<f64>,
}

impl WeightSolver {
    pub fn new(rig: &FaceRig) -> Self {
        let basis = rig.feature_basis();
        let normal = basis.transpose() * &basis;
        let neutral = flatten(&rig.neutral_feature_points().points);
        Self {
            basis,
            normal,
            neutral,
        }
    }

    /// Weights in `[0, 1]` minimizing `‖neutral + D·w − target‖²`.
    pub fn solve(&self, target: &FeaturePointFrame) -> Result<DVector<f64>> {
        check_dim(
            "target feature points",
            self.neutral.len() / 3,
            target.points.len(),
        )?;
        let residual = flatten(&target.points) - &self.neutral;
        let b = self.basis.transpose() * residual;
        Ok(box_qp(&self.normal, &b, 0.0, 1.0, KKT_TOLERANCE))
    }
}

/// One-off form of [`WeightSolver::solve`].
pub fn solve_blendshape_weights(rig: &FaceRig, target: &FeaturePointFrame) -> Result<DVector<f64>> {
    WeightSolver::new(rig).solve(target)
}

pub(crate) fn flatten(points: &[Point]) -> DVector<f64> {
    DVector::from_iterator(3 * points.len(), points.iter().flatten().copied())
}

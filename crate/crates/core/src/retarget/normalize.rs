//! Makes feature-point frames from differently sized faces commensurate.

use nalgebra::{DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{FeaturePointFrame, Point};
use crate::error::{check_dim, Error, Result};

/// Centroid subtraction, global scaling and optional rotation removal
/// against a reference (neutral) frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub reference_centroid: Point,
    /// Bounding-box diagonal of the reference frame.
    pub reference_scale: f64,
    /// Remove the per-frame rotation that best aligns a frame with the reference.
    pub remove_rotation: bool,
    /// Reference frame with its centroid removed.
    pub(crate) reference_shape: Vec<Point>,
}

/// The rigid part removed from one frame during normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub centroid: Vector3<f64>,
    /// Rotation applied to the centered frame.
    pub rotation: Matrix3<f64>,
}

impl Normalizer {
    pub fn from_reference(reference: &FeaturePointFrame, remove_rotation: bool) -> Result<Self> {
        reference.validate()?;
        let points = &reference.points;
        let centroid = centroid(points);
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in points {
            let v = Vector3::from(*p);
            lo = lo.inf(&v);
            hi = hi.sup(&v);
        }
        let reference_scale = (hi - lo).norm();
        if !(reference_scale > 0.0) {
            return Err(Error::DegenerateFrame);
        }
        Ok(Self {
            reference_centroid: centroid.into(),
            reference_scale,
            remove_rotation,
            reference_shape: points
                .iter()
                .map(|p| (Vector3::from(*p) - centroid).into())
                .collect(),
        })
    }

    pub fn point_count(&self) -> usize {
        self.reference_shape.len()
    }

    /// Flattens a frame to `3L` normalized coordinates (x, y, z interleaved)
    /// and returns the rigid transform that was removed.
    pub fn normalize(&self, frame: &FeaturePointFrame) -> Result<(DVector<f64>, RigidTransform)> {
        check_dim(
            "feature point count",
            self.point_count(),
            frame.points.len(),
        )?;
        frame.validate()?;
        let c = centroid(&frame.points);
        let centered: Vec<Vector3<f64>> =
            frame.points.iter().map(|p| Vector3::from(*p) - c).collect();
        if centered.iter().all(|v| *v == Vector3::zeros()) {
            return Err(Error::DegenerateFrame);
        }
        let rotation = if self.remove_rotation {
            best_rotation(&centered, &self.reference_shape)
        } else {
            Matrix3::identity()
        };
        let mut out = DVector::zeros(3 * centered.len());
        for (i, v) in centered.iter().enumerate() {
            let r = rotation * v / self.reference_scale;
            out[3 * i] = r.x;
            out[3 * i + 1] = r.y;
            out[3 * i + 2] = r.z;
        }
        Ok((
            out,
            RigidTransform {
                centroid: c,
                rotation,
            },
        ))
    }

    /// Inverse of [`Normalizer::normalize`] given the removed transform.
    pub fn denormalize(&self, v: &DVector<f64>, transform: &RigidTransform) -> Result<Vec<Point>> {
        check_dim("normalized vector length", 3 * self.point_count(), v.len())?;
        let back = transform.rotation.transpose();
        Ok(v.as_slice()
            .chunks_exact(3)
            .map(|c| {
                let p = back * (Vector3::new(c[0], c[1], c[2]) * self.reference_scale)
                    + transform.centroid;
                p.into()
            })
            .collect())
    }
}

/// Free-function form of [`Normalizer::normalize`], returning only the vector.
pub fn normalize_frame(norm: &Normalizer, frame: &FeaturePointFrame) -> Result<DVector<f64>> {
    norm.normalize(frame).map(|(v, _)| v)
}

pub(crate) fn centroid(points: &[Point]) -> Vector3<f64> {
    let sum = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + Vector3::from(*p));
    sum / points.len() as f64
}

/// Proper rotation `R` minimizing `Σ ‖R·xᵢ − yᵢ‖²` for centered point sets.
pub(crate) fn best_rotation(x: &[Vector3<f64>], y: &[Point]) -> Matrix3<f64> {
    let mut h = Matrix3::zeros();
    for (a, b) in x.iter().zip(y) {
        h += a * Vector3::from(*b).transpose();
    }
    let svd = h.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Matrix3::identity();
    };
    let v = v_t.transpose();
    let mut fix = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        fix[(2, 2)] = -1.0;
    }
    v * fix * u.transpose()
}

//! Cyclic retargeting evaluation.
//!
//! A source sequence is retargeted A → B and back B → A. Both the original
//! and the round-tripped feature points are fitted with rig A's blendshapes,
//! and the resulting meshes are compared with the RMS vertex displacement
//! `e_d = sqrt(1/(T·V) Σₜ Σᵥ ‖pᵥ(t) − p'ᵥ(t)‖²)`.

pub mod baseline;
pub mod selection;
pub mod synthetic;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::retarget::{
    apply_blendshapes, retarget_frame, train_retargeter_with, CorrespondenceSet, FaceRig,
    FeaturePointFrame, Method, Point, Regressor, RetargetModel, TrainOptions, WeightSolver,
};

pub use baseline::{rbf_baseline_fit, rbf_baseline_predict, RbfInterpolant};
pub use selection::{
    loo_component_errors, pick_components, resolve_components, resolve_method,
    select_components_loo, select_method_components, ComponentChoice, DEFAULT_P_MAX,
    WIDTH_MULTIPLIERS,
};
pub use synthetic::{gen_synthetic_world, GroundTruthMap, RigShape, SyntheticWorld, WorldConfig};

/// Result of one cyclic run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicReport {
    pub method: String,
    /// Aggregate displacement error over all frames and vertices.
    pub e_d: f64,
    /// `sqrt(1/V Σᵥ ‖Δᵥ(t)‖²)` for each frame; their mean square is `e_d²`.
    pub per_frame_errors: Vec<f64>,
    pub frame_count: usize,
    pub vertex_count: usize,
}

fn frame_sq_error(a: &[Point], b: &[Point]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (0..3).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>())
        .sum()
}

/// RMS vertex displacement between two vertex sequences.
pub fn displacement_error(initial: &[Vec<Point>], final_: &[Vec<Point>]) -> Result<f64> {
    check_dim("frame count", initial.len(), final_.len())?;
    if initial.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "frame count",
            expected: 1,
            found: 0,
        });
    }
    let v = initial[0].len();
    if v == 0 {
        return Err(Error::DimensionMismatch {
            context: "vertex count",
            expected: 1,
            found: 0,
        });
    }
    let mut total = 0.0;
    for (a, b) in initial.iter().zip(final_) {
        check_dim("vertex count", v, a.len())?;
        check_dim("vertex count", v, b.len())?;
        total += frame_sq_error(a, b);
    }
    Ok((total / (initial.len() * v) as f64).sqrt())
}

/// Relative error reduction in percent, `100·(e_base − e_ours)/e_base`.
pub fn improvement_percent(e_base: f64, e_ours: f64) -> Result<f64> {
    if !(e_base > 0.0) {
        return Err(Error::DivisionByZero("baseline error must be positive"));
    }
    Ok(100.0 * (e_base - e_ours) / e_base)
}

impl Regressor {
    /// Report label of the fitted method.
    pub fn label(&self) -> String {
        match self {
            Regressor::Kpls(m) => format!("kpls_{}", m.spec().name()),
            Regressor::Pls(_) => "linear_pls".into(),
            Regressor::RbfInterpolation(_) => "rbf_interp".into(),
        }
    }
}

/// Runs the A → B → A protocol and measures the displacement on rig A's mesh.
pub fn cyclic_retarget(
    model_ab: &RetargetModel,
    model_ba: &RetargetModel,
    seq: &[FeaturePointFrame],
    rig_a: &FaceRig,
) -> Result<CyclicReport> {
    if seq.is_empty() {
        return Err(Error::InvalidConfig(
            "cyclic evaluation needs at least one frame".into(),
        ));
    }
    check_dim(
        "model B→A output points",
        rig_a.feature_point_count(),
        model_ba.target_points,
    )?;
    check_dim(
        "model A→B input points",
        rig_a.feature_point_count(),
        model_ab.source_points,
    )?;
    let solver = WeightSolver::new(rig_a);
    let sq_errors = seq
        .par_iter()
        .map(|frame| {
            let intermediate = retarget_frame(model_ab, frame)?;
            let back = retarget_frame(model_ba, &intermediate)?;
            let initial = apply_blendshapes(rig_a, solver.solve(frame)?.as_slice())?;
            let final_ = apply_blendshapes(rig_a, solver.solve(&back)?.as_slice())?;
            Ok(frame_sq_error(&initial, &final_))
        })
        .collect::<Result<Vec<f64>>>()?;
    let v = rig_a.vertex_count();
    let total: f64 = sq_errors.iter().sum();
    Ok(CyclicReport {
        method: model_ab.regressor.label(),
        e_d: (total / (seq.len() * v) as f64).sqrt(),
        per_frame_errors: sq_errors.iter().map(|s| (s / v as f64).sqrt()).collect(),
        frame_count: seq.len(),
        vertex_count: v,
    })
}

/// Trains each method in both directions on `corr` and runs the cyclic protocol.
/// Widths and component counts are resolved separately per direction. Reports
/// come back in the order of `methods`, labelled by the requested method.
pub fn compare_methods(
    corr: &CorrespondenceSet,
    seq: &[FeaturePointFrame],
    rig_a: &FaceRig,
    methods: &[Method],
    components: ComponentChoice,
    options: TrainOptions,
) -> Result<Vec<CyclicReport>> {
    let reversed = corr.reversed();
    methods
        .iter()
        .map(|method| {
            let (m_ab, p_ab) = resolve_method(corr, method, components, options)?;
            let (m_ba, p_ba) = resolve_method(&reversed, method, components, options)?;
            let ab = train_retargeter_with(corr, &m_ab, p_ab, options)?;
            let ba = train_retargeter_with(&reversed, &m_ba, p_ba, options)?;
            let mut report = cyclic_retarget(&ab, &ba, seq, rig_a)?;
            report.method = method.label();
            Ok(report)
        })
        .collect()
}

/// `"<first> <= <other>"` or `"<first> > <other>"` for every other report.
pub fn ordering_lines(reports: &[CyclicReport]) -> Vec<String> {
    let Some((first, rest)) = reports.split_first() else {
        return Vec::new();
    };
    rest.iter()
        .map(|r| {
            let rel = if first.e_d <= r.e_d { "<=" } else { ">" };
            format!("{} {rel} {}", first.method, r.method)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;

    fn seq(frames: &[&[Point]]) -> Vec<Vec<Point>> {
        frames.iter().map(|f| f.to_vec()).collect()
    }

    #[test]
    fn displacement_hand_values() {
        let a = seq(&[
            &[[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]],
            &[[4.0, 4.0, 4.0], [1.0, 0.0, 1.0]],
        ]);
        assert_eq!(displacement_error(&a, &a).unwrap(), 0.0);
        let one = seq(&[&[[0.0, 0.0, 0.0]]]);
        let moved = seq(&[&[[3.0, 4.0, 0.0]]]);
        assert_eq!(displacement_error(&one, &moved).unwrap(), 5.0);
        let c = [0.3, -1.2, 2.0];
        let shifted: Vec<Vec<Point>> = a
            .iter()
            .map(|f| {
                f.iter()
                    .map(|p| [p[0] + c[0], p[1] + c[1], p[2] + c[2]])
                    .collect()
            })
            .collect();
        let norm = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        assert!((displacement_error(&a, &shifted).unwrap() - norm).abs() < 1e-12);
    }

    #[test]
    fn displacement_shape_errors() {
        let a = seq(&[&[[0.0; 3]]]);
        let b = seq(&[&[[0.0; 3]], &[[0.0; 3]]]);
        assert!(displacement_error(&a, &b).is_err());
        assert!(displacement_error(&[], &[]).is_err());
        let c = seq(&[&[[0.0; 3], [1.0; 3]]]);
        assert!(displacement_error(&a, &c).is_err());
    }

    #[test]
    fn improvement_values() {
        assert!((improvement_percent(1.0, 0.39).unwrap() - 61.0).abs() < 1e-9);
        assert_eq!(improvement_percent(2.5, 2.5).unwrap(), 0.0);
        assert_eq!(improvement_percent(2.5, 0.0).unwrap(), 100.0);
        assert!(matches!(
            improvement_percent(0.0, 1.0),
            Err(Error::DivisionByZero(_))
        ));
    }

    fn small_world(identity: bool, nonlinearity: f64) -> SyntheticWorld {
        let cfg = WorldConfig {
            rig_a: RigShape {
                vertices: 400,
                blendshapes: 12,
                feature_points: 20,
                semi_axes: [0.75, 1.0, 0.6],
            },
            rig_b: RigShape {
                vertices: 300,
                blendshapes: 10,
                feature_points: 16,
                semi_axes: [0.5, 0.6, 0.5],
            },
            pairs: 24,
            expression_dim: 5,
            nonlinearity,
            corrective_shapes: if nonlinearity > 0.0 { 4 } else { 0 },
            sequence_frames: 40,
            identity,
            ..WorldConfig::default()
        };
        gen_synthetic_world(&cfg, 17).unwrap()
    }

    #[test]
    fn identity_cycle_is_exact() {
        let w = small_world(true, 0.0);
        let method = Method::Kpls {
            kernel: KernelSpec::Linear,
        };
        let m =
            train_retargeter_with(&w.corr, &method, w.corr.len(), TrainOptions::default()).unwrap();
        let report = cyclic_retarget(&m, &m, &w.sequence, &w.rig_a).unwrap();
        assert!(report.e_d <= 1e-6 * w.scale(), "e_d = {}", report.e_d);
        assert_eq!(report.frame_count, 40);
        assert_eq!(report.vertex_count, 400);
        assert_eq!(report.method, "kpls_linear");
    }

    #[test]
    fn affine_world_is_recovered() {
        let w = small_world(false, 0.0);
        let reports = compare_methods(
            &w.corr,
            &w.sequence,
            &w.rig_a,
            &[Method::Kpls {
                kernel: KernelSpec::Linear,
            }],
            ComponentChoice::Fixed(w.corr.len()),
            TrainOptions::default(),
        )
        .unwrap();
        assert!(
            reports[0].e_d <= 1e-4 * w.scale(),
            "e_d = {}",
            reports[0].e_d
        );
    }

    #[test]
    fn report_recombines_per_frame_errors() {
        let w = small_world(false, 0.3);
        let reports = compare_methods(
            &w.corr,
            &w.sequence,
            &w.rig_a,
            &[Method::KplsRbfMedian, Method::LinearPls],
            ComponentChoice::default(),
            TrainOptions::default(),
        )
        .unwrap();
        for r in &reports {
            let ms: f64 = r.per_frame_errors.iter().map(|e| e * e).sum::<f64>()
                / r.per_frame_errors.len() as f64;
            assert!((ms.sqrt() - r.e_d).abs() <= 1e-12 * r.e_d.max(1.0));
        }
        let lines = ordering_lines(&reports);
        assert_eq!(lines.len(), 1);
        assert!(lines[0].starts_with("kpls_rbf"));
    }
}

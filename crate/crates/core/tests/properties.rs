//! Randomized invariants of the regression and retargeting pipeline.

use kpls_retarget::evaluation::displacement_error;
use kpls_retarget::retarget::{
    apply_blendshapes, retarget_frame, train_retargeter_with, Blendshape, FaceRig, Point,
    TrainOptions, WeightSolver,
};
use kpls_retarget::{
    fit_kpls, fit_pls, CorrespondenceSet, FeaturePointFrame, KernelSpec, Method, SampleMatrix,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_points(rng: &mut ChaCha8Rng, count: usize) -> Vec<Point> {
    (0..count)
        .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
        .collect()
}

fn random_frames(rng: &mut ChaCha8Rng, frames: usize, points: usize) -> Vec<Vec<Point>> {
    (0..frames).map(|_| random_points(rng, points)).collect()
}

fn shifted(points: &[Point], c: Point) -> Vec<Point> {
    points
        .iter()
        .map(|p| [p[0] + c[0], p[1] + c[1], p[2] + c[2]])
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scores_are_mutually_orthogonal(seed in any::<u64>(), n in 6usize..20, ds in 2usize..10, dt in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = SampleMatrix::new(random_matrix(&mut rng, n, ds)).unwrap();
        let t = SampleMatrix::new(random_matrix(&mut rng, n, dt)).unwrap();
        let p = ds.min(n - 1).min(5);
        let pls = fit_pls(&s, &t, p).unwrap();
        let kpls = fit_kpls(&KernelSpec::Rbf { sigma: 1.5 }, &s, &t, p).unwrap();
        for g in [pls.scores(), kpls.scores()] {
            for i in 0..g.ncols() {
                for j in 0..i {
                    let cos = g.column(i).dot(&g.column(j)).abs()
                        / (g.column(i).norm() * g.column(j).norm());
                    prop_assert!(cos <= 1e-8, "cos = {cos:e}");
                }
            }
        }
    }

    #[test]
    fn linear_kernel_matches_primal(seed in any::<u64>(), n in 4usize..20, ds in 1usize..10, dt in 1usize..5, p in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = SampleMatrix::new(random_matrix(&mut rng, n, ds)).unwrap();
        let t = SampleMatrix::new(random_matrix(&mut rng, n, dt)).unwrap();
        let p = p.min(ds).min(n - 1);
        let pls = fit_pls(&s, &t, p).unwrap();
        let kpls = fit_kpls(&KernelSpec::Linear, &s, &t, p).unwrap();
        let x = DVector::from_fn(ds, |_, _| rng.random_range(-1.0..1.0));
        let diff = (pls.predict(&x).unwrap() - kpls.predict(&x).unwrap()).amax();
        prop_assert!(diff <= 1e-8, "diff = {diff:e}");
    }

    #[test]
    fn retargeting_ignores_source_translation(seed in any::<u64>(), c in prop::array::uniform3(-50.0f64..50.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let source = random_frames(&mut rng, 8, 5);
        let target = random_frames(&mut rng, 8, 4);
        let query = random_points(&mut rng, 5);
        let frames = |pts: &[Vec<Point>], offset: Point| -> Vec<FeaturePointFrame> {
            pts.iter().enumerate().map(|(i, p)| FeaturePointFrame::new(i, shifted(p, offset))).collect()
        };
        let targets = frames(&target, [0.0; 3]);
        let plain = CorrespondenceSet::new(frames(&source, [0.0; 3]), targets.clone(), 0).unwrap();
        let moved = CorrespondenceSet::new(frames(&source, c), targets, 0).unwrap();
        let method = Method::Kpls { kernel: KernelSpec::Rbf { sigma: 1.0 } };
        let a = train_retargeter_with(&plain, &method, 4, TrainOptions::default()).unwrap();
        let b = train_retargeter_with(&moved, &method, 4, TrainOptions::default()).unwrap();
        let ya = retarget_frame(&a, &FeaturePointFrame::new(0, query.clone())).unwrap();
        let yb = retarget_frame(&b, &FeaturePointFrame::new(0, shifted(&query, c))).unwrap();
        for (p, q) in ya.points.iter().zip(&yb.points) {
            for k in 0..3 {
                prop_assert!((p[k] - q[k]).abs() <= 1e-8, "{p:?} vs {q:?}");
            }
        }
    }

    #[test]
    fn displacement_error_is_a_metric(seed in any::<u64>(), frames in 1usize..6, points in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_frames(&mut rng, frames, points);
        let b = random_frames(&mut rng, frames, points);
        let c = random_frames(&mut rng, frames, points);
        let ab = displacement_error(&a, &b).unwrap();
        prop_assert_eq!(displacement_error(&a, &a).unwrap(), 0.0);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - displacement_error(&b, &a).unwrap()).abs() <= 1e-15);
        let ac = displacement_error(&a, &c).unwrap();
        let cb = displacement_error(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn blendshape_weights_stay_in_the_box(seed in any::<u64>(), shapes in 1usize..8, scale in 0.1f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vertices = 12;
        let blendshapes = (0..shapes)
            .map(|k| Blendshape { name: format!("b{k}"), deltas: random_points(&mut rng, vertices) })
            .collect();
        let rig = FaceRig::new(random_points(&mut rng, vertices), blendshapes, (0..8).collect()).unwrap();
        let solver = WeightSolver::new(&rig);
        let target: Vec<Point> = rig
            .neutral_feature_points()
            .points
            .iter()
            .map(|p| std::array::from_fn(|k| p[k] + scale * rng.random_range(-1.0..1.0)))
            .collect();
        let w = solver.solve(&FeaturePointFrame::new(0, target)).unwrap();
        prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)), "{w:?}");

        let inside: Vec<f64> = (0..shapes).map(|_| rng.random_range(0.0..1.0)).collect();
        let mesh = apply_blendshapes(&rig, &inside).unwrap();
        let recovered = solver.solve(&rig.feature_points_of(&mesh, 0)).unwrap();
        for (a, b) in recovered.iter().zip(&inside) {
            prop_assert!((a - b).abs() <= 1e-6, "{recovered:?} vs {inside:?}");
        }
    }
}

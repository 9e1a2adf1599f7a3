//! Seeded synthetic face worlds.
//!
//! Two procedurally generated blendshape rigs share a low-dimensional
//! expression code `z ∈ [0, 1]^m`. Source weights are `W_a·z`, except for the
//! source rig's corrective shapes, which are driven by products `zᵢ·zⱼ` of two
//! channels. Target weights are `W_b·φ(z)` with
//! `φ(z) = z + a·(sin(Ωz + ψ) − sin ψ)`. With no correctives and `a = 0` the
//! two feature spaces are related by an affine map.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retarget::{Blendshape, CorrespondenceSet, FaceRig, FeaturePointFrame, Point};

/// Size of one generated rig.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigShape {
    pub vertices: usize,
    pub blendshapes: usize,
    pub feature_points: usize,
    /// Semi-axes of the half-ellipsoid the face is sampled from.
    pub semi_axes: [f64; 3],
}

impl RigShape {
    /// 2904 vertices, 48 blendshapes, 45 feature points.
    pub fn man() -> Self {
        Self {
            vertices: 2904,
            blendshapes: 48,
            feature_points: 45,
            semi_axes: [0.75, 1.0, 0.6],
        }
    }

    /// 1969 vertices, 44 blendshapes, 37 feature points.
    pub fn baby() -> Self {
        Self {
            vertices: 1969,
            blendshapes: 44,
            feature_points: 37,
            semi_axes: [0.55, 0.6, 0.5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub rig_a: RigShape,
    pub rig_b: RigShape,
    /// Number of correspondence pairs, the first being neutral.
    pub pairs: usize,
    /// Dimension of the shared expression code.
    pub expression_dim: usize,
    /// Amplitude `a` of the sinusoidal warp.
    pub nonlinearity: f64,
    /// Source blendshapes driven by the product of two expression channels.
    pub corrective_shapes: usize,
    /// Standard deviation of the warp frequencies `Ω`.
    pub frequency: f64,
    /// Frames in the held-out source sequence.
    pub sequence_frames: usize,
    /// Frames between random expression keyframes in the sequence.
    pub keyframe_interval: usize,
    /// Use rig A on both sides with the identity map.
    pub identity: bool,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            rig_a: RigShape::man(),
            rig_b: RigShape::baby(),
            pairs: 48,
            expression_dim: 4,
            nonlinearity: 0.25,
            corrective_shapes: 16,
            frequency: 1.5,
            sequence_frames: 100,
            keyframe_interval: 10,
            identity: false,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, rig) in [("rig_a", &self.rig_a), ("rig_b", &self.rig_b)] {
            if rig.feature_points < 3 || rig.feature_points > rig.vertices {
                return bad(format!(
                    "{name}: need 3 <= feature_points <= vertices, got {} and {}",
                    rig.feature_points, rig.vertices
                ));
            }
            if rig.blendshapes < self.expression_dim {
                return bad(format!(
                    "{name}: {} blendshapes cannot carry a {}-dimensional expression code",
                    rig.blendshapes, self.expression_dim
                ));
            }
            if rig.semi_axes.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
                return bad(format!("{name}: semi-axes must be positive"));
            }
        }
        if self.corrective_shapes + self.expression_dim > self.rig_a.blendshapes {
            return bad(format!(
                "rig_a: {} blendshapes cannot hold {} corrective shapes and a {}-dimensional code",
                self.rig_a.blendshapes, self.corrective_shapes, self.expression_dim
            ));
        }
        if self.corrective_shapes > 0 && self.expression_dim < 2 {
            return bad("corrective shapes need an expression code of dimension >= 2".into());
        }
        if self.pairs < 2 {
            return bad(format!("need at least 2 pairs, got {}", self.pairs));
        }
        if self.expression_dim == 0 {
            return bad("expression_dim must be positive".into());
        }
        if !(self.nonlinearity >= 0.0 && self.nonlinearity.is_finite()) {
            return bad(format!(
                "nonlinearity must be >= 0, got {}",
                self.nonlinearity
            ));
        }
        if !(self.frequency >= 0.0 && self.frequency.is_finite()) {
            return bad(format!("frequency must be >= 0, got {}", self.frequency));
        }
        if self.keyframe_interval == 0 {
            return bad("keyframe_interval must be positive".into());
        }
        Ok(())
    }
}

/// The generator's map between expression codes and rig weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthMap {
    /// `B_a × m`
    pub source_mixing: DMatrix<f64>,
    /// Channel pairs driving the last source blendshapes, in order.
    pub source_products: Vec<[usize; 2]>,
    /// `B_b × m`
    pub target_mixing: DMatrix<f64>,
    pub target_products: Vec<[usize; 2]>,
    /// `m × m`
    pub frequencies: DMatrix<f64>,
    pub phases: DVector<f64>,
    pub amplitude: f64,
}

impl GroundTruthMap {
    pub fn warp(&self, z: &DVector<f64>) -> DVector<f64> {
        if self.amplitude == 0.0 {
            return z.clone();
        }
        let arg = &self.frequencies * z + &self.phases;
        DVector::from_fn(z.len(), |i, _| {
            z[i] + self.amplitude * (arg[i].sin() - self.phases[i].sin())
        })
    }

    pub fn source_weights(&self, z: &DVector<f64>) -> DVector<f64> {
        weights(&self.source_mixing, &self.source_products, z)
    }

    pub fn target_weights(&self, z: &DVector<f64>) -> DVector<f64> {
        weights(&self.target_mixing, &self.target_products, &self.warp(z))
    }
}

fn weights(mixing: &DMatrix<f64>, products: &[[usize; 2]], z: &DVector<f64>) -> DVector<f64> {
    let mut w = mixing * z;
    let first = w.len() - products.len();
    for (k, [i, j]) in products.iter().enumerate() {
        w[first + k] = z[*i] * z[*j];
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    pub config: WorldConfig,
    pub seed: u64,
    pub rig_a: FaceRig,
    pub rig_b: FaceRig,
    pub corr: CorrespondenceSet,
    /// Held-out source motion on rig A's feature points.
    pub sequence: Vec<FeaturePointFrame>,
    pub ground_truth: GroundTruthMap,
}

impl SyntheticWorld {
    /// Bounding-box diagonal of rig A's neutral mesh.
    pub fn scale(&self) -> f64 {
        bounding_box_diagonal(self.rig_a.neutral_vertices())
    }
}

pub fn bounding_box_diagonal(points: &[Point]) -> f64 {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in points {
        let v = Vector3::from(*p);
        lo = lo.inf(&v);
        hi = hi.sup(&v);
    }
    (hi - lo).norm()
}

/// Generates a world deterministically from `(config, seed)`.
pub fn gen_synthetic_world(config: &WorldConfig, seed: u64) -> Result<SyntheticWorld> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = config.expression_dim;
    let rig_a = gen_rig(&mut rng, &config.rig_a, "a")?;
    let source_mixing = mixing_matrix(
        &mut rng,
        config.rig_a.blendshapes,
        config.rig_a.blendshapes - config.corrective_shapes,
        m,
    );
    let source_products = channel_pairs(&mut rng, config.corrective_shapes, m);
    let (rig_b, ground_truth) = if config.identity {
        (
            rig_a.clone(),
            GroundTruthMap {
                target_mixing: source_mixing.clone(),
                target_products: source_products.clone(),
                source_mixing,
                source_products,
                frequencies: DMatrix::zeros(m, m),
                phases: DVector::zeros(m),
                amplitude: 0.0,
            },
        )
    } else {
        let rig_b = gen_rig(&mut rng, &config.rig_b, "b")?;
        let target_mixing = mixing_matrix(
            &mut rng,
            config.rig_b.blendshapes,
            config.rig_b.blendshapes,
            m,
        );
        let frequencies = DMatrix::from_fn(m, m, |_, _| {
            config.frequency * rng.sample::<f64, _>(StandardNormal)
        });
        let phases = DVector::from_fn(m, |_, _| rng.random_range(0.0..std::f64::consts::TAU));
        (
            rig_b,
            GroundTruthMap {
                source_mixing,
                source_products,
                target_mixing,
                target_products: Vec::new(),
                frequencies,
                phases,
                amplitude: config.nonlinearity,
            },
        )
    };

    let basis_a = rig_a.feature_basis();
    let basis_b = rig_b.feature_basis();
    let neutral_a = flat(&rig_a.neutral_feature_points().points);
    let neutral_b = flat(&rig_b.neutral_feature_points().points);
    let frame_a = |z: &DVector<f64>, t: usize| {
        unflat(&(&neutral_a + &basis_a * ground_truth.source_weights(z)), t)
    };
    let frame_b = |z: &DVector<f64>, t: usize| {
        unflat(&(&neutral_b + &basis_b * ground_truth.target_weights(z)), t)
    };

    let mut codes = vec![DVector::zeros(m)];
    while codes.len() < config.pairs {
        // an all-zero code would duplicate the neutral pair
        let z = random_code(&mut rng, m);
        if z.iter().any(|&x| x != 0.0) {
            codes.push(z);
        }
    }
    let corr = CorrespondenceSet::new(
        codes
            .iter()
            .enumerate()
            .map(|(i, z)| frame_a(z, i))
            .collect(),
        codes
            .iter()
            .enumerate()
            .map(|(i, z)| frame_b(z, i))
            .collect(),
        0,
    )?;

    let keyframes: Vec<DVector<f64>> = (0..=config.sequence_frames / config.keyframe_interval + 1)
        .map(|_| random_code(&mut rng, m))
        .collect();
    let sequence = (0..config.sequence_frames)
        .map(|t| {
            let k = t / config.keyframe_interval;
            let s = (t % config.keyframe_interval) as f64 / config.keyframe_interval as f64;
            let z = &keyframes[k] * (1.0 - s) + &keyframes[k + 1] * s;
            frame_a(&z, t)
        })
        .collect();

    Ok(SyntheticWorld {
        config: *config,
        seed,
        rig_a,
        rig_b,
        corr,
        sequence,
        ground_truth,
    })
}

/// Each channel active with probability 0.6, intensity uniform in (0, 1).
fn random_code(rng: &mut ChaCha8Rng, m: usize) -> DVector<f64> {
    DVector::from_fn(m, |_, _| {
        if rng.random_bool(0.6) {
            rng.random_range(0.0..1.0)
        } else {
            0.0
        }
    })
}

/// Each of the first `linear` blendshapes follows one or two expression
/// channels with total gain at most 1, so codes in `[0, 1]^m` give weights in
/// `[0, 1]`. Remaining rows stay zero.
fn mixing_matrix(
    rng: &mut ChaCha8Rng,
    blendshapes: usize,
    linear: usize,
    m: usize,
) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(blendshapes, m);
    for row in 0..linear {
        let k = if m > 1 && rng.random_bool(0.5) { 2 } else { 1 };
        let channels = sample(rng, m, k);
        let gain = rng.random_range(0.6..1.0);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for (c, r) in channels.iter().zip(&raw) {
            w[(row, c)] = gain * r / total;
        }
    }
    // every channel must reach the rig
    for c in 0..m {
        if w.column(c).iter().all(|&x| x == 0.0) {
            let row = c % linear;
            w.row_mut(row).fill(0.0);
            w[(row, c)] = rng.random_range(0.6..1.0);
        }
    }
    w
}

/// `count` channel pairs, cycling through all unordered pairs in random order.
fn channel_pairs(rng: &mut ChaCha8Rng, count: usize, m: usize) -> Vec<[usize; 2]> {
    let mut all: Vec<[usize; 2]> = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| [i, j]))
        .collect();
    if all.is_empty() {
        return Vec::new();
    }
    all.shuffle(rng);
    all.iter().copied().cycle().take(count).collect()
}

fn gen_rig(rng: &mut ChaCha8Rng, shape: &RigShape, tag: &str) -> Result<FaceRig> {
    let [ax, ay, az] = shape.semi_axes;
    let size = ax.max(ay).max(az);
    let neutral: Vec<Point> = (0..shape.vertices)
        .map(|_| {
            let u = loop {
                let v = Vector3::new(
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                );
                let n = v.norm();
                if n > 1e-9 {
                    break v / n;
                }
            };
            [ax * u.x, ay * u.y, az * u.z.abs()]
        })
        .collect();
    let mut features: Vec<usize> = sample(rng, shape.vertices, shape.feature_points).into_vec();
    features.sort_unstable();

    let fp: Vec<Vector3<f64>> = features
        .iter()
        .map(|&i| Vector3::from(neutral[i]))
        .collect();
    let fp_centroid = fp.iter().sum::<Vector3<f64>>() / fp.len() as f64;
    let inertia: Matrix3<f64> = fp
        .iter()
        .map(|p| {
            let n = p - fp_centroid;
            Matrix3::identity() * n.norm_squared() - n * n.transpose()
        })
        .sum();
    let inertia_inv = inertia
        .try_inverse()
        .ok_or_else(|| Error::InvalidConfig("feature points are collinear".into()))?;

    let blendshapes = (0..shape.blendshapes)
        .map(|k| {
            let center = Vector3::from(neutral[rng.random_range(0..shape.vertices)]);
            let radius = size * rng.random_range(0.3..0.6);
            let dir = Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            )
            .normalize()
                * size
                * rng.random_range(0.04..0.12);
            let mut deltas: Vec<Vector3<f64>> = neutral
                .iter()
                .map(|p| {
                    let d2 = (Vector3::from(*p) - center).norm_squared();
                    dir * (-d2 / (2.0 * radius * radius)).exp()
                })
                .collect();
            // strip the rigid (translation + infinitesimal rotation) part seen by the feature points
            let t = features.iter().map(|&i| deltas[i]).sum::<Vector3<f64>>() / fp.len() as f64;
            let torque: Vector3<f64> = features
                .iter()
                .zip(&fp)
                .map(|(&i, p)| (p - fp_centroid).cross(&deltas[i]))
                .sum();
            let omega = inertia_inv * torque;
            for (d, p) in deltas.iter_mut().zip(&neutral) {
                *d -= t + omega.cross(&(Vector3::from(*p) - fp_centroid));
            }
            Blendshape {
                name: format!("{tag}_shape_{k:02}"),
                deltas: deltas.into_iter().map(Into::into).collect(),
            }
        })
        .collect();
    FaceRig::new(neutral, blendshapes, features)
}

fn flat(points: &[Point]) -> DVector<f64> {
    DVector::from_iterator(3 * points.len(), points.iter().flatten().copied())
}

fn unflat(v: &DVector<f64>, time_index: usize) -> FeaturePointFrame {
    FeaturePointFrame::new(
        time_index,
        v.as_slice()
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect(),
    )
}

//! Synthetic data with planted ground truth.
//!
//! Box clouds exercise the geometry chain directly; rendered depth crops and
//! the fixture dataset exercise everything from file ingestion to metrics.

mod fixture;
mod render;

pub use fixture::{
    generate_fixture_dataset, prototype_pool, ClassPrototype, FixtureDataset, FixtureKb, FixtureRegion, FixtureSpec, RegionKind,
};
pub use render::{render_box_crop, RenderedCrop};

use nalgebra::{Translation3, UnitQuaternion, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::geometry::{Point, PointCloud};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("bad synthetic spec: {0}")]
    BadSpec(String),
    #[error("writing fixture: {0}")]
    Write(String),
}

/// Parameters of one synthetic box scan.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Side lengths in meters along the box's own axes.
    pub box_extents: [f64; 3],
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    /// Number of surface samples, the eight corners included.
    pub n_points: usize,
    /// Standard deviation of Gaussian noise along the camera z axis, meters.
    pub noise_sigma: f64,
    /// Fraction of the final cloud made of uniform outliers.
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            box_extents: [0.1, 0.2, 0.3],
            rotation: UnitQuaternion::identity(),
            translation: Vector3::new(0.0, 0.0, 1.5),
            n_points: 2000,
            noise_sigma: 0.0,
            outlier_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if !self.box_extents.iter().all(|&e| e > 0.0 && e.is_finite()) {
            return Err(SynthError::BadSpec("box extents must be positive".into()));
        }
        if self.n_points < 8 {
            return Err(SynthError::BadSpec("n_points must cover the 8 corners".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(SynthError::BadSpec("noise_sigma must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(SynthError::BadSpec("outlier_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BoxSample {
    pub cloud: PointCloud,
    /// True extents, ascending.
    pub true_extents: [f64; 3],
}

/// Uniformly distributed random rotation.
pub fn random_rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let q = Vector4::from_fn(|_, _| normal.sample(rng));
        if q.norm() > 1e-6 {
            return UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(q));
        }
    }
}

/// Samples the surface of a posed box: corners first, then area-weighted
/// uniform points on the six faces, then uniform outliers drawn from a
/// region ten times the box size.
pub fn generate_box_cloud(spec: &SynthSpec) -> Result<BoxSample, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let half = Vector3::from(spec.box_extents) / 2.0;

    let mut local: Vec<Vector3<f64>> = Vec::with_capacity(spec.n_points);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                local.push(Vector3::new(sx * half.x, sy * half.y, sz * half.z));
            }
        }
    }
    // face k is normal to axis k; two faces per axis
    let face_area = [
        spec.box_extents[1] * spec.box_extents[2],
        spec.box_extents[0] * spec.box_extents[2],
        spec.box_extents[0] * spec.box_extents[1],
    ];
    let total: f64 = face_area.iter().sum();
    while local.len() < spec.n_points {
        let pick = rng.random_range(0.0..total);
        let axis = if pick < face_area[0] {
            0
        } else if pick < face_area[0] + face_area[1] {
            1
        } else {
            2
        };
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let mut p = Vector3::zeros();
        for k in 0..3 {
            p[k] = if k == axis {
                side * half[k]
            } else {
                rng.random_range(-half[k]..=half[k])
            };
        }
        local.push(p);
    }

    let n_out = (spec.outlier_fraction / (1.0 - spec.outlier_fraction) * spec.n_points as f64).round() as usize;
    for _ in 0..n_out {
        let p = Vector3::from_fn(|k, _| rng.random_range(-10.0 * half[k]..=10.0 * half[k]));
        local.push(p);
    }

    let pose = Translation3::from(spec.translation) * spec.rotation;
    let noise = (spec.noise_sigma > 0.0).then(|| Normal::new(0.0, spec.noise_sigma).expect("sigma > 0"));
    let points: Vec<Point> = local
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut p = pose * Point::from(*v);
            if let (Some(n), true) = (&noise, i < spec.n_points) {
                p.z += n.sample(&mut rng);
            }
            p
        })
        .collect();

    let mut true_extents = spec.box_extents;
    true_extents.sort_by(f64::total_cmp);
    Ok(BoxSample {
        cloud: PointCloud::new(points),
        true_extents,
    })
}

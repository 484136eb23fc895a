//! Depth crop → metric object dimensions.
//!
//! The chain is back-projection, stride downsampling, statistical outlier
//! removal, convex hull and box fitting. The smallest box extent is taken as
//! the object's depth; the other two span its front surface.

mod hull;
mod obb;
mod outliers;

pub use hull::{convex_hull, ConvexHull};
pub use obb::{axis_aligned_bbox, oriented_bbox, Box3D};
pub use outliers::{mean_knn_distances, remove_outliers};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = Point3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("depth crop contains no depth measurement")]
    EmptyCloud,
    #[error("too few points: have {have}, need at least {need}")]
    TooFewPoints { have: usize, need: usize },
    #[error("degenerate point cloud: {0}")]
    DegenerateCloud(String),
    #[error("invalid depth crop: {0}")]
    BadCrop(String),
    #[error("invalid geometry config: {0}")]
    BadConfig(String),
}

impl GeometryError {
    /// Short stable tag, used in traces and exclusion tallies.
    pub fn kind(&self) -> &'static str {
        match self {
            GeometryError::EmptyCloud => "empty_cloud",
            GeometryError::TooFewPoints { .. } => "too_few_points",
            GeometryError::DegenerateCloud(_) => "degenerate_cloud",
            GeometryError::BadCrop(_) => "bad_crop",
            GeometryError::BadConfig(_) => "bad_config",
        }
    }
}

/// Pinhole intrinsics plus the metric scale of stored depth values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Meters per stored depth unit.
    pub depth_scale: f64,
}

impl Default for CameraIntrinsics {
    /// Astra-Pro-like 640×480 intrinsics with millimeter depth.
    fn default() -> Self {
        Self {
            fx: 570.3,
            fy: 570.3,
            cx: 319.5,
            cy: 239.5,
            depth_scale: 0.001,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.depth_scale > 0.0
            && self.cx.is_finite()
            && self.cy.is_finite()
            && self.fx.is_finite()
            && self.fy.is_finite();
        if ok {
            Ok(())
        } else {
            Err(GeometryError::BadConfig(
                "intrinsics need positive finite fx, fy and depth_scale".into(),
            ))
        }
    }

    /// Camera-frame point seen at full-frame pixel `(u, v)` with metric depth `z`.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Point {
        Point::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }

    /// Full-frame pixel coordinates of a camera-frame point with `z > 0`.
    pub fn project(&self, p: &Point) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }
}

/// Rectangular window of a 16-bit depth image; `0` marks a missing reading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthCrop {
    width: u32,
    height: u32,
    origin_u: u32,
    origin_v: u32,
    values: Vec<u16>,
}

impl DepthCrop {
    pub fn new(width: u32, height: u32, values: Vec<u16>) -> Result<Self, GeometryError> {
        if values.len() != width as usize * height as usize {
            return Err(GeometryError::BadCrop(format!(
                "{}x{} crop needs {} values, got {}",
                width,
                height,
                width as usize * height as usize,
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            origin_u: 0,
            origin_v: 0,
            values,
        })
    }

    /// Places the crop in the full frame (pixel offset of its top-left corner).
    pub fn with_origin(mut self, origin_u: u32, origin_v: u32) -> Self {
        self.origin_u = origin_u;
        self.origin_v = origin_v;
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn origin(&self) -> (u32, u32) {
        (self.origin_u, self.origin_v)
    }

    /// Row-major stored values.
    pub fn values(&self) -> &[u16] {
        &self.values
    }

    pub fn get(&self, col: u32, row: u32) -> u16 {
        self.values[(row * self.width + col) as usize]
    }

    pub fn zero_fraction(&self) -> f64 {
        if self.values.is_empty() {
            return 1.0;
        }
        self.values.iter().filter(|&&v| v == 0).count() as f64 / self.values.len() as f64
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }
}

impl From<Vec<Point>> for PointCloud {
    fn from(points: Vec<Point>) -> Self {
        Self { points }
    }
}

impl FromIterator<Point> for PointCloud {
    fn from_iter<I: IntoIterator<Item = Point>>(iter: I) -> Self {
        Self {
            points: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxMode {
    #[default]
    Oriented,
    AxisAligned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    /// Keep one point every `chi`.
    pub chi: usize,
    pub n_neighbors: usize,
    /// Outlier cut-off in standard deviations above the mean kNN distance.
    pub sigma_mult: f64,
    /// Fewer points than this after downsampling aborts estimation.
    pub min_points: usize,
    pub box_mode: BoxMode,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            chi: 10,
            n_neighbors: 20,
            sigma_mult: 2.0,
            min_points: 30,
            box_mode: BoxMode::Oriented,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.chi == 0 {
            return Err(GeometryError::BadConfig("chi must be >= 1".into()));
        }
        if self.n_neighbors == 0 {
            return Err(GeometryError::BadConfig("n_neighbors must be >= 1".into()));
        }
        if !(self.sigma_mult > 0.0 && self.sigma_mult.is_finite()) {
            return Err(GeometryError::BadConfig("sigma_mult must be > 0".into()));
        }
        if self.min_points == 0 {
            return Err(GeometryError::BadConfig("min_points must be >= 1".into()));
        }
        Ok(())
    }
}

/// Estimated object size: the smallest extent as depth, the other two unordered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub depth_m: f64,
    pub other_m: [f64; 2],
}

impl Dims {
    pub fn new(depth_m: f64, other_m: [f64; 2]) -> Self {
        Self { depth_m, other_m }
    }

    pub fn from_extents(extents: [f64; 3]) -> Self {
        let mut e = extents;
        e.sort_by(f64::total_cmp);
        Self {
            depth_m: e[0],
            other_m: [e[1], e[2]],
        }
    }

    /// `[depth, other, other]`.
    pub fn as_array(&self) -> [f64; 3] {
        [self.depth_m, self.other_m[0], self.other_m[1]]
    }

    pub fn sorted(&self) -> [f64; 3] {
        let mut e = self.as_array();
        e.sort_by(f64::total_cmp);
        e
    }
}

pub fn backproject(crop: &DepthCrop, k: &CameraIntrinsics) -> Result<PointCloud, GeometryError> {
    let (ou, ov) = crop.origin();
    let mut points = Vec::new();
    for row in 0..crop.height() {
        for col in 0..crop.width() {
            let d = crop.get(col, row);
            if d == 0 {
                continue;
            }
            let z = f64::from(d) * k.depth_scale;
            points.push(k.unproject(f64::from(ou + col), f64::from(ov + row), z));
        }
    }
    if points.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    Ok(PointCloud::new(points))
}

/// Keeps points `0, chi, 2·chi, …` in input order.
pub fn downsample(pc: &PointCloud, chi: usize) -> PointCloud {
    pc.points.iter().step_by(chi.max(1)).copied().collect()
}

/// Fits the configured box to an already filtered cloud.
///
/// In oriented mode a rank-deficient hull (flat objects seen head-on) falls
/// back to fitting the box directly on the points.
pub fn fit_box(points: &[Point], mode: BoxMode) -> Result<Box3D, GeometryError> {
    match mode {
        BoxMode::AxisAligned => axis_aligned_bbox(points),
        BoxMode::Oriented => match convex_hull(points) {
            Ok(hull) => obb::fit_oriented(hull.vertices(), Some(&hull)),
            Err(GeometryError::DegenerateCloud(_)) => obb::fit_oriented(points, None),
            Err(e) => Err(e),
        },
    }
}

/// Dimension estimate from a camera-frame cloud (everything after back-projection).
pub fn estimate_dims_from_cloud(pc: &PointCloud, cfg: &GeometryConfig) -> Result<Dims, GeometryError> {
    cfg.validate()?;
    if pc.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    let sampled = downsample(pc, cfg.chi);
    if sampled.len() < cfg.min_points {
        return Err(GeometryError::TooFewPoints {
            have: sampled.len(),
            need: cfg.min_points,
        });
    }
    let filtered = remove_outliers(&sampled, cfg)?;
    let bx = fit_box(&filtered.points, cfg.box_mode)?;
    Ok(Dims::from_extents(bx.extents))
}

pub fn estimate_dims(
    crop: &DepthCrop,
    k: &CameraIntrinsics,
    cfg: &GeometryConfig,
) -> Result<Dims, GeometryError> {
    k.validate()?;
    let pc = backproject(crop, k)?;
    estimate_dims_from_cloud(&pc, cfg)
}

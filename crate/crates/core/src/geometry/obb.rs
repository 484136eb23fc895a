//! Bounding boxes around hull vertices.
//!
//! The oriented box starts from the principal axes of the vertex covariance.
//! Principal axes are ill-defined when eigenvalues coincide (a cube has an
//! isotropic covariance), so a second family of frames is also scored: one
//! axis along a hull face normal, the other two from the minimum-area
//! rectangle of the projection onto that face's plane. The frame giving the
//! smallest box volume wins; the PCA frame wins ties.

use nalgebra::{Matrix3, SymmetricEigen, Vector2, Vector3};

use super::hull::{convex_hull, ConvexHull};
use super::{GeometryError, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    pub center: Point,
    /// Orthonormal box axes.
    pub axes: [Vector3<f64>; 3],
    /// Full side lengths along `axes`.
    pub extents: [f64; 3],
}

impl Box3D {
    pub fn sorted_extents(&self) -> [f64; 3] {
        let mut e = self.extents;
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn volume(&self) -> f64 {
        self.extents.iter().product()
    }

    /// Largest distance by which `p` sticks out of the box (≤ 0 inside).
    pub fn max_violation(&self, p: &Point) -> f64 {
        let d = p - self.center;
        (0..3)
            .map(|i| d.dot(&self.axes[i]).abs() - self.extents[i] / 2.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Box aligned with the camera axes.
pub fn axis_aligned_bbox(points: &[Point]) -> Result<Box3D, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::DegenerateCloud("no points to bound".into()));
    }
    Ok(frame_box(points, [Vector3::x(), Vector3::y(), Vector3::z()]))
}

/// Oriented box around a set of hull vertices.
pub fn oriented_bbox(vertices: &[Point]) -> Result<Box3D, GeometryError> {
    let hull = convex_hull(vertices).ok();
    fit_oriented(vertices, hull.as_ref())
}

pub(super) fn fit_oriented(points: &[Point], hull: Option<&ConvexHull>) -> Result<Box3D, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::DegenerateCloud(format!(
            "box fitting needs at least 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let cov = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p.coords - mean;
        acc + d * d.transpose()
    }) / n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let (l0, l1) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    if !(l0 > 0.0) || l1 <= l0 * 1e-20 {
        return Err(GeometryError::DegenerateCloud("points are collinear or coincident".into()));
    }
    let pca = order.map(|i| eig.eigenvectors.column(i).into_owned());

    let scale = l0.sqrt();
    let mut best = Candidate::new(frame_box(points, pca));

    let mut normals: Vec<Vector3<f64>> = pca.to_vec();
    if let Some(h) = hull {
        normals.extend(h.planes().map(|(n, _)| n));
    }
    let support: &[Point] = hull.map_or(points, |h| h.vertices());
    for normal in normals {
        if let Some(frame) = face_flush_frame(support, &normal) {
            let c = Candidate::new(frame_box(points, frame));
            if c.beats(&best, scale) {
                best = c;
            }
        }
    }
    Ok(best.bx)
}

struct Candidate {
    bx: Box3D,
    volume: f64,
    area: f64,
}

impl Candidate {
    fn new(bx: Box3D) -> Self {
        let e = bx.sorted_extents();
        Self {
            volume: e[0] * e[1] * e[2],
            area: e[1] * e[2],
            bx,
        }
    }

    /// Smaller volume, then smaller face area, both with a relative tolerance
    /// so rounding noise never displaces an earlier, equally good frame.
    fn beats(&self, other: &Candidate, scale: f64) -> bool {
        let tol_v = 1e-12 * scale.powi(3);
        let tol_a = 1e-12 * scale.powi(2);
        if self.volume < other.volume - tol_v {
            return true;
        }
        self.volume <= other.volume + tol_v && self.area < other.area - tol_a
    }
}

fn frame_box(points: &[Point], axes: [Vector3<f64>; 3]) -> Box3D {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for k in 0..3 {
            let t = axes[k].dot(&p.coords);
            lo[k] = lo[k].min(t);
            hi[k] = hi[k].max(t);
        }
    }
    let center = (0..3).fold(Vector3::zeros(), |acc, k| acc + axes[k] * ((lo[k] + hi[k]) / 2.0));
    Box3D {
        center: Point::from(center),
        axes,
        extents: [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]],
    }
}

/// Frame with `normal` as one axis and the minimum-area bounding rectangle
/// of the projected points spanning the other two.
fn face_flush_frame(points: &[Point], normal: &Vector3<f64>) -> Option<[Vector3<f64>; 3]> {
    let n = normal.try_normalize(0.0)?;
    let seed = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = n.cross(&seed).normalize();
    let w = n.cross(&u);
    let projected: Vec<Vector2<f64>> = points
        .iter()
        .map(|p| Vector2::new(u.dot(&p.coords), w.dot(&p.coords)))
        .collect();
    let ring = hull_2d(projected);
    if ring.len() < 2 {
        return None;
    }

    let mut best: Option<(f64, Vector2<f64>)> = None;
    for i in 0..ring.len() {
        let Some(e) = (ring[(i + 1) % ring.len()] - ring[i]).try_normalize(0.0) else {
            continue;
        };
        let perp = Vector2::new(-e.y, e.x);
        let (mut lo_e, mut hi_e, mut lo_p, mut hi_p) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for q in &ring {
            let (a, b) = (e.dot(q), perp.dot(q));
            lo_e = lo_e.min(a);
            hi_e = hi_e.max(a);
            lo_p = lo_p.min(b);
            hi_p = hi_p.max(b);
        }
        let area = (hi_e - lo_e) * (hi_p - lo_p);
        if best.is_none_or(|(a, _)| area < a) {
            best = Some((area, e));
        }
    }
    let (_, e) = best?;
    let axis1 = u * e.x + w * e.y;
    let axis2 = n.cross(&axis1);
    Some([n, axis1, axis2])
}

/// Andrew's monotone chain; returns the hull ring without repeated endpoints.
fn hull_2d(mut pts: Vec<Vector2<f64>>) -> Vec<Vector2<f64>> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let mut lower: Vec<Vector2<f64>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Vector2<f64>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit};

    fn box_corners(ext: [f64; 3]) -> Vec<Point> {
        let mut v = Vec::new();
        for sx in [-0.5, 0.5] {
            for sy in [-0.5, 0.5] {
                for sz in [-0.5, 0.5] {
                    v.push(Point::new(sx * ext[0], sy * ext[1], sz * ext[2]));
                }
            }
        }
        v
    }

    fn assert_close(a: [f64; 3], b: [f64; 3], tol: f64) {
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn unit_cube_axis_aligned() {
        let bx = oriented_bbox(&box_corners([1.0, 1.0, 1.0])).unwrap();
        assert_close(bx.sorted_extents(), [1.0, 1.0, 1.0], 1e-12);
    }

    #[test]
    fn rotated_cube_keeps_unit_extents() {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.3, -1.2, 0.7)), 0.83);
        let t = Vector3::new(0.4, -0.1, 2.0);
        let pts: Vec<Point> = box_corners([1.0, 1.0, 1.0]).iter().map(|p| rot * p + t).collect();
        let bx = oriented_bbox(&pts).unwrap();
        assert_close(bx.sorted_extents(), [1.0, 1.0, 1.0], 1e-6);
        for p in &pts {
            assert!(bx.max_violation(p) <= 1e-9);
        }
    }

    #[test]
    fn slab_extents() {
        let bx = oriented_bbox(&box_corners([0.1, 0.2, 0.3])).unwrap();
        assert_close(bx.sorted_extents(), [0.1, 0.2, 0.3], 1e-6);
    }

    #[test]
    fn axis_aligned_inflates_under_rotation() {
        let rot = Rotation3::from_euler_angles(0.0, 0.0, std::f64::consts::FRAC_PI_4);
        let pts: Vec<Point> = box_corners([1.0, 1.0, 1.0]).iter().map(|p| rot * p).collect();
        let aabb = axis_aligned_bbox(&pts).unwrap();
        assert_close(aabb.sorted_extents(), [1.0, 2f64.sqrt(), 2f64.sqrt()], 1e-12);
    }

    #[test]
    fn planar_square_gets_min_rectangle() {
        let rot = Rotation3::from_euler_angles(0.0, 0.0, 0.3);
        let pts: Vec<Point> = [(0.0, 0.0), (0.4, 0.0), (0.4, 0.2), (0.0, 0.2), (0.2, 0.1)]
            .iter()
            .map(|&(x, y)| rot * Point::new(x, y, 1.0))
            .collect();
        let bx = fit_oriented(&pts, None).unwrap();
        assert_close(bx.sorted_extents(), [0.0, 0.2, 0.4], 1e-12);
    }
}

//! 3D convex hull (quickhull).

use std::collections::HashMap;

use nalgebra::Vector3;

use super::{GeometryError, Point};

/// Triangulated convex hull. Faces index into `vertices` and are oriented
/// counter-clockwise seen from outside.
#[derive(Debug, Clone)]
pub struct ConvexHull {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
}

impl ConvexHull {
    /// Hull vertices, in the order they appear in the input.
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Outward unit normal and offset (`n · x = offset` on the plane) of every face.
    pub fn planes(&self) -> impl Iterator<Item = (Vector3<f64>, f64)> + '_ {
        self.faces.iter().filter_map(|&[a, b, c]| {
            let (pa, pb, pc) = (&self.vertices[a], &self.vertices[b], &self.vertices[c]);
            let n = (pb - pa).cross(&(pc - pa));
            let len = n.norm();
            (len > 0.0).then(|| {
                let n = n / len;
                (n, n.dot(&pa.coords))
            })
        })
    }

    /// Largest signed distance of `p` above any face plane (≤ 0 inside).
    pub fn max_violation(&self, p: &Point) -> f64 {
        self.planes()
            .map(|(n, off)| n.dot(&p.coords) - off)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

struct Face {
    v: [usize; 3],
    normal: Vector3<f64>,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[Point], v: [usize; 3]) -> Self {
        let (a, b, c) = (&points[v[0]], &points[v[1]], &points[v[2]]);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        let normal = if len > 0.0 { n / len } else { Vector3::zeros() };
        Self {
            v,
            normal,
            offset: normal.dot(&a.coords),
            outside: Vec::new(),
            alive: true,
        }
    }

    fn distance(&self, p: &Point) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }

    fn edges(&self) -> [(usize, usize); 3] {
        let [a, b, c] = self.v;
        [(a, b), (b, c), (c, a)]
    }
}

pub fn convex_hull(points: &[Point]) -> Result<ConvexHull, GeometryError> {
    if points.len() < 4 {
        return Err(GeometryError::DegenerateCloud(format!(
            "convex hull needs at least 4 points, got {}",
            points.len()
        )));
    }
    let (lo, hi) = bounds(points);
    let scale = (hi - lo).norm();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(GeometryError::DegenerateCloud("all points coincide".into()));
    }
    let eps = 1e-10 * scale;

    let simplex = initial_simplex(points, eps)?;
    let mut faces: Vec<Face> = Vec::new();
    {
        let [a, b, c, d] = simplex;
        for (tri, opposite) in [([a, b, c], d), ([a, c, d], b), ([a, d, b], c), ([b, d, c], a)] {
            let mut f = Face::new(points, tri);
            if f.distance(&points[opposite]) > 0.0 {
                f = Face::new(points, [tri[0], tri[2], tri[1]]);
            }
            faces.push(f);
        }
    }

    let mut edge_owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for e in f.edges() {
            edge_owner.insert(e, fi);
        }
    }

    for (i, p) in points.iter().enumerate() {
        if simplex.contains(&i) {
            continue;
        }
        if let Some(f) = faces.iter_mut().find(|f| f.distance(p) > eps) {
            f.outside.push(i);
        }
    }

    let mut work: Vec<usize> = (0..faces.len()).rev().collect();
    while let Some(fi) = work.pop() {
        if !faces[fi].alive || faces[fi].outside.is_empty() {
            continue;
        }
        let eye = farthest(&faces[fi], points);
        let eye_p = &points[eye];

        // faces visible from the eye, grown from the seed face across shared edges
        let mut visible = vec![fi];
        let mut is_visible: HashMap<usize, bool> = HashMap::from([(fi, true)]);
        let mut cursor = 0;
        while cursor < visible.len() {
            let f = visible[cursor];
            cursor += 1;
            for (a, b) in faces[f].edges() {
                let Some(&g) = edge_owner.get(&(b, a)) else { continue };
                if is_visible.contains_key(&g) {
                    continue;
                }
                let vis = faces[g].distance(eye_p) > eps;
                is_visible.insert(g, vis);
                if vis {
                    visible.push(g);
                }
            }
        }

        let mut horizon = Vec::new();
        for &f in &visible {
            for (a, b) in faces[f].edges() {
                let across = edge_owner.get(&(b, a)).copied();
                if across.is_none_or(|g| !is_visible.get(&g).copied().unwrap_or(false)) {
                    horizon.push((a, b));
                }
            }
        }

        let mut orphans = Vec::new();
        for &f in &visible {
            let face = &mut faces[f];
            face.alive = false;
            orphans.extend(face.outside.drain(..).filter(|&i| i != eye));
            for e in face.edges() {
                if edge_owner.get(&e) == Some(&f) {
                    edge_owner.remove(&e);
                }
            }
        }

        let first_new = faces.len();
        for (a, b) in horizon {
            let f = Face::new(points, [a, b, eye]);
            let idx = faces.len();
            for e in f.edges() {
                edge_owner.insert(e, idx);
            }
            faces.push(f);
        }
        for i in orphans {
            let p = &points[i];
            if let Some(f) = faces[first_new..].iter_mut().find(|f| f.distance(p) > eps) {
                f.outside.push(i);
            }
        }
        for idx in (first_new..faces.len()).rev() {
            if !faces[idx].outside.is_empty() {
                work.push(idx);
            }
        }
    }

    let live: Vec<&Face> = faces.iter().filter(|f| f.alive).collect();
    let mut used: Vec<usize> = live.iter().flat_map(|f| f.v).collect();
    used.sort_unstable();
    used.dedup();
    let remap: HashMap<usize, usize> = used.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    Ok(ConvexHull {
        vertices: used.iter().map(|&i| points[i]).collect(),
        faces: live.iter().map(|f| f.v.map(|i| remap[&i])).collect(),
    })
}

fn bounds(points: &[Point]) -> (Vector3<f64>, Vector3<f64>) {
    let mut lo = points[0].coords;
    let mut hi = points[0].coords;
    for p in points {
        lo = lo.inf(&p.coords);
        hi = hi.sup(&p.coords);
    }
    (lo, hi)
}

fn farthest(face: &Face, points: &[Point]) -> usize {
    let mut best = face.outside[0];
    let mut best_d = face.distance(&points[best]);
    for &i in &face.outside[1..] {
        let d = face.distance(&points[i]);
        if d > best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn initial_simplex(points: &[Point], eps: f64) -> Result<[usize; 4], GeometryError> {
    // extreme points along each axis; take the most distant pair
    let mut extremes = Vec::with_capacity(6);
    for axis in 0..3 {
        let (mut lo, mut hi) = (0, 0);
        for (i, p) in points.iter().enumerate() {
            if p[axis] < points[lo][axis] {
                lo = i;
            }
            if p[axis] > points[hi][axis] {
                hi = i;
            }
        }
        extremes.push(lo);
        extremes.push(hi);
    }
    let (mut a, mut b, mut best) = (0, 0, -1.0);
    for (k, &i) in extremes.iter().enumerate() {
        for &j in &extremes[k + 1..] {
            let d = (points[i] - points[j]).norm_squared();
            if d > best {
                (a, b, best) = (i, j, d);
            }
        }
    }

    let dir = (points[b] - points[a]).normalize();
    let (c, line_d) = argmax(points, |p| {
        let v = p - points[a];
        (v - dir * v.dot(&dir)).norm()
    });
    if line_d <= eps {
        return Err(GeometryError::DegenerateCloud("points are collinear".into()));
    }

    let n = (points[b] - points[a]).cross(&(points[c] - points[a])).normalize();
    let (d, plane_d) = argmax(points, |p| n.dot(&(p - points[a])).abs());
    if plane_d <= eps {
        return Err(GeometryError::DegenerateCloud("points are coplanar".into()));
    }
    Ok([a, b, c, d])
}

fn argmax(points: &[Point], f: impl Fn(&Point) -> f64) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in points.iter().enumerate() {
        let v = f(p);
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_corners() -> Vec<Point> {
        let mut v = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    v.push(Point::new(x, y, z));
                }
            }
        }
        v
    }

    #[test]
    fn cube_with_interior_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts = cube_corners();
        for _ in 0..100 {
            pts.push(Point::new(
                rng.random_range(0.01..0.99),
                rng.random_range(0.01..0.99),
                rng.random_range(0.01..0.99),
            ));
        }
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.vertices(), &cube_corners()[..]);
        assert_eq!(hull.faces().len(), 12);
    }

    #[test]
    fn too_few_or_flat_inputs() {
        let three = vec![Point::new(0.0, 0.0, 0.0), Point::new(1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0)];
        assert!(matches!(convex_hull(&three), Err(GeometryError::DegenerateCloud(_))));
        let flat: Vec<Point> = (0..20).map(|i| Point::new(i as f64, (i * i) as f64, 2.0)).collect();
        assert!(matches!(convex_hull(&flat), Err(GeometryError::DegenerateCloud(_))));
    }

    #[test]
    fn sphere_sample_contains_every_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Point> = (0..400)
            .map(|_| {
                let v = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0f64),
                );
                Point::from(v.normalize() * 0.3)
            })
            .collect();
        let hull = convex_hull(&pts).unwrap();
        // containment oracle: every input is on or below every face plane
        for p in &pts {
            assert!(hull.max_violation(p) <= 1e-9, "{}", hull.max_violation(p));
        }
        for v in hull.vertices() {
            assert!(pts.contains(v));
        }
        // Euler characteristic of a closed triangulated sphere
        assert_eq!(hull.vertices().len() as i64 - hull.faces().len() as i64 * 3 / 2 + hull.faces().len() as i64, 2);
    }
}

//! Ray-cast depth images of posed boxes.

use nalgebra::{UnitQuaternion, Vector3};

use super::SynthError;
use crate::geometry::{CameraIntrinsics, DepthCrop, Point};

/// A rendered box: its depth crop placed at the silhouette's full-frame
/// origin, and the silhouette bounding box `[x, y, w, h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedCrop {
    pub crop: DepthCrop,
    pub bbox2d: [f64; 4],
}

/// Renders the box seen by a pinhole camera in a `frame` of pixels.
///
/// Each pixel `(u, v)` casts the ray through `(u, v)` itself, matching the
/// back-projection convention, and stores the nearest hit in sensor units
/// (rounded); background pixels are 0. Nothing outside `frame` is drawn.
pub fn render_box_crop(
    extents: [f64; 3],
    rotation: &UnitQuaternion<f64>,
    translation: &Vector3<f64>,
    k: &CameraIntrinsics,
    frame: (u32, u32),
) -> Result<RenderedCrop, SynthError> {
    if !extents.iter().all(|&e| e > 0.0 && e.is_finite()) {
        return Err(SynthError::BadSpec("box extents must be positive".into()));
    }
    let half = Vector3::from(extents) / 2.0;
    let inv = rotation.inverse();
    let origin = inv * (-translation);

    let (mut u_lo, mut u_hi, mut v_lo, mut v_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                let c = rotation * Vector3::new(sx * half.x, sy * half.y, sz * half.z) + translation;
                if c.z <= 0.0 {
                    return Err(SynthError::BadSpec("box reaches behind the camera".into()));
                }
                let (u, v) = k.project(&Point::from(c));
                u_lo = u_lo.min(u);
                u_hi = u_hi.max(u);
                v_lo = v_lo.min(v);
                v_hi = v_hi.max(v);
            }
        }
    }
    let clamp = |x: f64, max: u32| x.clamp(0.0, f64::from(max) - 1.0) as u32;
    let (u0, u1) = (clamp(u_lo.floor(), frame.0), clamp(u_hi.ceil(), frame.0));
    let (v0, v1) = (clamp(v_lo.floor(), frame.1), clamp(v_hi.ceil(), frame.1));

    let mut hits: Vec<(u32, u32, u16)> = Vec::new();
    for v in v0..=v1 {
        for u in u0..=u1 {
            let dir = Vector3::new((f64::from(u) - k.cx) / k.fx, (f64::from(v) - k.cy) / k.fy, 1.0);
            // with a unit z component the ray parameter is the depth itself
            let Some(z) = slab_entry(&origin, &(inv * dir), &half) else {
                continue;
            };
            let units = (z / k.depth_scale).round();
            if !(1.0..=f64::from(u16::MAX)).contains(&units) {
                return Err(SynthError::BadSpec(format!("depth {z} m out of sensor range")));
            }
            hits.push((u, v, units as u16));
        }
    }
    if hits.is_empty() {
        return Err(SynthError::BadSpec("box not visible in the frame".into()));
    }

    let (cu0, cu1) = hits.iter().fold((u32::MAX, 0), |(a, b), h| (a.min(h.0), b.max(h.0)));
    let (cv0, cv1) = hits.iter().fold((u32::MAX, 0), |(a, b), h| (a.min(h.1), b.max(h.1)));
    let (w, h) = (cu1 - cu0 + 1, cv1 - cv0 + 1);
    let mut values = vec![0u16; (w * h) as usize];
    for (u, v, d) in hits {
        values[((v - cv0) * w + (u - cu0)) as usize] = d;
    }
    let crop = DepthCrop::new(w, h, values)
        .expect("buffer sized from the crop")
        .with_origin(cu0, cv0);
    Ok(RenderedCrop {
        crop,
        bbox2d: [f64::from(cu0), f64::from(cv0), f64::from(w), f64::from(h)],
    })
}

/// Entry parameter of a ray into the axis-aligned box `[-half, half]`.
fn slab_entry(origin: &Vector3<f64>, dir: &Vector3<f64>, half: &Vector3<f64>) -> Option<f64> {
    let (mut t_near, mut t_far) = (f64::NEG_INFINITY, f64::INFINITY);
    for a in 0..3 {
        if dir[a].abs() < 1e-15 {
            if origin[a].abs() > half[a] {
                return None;
            }
            continue;
        }
        let t1 = (-half[a] - origin[a]) / dir[a];
        let t2 = (half[a] - origin[a]) / dir[a];
        t_near = t_near.max(t1.min(t2));
        t_far = t_far.min(t1.max(t2));
    }
    (t_near <= t_far && t_near > 0.0).then_some(t_near)
}

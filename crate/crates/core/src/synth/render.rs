//! Exact planar depth and silhouettes of cuboids standing on the ground plane.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::boxes::Box3;
use crate::geometry::{ground_plane_homography, project_world_to_pixel, world_to_camera, Calibration};

/// Ground pixels farther than this are left without depth.
pub const MAX_GROUND_DEPTH: f64 = 150.0;

/// Camera at `position` looking at `target` with the image x axis horizontal.
pub fn look_at_camera(
    camera_id: u32,
    position: [f64; 3],
    target: [f64; 3],
    focal: f64,
    width: u32,
    height: u32,
) -> Calibration<f64> {
    let c = Vector3::from(position);
    let forward = (Vector3::from(target) - c).normalize();
    let mut right = forward.cross(&Vector3::z());
    if right.norm() < 1e-9 {
        right = Vector3::x();
    }
    let right = right.normalize();
    let down = forward.cross(&right);
    let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let mut calib = Calibration::with_intrinsics(
        camera_id,
        focal,
        focal,
        (width as f64 - 1.0) / 2.0,
        (height as f64 - 1.0) / 2.0,
        width,
        height,
    );
    calib.rotation = rotation;
    calib.translation = -(rotation * c);
    if let Some(h) = ground_plane_homography(&calib) {
        calib.homography = h;
    }
    calib
}

/// World direction of the ray through pixel `(u, v)`, scaled so its camera z component is 1.
/// A point `center + t * dir` then has planar depth `t`.
pub fn pixel_ray(calib: &Calibration<f64>, u: f64, v: f64) -> Vector3<f64> {
    let d = Vector3::new((u - calib.cu) / calib.fu, (v - calib.cv) / calib.fv, 1.0);
    calib.rotation.transpose() * d
}

/// Entry distance of a ray into an oriented box, if it hits in front of the origin.
pub fn ray_box(origin: &Vector3<f64>, dir: &Vector3<f64>, b: &Box3<f64>) -> Option<f64> {
    let (s, c) = b.yaw.sin_cos();
    let rel = origin - b.center;
    let o = [c * rel.x + s * rel.y, -s * rel.x + c * rel.y, rel.z];
    let d = [c * dir.x + s * dir.y, -s * dir.x + c * dir.y, dir.z];
    let half = [b.dims.x / 2.0, b.dims.y / 2.0, b.dims.z / 2.0];
    let mut enter = f64::NEG_INFINITY;
    let mut exit = f64::INFINITY;
    for k in 0..3 {
        if d[k].abs() < 1e-15 {
            if o[k].abs() > half[k] {
                return None;
            }
            continue;
        }
        let t1 = (-half[k] - o[k]) / d[k];
        let t2 = (half[k] - o[k]) / d[k];
        enter = enter.max(t1.min(t2));
        exit = exit.min(t1.max(t2));
    }
    (enter <= exit && enter > 0.0).then_some(enter)
}

/// Planar depth of the ground plane `z = 0` at every pixel, row-major.
pub fn ground_depth(calib: &Calibration<f64>) -> Vec<f32> {
    let center = calib.center().coords;
    let mut out = Vec::with_capacity((calib.width * calib.height) as usize);
    for v in 0..calib.height {
        for u in 0..calib.width {
            let d = pixel_ray(calib, u as f64, v as f64);
            let t = if d.z < -1e-12 { -center.z / d.z } else { -1.0 };
            out.push(if t > 0.0 && t <= MAX_GROUND_DEPTH { t as f32 } else { 0.0 });
        }
    }
    out
}

/// Box corners in world coordinates.
pub fn box_corners(b: &Box3<f64>) -> [Point3<f64>; 8] {
    let (s, c) = b.yaw.sin_cos();
    let mut out = [Point3::origin(); 8];
    for (i, p) in out.iter_mut().enumerate() {
        let dx = if i & 1 == 0 { -0.5 } else { 0.5 } * b.dims.x;
        let dy = if i & 2 == 0 { -0.5 } else { 0.5 } * b.dims.y;
        let dz = if i & 4 == 0 { -0.5 } else { 0.5 } * b.dims.z;
        *p = Point3::new(b.center.x + c * dx - s * dy, b.center.y + s * dx + c * dy, b.center.z + dz);
    }
    out
}

/// Pixel rectangle `(u0, v0, u1, v1)` inclusive that may contain the box, or
/// `None` if it is entirely outside the image or behind the camera.
pub fn pixel_region(calib: &Calibration<f64>, b: &Box3<f64>) -> Option<(u32, u32, u32, u32)> {
    let corners = box_corners(b);
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut any_front = false;
    for p in &corners {
        if world_to_camera(p, calib).z <= 1e-3 {
            // A corner behind the camera can project anywhere; scan the whole image.
            if corners.iter().any(|q| world_to_camera(q, calib).z > 1e-3) {
                return Some((0, 0, calib.width - 1, calib.height - 1));
            }
            continue;
        }
        any_front = true;
        let px = project_world_to_pixel(p, calib).ok()?;
        lo = [lo[0].min(px.x), lo[1].min(px.y)];
        hi = [hi[0].max(px.x), hi[1].max(px.y)];
    }
    if !any_front {
        return None;
    }
    let w = calib.width as f64 - 1.0;
    let h = calib.height as f64 - 1.0;
    if hi[0] < 0.0 || hi[1] < 0.0 || lo[0] > w || lo[1] > h {
        return None;
    }
    let clamp = |x: f64, m: f64| x.clamp(0.0, m) as u32;
    Some((clamp(lo[0].floor() - 1.0, w), clamp(lo[1].floor() - 1.0, h), clamp(hi[0].ceil() + 1.0, w), clamp(hi[1].ceil() + 1.0, h)))
}

/// Depth image plus, per pixel, the index of the box seen there (or `usize::MAX`).
pub struct Render {
    pub depth: Vec<f32>,
    pub owner: Vec<usize>,
}

pub const NO_OWNER: usize = usize::MAX;

pub fn render(calib: &Calibration<f64>, ground: &[f32], boxes: &[Box3<f64>]) -> Render {
    let width = calib.width as usize;
    let mut depth = ground.to_vec();
    let mut best: Vec<f64> = ground.iter().map(|&z| if z > 0.0 { z as f64 } else { f64::INFINITY }).collect();
    let mut owner = vec![NO_OWNER; depth.len()];
    let origin = calib.center().coords;
    for (k, b) in boxes.iter().enumerate() {
        let Some((u0, v0, u1, v1)) = pixel_region(calib, b) else { continue };
        for v in v0..=v1 {
            for u in u0..=u1 {
                let dir = pixel_ray(calib, u as f64, v as f64);
                if let Some(t) = ray_box(&origin, &dir, b) {
                    let i = v as usize * width + u as usize;
                    if t < best[i] {
                        best[i] = t;
                        depth[i] = t as f32;
                        owner[i] = k;
                    }
                }
            }
        }
    }
    Render { depth, owner }
}

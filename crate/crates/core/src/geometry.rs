//! Pinhole camera algebra: intrinsics, world/camera extrinsics, ground-plane
//! homography and depth back-projection.
//!
//! Extrinsics follow the world→camera convention `X_c = R·X_w + t`. Depth is
//! planar, i.e. the camera-frame `Z` coordinate, not the length of the ray.
//! No lens distortion is modelled.

use nalgebra::{Matrix3, Point2, Point3, Vector3};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid depth {0}: must be positive and finite")]
    InvalidDepth(f64),
    #[error("point is behind the camera (Z = {0})")]
    BehindCamera(f64),
    #[error("homography maps point to infinity (w = {0})")]
    PointAtInfinity(f64),
    #[error("invalid calibration for camera {camera_id}: {reason}")]
    InvalidCalibration { camera_id: u32, reason: String },
}

/// Intrinsics, extrinsics and ground-plane homography of one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration<T: Real> {
    pub camera_id: u32,
    pub fu: T,
    pub fv: T,
    pub cu: T,
    pub cv: T,
    /// Rotation world→camera.
    pub rotation: Matrix3<T>,
    /// Translation world→camera, meters.
    pub translation: Vector3<T>,
    /// Image→top-down map homography.
    pub homography: Matrix3<T>,
    pub width: u32,
    pub height: u32,
}

impl<T: Real> Calibration<T> {
    /// Calibration with identity extrinsics and identity homography.
    pub fn with_intrinsics(camera_id: u32, fu: T, fv: T, cu: T, cv: T, width: u32, height: u32) -> Self {
        Self {
            camera_id,
            fu,
            fv,
            cu,
            cv,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            homography: Matrix3::identity(),
            width,
            height,
        }
    }

    /// The intrinsic matrix K.
    pub fn intrinsic_matrix(&self) -> Matrix3<T> {
        let (z, o) = (T::zero(), T::one());
        Matrix3::new(self.fu, z, self.cu, z, self.fv, self.cv, z, z, o)
    }

    /// Camera center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Point3<T> {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |reason: &str| GeometryError::InvalidCalibration {
            camera_id: self.camera_id,
            reason: reason.to_string(),
        };
        let scalars = [self.fu, self.fv, self.cu, self.cv];
        if scalars.iter().any(|v| !v.finite())
            || self.rotation.iter().any(|v| !v.finite())
            || self.translation.iter().any(|v| !v.finite())
            || self.homography.iter().any(|v| !v.finite())
        {
            return Err(bad("non-finite value"));
        }
        if self.fu <= T::zero() || self.fv <= T::zero() {
            return Err(bad("focal lengths must be positive"));
        }
        // f32 cannot hold the 1e-9 orthonormality tolerance.
        let tol = if T::lit(1e-9) + T::one() == T::one() { T::lit(1e-5) } else { T::lit(1e-9) };
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        if gram.iter().any(|v| v.abs() > tol) {
            return Err(bad("rotation is not orthonormal"));
        }
        if (self.rotation.determinant() - T::one()).abs() > tol {
            return Err(bad("rotation determinant is not +1"));
        }
        if self.homography.determinant().abs() <= T::lit(1e-12) {
            return Err(bad("homography is singular"));
        }
        Ok(())
    }

    pub fn contains_pixel(&self, u: T, v: T) -> bool {
        u >= T::zero() && v >= T::zero() && u <= T::from_count(self.width as usize) && v <= T::from_count(self.height as usize)
    }
}

/// Lift pixel `(u, v)` with planar depth `z` into the camera frame.
pub fn backproject_pixel<T: Real>(u: T, v: T, z: T, calib: &Calibration<T>) -> Result<Point3<T>, GeometryError> {
    if !(z > T::zero()) || !z.finite() {
        return Err(GeometryError::InvalidDepth(z.as_f64()));
    }
    Ok(Point3::new((u - calib.cu) * z / calib.fu, (v - calib.cv) * z / calib.fv, z))
}

/// `X_w = Rᵀ (X_c − t)`.
pub fn camera_to_world<T: Real>(p: &Point3<T>, calib: &Calibration<T>) -> Point3<T> {
    Point3::from(calib.rotation.transpose() * (p.coords - calib.translation))
}

/// `X_c = R X_w + t`.
pub fn world_to_camera<T: Real>(p: &Point3<T>, calib: &Calibration<T>) -> Point3<T> {
    Point3::from(calib.rotation * p.coords + calib.translation)
}

pub fn project_camera_to_pixel<T: Real>(p: &Point3<T>, calib: &Calibration<T>) -> Result<Point2<T>, GeometryError> {
    if !(p.z > T::zero()) {
        return Err(GeometryError::BehindCamera(p.z.as_f64()));
    }
    Ok(Point2::new(calib.fu * p.x / p.z + calib.cu, calib.fv * p.y / p.z + calib.cv))
}

pub fn project_world_to_pixel<T: Real>(p: &Point3<T>, calib: &Calibration<T>) -> Result<Point2<T>, GeometryError> {
    project_camera_to_pixel(&world_to_camera(p, calib), calib)
}

/// Map an image point through a projective homography.
pub fn homography_project<T: Real>(u: T, v: T, h: &Matrix3<T>) -> Result<Point2<T>, GeometryError> {
    let q = h * Vector3::new(u, v, T::one());
    if q.z.abs() < T::lit(1e-12) {
        return Err(GeometryError::PointAtInfinity(q.z.as_f64()));
    }
    Ok(Point2::new(q.x / q.z, q.y / q.z))
}

/// Homography taking image pixels to the world `z = 0` plane, in meters.
///
/// The ground point `(X, Y, 0)` images at `K [r1 r2 t] (X, Y, 1)ᵀ`; the
/// returned matrix is the inverse of that mapping.
pub fn ground_plane_homography<T: Real>(calib: &Calibration<T>) -> Option<Matrix3<T>> {
    let r = &calib.rotation;
    let forward = Matrix3::from_columns(&[r.column(0).into_owned(), r.column(1).into_owned(), calib.translation]);
    (calib.intrinsic_matrix() * forward).try_inverse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{Rotation3, Unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn calib_1000() -> Calibration<f64> {
        Calibration::with_intrinsics(0, 1000.0, 1000.0, 960.0, 540.0, 1920, 1080)
    }

    fn random_calib(rng: &mut ChaCha8Rng) -> Calibration<f64> {
        let axis = Unit::new_normalize(Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let rot = Rotation3::from_axis_angle(&axis, rng.gen_range(-3.0..3.0));
        let mut c = Calibration::with_intrinsics(
            1,
            rng.gen_range(300.0..2000.0),
            rng.gen_range(300.0..2000.0),
            rng.gen_range(300.0..1000.0),
            rng.gen_range(200.0..600.0),
            1920,
            1080,
        );
        c.rotation = *rot.matrix();
        c.translation = Vector3::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
        c
    }

    #[test]
    fn principal_point_lands_on_axis() {
        let c = calib_1000();
        let p = backproject_pixel(960.0, 540.0, 2.0, &c).unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn one_focal_length_offset_gives_x_equal_z() {
        let c = calib_1000();
        let p = backproject_pixel(1960.0, 540.0, 3.0, &c).unwrap();
        assert_eq!(p, Point3::new(3.0, 0.0, 3.0));
    }

    #[test]
    fn non_positive_depth_rejected() {
        let c = calib_1000();
        assert!(matches!(backproject_pixel(1.0, 1.0, 0.0, &c), Err(GeometryError::InvalidDepth(_))));
        assert!(matches!(backproject_pixel(1.0, 1.0, -2.0, &c), Err(GeometryError::InvalidDepth(_))));
        assert!(matches!(backproject_pixel(1.0, 1.0, f64::NAN, &c), Err(GeometryError::InvalidDepth(_))));
    }

    #[test]
    fn extrinsic_identity_and_translation() {
        let mut c = calib_1000();
        assert_eq!(camera_to_world(&Point3::new(1.0, 2.0, 3.0), &c), Point3::new(1.0, 2.0, 3.0));
        c.translation = Vector3::new(0.0, 0.0, -5.0);
        assert_eq!(camera_to_world(&Point3::origin(), &c), Point3::new(0.0, 0.0, 5.0));
    }

    #[test]
    fn pinhole_substitution() {
        let c = calib_1000();
        let px = project_camera_to_pixel(&Point3::new(0.0, 0.0, 1.0), &c).unwrap();
        assert_eq!((px.x, px.y), (960.0, 540.0));
        let px = project_camera_to_pixel(&Point3::new(1.0, 0.0, 2.0), &c).unwrap();
        assert_eq!(px.x, 1460.0);
        assert!(matches!(
            project_camera_to_pixel(&Point3::new(1.0, 0.0, -2.0), &c),
            Err(GeometryError::BehindCamera(_))
        ));
    }

    #[test]
    fn homography_basics() {
        let id = Matrix3::<f64>::identity();
        let p = homography_project(10.0, 20.0, &id).unwrap();
        assert_eq!((p.x, p.y), (10.0, 20.0));
        let s = Matrix3::from_diagonal(&Vector3::new(2.0, 2.0, 1.0));
        let p = homography_project(10.0, 20.0, &s).unwrap();
        assert_eq!((p.x, p.y), (20.0, 40.0));
        let degenerate = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        assert!(matches!(homography_project(1.0, 1.0, &degenerate), Err(GeometryError::PointAtInfinity(_))));
    }

    #[test]
    fn homography_inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let mut h = Matrix3::from_fn(|_, _| rng.gen_range(-0.5..0.5)) + Matrix3::identity();
            h[(2, 0)] *= 1e-3;
            h[(2, 1)] *= 1e-3;
            let Some(hinv) = h.try_inverse() else { continue };
            let (u, v) = (rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0));
            let Ok(a) = homography_project(u, v, &hinv) else { continue };
            let Ok(b) = homography_project(a.x, a.y, &h) else { continue };
            assert_abs_diff_eq!(b.x, u, epsilon = 1e-9);
            assert_abs_diff_eq!(b.y, v, epsilon = 1e-9);
        }
    }

    #[test]
    fn pixel_round_trip_random_calibrations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let c = random_calib(&mut rng);
            c.validate().unwrap();
            for _ in 0..1000 {
                let (u, v, z) = (rng.gen_range(0.0..1920.0), rng.gen_range(0.0..1080.0), rng.gen_range(0.1..80.0));
                let pc = backproject_pixel(u, v, z, &c).unwrap();
                let pw = camera_to_world(&pc, &c);
                let back = project_camera_to_pixel(&world_to_camera(&pw, &c), &c).unwrap();
                assert!((back.x - u).abs() < 1e-9 && (back.y - v).abs() < 1e-9, "{u} {v} -> {back:?}");
            }
        }
    }

    #[test]
    fn backprojection_linear_in_depth() {
        let c = calib_1000();
        let a = backproject_pixel(123.0, 456.0, 1.0, &c).unwrap();
        let b = backproject_pixel(123.0, 456.0, 7.5, &c).unwrap();
        assert_abs_diff_eq!((a.coords * 7.5 - b.coords).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ground_homography_matches_projection() {
        let mut c = calib_1000();
        // Camera 10 m up, looking straight down.
        c.rotation = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
        c.translation = -(c.rotation * Vector3::new(0.0, 0.0, 10.0));
        c.homography = ground_plane_homography(&c).unwrap();
        c.validate().unwrap();
        let ground = Point3::new(1.5, -2.0, 0.0);
        let px = project_world_to_pixel(&ground, &c).unwrap();
        let m = homography_project(px.x, px.y, &c.homography).unwrap();
        assert_abs_diff_eq!(m.x, 1.5, epsilon = 1e-9);
        assert_abs_diff_eq!(m.y, -2.0, epsilon = 1e-9);
    }

    #[test]
    fn validation_rejects_bad_rotation_and_focal() {
        let mut c = calib_1000();
        c.rotation[(0, 0)] = 1.1;
        assert!(c.validate().is_err());
        let mut c = calib_1000();
        c.fu = 0.0;
        assert!(c.validate().is_err());
        let mut c = calib_1000();
        c.homography = Matrix3::zeros();
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_precision_round_trip() {
        let c = Calibration::<f32>::with_intrinsics(0, 800.0, 800.0, 320.0, 240.0, 640, 480);
        c.validate().unwrap();
        let p = backproject_pixel(100.0f32, 50.0, 4.0, &c).unwrap();
        let back = project_camera_to_pixel(&p, &c).unwrap();
        assert!((back.x - 100.0).abs() < 1e-3 && (back.y - 50.0).abs() < 1e-3);
    }
}

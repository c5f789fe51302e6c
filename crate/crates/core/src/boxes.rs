//! Oriented 3D box shared by box fitting, fusion, evaluation and result I/O.

use nalgebra::Vector3;

use crate::scalar::Real;

/// Box with a yaw rotation about the world z axis.
///
/// `center.z` is the vertical center; `dims` are `(length, width, height)` with
/// length along the yaw heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3<T: Real> {
    pub center: Vector3<T>,
    pub dims: Vector3<T>,
    /// Radians, in `(-π, π]`.
    pub yaw: T,
    pub score: T,
    pub class_id: u32,
    pub global_id: u64,
}

impl<T: Real> Box3<T> {
    pub fn new(center: [T; 3], dims: [T; 3], yaw: T, score: T, class_id: u32, global_id: u64) -> Self {
        Self {
            center: Vector3::from(center),
            dims: Vector3::from(dims),
            yaw,
            score,
            class_id,
            global_id,
        }
    }

    pub fn volume(&self) -> T {
        self.dims.x * self.dims.y * self.dims.z
    }

    /// Axis-aligned `(min, max)` extents, ignoring yaw.
    pub fn aabb(&self) -> (Vector3<T>, Vector3<T>) {
        let half = self.dims * T::lit(0.5);
        (self.center - half, self.center + half)
    }

    pub fn is_valid(&self) -> bool {
        let finite = self.center.iter().chain(self.dims.iter()).all(|v| v.finite()) && self.yaw.finite();
        finite
            && self.dims.iter().all(|d| *d > T::zero())
            && self.yaw > -T::pi()
            && self.yaw <= T::pi()
    }
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let two_pi = T::two_pi();
    let mut x = a % two_pi;
    if x <= -T::pi() {
        x += two_pi;
    } else if x > T::pi() {
        x -= two_pi;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_and_validity() {
        let b = Box3::new([0.0, 0.0, 0.5], [2.0, 3.0, 1.0], 0.0, 1.0, 0, 1);
        assert_eq!(b.volume(), 6.0);
        assert!(b.is_valid());
        let mut bad = b;
        bad.yaw = -std::f64::consts::PI;
        assert!(!bad.is_valid());
        let f = Box3::<f32>::new([0.0; 3], [1.0; 3], 0.0, 1.0, 0, 1);
        assert_eq!(f.volume(), 1.0f32);
    }

    #[test]
    fn wrap_angle_range() {
        use std::f64::consts::PI;
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5f64) - 0.5).abs() < 1e-15);
        assert!((wrap_angle(-2.0 * PI + 0.1) - 0.1).abs() < 1e-12);
    }
}

//! Online 3D multi-target multi-camera tracking.
//!
//! Per-camera detections are tracked locally, grouped across cameras on a
//! top-down map, given global identities by local-ID-consistent temporal
//! association, and lifted to 3D boxes from masked depth, DBSCAN clustering,
//! volume-weighted box fusion and trajectory-based yaw.
//!
//! The geometric kernels are generic over [`Real`] (`f32`/`f64`); the aliases
//! below fix them to `f64`, which is what the pipeline runs on.

pub mod assignment;
pub mod boxes;
pub mod config;
pub mod eval;
pub mod fuse;
pub mod geometry;
pub mod ingest;
pub mod lift;
pub mod pipeline;
pub mod scalar;
pub mod sct;
pub mod spatial;
pub mod synth;
pub mod temporal;

pub use scalar::Real;

pub type CameraCalibration = geometry::Calibration<f64>;
pub type Box3D = boxes::Box3<f64>;
pub type Point3 = nalgebra::Point3<f64>;

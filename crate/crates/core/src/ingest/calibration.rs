use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{create, read_to_string, IngestError};
use crate::geometry::Calibration;

/// One camera entry of the calibration JSON document.
///
/// `R` and `t` map world to camera (`X_c = R·X_w + t`); `R` and `H` are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub camera_id: u32,
    pub fu: f64,
    pub fv: f64,
    pub cu: f64,
    pub cv: f64,
    #[serde(rename = "R")]
    pub rotation: [f64; 9],
    pub t: [f64; 3],
    #[serde(rename = "H")]
    pub homography: [f64; 9],
    pub width: u32,
    pub height: u32,
}

impl From<&Calibration<f64>> for CalibrationRecord {
    fn from(c: &Calibration<f64>) -> Self {
        let row_major = |m: &Matrix3<f64>| {
            let mut out = [0.0; 9];
            for r in 0..3 {
                for col in 0..3 {
                    out[r * 3 + col] = m[(r, col)];
                }
            }
            out
        };
        Self {
            camera_id: c.camera_id,
            fu: c.fu,
            fv: c.fv,
            cu: c.cu,
            cv: c.cv,
            rotation: row_major(&c.rotation),
            t: [c.translation.x, c.translation.y, c.translation.z],
            homography: row_major(&c.homography),
            width: c.width,
            height: c.height,
        }
    }
}

impl From<&CalibrationRecord> for Calibration<f64> {
    fn from(r: &CalibrationRecord) -> Self {
        Self {
            camera_id: r.camera_id,
            fu: r.fu,
            fv: r.fv,
            cu: r.cu,
            cv: r.cv,
            rotation: Matrix3::from_row_slice(&r.rotation),
            translation: Vector3::from_row_slice(&r.t),
            homography: Matrix3::from_row_slice(&r.homography),
            width: r.width,
            height: r.height,
        }
    }
}

/// Load and validate every camera of a scene. Output is sorted by camera id.
pub fn load_calibrations(path: &Path) -> Result<Vec<Calibration<f64>>, IngestError> {
    let text = read_to_string(path)?;
    let records: Vec<CalibrationRecord> =
        serde_json::from_str(&text).map_err(|e| IngestError::parse(path, e.line(), e.to_string()))?;
    let mut out = Vec::with_capacity(records.len());
    for rec in &records {
        let calib = Calibration::from(rec);
        calib.validate().map_err(|e| IngestError::invalid(path, e.to_string()))?;
        out.push(calib);
    }
    out.sort_by_key(|c| c.camera_id);
    if out.windows(2).any(|w| w[0].camera_id == w[1].camera_id) {
        return Err(IngestError::invalid(path, "duplicate camera_id"));
    }
    Ok(out)
}

pub fn write_calibrations(path: &Path, calibs: &[Calibration<f64>]) -> Result<(), IngestError> {
    let records: Vec<CalibrationRecord> = calibs.iter().map(CalibrationRecord::from).collect();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &records).map_err(|e| IngestError::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| IngestError::io(path, e))
}

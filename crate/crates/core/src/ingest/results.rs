use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{create, read_to_string, IngestError};
use crate::boxes::Box3;

/// One line of the 3D result file:
/// `frame class_id global_id x y z length width height yaw score`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRecord {
    pub frame: u32,
    pub class_id: u32,
    pub global_id: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub yaw: f64,
    pub score: f64,
}

fn q6(v: f64) -> f64 {
    let q = (v * 1e6).round() / 1e6;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

/// Six-decimal yaw kept inside `(-π, π]`.
fn q6_yaw(v: f64) -> f64 {
    let q = q6(v);
    if q > PI || q <= -PI {
        3.141592
    } else {
        q
    }
}

impl ResultRecord {
    pub fn from_box(frame: u32, b: &Box3<f64>) -> Self {
        Self {
            frame,
            class_id: b.class_id,
            global_id: b.global_id,
            x: b.center.x,
            y: b.center.y,
            z: b.center.z,
            length: b.dims.x,
            width: b.dims.y,
            height: b.dims.z,
            yaw: b.yaw,
            score: b.score,
        }
    }

    /// Values exactly as they will read back from the file.
    pub fn quantized(&self) -> Self {
        Self {
            x: q6(self.x),
            y: q6(self.y),
            z: q6(self.z),
            length: q6(self.length),
            width: q6(self.width),
            height: q6(self.height),
            yaw: q6_yaw(self.yaw),
            score: q6(self.score),
            ..*self
        }
    }

    pub fn to_box(&self) -> Box3<f64> {
        Box3::new(
            [self.x, self.y, self.z],
            [self.length, self.width, self.height],
            self.yaw,
            self.score,
            self.class_id,
            self.global_id,
        )
    }

    pub fn to_line(&self) -> String {
        let q = self.quantized();
        format!(
            "{} {} {} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
            q.frame, q.class_id, q.global_id, q.x, q.y, q.z, q.length, q.width, q.height, q.yaw, q.score
        )
    }

    fn parse(line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 11 {
            return Err(format!("expected 11 columns, found {}", f.len()));
        }
        let int = |s: &str| s.parse::<u64>().map_err(|e| format!("{s:?}: {e}"));
        let real = |s: &str| {
            let v = s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"))?;
            v.is_finite().then_some(v).ok_or_else(|| format!("non-finite value {s:?}"))
        };
        let rec = Self {
            frame: u32::try_from(int(f[0])?).map_err(|e| e.to_string())?,
            class_id: u32::try_from(int(f[1])?).map_err(|e| e.to_string())?,
            global_id: int(f[2])?,
            x: real(f[3])?,
            y: real(f[4])?,
            z: real(f[5])?,
            length: real(f[6])?,
            width: real(f[7])?,
            height: real(f[8])?,
            yaw: real(f[9])?,
            score: real(f[10])?,
        };
        if !(rec.length > 0.0 && rec.width > 0.0 && rec.height > 0.0) {
            return Err("box dimensions must be positive".into());
        }
        if !(rec.yaw > -PI && rec.yaw <= PI) {
            return Err(format!("yaw {} outside (-pi, pi]", rec.yaw));
        }
        Ok(rec)
    }
}

/// One line of the 2D MTMC result file: `frame camera_id global_id x1 y1 x2 y2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Result2DRecord {
    pub frame: u32,
    pub camera_id: u32,
    pub global_id: u64,
    pub bbox: [f64; 4],
}

impl Result2DRecord {
    pub fn to_line(&self) -> String {
        let b = self.bbox.map(q6);
        format!("{} {} {} {:.6} {:.6} {:.6} {:.6}", self.frame, self.camera_id, self.global_id, b[0], b[1], b[2], b[3])
    }

    fn parse(line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 7 {
            return Err(format!("expected 7 columns, found {}", f.len()));
        }
        let real = |s: &str| {
            let v = s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"))?;
            v.is_finite().then_some(v).ok_or_else(|| format!("non-finite value {s:?}"))
        };
        Ok(Self {
            frame: f[0].parse().map_err(|e| format!("{e}"))?,
            camera_id: f[1].parse().map_err(|e| format!("{e}"))?,
            global_id: f[2].parse().map_err(|e| format!("{e}"))?,
            bbox: [real(f[3])?, real(f[4])?, real(f[5])?, real(f[6])?],
        })
    }
}

fn parse_lines<T>(path: &Path, parse: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, IngestError> {
    let text = read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse(l).map_err(|m| IngestError::parse(path, i + 1, m)))
        .collect()
}

pub fn load_results(path: &Path) -> Result<Vec<ResultRecord>, IngestError> {
    parse_lines(path, ResultRecord::parse)
}

pub fn load_results_2d(path: &Path) -> Result<Vec<Result2DRecord>, IngestError> {
    parse_lines(path, Result2DRecord::parse)
}

pub fn write_results(path: &Path, records: &[ResultRecord]) -> Result<(), IngestError> {
    let mut w = ResultWriter::create(path)?;
    w.write_3d(records)?;
    w.flush()
}

pub fn write_results_2d(path: &Path, records: &[Result2DRecord]) -> Result<(), IngestError> {
    let mut w = ResultWriter::create(path)?;
    w.write_2d(records)?;
    w.flush()
}

/// Append-only result writer; flushing after each frame keeps a valid prefix on disk.
pub struct ResultWriter {
    path: PathBuf,
    inner: BufWriter<File>,
}

impl ResultWriter {
    pub fn create(path: &Path) -> Result<Self, IngestError> {
        Ok(Self { path: path.to_path_buf(), inner: create(path)? })
    }

    pub fn write_3d(&mut self, records: &[ResultRecord]) -> Result<(), IngestError> {
        for r in records {
            writeln!(self.inner, "{}", r.to_line()).map_err(|e| IngestError::io(&self.path, e))?;
        }
        Ok(())
    }

    pub fn write_2d(&mut self, records: &[Result2DRecord]) -> Result<(), IngestError> {
        for r in records {
            writeln!(self.inner, "{}", r.to_line()).map_err(|e| IngestError::io(&self.path, e))?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), IngestError> {
        self.inner.flush().map_err(|e| IngestError::io(&self.path, e))
    }
}

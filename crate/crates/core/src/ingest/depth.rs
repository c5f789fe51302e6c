use std::io::Write;
use std::path::Path;

use super::{create, IngestError};

pub const DEPTH_MAGIC: &[u8; 4] = b"DPTH";
const HEADER_LEN: usize = 16;

/// Planar metric depth for one `(camera, frame)`; `0.0` marks a missing sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub camera_id: u32,
    pub frame: u32,
    pub width: u32,
    pub height: u32,
    /// Row-major, `width * height` values.
    pub data: Vec<f32>,
}

impl DepthMap {
    pub fn new(camera_id: u32, frame: u32, width: u32, height: u32) -> Self {
        Self { camera_id, frame, width, height, data: vec![0.0; width as usize * height as usize] }
    }

    #[inline]
    pub fn raw(&self, u: u32, v: u32) -> f32 {
        self.data[v as usize * self.width as usize + u as usize]
    }

    /// Depth at a pixel, `None` for the sentinel or out-of-range pixels.
    #[inline]
    pub fn get(&self, u: u32, v: u32) -> Option<f32> {
        if u >= self.width || v >= self.height {
            return None;
        }
        let z = self.raw(u, v);
        (z > 0.0).then_some(z)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.data.len() != self.width as usize * self.height as usize {
            return Err("payload size does not match header".into());
        }
        match self.data.iter().position(|z| !z.is_finite() || *z < 0.0) {
            Some(i) => Err(format!("invalid depth {} at index {i}", self.data[i])),
            None => Ok(()),
        }
    }
}

/// Layout: `"DPTH"`, width `u32`, height `u32`, 4 reserved zero bytes, then
/// `width * height` little-endian `f32` values, row-major.
pub fn write_depth(path: &Path, depth: &DepthMap) -> Result<(), IngestError> {
    let mut buf = Vec::with_capacity(HEADER_LEN + depth.data.len() * 4);
    buf.extend_from_slice(DEPTH_MAGIC);
    buf.extend_from_slice(&depth.width.to_le_bytes());
    buf.extend_from_slice(&depth.height.to_le_bytes());
    buf.extend_from_slice(&[0u8; 4]);
    for z in &depth.data {
        buf.extend_from_slice(&z.to_le_bytes());
    }
    let mut w = create(path)?;
    w.write_all(&buf).and_then(|_| w.flush()).map_err(|e| IngestError::io(path, e))
}

pub fn read_depth(path: &Path, camera_id: u32, frame: u32) -> Result<DepthMap, IngestError> {
    let bytes = std::fs::read(path).map_err(|e| IngestError::io(path, e))?;
    if bytes.len() < HEADER_LEN || &bytes[..4] != DEPTH_MAGIC {
        return Err(IngestError::invalid(path, "missing DPTH header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let (width, height) = (word(4), word(8));
    let expected = HEADER_LEN + width as usize * height as usize * 4;
    if bytes.len() != expected {
        return Err(IngestError::invalid(path, format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let map = DepthMap { camera_id, frame, width, height, data };
    map.validate().map_err(|m| IngestError::invalid(path, m))?;
    Ok(map)
}

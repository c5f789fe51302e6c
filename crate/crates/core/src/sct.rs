//! Single-camera multi-object tracking: a constant-velocity Kalman filter with
//! an appearance EMA per track, Hungarian association on a mixed IoU and
//! cosine cost, plus foot-point selection for the top-down projection.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment;
use crate::ingest::Detection2D;

type State = SVector<f64, 8>;
type Cov = SMatrix<f64, 8, 8>;
type Meas = SVector<f64, 4>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SctError {
    #[error("camera {camera_id}: detection {index} belongs to camera {found}")]
    WrongCamera { camera_id: u32, index: usize, found: u32 },
    #[error("camera {camera_id}: detections {first} and {second} are duplicates")]
    Duplicate { camera_id: u32, first: usize, second: usize },
    #[error("camera {camera_id}: detection {index} has no local_track_id in bypass mode")]
    MissingLocalId { camera_id: u32, index: usize },
    #[error("camera {camera_id}: local id {local_id} appears twice in one frame")]
    DuplicateLocalId { camera_id: u32, local_id: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SctConfig {
    /// Weight of the IoU term in the association cost.
    pub lambda: f64,
    pub iou_min: f64,
    pub app_max: f64,
    /// Appearance EMA keep factor.
    pub ema_alpha: f64,
    pub max_age: u32,
    /// Process noise std on position and size, pixels per frame.
    pub process_noise_pos: f64,
    /// Process noise std on velocities, pixels per frame².
    pub process_noise_vel: f64,
    /// Measurement noise std, pixels.
    pub measurement_noise: f64,
}

impl Default for SctConfig {
    fn default() -> Self {
        Self {
            lambda: 0.7,
            iou_min: 0.1,
            app_max: 0.4,
            ema_alpha: 0.9,
            max_age: 30,
            process_noise_pos: 1.0,
            process_noise_vel: 0.5,
            measurement_noise: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FootPointConfig {
    /// CrowdPose ankle indices.
    pub left_ankle: usize,
    pub right_ankle: usize,
    pub min_confidence: f64,
}

impl Default for FootPointConfig {
    fn default() -> Self {
        Self { left_ankle: 10, right_ankle: 11, min_confidence: 0.5 }
    }
}

/// Ankle midpoint for pedestrians whose ankles are confidently visible,
/// otherwise the bottom-middle of the box.
pub fn select_foot_point(det: &Detection2D, pedestrian: bool, cfg: &FootPointConfig) -> (f64, f64) {
    let bottom_middle = ((det.bbox[0] + det.bbox[2]) / 2.0, det.bbox[3]);
    if !pedestrian {
        return bottom_middle;
    }
    let Some(kps) = &det.keypoints else { return bottom_middle };
    match (kps.get(cfg.left_ankle), kps.get(cfg.right_ankle)) {
        (Some(l), Some(r)) if l[2] >= cfg.min_confidence && r[2] >= cfg.min_confidence => {
            ((l[0] + r[0]) / 2.0, (l[1] + r[1]) / 2.0)
        }
        _ => bottom_middle,
    }
}

pub fn iou_2d(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    1.0 - dot(a, b)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scale `v` to unit length in place and return its original norm.
pub(crate) fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

#[derive(Debug, Clone)]
pub struct LocalTrack {
    pub camera_id: u32,
    pub local_id: u64,
    state: State,
    covariance: Cov,
    pub appearance: Vec<f64>,
    pub age: u32,
    pub hits: u32,
    pub misses: u32,
    pub last_foot_point: (f64, f64),
}

impl LocalTrack {
    /// Current box estimate `(x1, y1, x2, y2)`.
    pub fn bbox(&self) -> [f64; 4] {
        let (u, v, w, h) = (self.state[0], self.state[1], self.state[2].max(1.0), self.state[3].max(1.0));
        [u - w / 2.0, v - h / 2.0, u + w / 2.0, v + h / 2.0]
    }
}

fn measurement(b: &[f64; 4]) -> Meas {
    Meas::new((b[0] + b[2]) / 2.0, (b[1] + b[3]) / 2.0, b[2] - b[0], b[3] - b[1])
}

/// Tracker for one camera. Local ids start at 1 and are never reused.
#[derive(Debug, Clone)]
pub struct LocalTracker {
    camera_id: u32,
    cfg: SctConfig,
    tracks: Vec<LocalTrack>,
    next_id: u64,
}

impl LocalTracker {
    pub fn new(camera_id: u32, cfg: SctConfig) -> Self {
        Self { camera_id, cfg, tracks: Vec::new(), next_id: 1 }
    }

    pub fn tracks(&self) -> &[LocalTrack] {
        &self.tracks
    }

    fn check_inputs(&self, dets: &[Detection2D]) -> Result<(), SctError> {
        for (i, d) in dets.iter().enumerate() {
            if d.camera_id != self.camera_id {
                return Err(SctError::WrongCamera { camera_id: self.camera_id, index: i, found: d.camera_id });
            }
            for (j, e) in dets.iter().enumerate().skip(i + 1) {
                if d.bbox == e.bbox && d.class_id == e.class_id && d.embedding == e.embedding {
                    return Err(SctError::Duplicate { camera_id: self.camera_id, first: i, second: j });
                }
            }
        }
        Ok(())
    }

    /// Pass through precomputed local ids without any state estimation.
    pub fn step_bypass(&self, dets: &[Detection2D]) -> Result<Vec<u64>, SctError> {
        self.check_inputs(dets)?;
        let mut ids = Vec::with_capacity(dets.len());
        for (i, d) in dets.iter().enumerate() {
            let id = d.local_track_id.ok_or(SctError::MissingLocalId { camera_id: self.camera_id, index: i })?;
            if ids.contains(&id) {
                return Err(SctError::DuplicateLocalId { camera_id: self.camera_id, local_id: id });
            }
            ids.push(id);
        }
        Ok(ids)
    }

    /// Advance one frame; returns the local id assigned to each detection, in input order.
    pub fn step(&mut self, dets: &[Detection2D]) -> Result<Vec<u64>, SctError> {
        self.check_inputs(dets)?;
        for t in &mut self.tracks {
            Self::predict(&self.cfg, t);
        }

        let inf = f64::INFINITY;
        let costs: Vec<Vec<f64>> = self
            .tracks
            .iter()
            .map(|t| {
                let tb = t.bbox();
                dets.iter()
                    .map(|d| {
                        let iou = iou_2d(&tb, &d.bbox);
                        let app = cosine_distance(&t.appearance, &d.embedding);
                        if iou < self.cfg.iou_min && app > self.cfg.app_max {
                            inf
                        } else {
                            self.cfg.lambda * (1.0 - iou) + (1.0 - self.cfg.lambda) * app
                        }
                    })
                    .collect()
            })
            .collect();
        let pairs = if dets.is_empty() { Vec::new() } else { assignment::solve(&costs) };

        let mut ids = vec![0u64; dets.len()];
        let mut matched_track = vec![false; self.tracks.len()];
        for &(ti, di) in &pairs {
            matched_track[ti] = true;
            let cfg = self.cfg.clone();
            let t = &mut self.tracks[ti];
            Self::update(&cfg, t, &dets[di]);
            ids[di] = t.local_id;
        }
        for (t, matched) in self.tracks.iter_mut().zip(&matched_track) {
            if !matched {
                t.misses += 1;
            }
        }
        let max_age = self.cfg.max_age;
        self.tracks.retain(|t| t.misses <= max_age);

        let mut matched_det = vec![false; dets.len()];
        pairs.iter().for_each(|&(_, di)| matched_det[di] = true);
        for (di, d) in dets.iter().enumerate() {
            if !matched_det[di] {
                ids[di] = self.spawn(d);
            }
        }
        Ok(ids)
    }

    fn spawn(&mut self, d: &Detection2D) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let z = measurement(&d.bbox);
        let mut state = State::zeros();
        state.fixed_rows_mut::<4>(0).copy_from(&z);
        let r2 = self.cfg.measurement_noise.powi(2);
        let mut covariance = Cov::zeros();
        for i in 0..4 {
            covariance[(i, i)] = r2;
            covariance[(i + 4, i + 4)] = 100.0;
        }
        let mut appearance = d.embedding.clone();
        normalize(&mut appearance);
        self.tracks.push(LocalTrack {
            camera_id: self.camera_id,
            local_id: id,
            state,
            covariance,
            appearance,
            age: 1,
            hits: 1,
            misses: 0,
            last_foot_point: ((d.bbox[0] + d.bbox[2]) / 2.0, d.bbox[3]),
        });
        id
    }

    fn predict(cfg: &SctConfig, t: &mut LocalTrack) {
        let mut f = Cov::identity();
        for i in 0..4 {
            f[(i, i + 4)] = 1.0;
        }
        let mut q = Cov::zeros();
        for i in 0..4 {
            q[(i, i)] = cfg.process_noise_pos.powi(2);
            q[(i + 4, i + 4)] = cfg.process_noise_vel.powi(2);
        }
        t.state = f * t.state;
        t.covariance = f * t.covariance * f.transpose() + q;
        t.age += 1;
    }

    fn update(cfg: &SctConfig, t: &mut LocalTrack, d: &Detection2D) {
        let h = SMatrix::<f64, 4, 8>::from_fn(|r, c| if r == c { 1.0 } else { 0.0 });
        let r = SMatrix::<f64, 4, 4>::identity() * cfg.measurement_noise.powi(2);
        let innovation = measurement(&d.bbox) - h * t.state;
        let s = h * t.covariance * h.transpose() + r;
        if let Some(s_inv) = s.try_inverse() {
            let gain = t.covariance * h.transpose() * s_inv;
            t.state += gain * innovation;
            t.covariance = (Cov::identity() - gain * h) * t.covariance;
        }
        let a = cfg.ema_alpha;
        for (x, e) in t.appearance.iter_mut().zip(&d.embedding) {
            *x = a * *x + (1.0 - a) * e;
        }
        normalize(&mut t.appearance);
        t.hits += 1;
        t.misses = 0;
        t.last_foot_point = ((d.bbox[0] + d.bbox[2]) / 2.0, d.bbox[3]);
    }
}

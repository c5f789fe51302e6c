//! Synthetic multi-camera scenes with exact ground truth.
//!
//! Targets are cuboids moving along looped piecewise-linear paths, watched by
//! pinhole cameras. Every frame is generated independently from the scenario
//! seed, so any frame can be rendered on its own and a scene with fewer frames
//! is an exact prefix of a longer one.

mod config;
pub mod render;

use std::path::Path;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub use config::{CameraPose, CameraRig, ClassSpec, Layout, NoiseConfig, Occlusion, ScenarioConfig, TargetSpec};

use crate::boxes::{wrap_angle, Box3};
use crate::geometry::{project_world_to_pixel, world_to_camera, Calibration};
use crate::ingest::{
    write_calibrations, write_class_stats, write_depth, write_detections, write_masks, write_results, BinaryMask,
    ClassInfo, ClassStats, DepthMap, Detection2D, FrameInput, IngestError, MaskKey, MaskRecord, ResultRecord, SceneLayout,
    KEYPOINT_COUNT,
};
use crate::sct::normalize;
use render::{ground_depth, look_at_camera, NO_OWNER};

/// Local ids at or above this value belong to spurious detections.
pub const SPURIOUS_ID_BASE: u64 = 1 << 40;

fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent random stream for one purpose and coordinate tuple.
fn stream(seed: u64, purpose: u64, a: u64, b: u64, c: u64) -> ChaCha8Rng {
    let s = mix(mix(mix(mix(seed ^ purpose) ^ a) ^ b) ^ c);
    ChaCha8Rng::seed_from_u64(s)
}

const PURPOSE_LAYOUT: u64 = 1;
const PURPOSE_IDENTITY: u64 = 2;
const PURPOSE_DETECT: u64 = 3;
const PURPOSE_SWITCH: u64 = 4;

/// One simulated target.
#[derive(Debug, Clone)]
pub struct Target {
    pub index: usize,
    pub class_id: u32,
    pub pedestrian: bool,
    pub dims: [f64; 3],
    pub speed: f64,
    pub waypoints: Vec<[f64; 2]>,
    /// Unit identity vector the detection embeddings are drawn around.
    pub identity: Vec<f64>,
    /// Cumulative path length at each waypoint, closing the loop at the end.
    stations: Vec<f64>,
}

impl Target {
    fn new(index: usize, spec: &ClassSpec, speed: f64, waypoints: Vec<[f64; 2]>, identity: Vec<f64>) -> Self {
        let mut stations = vec![0.0];
        let n = waypoints.len();
        for i in 0..n {
            let (a, b) = (waypoints[i], waypoints[(i + 1) % n]);
            stations.push(stations[i] + (b[0] - a[0]).hypot(b[1] - a[1]));
        }
        Self { index, class_id: spec.class_id, pedestrian: spec.pedestrian, dims: spec.dims, speed, waypoints, identity, stations }
    }

    pub fn global_id(&self) -> u64 {
        self.index as u64 + 1
    }

    /// Ground position and heading at `time` seconds.
    pub fn pose(&self, time: f64) -> ([f64; 2], f64) {
        let total = *self.stations.last().expect("at least one station");
        let n = self.waypoints.len();
        if total <= 0.0 || self.speed <= 0.0 {
            let heading = if n > 1 { heading(self.waypoints[0], self.waypoints[1]) } else { 0.0 };
            return (self.waypoints[0], heading);
        }
        let s = (self.speed * time) % total;
        let leg = (0..n).rfind(|&i| self.stations[i] <= s).unwrap_or(0);
        let (a, b) = (self.waypoints[leg], self.waypoints[(leg + 1) % n]);
        let len = self.stations[leg + 1] - self.stations[leg];
        let f = if len > 0.0 { (s - self.stations[leg]) / len } else { 0.0 };
        ([a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f], heading(a, b))
    }

    pub fn box_at(&self, time: f64) -> Box3<f64> {
        let (p, yaw) = self.pose(time);
        let [l, w, h] = self.dims;
        Box3::new([p[0], p[1], h / 2.0], [l, w, h], yaw, 1.0, self.class_id, self.global_id())
    }
}

fn heading(a: [f64; 2], b: [f64; 2]) -> f64 {
    wrap_angle((b[1] - a[1]).atan2(b[0] - a[0]))
}

/// What a generated detection really is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionTruth {
    pub camera_id: u32,
    pub det_index: u32,
    /// `None` for spurious detections.
    pub target: Option<usize>,
}

/// Tracker inputs for one frame plus what each detection really is.
#[derive(Debug, Clone)]
pub struct FrameData {
    pub input: FrameInput,
    pub truth: Vec<DetectionTruth>,
}

/// A ready-to-render scene.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub config: ScenarioConfig,
    pub calibrations: Vec<Calibration<f64>>,
    pub targets: Vec<Target>,
    pub class_stats: ClassStats,
    ground: Vec<Vec<f32>>,
}

/// CrowdPose-style keypoints as `(forward, lateral, height)` fractions of the
/// cuboid's half length, half width and height, all on the front face.
const BODY_KEYPOINTS: [(f64, f64, f64); KEYPOINT_COUNT] = [
    (1.0, 0.7, 0.80),  // left shoulder
    (1.0, -0.7, 0.80), // right shoulder
    (1.0, 0.9, 0.62),  // left elbow
    (1.0, -0.9, 0.62), // right elbow
    (1.0, 0.9, 0.47),  // left wrist
    (1.0, -0.9, 0.47), // right wrist
    (1.0, 0.45, 0.50), // left hip
    (1.0, -0.45, 0.50),
    (1.0, 0.45, 0.27), // left knee
    (1.0, -0.45, 0.27),
    (1.0, 0.45, 0.03), // left ankle
    (1.0, -0.45, 0.03),
    (1.0, 0.0, 0.95), // head top
    (1.0, 0.0, 0.85), // neck
];

impl SyntheticScene {
    pub fn new(config: ScenarioConfig) -> Result<Self, String> {
        config.validate()?;
        let calibrations = cameras(&config);
        let identities = identity_vectors(&config);
        let mut targets = Vec::new();
        let generated: Vec<&ClassSpec> = config.classes.iter().flat_map(|c| std::iter::repeat(c).take(c.count as usize)).collect();
        let cols = (generated.len() as f64).sqrt().ceil().max(1.0) as usize;
        let rows = generated.len().div_ceil(cols);
        for (k, spec) in generated.iter().enumerate() {
            let cell = config.layout.cell_size;
            let cx = ((k % cols) as f64 - (cols as f64 - 1.0) / 2.0) * cell;
            let cy = ((k / cols) as f64 - (rows as f64 - 1.0) / 2.0) * cell;
            let waypoints = cell_waypoints(&config, k, spec, [cx, cy]);
            targets.push(Target::new(k, spec, spec.speed, waypoints, identities[k].clone()));
        }
        for t in &config.targets {
            let k = targets.len();
            let spec = config.class(t.class_id).expect("validated");
            targets.push(Target::new(k, spec, t.speed.unwrap_or(spec.speed), t.waypoints.clone(), identities[k].clone()));
        }
        let class_stats = ClassStats::new(config.classes.iter().map(|c| ClassInfo {
            class_id: c.class_id,
            name: c.name.clone(),
            pedestrian: c.pedestrian,
            mean_length: c.dims[0],
            mean_width: c.dims[1],
            mean_height: c.dims[2],
            mean_volume: c.dims.iter().product(),
            epsilon: None,
            spatial_gate: None,
            cluster_cut: None,
        }));
        let ground = calibrations.par_iter().map(ground_depth).collect();
        Ok(Self { config, calibrations, targets, class_stats, ground })
    }

    pub fn time(&self, frame: u32) -> f64 {
        frame as f64 / self.config.fps
    }

    pub fn boxes(&self, frame: u32) -> Vec<Box3<f64>> {
        let t = self.time(frame);
        self.targets.iter().map(|tg| tg.box_at(t)).collect()
    }

    /// Ground-truth records for a frame, exactly as they read back from a result file.
    pub fn ground_truth(&self, frame: u32) -> Vec<ResultRecord> {
        self.boxes(frame).iter().map(|b| ResultRecord::from_box(frame, b).quantized()).collect()
    }

    fn occluded(&self, target: usize, camera_id: u32, frame: u32) -> bool {
        self.config.noise.occlusions.iter().any(|o| {
            o.target == target && (o.start..=o.end).contains(&frame) && (o.cameras.is_empty() || o.cameras.contains(&camera_id))
        })
    }

    /// Local id of `target` in camera `cam_index` at `frame`. Each injected switch
    /// moves the target to a fresh id block.
    pub fn local_id(&self, cam_index: usize, target: usize, frame: u32) -> u64 {
        let rate = self.config.noise.id_switch_rate;
        let mut switches = 0u64;
        if rate > 0.0 {
            for f in 1..=frame {
                if stream(self.config.seed, PURPOSE_SWITCH, cam_index as u64, target as u64, f as u64).gen::<f64>() < rate {
                    switches += 1;
                }
            }
        }
        switches * self.targets.len() as u64 + target as u64 + 1
    }

    pub fn frame(&self, frame: u32) -> FrameData {
        let boxes = self.boxes(frame);
        let per_camera: Vec<CameraFrame> =
            (0..self.calibrations.len()).into_par_iter().map(|ci| self.camera_frame(ci, frame, &boxes)).collect();
        let mut input = FrameInput::empty(frame);
        let mut truth = Vec::new();
        for cf in per_camera {
            let cam = cf.depth.camera_id;
            for (i, (det, mask, target)) in cf.detections.into_iter().enumerate() {
                input.masks.insert(MaskKey { frame, camera_id: cam, det_index: i as u32 }, mask);
                truth.push(DetectionTruth { camera_id: cam, det_index: i as u32, target });
                input.detections.entry(cam).or_default().push(det);
            }
            input.depths.insert(cam, cf.depth);
        }
        FrameData { input, truth }
    }

    fn camera_frame(&self, ci: usize, frame: u32, boxes: &[Box3<f64>]) -> CameraFrame {
        let calib = &self.calibrations[ci];
        let cfg = &self.config;
        let noise = &cfg.noise;
        let (w, h) = (calib.width, calib.height);
        let r = render::render(calib, &self.ground[ci], boxes);
        let depth = DepthMap { camera_id: calib.camera_id, frame, width: w, height: h, data: r.depth };
        let mut masks: Vec<BinaryMask> = (0..boxes.len()).map(|_| BinaryMask::empty(w, h)).collect();
        for (i, &k) in r.owner.iter().enumerate() {
            if k != NO_OWNER {
                masks[k].data[i] = true;
            }
        }
        let mut rng = stream(cfg.seed, PURPOSE_DETECT, ci as u64, frame as u64, 0);
        let mut detections = Vec::new();
        for (k, (target, mask)) in self.targets.iter().zip(masks).enumerate() {
            // Draw every random number up front so one target's outcome never shifts another's stream.
            let miss = rng.gen::<f64>();
            let jitter: [f64; 4] = std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal) * noise.box_jitter_px);
            let emb_noise: Vec<f64> = (0..cfg.embedding_dim).map(|_| rng.sample(StandardNormal)).collect();
            if mask.count() < cfg.min_visible_pixels || miss < noise.miss_rate || self.occluded(k, calib.camera_id, frame) {
                continue;
            }
            let (u0, v0, u1, v1) = mask.bounds().expect("mask is non-empty");
            let bbox = jittered_box([u0 as f64, v0 as f64, (u1 + 1) as f64, (v1 + 1) as f64], jitter, w, h);
            let mask = clip_mask(mask, &bbox);
            let scale = noise.embedding_noise / (cfg.embedding_dim as f64).sqrt();
            let mut embedding: Vec<f64> = target.identity.iter().zip(&emb_noise).map(|(b, n)| b + scale * n).collect();
            normalize(&mut embedding);
            let keypoints = target.pedestrian.then(|| keypoints(calib, &boxes[k], &depth));
            detections.push((
                Detection2D {
                    camera_id: calib.camera_id,
                    frame,
                    bbox,
                    score: noise.score,
                    class_id: target.class_id,
                    embedding,
                    keypoints,
                    local_track_id: Some(self.local_id(ci, k, frame)),
                },
                mask,
                Some(k),
            ));
        }
        if rng.gen::<f64>() < noise.false_positive_rate {
            detections.push(self.spurious(calib, frame, &mut rng));
        }
        CameraFrame { depth, detections }
    }

    fn spurious(&self, calib: &Calibration<f64>, frame: u32, rng: &mut ChaCha8Rng) -> (Detection2D, BinaryMask, Option<usize>) {
        let (w, h) = (calib.width as f64, calib.height as f64);
        let bw = rng.gen_range(12.0..(w / 6.0).max(13.0));
        let bh = rng.gen_range(12.0..(h / 4.0).max(13.0));
        let x1 = rng.gen_range(0.0..(w - bw)).floor();
        let y1 = rng.gen_range(0.0..(h - bh)).floor();
        let bbox = [x1, y1, (x1 + bw).floor(), (y1 + bh).floor()];
        let mut mask = BinaryMask::empty(calib.width, calib.height);
        for v in bbox[1] as u32..bbox[3] as u32 {
            for u in bbox[0] as u32..bbox[2] as u32 {
                mask.set(u, v, true);
            }
        }
        let mut embedding: Vec<f64> = (0..self.config.embedding_dim).map(|_| rng.sample(StandardNormal)).collect();
        normalize(&mut embedding);
        let class = &self.config.classes[rng.gen_range(0..self.config.classes.len())];
        let keypoints = class.pedestrian.then(|| vec![[bbox[0], bbox[1], 0.0]; KEYPOINT_COUNT]);
        let det = Detection2D {
            camera_id: calib.camera_id,
            frame,
            bbox,
            score: self.config.noise.score * 0.8,
            class_id: class.class_id,
            embedding,
            keypoints,
            local_track_id: Some(SPURIOUS_ID_BASE + frame as u64),
        };
        (det, mask, None)
    }

    /// Render every frame and write the scene directory.
    pub fn write(&self, dir: &Path) -> Result<(), IngestError> {
        let layout = SceneLayout::new(dir);
        std::fs::create_dir_all(layout.depth_dir()).map_err(|e| IngestError::io(&layout.depth_dir(), e))?;
        let scenario = serde_json::to_string_pretty(&self.config).expect("config serializes");
        std::fs::write(layout.scenario(), scenario + "\n").map_err(|e| IngestError::io(&layout.scenario(), e))?;
        write_calibrations(&layout.calibration(), &self.calibrations)?;
        write_class_stats(&layout.class_stats(), &self.class_stats)?;
        let mut detections = Vec::new();
        let mut masks = Vec::new();
        let mut truth = Vec::new();
        let mut seen = vec![0usize; self.calibrations.len()];
        let frames: Vec<u32> = (0..self.config.frames).collect();
        for chunk in frames.chunks(16) {
            let rendered: Vec<FrameData> = chunk.par_iter().map(|&f| self.frame(f)).collect();
            for FrameData { input: fd, .. } in rendered {
                for d in fd.depths.values() {
                    write_depth(&layout.depth(d.camera_id, d.frame), d)?;
                }
                for (ci, c) in self.calibrations.iter().enumerate() {
                    seen[ci] += fd.detections.get(&c.camera_id).map_or(0, Vec::len);
                }
                detections.extend(fd.detections.into_values().flatten());
                masks.extend(fd.masks.iter().map(|(k, m)| MaskRecord::encode(*k, m)));
                truth.extend(self.ground_truth(fd.frame));
            }
        }
        for (ci, n) in seen.iter().enumerate() {
            if *n == 0 {
                log::warn!("camera {} never sees a target", self.calibrations[ci].camera_id);
            }
        }
        write_detections(&layout.detections(), &detections)?;
        write_masks(&layout.masks(), &masks)?;
        write_results(&layout.ground_truth(), &truth)
    }
}

struct CameraFrame {
    depth: DepthMap,
    detections: Vec<(Detection2D, BinaryMask, Option<usize>)>,
}

fn cameras(cfg: &ScenarioConfig) -> Vec<Calibration<f64>> {
    let poses: Vec<CameraPose> = if cfg.cameras.poses.is_empty() {
        let rig = &cfg.cameras;
        (0..rig.count)
            .map(|i| {
                let a = (rig.azimuth_offset_deg + 360.0 * i as f64 / rig.count as f64).to_radians();
                CameraPose { position: [rig.radius * a.cos(), rig.radius * a.sin(), rig.height], look_at: rig.look_at }
            })
            .collect()
    } else {
        cfg.cameras.poses.clone()
    };
    poses
        .iter()
        .enumerate()
        .map(|(i, p)| look_at_camera(i as u32, p.position, p.look_at, cfg.focal_px, cfg.image_width, cfg.image_height))
        .collect()
}

/// Orthonormal basis vectors `e_k` and a shared `c`; identity `k` is
/// `sqrt(1 - rho) e_k + sqrt(rho) c`, so two identities have cosine similarity exactly `rho`.
fn identity_vectors(cfg: &ScenarioConfig) -> Vec<Vec<f64>> {
    let n = cfg.target_count();
    let dim = cfg.embedding_dim;
    let mut rng = stream(cfg.seed, PURPOSE_IDENTITY, 0, 0, 0);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    while basis.len() < n + 1 {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        if normalize(&mut v) > 1e-6 {
            basis.push(v);
        }
    }
    let rho = cfg.noise.identity_similarity;
    let common = basis.pop().expect("n + 1 vectors");
    basis
        .into_iter()
        .map(|e| e.iter().zip(&common).map(|(a, c)| (1.0 - rho).sqrt() * a + rho.sqrt() * c).collect())
        .collect()
}

fn cell_waypoints(cfg: &ScenarioConfig, k: usize, spec: &ClassSpec, center: [f64; 2]) -> Vec<[f64; 2]> {
    let margin = 0.5 * spec.dims[0].hypot(spec.dims[1]) + 0.25;
    let half = cfg.layout.cell_size / 2.0 - margin;
    if half <= 0.0 {
        return vec![center];
    }
    let mut rng = stream(cfg.seed, PURPOSE_LAYOUT, k as u64, 0, 0);
    let min_leg = cfg.layout.min_leg_fraction * 2.0 * half;
    let mut pts: Vec<[f64; 2]> = Vec::new();
    while pts.len() < cfg.layout.waypoints as usize {
        let mut best = [center[0], center[1]];
        for _ in 0..100 {
            best = [center[0] + rng.gen_range(-half..=half), center[1] + rng.gen_range(-half..=half)];
            match pts.last() {
                Some(p) if (best[0] - p[0]).hypot(best[1] - p[1]) < min_leg => continue,
                _ => break,
            }
        }
        pts.push(best);
    }
    pts
}

fn jittered_box(exact: [f64; 4], jitter: [f64; 4], w: u32, h: u32) -> [f64; 4] {
    let (w, h) = (w as f64, h as f64);
    let x1 = (exact[0] + jitter[0]).clamp(0.0, w - 1.0);
    let y1 = (exact[1] + jitter[1]).clamp(0.0, h - 1.0);
    let x2 = (exact[2] + jitter[2]).clamp(x1 + 1.0, w);
    let y2 = (exact[3] + jitter[3]).clamp(y1 + 1.0, h);
    [x1, y1, x2, y2]
}

/// Drop mask pixels more than 2 px outside the detection box, as a segmenter
/// working on the box crop would.
fn clip_mask(mut mask: BinaryMask, bbox: &[f64; 4]) -> BinaryMask {
    let w = mask.width as usize;
    for (i, px) in mask.data.iter_mut().enumerate() {
        if *px {
            let (u, v) = ((i % w) as f64, (i / w) as f64);
            if u < bbox[0] - 2.0 || u + 1.0 > bbox[2] + 2.0 || v < bbox[1] - 2.0 || v + 1.0 > bbox[3] + 2.0 {
                *px = false;
            }
        }
    }
    mask
}

fn keypoints(calib: &Calibration<f64>, b: &Box3<f64>, depth: &DepthMap) -> Vec<[f64; 3]> {
    let (s, c) = b.yaw.sin_cos();
    BODY_KEYPOINTS
        .iter()
        .map(|&(fwd, lat, up)| {
            let (dx, dy) = (fwd * b.dims.x / 2.0, lat * b.dims.y / 2.0);
            let p = Point3::new(b.center.x + c * dx - s * dy, b.center.y + s * dx + c * dy, up * b.dims.z);
            let Ok(px) = project_world_to_pixel(&p, calib) else { return [0.0, 0.0, 0.0] };
            let (u, v) = (px.x.round(), px.y.round());
            if u < 0.0 || v < 0.0 || u >= calib.width as f64 || v >= calib.height as f64 {
                return [px.x.clamp(0.0, calib.width as f64 - 1.0), px.y.clamp(0.0, calib.height as f64 - 1.0), 0.0];
            }
            let z = world_to_camera(&p, calib).z;
            let visible = depth.get(u as u32, v as u32).is_some_and(|d| (d as f64 - z).abs() < 0.05);
            [px.x, px.y, if visible { 0.9 } else { 0.2 }]
        })
        .collect()
}

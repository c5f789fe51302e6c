//! The per-frame tracking loop: single-camera tracking, spatial clustering,
//! temporal association and, in 3D mode, box lifting, fusion and heading.

mod source;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use source::{FrameSource, MemorySource, SceneDir, SyntheticSource};

use crate::boxes::Box3;
use crate::config::{Mode, PipelineConfig};
use crate::fuse::{fuse_groups, TrackHistory};
use crate::geometry::{homography_project, Calibration};
use crate::ingest::{erode_mask, ClassStats, FrameInput, IngestError, Result2DRecord, ResultRecord, ResultWriter};
use crate::lift::{dbscan, fallback_box, fit_box, lift_target, LiftView, TargetCloud};
use crate::sct::{select_foot_point, LocalTracker, SctError};
use crate::spatial::{class_info, cluster_frame, Cluster, TargetSnapshot};
use crate::temporal::{AssocEvent, Assignment, OverlapReport, TemporalAssociator};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Sct(#[from] SctError),
    #[error("frame {frame}: detections for camera {camera_id}, which has no calibration")]
    UnknownCamera { frame: u32, camera_id: u32 },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("cannot build worker pool: {0}")]
    Workers(String),
}

/// Running totals over a whole run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub frames: u64,
    pub detections: u64,
    pub clusters: u64,
    pub assignments: u64,
    pub spawns: u64,
    pub confirms: u64,
    pub removed_tentative: u64,
    pub lost: u64,
    pub reactivations: u64,
    pub expired: u64,
    pub splits: u64,
    pub routes: u64,
    pub rejoins: u64,
    pub homography_failures: u64,
    pub corrupted_members: u64,
    pub missing_inputs: u64,
    pub fallback_boxes: u64,
    pub dims_replaced: u64,
    pub fusion_groups: u64,
    pub fused_boxes: u64,
}

impl Counters {
    fn add(&mut self, o: &Counters) {
        self.frames += o.frames;
        self.detections += o.detections;
        self.clusters += o.clusters;
        self.assignments += o.assignments;
        self.spawns += o.spawns;
        self.confirms += o.confirms;
        self.removed_tentative += o.removed_tentative;
        self.lost += o.lost;
        self.reactivations += o.reactivations;
        self.expired += o.expired;
        self.splits += o.splits;
        self.routes += o.routes;
        self.rejoins += o.rejoins;
        self.homography_failures += o.homography_failures;
        self.corrupted_members += o.corrupted_members;
        self.missing_inputs += o.missing_inputs;
        self.fallback_boxes += o.fallback_boxes;
        self.dims_replaced += o.dims_replaced;
        self.fusion_groups += o.fusion_groups;
        self.fused_boxes += o.fused_boxes;
    }

    fn count_events(&mut self, events: &[AssocEvent]) {
        for e in events {
            match e {
                AssocEvent::Spawn { .. } => self.spawns += 1,
                AssocEvent::Confirm { .. } => self.confirms += 1,
                AssocEvent::RemoveTentative { .. } => self.removed_tentative += 1,
                AssocEvent::Lost { .. } => self.lost += 1,
                AssocEvent::Reactivate { .. } => self.reactivations += 1,
                AssocEvent::Expire { .. } => self.expired += 1,
                AssocEvent::Split { .. } => self.splits += 1,
                AssocEvent::Route { .. } => self.routes += 1,
                AssocEvent::Rejoin { .. } => self.rejoins += 1,
            }
        }
    }
}

/// Serializable view of a box for logs and inspection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxJson {
    pub global_id: u64,
    pub class_id: u32,
    pub center: [f64; 3],
    pub dims: [f64; 3],
    pub yaw: f64,
    pub score: f64,
}

impl From<&Box3<f64>> for BoxJson {
    fn from(b: &Box3<f64>) -> Self {
        Self {
            global_id: b.global_id,
            class_id: b.class_id,
            center: b.center.into(),
            dims: b.dims.into(),
            yaw: b.yaw,
            score: b.score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionGroupJson {
    pub global_ids: Vec<u64>,
    pub fused: BoxJson,
}

/// Intermediate state of one frame, kept only when requested.
#[derive(Debug, Clone, Default, Serialize)]
pub struct FrameDetail {
    pub clusters: Vec<Cluster>,
    pub reports: Vec<(u64, OverlapReport)>,
    pub assignments: Vec<Assignment>,
    /// Per target, at most `cloud_sample` points of the lifted cloud.
    pub clouds: Vec<TargetCloud>,
    pub boxes_before_fusion: Vec<BoxJson>,
    pub fusion_groups: Vec<FusionGroupJson>,
}

#[derive(Debug, Clone, Default)]
pub struct FrameReport {
    pub frame: u32,
    pub records_3d: Vec<ResultRecord>,
    pub records_2d: Vec<Result2DRecord>,
    pub events: Vec<AssocEvent>,
    pub counters: Counters,
    pub detail: Option<FrameDetail>,
}

/// Points kept per target cloud in a [`FrameDetail`].
const CLOUD_SAMPLE: usize = 2000;

struct TargetBox {
    bbox: Box3<f64>,
    cloud: Option<TargetCloud>,
    fallback: bool,
    missing_inputs: bool,
    dims_replaced: bool,
}

/// Online tracker state for one scene.
pub struct Tracker {
    cfg: PipelineConfig,
    calibrations: BTreeMap<u32, Calibration<f64>>,
    stats: ClassStats,
    local: BTreeMap<u32, LocalTracker>,
    assoc: TemporalAssociator,
    history: TrackHistory,
    pool: rayon::ThreadPool,
    totals: Counters,
}

impl Tracker {
    pub fn new(cfg: PipelineConfig, calibrations: &[Calibration<f64>], stats: ClassStats) -> Result<Self, PipelineError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| PipelineError::Workers(e.to_string()))?;
        let local = calibrations.iter().map(|c| (c.camera_id, LocalTracker::new(c.camera_id, cfg.sct.clone()))).collect();
        Ok(Self {
            assoc: TemporalAssociator::new(cfg.temporal.clone()),
            history: TrackHistory::new(cfg.yaw.clone()),
            calibrations: calibrations.iter().map(|c| (c.camera_id, c.clone())).collect(),
            stats,
            local,
            pool,
            totals: Counters::default(),
            cfg,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn totals(&self) -> &Counters {
        &self.totals
    }

    pub fn associator(&self) -> &TemporalAssociator {
        &self.assoc
    }

    /// Process one frame. Frames must be fed in increasing order.
    pub fn process(&mut self, input: &FrameInput, keep_detail: bool) -> Result<FrameReport, PipelineError> {
        let frame = input.frame;
        let mut counters = Counters { frames: 1, detections: input.detection_count() as u64, ..Default::default() };
        for &camera_id in input.detections.keys() {
            if !self.calibrations.contains_key(&camera_id) {
                return Err(PipelineError::UnknownCamera { frame, camera_id });
            }
        }

        // Every calibrated camera steps, so trackers of cameras without detections age.
        let empty = Vec::new();
        let bypass = self.cfg.bypass_sct;
        let local_ids: Vec<(u32, Result<Vec<u64>, SctError>)> = self.pool.install(|| {
            self.local
                .par_iter_mut()
                .map(|(&cam, tracker)| {
                    let dets = input.detections.get(&cam).unwrap_or(&empty);
                    let ids = if bypass { tracker.step_bypass(dets) } else { tracker.step(dets) };
                    (cam, ids)
                })
                .collect()
        });

        let mut snapshots = Vec::with_capacity(input.detection_count());
        for (cam, ids) in local_ids {
            let ids = ids?;
            let Some(dets) = input.detections.get(&cam) else { continue };
            let calib = &self.calibrations[&cam];
            for (det_index, (det, local_id)) in dets.iter().zip(ids).enumerate() {
                let pedestrian = self.stats.is_pedestrian(det.class_id);
                let foot = select_foot_point(det, pedestrian, &self.cfg.foot_point);
                let Ok(ground) = homography_project(foot.0, foot.1, &calib.homography) else {
                    counters.homography_failures += 1;
                    continue;
                };
                if !(ground.x.is_finite() && ground.y.is_finite()) {
                    counters.homography_failures += 1;
                    continue;
                }
                snapshots.push(TargetSnapshot {
                    camera_id: cam,
                    local_id,
                    class_id: det.class_id,
                    embedding: det.embedding.clone(),
                    topdown: [ground.x, ground.y],
                    foot_pixel: foot,
                    score: det.score,
                    det_index,
                });
            }
        }

        let mut clusters = cluster_frame(&snapshots, &self.stats, &self.cfg.spatial);
        if self.cfg.corruption.rate > 0.0 {
            counters.corrupted_members = corrupt(&mut clusters, self.cfg.corruption.rate, self.cfg.corruption.seed, frame);
        }
        counters.clusters = clusters.len() as u64;
        let kept_clusters = keep_detail.then(|| clusters.clone());

        let outcome = self.assoc.update(frame, clusters);
        counters.count_events(&outcome.events);
        counters.assignments = outcome.assignments.len() as u64;
        for e in &outcome.events {
            if let AssocEvent::Expire { global_id, .. } | AssocEvent::RemoveTentative { global_id, .. } = e {
                self.history.forget(*global_id);
            }
        }

        let mut report = FrameReport { frame, ..Default::default() };
        let mut detail = keep_detail.then(|| FrameDetail {
            clusters: kept_clusters.unwrap_or_default(),
            reports: outcome.reports.clone(),
            assignments: outcome.assignments.clone(),
            ..Default::default()
        });

        match self.cfg.mode {
            Mode::TwoD => {
                for a in &outcome.assignments {
                    for m in &a.members {
                        let det = &input.detections[&m.camera_id][m.det_index];
                        report.records_2d.push(Result2DRecord { frame, camera_id: m.camera_id, global_id: a.global_id, bbox: det.bbox });
                    }
                }
                report.records_2d.sort_by_key(|r| (r.global_id, r.camera_id));
            }
            Mode::ThreeD => {
                let targets: Vec<TargetBox> =
                    self.pool.install(|| outcome.assignments.par_iter().map(|a| self.target_box(input, a, keep_detail)).collect());
                let mut boxes = Vec::with_capacity(targets.len());
                for t in targets {
                    counters.fallback_boxes += t.fallback as u64;
                    counters.missing_inputs += t.missing_inputs as u64;
                    counters.dims_replaced += t.dims_replaced as u64;
                    if let (Some(d), Some(mut cloud)) = (detail.as_mut(), t.cloud) {
                        let step = cloud.points.len().div_ceil(CLOUD_SAMPLE).max(1);
                        cloud.points = cloud.points.into_iter().step_by(step).collect();
                        d.clouds.push(cloud);
                    }
                    boxes.push(t.bbox);
                }
                if let Some(d) = detail.as_mut() {
                    d.boxes_before_fusion = boxes.iter().map(BoxJson::from).collect();
                }
                let fused = if self.cfg.fusion.enabled {
                    let groups = fuse_groups(&boxes, self.cfg.fusion.thr);
                    for g in groups.iter().filter(|g| g.members.len() > 1) {
                        counters.fusion_groups += 1;
                        counters.fused_boxes += g.members.len() as u64;
                        if let Some(d) = detail.as_mut() {
                            let mut ids: Vec<u64> = g.members.iter().map(|&i| boxes[i].global_id).collect();
                            ids.sort_unstable();
                            d.fusion_groups.push(FusionGroupJson { global_ids: ids, fused: BoxJson::from(&g.fused) });
                        }
                    }
                    groups.into_iter().map(|g| g.fused).collect()
                } else {
                    boxes
                };
                for mut b in fused {
                    self.history.record(b.global_id, frame, [b.center.x, b.center.y]);
                    b.yaw = self.history.refine_yaw(b.global_id, frame);
                    report.records_3d.push(ResultRecord::from_box(frame, &b).quantized());
                }
                report.records_3d.sort_by_key(|r| r.global_id);
            }
        }

        report.events = outcome.events;
        self.totals.add(&counters);
        report.counters = counters;
        report.detail = detail;
        Ok(report)
    }

    /// Box for one confirmed target, falling back to class means when the cloud is unusable.
    fn target_box(&self, input: &FrameInput, a: &Assignment, keep_cloud: bool) -> TargetBox {
        let class = class_info(&self.stats, a.class_id);
        let score = a.members.iter().map(|m| m.score).sum::<f64>() / a.members.len().max(1) as f64;
        let fallback = |missing_inputs: bool| TargetBox {
            bbox: fallback_box(a.centroid, &class, score, a.global_id),
            cloud: None,
            fallback: true,
            missing_inputs,
            dims_replaced: false,
        };
        if !self.cfg.lift.late_aggregation {
            return fallback(false);
        }

        let eroded: Vec<_> = a
            .members
            .iter()
            .filter_map(|m| {
                let mask = input.mask(m.camera_id, m.det_index)?;
                let depth = input.depths.get(&m.camera_id)?;
                let mask = if self.cfg.lift.erode_masks { erode_mask(mask) } else { mask.clone() };
                Some((m, mask, depth))
            })
            .collect();
        if eroded.is_empty() {
            return fallback(true);
        }
        let views: Vec<LiftView<'_>> = eroded
            .iter()
            .map(|(m, mask, depth)| LiftView {
                calibration: &self.calibrations[&m.camera_id],
                detection: &input.detections[&m.camera_id][m.det_index],
                mask,
                depth,
            })
            .collect();
        let Ok(cloud) = lift_target(&views, a.class_id, a.global_id, self.cfg.lift.pixel_stride) else {
            return fallback(false);
        };
        let points: Vec<Point3<f64>> = cloud.positions();
        let labels = dbscan(&points, class.epsilon(), self.cfg.fit.min_samples);
        let extent_yaw = if self.cfg.fit.yaw_aligned_extents { self.history.yaw(a.global_id) } else { 0.0 };
        match fit_box(&points, &labels, &class, &self.cfg.fit, extent_yaw, cloud.score, a.global_id) {
            Ok(fitted) => TargetBox {
                bbox: fitted.bbox,
                cloud: keep_cloud.then_some(cloud),
                fallback: false,
                missing_inputs: false,
                dims_replaced: fitted.dims_replaced,
            },
            Err(_) => TargetBox { cloud: keep_cloud.then_some(cloud), ..fallback(false) },
        }
    }
}

/// Swap cluster members between same-class clusters that both contain the
/// member's camera. Returns the number of members moved.
fn corrupt(clusters: &mut Vec<Cluster>, rate: f64, seed: u64, frame: u32) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (frame as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut members: Vec<Vec<TargetSnapshot>> = clusters.drain(..).map(|c| c.members).collect();
    let mut moved = 0;
    for i in 0..members.len() {
        for k in 0..members[i].len() {
            if !rng.gen_bool(rate) {
                continue;
            }
            let snap = &members[i][k];
            let partners: Vec<(usize, usize)> = members
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .filter_map(|(j, m)| {
                    let l = m.iter().position(|o| o.camera_id == snap.camera_id && o.class_id == snap.class_id)?;
                    Some((j, l))
                })
                .collect();
            if partners.is_empty() {
                continue;
            }
            let (j, l) = partners[rng.gen_range(0..partners.len())];
            let a = members[i][k].clone();
            members[i][k] = std::mem::replace(&mut members[j][l], a);
            moved += 2;
        }
    }
    let mut out: Vec<Cluster> = members.into_iter().map(Cluster::from_members).collect();
    out.sort_by_key(|c| c.min_key());
    *clusters = out;
    moved
}

/// One line of the event log.
#[derive(Serialize)]
struct FrameLog<'a> {
    frame: u32,
    counters: &'a Counters,
    events: &'a [AssocEvent],
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub frames: u32,
    pub records: u64,
    pub global_ids: u64,
    pub counters: Counters,
}

/// Run a whole scene, writing results (and optionally a JSON-lines event log)
/// after every frame so an interrupted run leaves a valid prefix.
pub fn run(
    source: &mut dyn FrameSource,
    cfg: &PipelineConfig,
    results: &Path,
    event_log: Option<&Path>,
) -> Result<RunSummary, PipelineError> {
    let mut writer = ResultWriter::create(results)?;
    let mut log = match event_log {
        Some(p) => Some(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| IngestError::Io { path: p.to_path_buf(), source: e })?,
        )),
        None => None,
    };
    let summary = run_with(source, cfg, |report| {
        match cfg.mode {
            Mode::ThreeD => writer.write_3d(&report.records_3d)?,
            Mode::TwoD => writer.write_2d(&report.records_2d)?,
        }
        writer.flush()?;
        if let (Some(w), Some(p)) = (log.as_mut(), event_log) {
            let line = serde_json::to_string(&FrameLog { frame: report.frame, counters: &report.counters, events: &report.events })
                .expect("log entries serialize");
            writeln!(w, "{line}").and_then(|_| w.flush()).map_err(|e| IngestError::Io { path: p.to_path_buf(), source: e })?;
        }
        Ok(())
    })?;
    Ok(summary)
}

/// Run a whole scene, handing each frame's report to `sink`.
pub fn run_with(
    source: &mut dyn FrameSource,
    cfg: &PipelineConfig,
    mut sink: impl FnMut(&FrameReport) -> Result<(), PipelineError>,
) -> Result<RunSummary, PipelineError> {
    let mut tracker = Tracker::new(cfg.clone(), source.calibrations(), source.class_stats().clone())?;
    let pixels = cfg.mode == Mode::ThreeD && cfg.lift.late_aggregation;
    let mut records = 0u64;
    let mut ids = std::collections::BTreeSet::new();
    let frames = source.frames();
    for frame in frames.clone() {
        let input = source.load(frame, pixels)?;
        let report = tracker.process(&input, false)?;
        records += (report.records_3d.len() + report.records_2d.len()) as u64;
        ids.extend(report.records_3d.iter().map(|r| r.global_id));
        ids.extend(report.records_2d.iter().map(|r| r.global_id));
        sink(&report)?;
    }
    Ok(RunSummary {
        mode: cfg.mode,
        frames: frames.len() as u32,
        records,
        global_ids: ids.len() as u64,
        counters: tracker.totals().clone(),
    })
}

/// Every 3D record of a run, in output order.
pub fn run_in_memory(source: &mut dyn FrameSource, cfg: &PipelineConfig) -> Result<(Vec<ResultRecord>, Vec<Result2DRecord>, RunSummary), PipelineError> {
    let mut r3 = Vec::new();
    let mut r2 = Vec::new();
    let summary = run_with(source, cfg, |report| {
        r3.extend_from_slice(&report.records_3d);
        r2.extend_from_slice(&report.records_2d);
        Ok(())
    })?;
    Ok((r3, r2, summary))
}

/// Replay frames up to `frame` and return the intermediate state of that frame.
pub fn inspect(source: &mut dyn FrameSource, cfg: &PipelineConfig, frame: u32) -> Result<FrameReport, PipelineError> {
    let mut tracker = Tracker::new(cfg.clone(), source.calibrations(), source.class_stats().clone())?;
    let pixels = cfg.mode == Mode::ThreeD && cfg.lift.late_aggregation;
    let mut last = FrameReport { frame, ..Default::default() };
    for f in source.frames().start..=frame {
        let input = source.load(f, pixels)?;
        last = tracker.process(&input, f == frame)?;
    }
    Ok(last)
}

//! Pipeline configuration: one JSON document, every field optional.

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::fuse::YawConfig;
use crate::lift::FitConfig;
use crate::sct::{FootPointConfig, SctConfig};
use crate::spatial::SpatialConfig;
use crate::temporal::TemporalConfig;

#[derive(Debug, Error, PartialEq)]
#[error("invalid configuration: {field} {problem}")]
pub struct ConfigError {
    pub field: String,
    pub problem: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Stop after temporal association and write per-camera boxes with global ids.
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiftConfig {
    /// Erode instance masks with a 3x3 kernel before lifting.
    pub erode_masks: bool,
    /// Keep every n-th mask pixel along each image axis.
    pub pixel_stride: u32,
    /// Build boxes from masked depth. When off, every target gets a class-mean
    /// box at its top-down position.
    pub late_aggregation: bool,
}

impl Default for LiftConfig {
    fn default() -> Self {
        Self { erode_masks: true, pixel_stride: 1, late_aggregation: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub enabled: bool,
    /// Boxes fuse when intersection over the smaller volume exceeds this.
    pub thr: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { enabled: true, thr: 0.1 }
    }
}

/// Deliberate damage to the spatial clusters, for robustness experiments.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionConfig {
    /// Probability that a cluster member is swapped with a same-camera member of another cluster.
    pub rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mode: Mode,
    /// Take local ids from the detections instead of running the per-camera tracker.
    pub bypass_sct: bool,
    /// Worker threads for per-camera and per-target work; 0 uses every core.
    pub workers: usize,
    pub sct: SctConfig,
    pub foot_point: FootPointConfig,
    pub spatial: SpatialConfig,
    pub temporal: TemporalConfig,
    pub lift: LiftConfig,
    pub fit: FitConfig,
    pub fusion: FusionConfig,
    pub yaw: YawConfig,
    pub corruption: CorruptionConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::ThreeD,
            bypass_sct: false,
            workers: 0,
            sct: SctConfig::default(),
            foot_point: FootPointConfig::default(),
            spatial: SpatialConfig::default(),
            temporal: TemporalConfig::default(),
            lift: LiftConfig::default(),
            fit: FitConfig::default(),
            fusion: FusionConfig::default(),
            yaw: YawConfig::default(),
            corruption: CorruptionConfig::default(),
        }
    }
}

fn check(ok: bool, field: &str, problem: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError { field: field.into(), problem: problem.into() })
    }
}

fn unit(v: f64, field: &str) -> Result<(), ConfigError> {
    check((0.0..=1.0).contains(&v), field, "must lie in [0, 1]")
}

fn cosine(v: f64, field: &str) -> Result<(), ConfigError> {
    check((0.0..=2.0).contains(&v), field, "must lie in [0, 2]")
}

fn positive(v: f64, field: &str) -> Result<(), ConfigError> {
    check(v.is_finite() && v > 0.0, field, "must be positive")
}

fn non_negative(v: f64, field: &str) -> Result<(), ConfigError> {
    check(v.is_finite() && v >= 0.0, field, "must be non-negative")
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError { field: "document".into(), problem: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.sct;
        unit(s.lambda, "sct.lambda")?;
        unit(s.iou_min, "sct.iou_min")?;
        cosine(s.app_max, "sct.app_max")?;
        unit(s.ema_alpha, "sct.ema_alpha")?;
        positive(s.process_noise_pos, "sct.process_noise_pos")?;
        positive(s.process_noise_vel, "sct.process_noise_vel")?;
        positive(s.measurement_noise, "sct.measurement_noise")?;
        let f = &self.foot_point;
        check(f.left_ankle < 14 && f.right_ankle < 14, "foot_point ankles", "must index one of 14 keypoints")?;
        unit(f.min_confidence, "foot_point.min_confidence")?;
        cosine(self.spatial.app_gate, "spatial.app_gate")?;
        let t = &self.temporal;
        cosine(t.app_lost_max, "temporal.app_lost_max")?;
        non_negative(t.r0, "temporal.r0")?;
        non_negative(t.r_rate, "temporal.r_rate")?;
        check(t.m0 >= 1, "temporal.m0", "must be at least 1")?;
        check(t.m_div >= 1, "temporal.m_div", "must be at least 1")?;
        check(t.n_confirm >= 1, "temporal.n_confirm", "must be at least 1")?;
        unit(t.ema_alpha, "temporal.ema_alpha")?;
        check(t.member_ttl >= 1, "temporal.member_ttl", "must be at least 1")?;
        non_negative(t.rejoin_radius, "temporal.rejoin_radius")?;
        check(self.lift.pixel_stride >= 1, "lift.pixel_stride", "must be at least 1")?;
        let b = &self.fit;
        check(b.min_samples >= 1, "fit.min_samples", "must be at least 1")?;
        check(b.alpha_lower > 0.0 && b.alpha_lower <= 1.0, "fit.alpha_lower", "must lie in (0, 1]")?;
        check(b.alpha_upper >= 1.0 && b.alpha_upper.is_finite(), "fit.alpha_upper", "must be at least 1")?;
        check(
            (0.0..=100.0).contains(&b.low_percentile) && (0.0..=100.0).contains(&b.high_percentile) && b.low_percentile < b.high_percentile,
            "fit percentiles",
            "must satisfy 0 <= low < high <= 100",
        )?;
        unit(self.fusion.thr, "fusion.thr")?;
        check(self.yaw.period >= 1, "yaw.period", "must be at least 1")?;
        non_negative(self.yaw.min_distance, "yaw.min_distance")?;
        unit(self.corruption.rate, "corruption.rate")?;
        Ok(())
    }

    /// The effective configuration plus a note on where each fixed constant comes from.
    pub fn annotated(&self) -> serde_json::Value {
        let constants = [
            ("fusion.thr", json!(self.fusion.thr), "fixed: boxes fuse above this intersection over the smaller volume"),
            ("fit.min_samples", json!(self.fit.min_samples), "fixed: DBSCAN core size, shared by all classes"),
            ("fit.alpha_lower", json!(self.fit.alpha_lower), "fixed: below this volume ratio the class mean dimensions are used"),
            ("fit.alpha_upper", json!(self.fit.alpha_upper), "fixed: above this volume ratio the class mean dimensions are used"),
            ("fit.low_percentile / high_percentile", json!([self.fit.low_percentile, self.fit.high_percentile]), "fixed: per-axis extent percentiles"),
            ("yaw.period", json!(self.yaw.period), "fixed: frames between heading updates"),
            ("yaw.min_distance", json!(self.yaw.min_distance), "fixed: minimum displacement for a heading update, meters"),
            ("lift.erode_masks", json!(self.lift.erode_masks), "fixed: 3x3 erosion of segmentation masks"),
            ("temporal.*", json!(null), "tunable defaults for the track lifecycle"),
            ("sct.*", json!(null), "tunable defaults for the per-camera tracker"),
            ("spatial.app_gate", json!(self.spatial.app_gate), "tunable default"),
            ("fit.yaw_aligned_extents", json!(self.fit.yaw_aligned_extents), "optional: measure extents along the current heading"),
            ("temporal.rejoin_owner", json!(self.temporal.rejoin_owner), "optional: leftover members go back to the matched track that owns their local id"),
            ("temporal.rejoin_radius", json!(self.temporal.rejoin_radius), "tunable default"),
            ("fit.center", json!(self.fit.center), "mean of the cluster points; extent_midpoint centers the box on its extents"),
        ];
        json!({
            "config": self,
            "constants": constants.iter().map(|(k, v, n)| json!({"key": k, "value": v, "note": n})).collect::<Vec<_>>(),
        })
    }
}

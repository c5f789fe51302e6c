//! HOTA scoring of 3D tracks with rotated-box IoU as the similarity.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment;
use crate::boxes::Box3;
use crate::ingest::ResultRecord;
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("ground truth is empty; scores are undefined")]
    EmptyGroundTruth,
    #[error("frame {frame} has two boxes with id {id}")]
    DuplicateId { frame: u32, id: u64 },
}

/// Ground-plane corners of a box, counter-clockwise.
pub fn footprint<T: Real>(b: &Box3<T>) -> [[T; 2]; 4] {
    let (s, c) = (b.yaw.sin(), b.yaw.cos());
    let hl = b.dims.x * T::lit(0.5);
    let hw = b.dims.y * T::lit(0.5);
    [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(dx, dy)| [b.center.x + c * dx - s * dy, b.center.y + s * dx + c * dy])
}

fn cross<T: Real>(o: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Clip `subject` against the convex counter-clockwise polygon `clip`.
pub fn clip_polygon<T: Real>(subject: &[[T; 2]], clip: &[[T; 2]]) -> Vec<[T; 2]> {
    let mut out: Vec<[T; 2]> = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let dc = cross(a, b, cur);
            let dp = cross(a, b, prev);
            if dc >= T::zero() {
                if dp < T::zero() {
                    out.push(intersect(prev, cur, dp, dc));
                }
                out.push(cur);
            } else if dp >= T::zero() {
                out.push(intersect(prev, cur, dp, dc));
            }
        }
    }
    out
}

fn intersect<T: Real>(p: [T; 2], q: [T; 2], dp: T, dq: T) -> [T; 2] {
    let t = dp / (dp - dq);
    [p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t]
}

pub fn polygon_area<T: Real>(poly: &[[T; 2]]) -> T {
    let mut twice = T::zero();
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        twice += a[0] * b[1] - a[1] * b[0];
    }
    (twice * T::lit(0.5)).abs()
}

/// IoU of two yaw-rotated boxes: footprint intersection area times vertical overlap.
pub fn iou3d<T: Real>(a: &Box3<T>, b: &Box3<T>) -> T {
    let half = T::lit(0.5);
    let z_lo = (a.center.z - a.dims.z * half).max(b.center.z - b.dims.z * half);
    let z_hi = (a.center.z + a.dims.z * half).min(b.center.z + b.dims.z * half);
    if z_hi <= z_lo {
        return T::zero();
    }
    let area = polygon_area(&clip_polygon(&footprint(a), &footprint(b)));
    let inter = area * (z_hi - z_lo);
    let union = a.volume() + b.volume() - inter;
    if union <= T::zero() {
        return T::zero();
    }
    (inter / union).max(T::zero()).min(T::one())
}

/// Boxes per frame, at most one per id in each frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackSet {
    frames: BTreeMap<u32, Vec<Box3<f64>>>,
}

impl TrackSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, frame: u32, b: Box3<f64>) -> Result<(), EvalError> {
        let list = self.frames.entry(frame).or_default();
        if list.iter().any(|o| o.global_id == b.global_id) {
            return Err(EvalError::DuplicateId { frame, id: b.global_id });
        }
        list.push(b);
        Ok(())
    }

    pub fn from_records(records: &[ResultRecord]) -> Result<Self, EvalError> {
        let mut set = Self::new();
        for r in records {
            set.insert(r.frame, r.to_box())?;
        }
        Ok(set)
    }

    pub fn frame(&self, frame: u32) -> &[Box3<f64>] {
        self.frames.get(&frame).map_or(&[], Vec::as_slice)
    }

    pub fn frames(&self) -> impl Iterator<Item = u32> + '_ {
        self.frames.keys().copied()
    }

    pub fn box_count(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.box_count() == 0
    }

    /// Apply `f` to every id.
    pub fn relabel(&self, f: impl Fn(u64) -> u64) -> Self {
        let frames = self
            .frames
            .iter()
            .map(|(&t, boxes)| (t, boxes.iter().map(|b| Box3 { global_id: f(b.global_id), ..*b }).collect()))
            .collect();
        Self { frames }
    }

    /// Keep frames `<= last`.
    pub fn truncate(&self, last: u32) -> Self {
        Self { frames: self.frames.range(..=last).map(|(&t, b)| (t, b.clone())).collect() }
    }
}

/// Standard threshold grid 0.05, 0.10, ..., 0.95.
pub fn default_alphas() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaScores {
    pub alpha: f64,
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub loca: f64,
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotaScores {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub loca: f64,
    pub per_alpha: Vec<AlphaScores>,
}

impl HotaScores {
    pub fn summary_line(&self) -> String {
        format!("HOTA {:.4} DetA {:.4} AssA {:.4} LocA {:.4}", self.hota, self.deta, self.assa, self.loca)
    }

    pub fn per_alpha_csv(&self) -> String {
        let mut s = String::from("alpha,hota,deta,assa,loca,tp,fn,fp\n");
        for a in &self.per_alpha {
            let _ = writeln!(s, "{:.2},{:.6},{:.6},{:.6},{:.6},{},{},{}", a.alpha, a.hota, a.deta, a.assa, a.loca, a.tp, a.fn_, a.fp);
        }
        s
    }
}

/// IoU matrices of every frame that has boxes on either side.
struct FrameSims {
    frame: u32,
    gt_ids: Vec<u64>,
    pred_ids: Vec<u64>,
    iou: Vec<Vec<f64>>,
}

fn frame_sims(gt: &TrackSet, pred: &TrackSet) -> Vec<FrameSims> {
    let mut frames: Vec<u32> = gt.frames().chain(pred.frames()).collect();
    frames.sort_unstable();
    frames.dedup();
    frames
        .par_iter()
        .map(|&t| {
            let g = gt.frame(t);
            let p = pred.frame(t);
            FrameSims {
                frame: t,
                gt_ids: g.iter().map(|b| b.global_id).collect(),
                pred_ids: p.iter().map(|b| b.global_id).collect(),
                iou: g.iter().map(|a| p.iter().map(|b| iou3d(a, b)).collect()).collect(),
            }
        })
        .collect()
}

/// Pairs maximizing total similarity among those with similarity `>= alpha`.
pub fn match_frame(iou: &[Vec<f64>], alpha: f64) -> Vec<(usize, usize)> {
    let weights: Vec<Vec<f64>> = iou.iter().map(|r| r.iter().map(|&s| if s >= alpha { s } else { 0.0 }).collect()).collect();
    assignment::solve_max(&weights).into_iter().filter(|&(i, j)| iou[i][j] >= alpha && iou[i][j] > 0.0).collect()
}

fn score_alpha(sims: &[FrameSims], alpha: f64) -> AlphaScores {
    let mut gt_count: HashMap<u64, usize> = HashMap::new();
    let mut pred_count: HashMap<u64, usize> = HashMap::new();
    let mut pair_count: HashMap<(u64, u64), usize> = HashMap::new();
    let mut matches: Vec<(u64, u64)> = Vec::new();
    let (mut n_gt, mut n_pred, mut loc_sum) = (0, 0, 0.0);
    for f in sims {
        for &g in &f.gt_ids {
            *gt_count.entry(g).or_default() += 1;
        }
        for &p in &f.pred_ids {
            *pred_count.entry(p).or_default() += 1;
        }
        n_gt += f.gt_ids.len();
        n_pred += f.pred_ids.len();
        for (i, j) in match_frame(&f.iou, alpha) {
            let key = (f.gt_ids[i], f.pred_ids[j]);
            *pair_count.entry(key).or_default() += 1;
            matches.push(key);
            loc_sum += f.iou[i][j];
        }
    }
    let tp = matches.len();
    let fn_ = n_gt - tp;
    let fp = n_pred - tp;
    let deta = if tp + fn_ + fp == 0 { 0.0 } else { tp as f64 / (tp + fn_ + fp) as f64 };
    let assa = if tp == 0 {
        0.0
    } else {
        matches
            .iter()
            .map(|k| {
                let tpa = pair_count[k] as f64;
                tpa / (gt_count[&k.0] as f64 + pred_count[&k.1] as f64 - tpa)
            })
            .sum::<f64>()
            / tp as f64
    };
    let loca = if tp == 0 { 0.0 } else { loc_sum / tp as f64 };
    AlphaScores { alpha, hota: (deta * assa).sqrt(), deta, assa, loca, tp, fn_, fp }
}

/// HOTA, DetA, AssA and LocA averaged over `alphas`.
pub fn hota(gt: &TrackSet, pred: &TrackSet, alphas: &[f64]) -> Result<HotaScores, EvalError> {
    if gt.is_empty() {
        return Err(EvalError::EmptyGroundTruth);
    }
    let sims = frame_sims(gt, pred);
    let per_alpha: Vec<AlphaScores> = alphas.par_iter().map(|&a| score_alpha(&sims, a)).collect();
    let n = per_alpha.len().max(1) as f64;
    let mean = |f: fn(&AlphaScores) -> f64| per_alpha.iter().map(f).sum::<f64>() / n;
    Ok(HotaScores { hota: mean(|a| a.hota), deta: mean(|a| a.deta), assa: mean(|a| a.assa), loca: mean(|a| a.loca), per_alpha })
}

/// Identity switches: times a ground-truth id is matched (IoU `>= min_iou`) to
/// a different predicted id than at its previous match. Frames before
/// `from_frame` only seed the previous match.
pub fn id_switches(gt: &TrackSet, pred: &TrackSet, min_iou: f64, from_frame: u32) -> usize {
    let mut last: HashMap<u64, u64> = HashMap::new();
    let mut switches = 0;
    for f in frame_sims(gt, pred).iter() {
        let frame_matches = match_frame(&f.iou, min_iou);
        for (i, j) in frame_matches {
            let (g, p) = (f.gt_ids[i], f.pred_ids[j]);
            if let Some(prev) = last.insert(g, p) {
                if prev != p && f.frame >= from_frame {
                    switches += 1;
                }
            }
        }
    }
    switches
}

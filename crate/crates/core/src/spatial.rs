//! Per-frame cross-camera grouping of locally tracked targets.
//!
//! Distances are class-conditional (cosine for pedestrians, top-down meters
//! otherwise) with dual gating on both features and a hard same-camera
//! exclusion; groups come from average-linkage agglomerative clustering where
//! a gated pair forbids any merge that would join them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ClassInfo, ClassStats};
use crate::sct::{cosine_distance, normalize};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpatialError {
    #[error("snapshot {index} has class {found}, expected {expected}")]
    MixedClasses { index: usize, found: u32, expected: u32 },
}

/// One locally tracked target at the current frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSnapshot {
    pub camera_id: u32,
    pub local_id: u64,
    pub class_id: u32,
    pub embedding: Vec<f64>,
    /// Top-down map position, meters.
    pub topdown: [f64; 2],
    pub foot_pixel: (f64, f64),
    pub score: f64,
    /// Index of the source detection among its camera's detections this frame.
    pub det_index: usize,
}

impl TargetSnapshot {
    pub fn key(&self) -> (u32, u64) {
        (self.camera_id, self.local_id)
    }
}

/// Snapshots believed to be one entity, at most one per camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Sorted by `(camera_id, local_id)`.
    pub members: Vec<TargetSnapshot>,
    pub centroid: [f64; 2],
    pub appearance: Vec<f64>,
    pub class_id: u32,
}

impl Cluster {
    /// Build from members, computing centroid, appearance and majority class.
    ///
    /// Panics on an empty member list.
    pub fn from_members(mut members: Vec<TargetSnapshot>) -> Self {
        assert!(!members.is_empty(), "cluster needs at least one member");
        members.sort_by_key(|m| m.key());
        let n = members.len() as f64;
        let centroid = [
            members.iter().map(|m| m.topdown[0]).sum::<f64>() / n,
            members.iter().map(|m| m.topdown[1]).sum::<f64>() / n,
        ];
        let mut appearance = vec![0.0; members[0].embedding.len()];
        for m in &members {
            appearance.iter_mut().zip(&m.embedding).for_each(|(a, e)| *a += e);
        }
        normalize(&mut appearance);
        let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
        members.iter().for_each(|m| *votes.entry(m.class_id).or_default() += 1);
        // Highest count, lowest class id on ties.
        let class_id = votes.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(c, _)| *c).unwrap();
        Self { members, centroid, appearance, class_id }
    }

    pub fn keys(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.members.iter().map(|m| m.key())
    }

    pub fn min_key(&self) -> (u32, u64) {
        self.members[0].key()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpatialConfig {
    /// Maximum cosine distance between any two clustered targets.
    pub app_gate: f64,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        Self { app_gate: 0.5 }
    }
}

/// Statistics for `class_id`, or neutral non-pedestrian defaults for an unknown class.
pub(crate) fn class_info(stats: &ClassStats, class_id: u32) -> ClassInfo {
    stats.get(class_id).cloned().unwrap_or(ClassInfo {
        class_id,
        name: String::new(),
        pedestrian: false,
        mean_length: 1.0,
        mean_width: 1.0,
        mean_height: 1.0,
        mean_volume: 1.0,
        epsilon: None,
        spatial_gate: None,
        cluster_cut: None,
    })
}

fn euclid(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Symmetric gated distance matrix for snapshots of one class. Gated pairs are `+∞`.
pub fn build_distance_matrix(
    snapshots: &[&TargetSnapshot],
    class_id: u32,
    stats: &ClassStats,
    cfg: &SpatialConfig,
) -> Result<Vec<Vec<f64>>, SpatialError> {
    if let Some((index, s)) = snapshots.iter().enumerate().find(|(_, s)| s.class_id != class_id) {
        return Err(SpatialError::MixedClasses { index, found: s.class_id, expected: class_id });
    }
    let info = class_info(stats, class_id);
    let gate = info.spatial_gate();
    let n = snapshots.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (snapshots[i], snapshots[j]);
            let app = cosine_distance(&a.embedding, &b.embedding).max(0.0);
            let dist = euclid(&a.topdown, &b.topdown);
            let v = if a.camera_id == b.camera_id || app > cfg.app_gate || dist > gate {
                f64::INFINITY
            } else if info.pedestrian {
                app
            } else {
                dist
            };
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    Ok(d)
}

/// Average-linkage agglomerative clustering cut at `cut`. Returns index groups
/// in order of their smallest tie-break key.
pub fn agglomerate(dist: &[Vec<f64>], cut: f64, keys: &[(u32, u64)]) -> Vec<Vec<usize>> {
    let n = dist.len();
    let mut groups: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut link: Vec<Vec<f64>> = dist.to_vec();
    let group_key = |g: &Vec<usize>| g.iter().map(|&i| keys[i]).min().unwrap();
    loop {
        let mut best: Option<(f64, ((u32, u64), (u32, u64)), usize, usize)> = None;
        for a in 0..n {
            let Some(ga) = &groups[a] else { continue };
            for b in a + 1..n {
                let Some(gb) = &groups[b] else { continue };
                let d = link[a][b];
                if !d.is_finite() || d > cut {
                    continue;
                }
                let (ka, kb) = (group_key(ga), group_key(gb));
                let tie = if ka <= kb { (ka, kb) } else { (kb, ka) };
                let better = match &best {
                    None => true,
                    Some((bd, bt, _, _)) => d < *bd || (d == *bd && tie < *bt),
                };
                if better {
                    best = Some((d, tie, a, b));
                }
            }
        }
        let Some((_, _, a, b)) = best else { break };
        let (na, nb) = (groups[a].as_ref().unwrap().len() as f64, groups[b].as_ref().unwrap().len() as f64);
        for c in 0..n {
            if c == a || c == b || groups[c].is_none() {
                continue;
            }
            // Lance-Williams update for average linkage; an infinite side stays infinite.
            let v = if link[a][c].is_finite() && link[b][c].is_finite() {
                (na * link[a][c] + nb * link[b][c]) / (na + nb)
            } else {
                f64::INFINITY
            };
            link[a][c] = v;
            link[c][a] = v;
        }
        let gb = groups[b].take().unwrap();
        groups[a].as_mut().unwrap().extend(gb);
    }
    let mut out: Vec<Vec<usize>> = groups.into_iter().flatten().collect();
    for g in &mut out {
        g.sort_by_key(|&i| keys[i]);
    }
    out.sort_by_key(|g| keys[g[0]]);
    out
}

/// Cluster all snapshots of one frame, class by class.
pub fn cluster_frame(snapshots: &[TargetSnapshot], stats: &ClassStats, cfg: &SpatialConfig) -> Vec<Cluster> {
    let mut by_class: BTreeMap<u32, Vec<&TargetSnapshot>> = BTreeMap::new();
    for s in snapshots {
        by_class.entry(s.class_id).or_default().push(s);
    }
    let mut clusters = Vec::new();
    for (class_id, snaps) in by_class {
        let dist = build_distance_matrix(&snaps, class_id, stats, cfg).expect("grouped by class");
        let keys: Vec<_> = snaps.iter().map(|s| s.key()).collect();
        let cut = class_info(stats, class_id).cluster_cut();
        for group in agglomerate(&dist, cut, &keys) {
            let members = group.into_iter().map(|i| snaps[i].clone()).collect();
            clusters.push(Cluster::from_members(members));
        }
    }
    clusters.sort_by_key(|c| c.min_key());
    clusters
}

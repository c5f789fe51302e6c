//! Global identity assignment for per-frame clusters.
//!
//! Clusters are matched in a fixed order: confirmed tracks by overlap of their
//! `(camera, local id)` sets, then lost tracks by appearance within a radius
//! that grows with the time lost, then tentative tracks by overlap again;
//! whatever is left spawns new tentative tracks. Members of a matched cluster
//! that the track has not seen before are checked against the members it has
//! seen, and may take over the track's slot for their camera (a split).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::assignment;
use crate::sct::{cosine_distance, dot, normalize};
use crate::spatial::{Cluster, TargetSnapshot};

pub type MemberKey = (u32, u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackState {
    Tentative,
    Confirmed,
    Lost,
}

/// How clusters are matched to existing tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchingMode {
    /// Overlap of local-ID sets.
    IdConsistency,
    /// Hungarian on appearance distance only; the local IDs are ignored.
    AppearanceOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemporalConfig {
    pub mode: MatchingMode,
    /// Compare unexpected members against the incumbent before accepting them.
    pub splitting: bool,
    pub app_lost_max: f64,
    /// Base re-match radius for lost tracks, meters.
    pub r0: f64,
    /// Radius growth per lost frame, meters.
    pub r_rate: f64,
    pub m0: u32,
    pub m_div: u32,
    pub n_confirm: u32,
    pub ema_alpha: f64,
    /// Lost tracks older than this many frames are dropped.
    pub max_lost_frames: u32,
    /// Membership entries not observed for this many frames are dropped.
    pub member_ttl: u32,
    /// A leftover member (routed, or in an unmatched cluster) whose local id
    /// belongs to a track matched in the same stage rejoins that track instead
    /// of seeding a new one, if it lies within `rejoin_radius` of the track's
    /// cluster and the track has no member from that camera this frame.
    pub rejoin_owner: bool,
    /// Meters, on the top-down map.
    pub rejoin_radius: f64,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        Self {
            mode: MatchingMode::IdConsistency,
            splitting: true,
            app_lost_max: 0.45,
            r0: 1.0,
            r_rate: 0.05,
            m0: 1,
            m_div: 60,
            n_confirm: 3,
            ema_alpha: 0.9,
            max_lost_frames: 600,
            member_ttl: 30,
            rejoin_owner: true,
            rejoin_radius: 3.0,
        }
    }
}

impl TemporalConfig {
    /// Admissible re-match radius after `lost_frames` frames.
    pub fn lost_radius(&self, lost_frames: u32) -> f64 {
        self.r0 + self.r_rate * lost_frames as f64
    }

    /// Consecutive matches needed to reactivate after `lost_frames` frames.
    pub fn required_matches(&self, lost_frames: u32) -> u32 {
        self.m0 + lost_frames / self.m_div.max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalTrack {
    pub global_id: u64,
    pub class_id: u32,
    pub state: TrackState,
    /// camera id → local id.
    pub membership: BTreeMap<u32, u64>,
    pub appearance: Vec<f64>,
    pub last_topdown: [f64; 2],
    pub last_seen_frame: u32,
    /// Matches in a row: toward confirmation while tentative, toward reactivation while lost.
    pub consecutive_matches: u32,
    /// Last embedding of each member ever assigned.
    pub member_appearance: BTreeMap<MemberKey, Vec<f64>>,
    member_seen: BTreeMap<MemberKey, u32>,
}

impl GlobalTrack {
    pub fn lost_duration(&self, frame: u32) -> u32 {
        frame.saturating_sub(self.last_seen_frame)
    }

    pub fn contains(&self, key: MemberKey) -> bool {
        self.membership.get(&key.0) == Some(&key.1)
    }

    fn detach(&mut self, key: MemberKey) {
        if self.contains(key) {
            self.membership.remove(&key.0);
        }
    }
}

/// Split of a matched cluster against the track's previous membership.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    /// In both cluster and track.
    pub expected: BTreeSet<MemberKey>,
    /// In the cluster only.
    pub unexpected: BTreeSet<MemberKey>,
    /// In the track only.
    pub vacated: BTreeSet<MemberKey>,
}

pub fn overlap_report(cluster: &Cluster, membership: &BTreeMap<u32, u64>) -> OverlapReport {
    let mut r = OverlapReport::default();
    for k in cluster.keys() {
        if membership.get(&k.0) == Some(&k.1) {
            r.expected.insert(k);
        } else {
            r.unexpected.insert(k);
        }
    }
    for (&c, &l) in membership {
        if !r.expected.contains(&(c, l)) {
            r.vacated.insert((c, l));
        }
    }
    r
}

/// Outcome for one unexpected member of a matched cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitDecision {
    /// Member takes a camera slot that is free or whose holder is not observed this frame.
    Accept { replaced: Option<u64> },
    /// Member wins the appearance comparison and detaches the observed incumbent.
    Split { replaced: u64 },
    /// Member is sent on to the later matching stages.
    Route,
}

/// Decide for each unexpected member whether it joins the track.
///
/// A member whose camera slot is free, or held by a local id that is not
/// observed anywhere this frame, takes the slot. Otherwise it competes with
/// the incumbent: with `splitting` it wins when it is more similar to the
/// expected members than the incumbent's stored appearance is; without
/// `splitting` the incumbent always keeps the slot. `embeddings` must hold
/// every cluster member.
pub fn resolve_split(
    track: &GlobalTrack,
    report: &OverlapReport,
    embeddings: &BTreeMap<MemberKey, &[f64]>,
    observed: &BTreeSet<MemberKey>,
    splitting: bool,
) -> Vec<(MemberKey, SplitDecision)> {
    if report.expected.is_empty() {
        return report.unexpected.iter().map(|&k| (k, SplitDecision::Route)).collect();
    }
    let mut reference = vec![0.0; embeddings.values().next().map_or(0, |e| e.len())];
    for k in &report.expected {
        reference.iter_mut().zip(embeddings[k]).for_each(|(r, e)| *r += e);
    }
    normalize(&mut reference);
    report
        .unexpected
        .iter()
        .map(|&k| {
            let incumbent = track.membership.get(&k.0).copied();
            let Some(old) = incumbent.filter(|&old| observed.contains(&(k.0, old))) else {
                return (k, SplitDecision::Accept { replaced: incumbent });
            };
            if !splitting {
                return (k, SplitDecision::Route);
            }
            let challenger = dot(embeddings[&k], &reference);
            let defended = track.member_appearance.get(&(k.0, old)).map_or(-1.0, |e| dot(e, &reference));
            if challenger > defended {
                (k, SplitDecision::Split { replaced: old })
            } else {
                (k, SplitDecision::Route)
            }
        })
        .collect()
}

/// Machine-readable association events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum AssocEvent {
    Spawn { frame: u32, global_id: u64 },
    Confirm { frame: u32, global_id: u64 },
    RemoveTentative { frame: u32, global_id: u64 },
    Lost { frame: u32, global_id: u64 },
    Reactivate { frame: u32, global_id: u64, lost_frames: u32 },
    Expire { frame: u32, global_id: u64 },
    Split { frame: u32, global_id: u64, camera_id: u32, old_local_id: u64, new_local_id: u64 },
    Route { frame: u32, global_id: u64, camera_id: u32, local_id: u64 },
    Rejoin { frame: u32, global_id: u64, camera_id: u32, local_id: u64 },
}

/// A cluster (possibly reduced by routing) carrying a confirmed global id this frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub global_id: u64,
    pub class_id: u32,
    pub members: Vec<TargetSnapshot>,
    pub centroid: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameOutcome {
    pub frame: u32,
    pub assignments: Vec<Assignment>,
    pub events: Vec<AssocEvent>,
    pub reports: Vec<(u64, OverlapReport)>,
}

impl FrameOutcome {
    pub fn count(&self, pred: impl Fn(&AssocEvent) -> bool) -> usize {
        self.events.iter().filter(|e| pred(e)).count()
    }
}

/// Online temporal association state for one scene.
#[derive(Debug, Clone)]
pub struct TemporalAssociator {
    cfg: TemporalConfig,
    tracks: BTreeMap<u64, GlobalTrack>,
    next_id: u64,
    /// Members kept by tracks matched this frame, emitted once their state is settled.
    pending: BTreeMap<u64, Cluster>,
    /// Every member key present in the current frame.
    observed: BTreeSet<MemberKey>,
}

impl TemporalAssociator {
    pub fn new(cfg: TemporalConfig) -> Self {
        Self { cfg, tracks: BTreeMap::new(), next_id: 1, pending: BTreeMap::new(), observed: BTreeSet::new() }
    }

    pub fn config(&self) -> &TemporalConfig {
        &self.cfg
    }

    pub fn tracks(&self) -> impl Iterator<Item = &GlobalTrack> {
        self.tracks.values()
    }

    pub fn track(&self, global_id: u64) -> Option<&GlobalTrack> {
        self.tracks.get(&global_id)
    }

    fn ids_in(&self, state: TrackState) -> Vec<u64> {
        self.tracks.values().filter(|t| t.state == state).map(|t| t.global_id).collect()
    }

    /// Process one frame of clusters.
    pub fn update(&mut self, frame: u32, clusters: Vec<Cluster>) -> FrameOutcome {
        let mut out = FrameOutcome { frame, ..Default::default() };
        self.prune_members(frame);
        self.observed = clusters.iter().flat_map(|c| c.keys()).collect();

        let confirmed = self.ids_in(TrackState::Confirmed);
        let leftovers = self.match_confirmed(frame, clusters, &confirmed, &mut out);
        let lost = self.ids_in(TrackState::Lost);
        let leftovers = self.match_lost(frame, leftovers, &lost, &mut out);
        let tentative = self.ids_in(TrackState::Tentative);
        let leftovers = self.match_tentative(frame, leftovers, &tentative, &mut out);
        for c in leftovers {
            self.spawn(frame, c, &mut out);
        }
        self.expire_lost(frame, &mut out);
        self.pending.clear();
        out.assignments.sort_by_key(|a| a.global_id);
        out
    }

    fn prune_members(&mut self, frame: u32) {
        let ttl = self.cfg.member_ttl;
        for t in self.tracks.values_mut() {
            let stale: Vec<MemberKey> = t
                .membership
                .iter()
                .map(|(&c, &l)| (c, l))
                .filter(|k| t.member_seen.get(k).is_some_and(|&s| frame.saturating_sub(s) > ttl))
                .collect();
            for k in stale {
                t.detach(k);
            }
        }
    }

    /// Overlap (or appearance, in the baseline mode) matching of clusters to `ids`.
    fn match_pairs(&self, clusters: &[Cluster], ids: &[u64]) -> Vec<(usize, u64)> {
        if clusters.is_empty() || ids.is_empty() {
            return Vec::new();
        }
        let n = clusters.len().max(ids.len()) as f64;
        let costs: Vec<Vec<f64>> = clusters
            .iter()
            .map(|c| {
                ids.iter()
                    .enumerate()
                    .map(|(rank, gid)| {
                        let t = &self.tracks[gid];
                        let app = cosine_distance(&c.appearance, &t.appearance).clamp(0.0, 2.0);
                        match self.cfg.mode {
                            MatchingMode::IdConsistency => {
                                let overlap = c.keys().filter(|&k| t.contains(k)).count();
                                if overlap == 0 {
                                    return f64::INFINITY;
                                }
                                // Total overlap dominates; ties go to the smaller appearance
                                // distance, then the lower global id.
                                let tie = app / 2.0 + 1e-6 * rank as f64 / ids.len() as f64;
                                -(overlap as f64) + tie / (2.0 * (n + 1.0))
                            }
                            MatchingMode::AppearanceOnly => {
                                if c.class_id != t.class_id || app > self.cfg.app_lost_max {
                                    f64::INFINITY
                                } else {
                                    app + 1e-9 * rank as f64
                                }
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        assignment::solve(&costs).into_iter().map(|(ci, ti)| (ci, ids[ti])).collect()
    }

    /// Stage 1: confirmed tracks. Unmatched confirmed tracks become lost.
    pub fn match_confirmed(&mut self, frame: u32, clusters: Vec<Cluster>, ids: &[u64], out: &mut FrameOutcome) -> Vec<Cluster> {
        let pairs = self.match_pairs(&clusters, ids);
        let (leftovers, matched) = self.apply_matches(frame, clusters, &pairs, out);
        for gid in ids.iter().filter(|g| !matched.contains(g)) {
            let t = self.tracks.get_mut(gid).unwrap();
            t.state = TrackState::Lost;
            t.consecutive_matches = 0;
            out.events.push(AssocEvent::Lost { frame, global_id: *gid });
        }
        for &(_, gid) in &pairs {
            self.emit(gid, out);
        }
        leftovers
    }

    /// Stage 2: lost tracks, Hungarian on appearance within a growing radius.
    pub fn match_lost(&mut self, frame: u32, clusters: Vec<Cluster>, ids: &[u64], out: &mut FrameOutcome) -> Vec<Cluster> {
        let costs: Vec<Vec<f64>> = clusters
            .iter()
            .map(|c| {
                ids.iter()
                    .map(|gid| {
                        let t = &self.tracks[gid];
                        let app = cosine_distance(&c.appearance, &t.appearance).max(0.0);
                        let dx = c.centroid[0] - t.last_topdown[0];
                        let dy = c.centroid[1] - t.last_topdown[1];
                        let radius = self.cfg.lost_radius(t.lost_duration(frame));
                        if c.class_id != t.class_id || app > self.cfg.app_lost_max || (dx * dx + dy * dy).sqrt() > radius {
                            f64::INFINITY
                        } else {
                            app
                        }
                    })
                    .collect()
            })
            .collect();
        let pairs = if clusters.is_empty() || ids.is_empty() { Vec::new() } else { assignment::solve(&costs) };
        let mut used = vec![false; clusters.len()];
        let mut matched = BTreeSet::new();
        let mut clusters: Vec<Option<Cluster>> = clusters.into_iter().map(Some).collect();
        for (ci, ti) in pairs {
            let gid = ids[ti];
            matched.insert(gid);
            used[ci] = true;
            let cluster = clusters[ci].take().unwrap();
            let t = self.tracks.get_mut(&gid).unwrap();
            t.consecutive_matches += 1;
            let lost_frames = t.lost_duration(frame);
            if t.consecutive_matches >= self.cfg.required_matches(lost_frames) {
                t.state = TrackState::Confirmed;
                t.consecutive_matches = 0;
                t.membership.clear();
                t.member_appearance.clear();
                t.member_seen.clear();
                for m in &cluster.members {
                    self.claim(gid, m, frame);
                }
                self.refresh(gid, &cluster, frame);
                out.events.push(AssocEvent::Reactivate { frame, global_id: gid, lost_frames });
                self.emit_cluster(gid, &cluster, out);
            }
        }
        for gid in ids.iter().filter(|g| !matched.contains(g)) {
            self.tracks.get_mut(gid).unwrap().consecutive_matches = 0;
        }
        clusters.into_iter().flatten().collect()
    }

    /// Stage 3: tentative tracks by overlap. Unmatched tentative tracks are removed.
    pub fn match_tentative(&mut self, frame: u32, clusters: Vec<Cluster>, ids: &[u64], out: &mut FrameOutcome) -> Vec<Cluster> {
        let pairs = self.match_pairs(&clusters, ids);
        let (leftovers, matched) = self.apply_matches(frame, clusters, &pairs, out);
        for gid in ids {
            if matched.contains(gid) {
                let t = self.tracks.get_mut(gid).unwrap();
                t.consecutive_matches += 1;
                if t.consecutive_matches >= self.cfg.n_confirm {
                    t.state = TrackState::Confirmed;
                    t.consecutive_matches = 0;
                    out.events.push(AssocEvent::Confirm { frame, global_id: *gid });
                    self.emit(*gid, out);
                }
            } else {
                self.tracks.remove(gid);
                out.events.push(AssocEvent::RemoveTentative { frame, global_id: *gid });
            }
        }
        leftovers
    }

    fn spawn(&mut self, frame: u32, cluster: Cluster, out: &mut FrameOutcome) {
        let gid = self.next_id;
        self.next_id += 1;
        let state = if self.cfg.n_confirm <= 1 { TrackState::Confirmed } else { TrackState::Tentative };
        self.tracks.insert(
            gid,
            GlobalTrack {
                global_id: gid,
                class_id: cluster.class_id,
                state,
                membership: BTreeMap::new(),
                appearance: cluster.appearance.clone(),
                last_topdown: cluster.centroid,
                last_seen_frame: frame,
                consecutive_matches: 1,
                member_appearance: BTreeMap::new(),
                member_seen: BTreeMap::new(),
            },
        );
        for m in &cluster.members {
            self.claim(gid, m, frame);
        }
        out.events.push(AssocEvent::Spawn { frame, global_id: gid });
        if state == TrackState::Confirmed {
            out.events.push(AssocEvent::Confirm { frame, global_id: gid });
            self.emit_cluster(gid, &cluster, out);
        }
    }

    fn expire_lost(&mut self, frame: u32, out: &mut FrameOutcome) {
        let max = self.cfg.max_lost_frames;
        let expired: Vec<u64> = self
            .tracks
            .values()
            .filter(|t| t.state == TrackState::Lost && t.lost_duration(frame) > max)
            .map(|t| t.global_id)
            .collect();
        for gid in expired {
            self.tracks.remove(&gid);
            out.events.push(AssocEvent::Expire { frame, global_id: gid });
        }
    }

    /// The matched track a leftover member should rejoin, if any.
    fn rejoin_target(&self, m: &TargetSnapshot, kept: &BTreeMap<u64, Cluster>) -> Option<u64> {
        if !self.cfg.rejoin_owner {
            return None;
        }
        let gid = self.tracks.values().find(|t| t.contains(m.key()))?.global_id;
        let cluster = kept.get(&gid)?;
        let (dx, dy) = (m.topdown[0] - cluster.centroid[0], m.topdown[1] - cluster.centroid[1]);
        let free = cluster.members.iter().all(|k| k.camera_id != m.camera_id);
        (free && cluster.class_id == m.class_id && dx.hypot(dy) <= self.cfg.rejoin_radius).then_some(gid)
    }

    /// Give `member` the track's slot for its camera, detaching it from any other track.
    fn claim(&mut self, gid: u64, member: &TargetSnapshot, frame: u32) {
        let key = member.key();
        for t in self.tracks.values_mut() {
            if t.global_id != gid {
                t.detach(key);
            }
        }
        let t = self.tracks.get_mut(&gid).unwrap();
        t.membership.insert(key.0, key.1);
        t.member_appearance.insert(key, member.embedding.clone());
        t.member_seen.insert(key, frame);
    }

    /// Update track appearance and position from the members it kept this frame.
    fn refresh(&mut self, gid: u64, kept: &Cluster, frame: u32) {
        let a = self.cfg.ema_alpha;
        let t = self.tracks.get_mut(&gid).unwrap();
        t.appearance.iter_mut().zip(&kept.appearance).for_each(|(x, c)| *x = a * *x + (1.0 - a) * c);
        normalize(&mut t.appearance);
        t.last_topdown = kept.centroid;
        t.last_seen_frame = frame;
    }

    /// Apply matched pairs: refresh expected members, run splitting on the rest,
    /// and return leftover clusters (unmatched plus routed members).
    fn apply_matches(
        &mut self,
        frame: u32,
        clusters: Vec<Cluster>,
        pairs: &[(usize, u64)],
        out: &mut FrameOutcome,
    ) -> (Vec<Cluster>, BTreeSet<u64>) {
        let mut slots: Vec<Option<Cluster>> = clusters.into_iter().map(Some).collect();
        let mut leftovers = Vec::new();
        let mut matched = BTreeSet::new();
        let mut kept_clusters = Vec::new();
        let mut routed_clusters = Vec::new();
        let stage: BTreeSet<u64> = pairs.iter().map(|&(_, gid)| gid).collect();
        for &(ci, gid) in pairs {
            let cluster = slots[ci].take().unwrap();
            matched.insert(gid);
            let (kept, routed) = self.integrate(frame, gid, cluster, &stage, out);
            routed_clusters.extend(routed);
            kept_clusters.push((gid, kept));
        }
        let mut kept_clusters: BTreeMap<u64, Cluster> = kept_clusters.into_iter().collect();
        routed_clusters.extend(slots.into_iter().flatten());
        for cluster in routed_clusters {
            let mut rest = Vec::new();
            for m in cluster.members {
                match self.rejoin_target(&m, &kept_clusters) {
                    Some(gid) => {
                        out.events.push(AssocEvent::Rejoin { frame, global_id: gid, camera_id: m.camera_id, local_id: m.local_id });
                        self.tracks.get_mut(&gid).unwrap().member_seen.insert(m.key(), frame);
                        let kept = kept_clusters.get_mut(&gid).unwrap();
                        let mut members = std::mem::take(&mut kept.members);
                        members.push(m);
                        *kept = Cluster::from_members(members);
                    }
                    None => rest.push(m),
                }
            }
            if !rest.is_empty() {
                leftovers.push(Cluster::from_members(rest));
            }
        }
        self.pending.extend(kept_clusters);
        leftovers.sort_by_key(|c| c.min_key());
        (leftovers, matched)
    }

    /// Settle one matched pair. `stage` holds every track matched in the same
    /// stage; an unexpected member owned by one of the others is routed so it
    /// can return to its owner.
    fn integrate(
        &mut self,
        frame: u32,
        gid: u64,
        cluster: Cluster,
        stage: &BTreeSet<u64>,
        out: &mut FrameOutcome,
    ) -> (Cluster, Option<Cluster>) {
        let track = &self.tracks[&gid];
        let report = overlap_report(&cluster, &track.membership);
        let decisions: Vec<(MemberKey, SplitDecision)> = match self.cfg.mode {
            MatchingMode::IdConsistency => {
                let embeddings: BTreeMap<MemberKey, &[f64]> =
                    cluster.members.iter().map(|m| (m.key(), m.embedding.as_slice())).collect();
                let owned_elsewhere = |k: &MemberKey| {
                    self.cfg.rejoin_owner && stage.iter().any(|&g| g != gid && self.tracks[&g].contains(*k))
                };
                let (foreign, own): (BTreeSet<MemberKey>, BTreeSet<MemberKey>) =
                    report.unexpected.iter().partition(|k| owned_elsewhere(k));
                let contested = OverlapReport { unexpected: own, ..report.clone() };
                let mut decisions = resolve_split(track, &contested, &embeddings, &self.observed, self.cfg.splitting);
                decisions.extend(foreign.into_iter().map(|k| (k, SplitDecision::Route)));
                decisions.sort_by_key(|(k, _)| *k);
                decisions
            }
            MatchingMode::AppearanceOnly => report
                .unexpected
                .iter()
                .map(|&k| (k, SplitDecision::Accept { replaced: track.membership.get(&k.0).copied() }))
                .collect(),
        };
        let routed_keys: BTreeSet<MemberKey> =
            decisions.iter().filter(|(_, d)| *d == SplitDecision::Route).map(|(k, _)| *k).collect();
        for (k, d) in &decisions {
            match d {
                SplitDecision::Split { replaced: old } => {
                    out.events.push(AssocEvent::Split {
                        frame,
                        global_id: gid,
                        camera_id: k.0,
                        old_local_id: *old,
                        new_local_id: k.1,
                    });
                    self.tracks.get_mut(&gid).unwrap().member_appearance.remove(&(k.0, *old));
                }
                SplitDecision::Route => {
                    out.events.push(AssocEvent::Route { frame, global_id: gid, camera_id: k.0, local_id: k.1 })
                }
                _ => {}
            }
        }
        out.reports.push((gid, report));

        let (kept, routed): (Vec<TargetSnapshot>, Vec<TargetSnapshot>) =
            cluster.members.into_iter().partition(|m| !routed_keys.contains(&m.key()));
        if self.cfg.mode == MatchingMode::AppearanceOnly {
            let t = self.tracks.get_mut(&gid).unwrap();
            t.membership.clear();
        }
        for m in &kept {
            self.claim(gid, m, frame);
        }
        let kept = Cluster::from_members(kept);
        self.refresh(gid, &kept, frame);
        let routed = (!routed.is_empty()).then(|| Cluster::from_members(routed));
        (kept, routed)
    }

    fn emit(&mut self, gid: u64, out: &mut FrameOutcome) {
        if let Some(kept) = self.pending.remove(&gid) {
            if self.tracks[&gid].state == TrackState::Confirmed {
                self.emit_cluster(gid, &kept, out);
            }
        }
    }

    fn emit_cluster(&self, gid: u64, cluster: &Cluster, out: &mut FrameOutcome) {
        out.assignments.push(Assignment {
            global_id: gid,
            class_id: self.tracks[&gid].class_id,
            members: cluster.members.clone(),
            centroid: cluster.centroid,
        });
    }
}

//! Two-stage (high/low confidence) multi-object tracking with belt gating.
//!
//! Each frame the live tracks are predicted one step ahead and matched
//! first against confident detections, then the leftovers against
//! low-confidence ones, so a partially occluded fish still extends its
//! track. While the belt is not moving forward the tracker is frozen:
//! nothing is predicted, aged, created or ended.
//!
//! A reversal additionally leaves the tracks "ahead" of the fish by the
//! reversed distance. [`Tracker`] keeps the tracker frozen after the belt
//! resumes until the belt has advanced back over that distance, so fish
//! that were pushed back (and fish that had already left the view and
//! were carried back into it) are not picked up as new tracks.

mod assignment;
mod kalman;

pub use assignment::{assign, solve_assignment, Matching};
pub use kalman::{KalmanFilter, KalmanState};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detection::{ClassScores, Detection, FrameDetections, StageScores};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::motion::{BeltMotion, BeltState, MotionConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    /// Detections at or above this confidence take part in the first
    /// association stage and may start new tracks.
    pub tau_high: f64,
    /// Detections below this confidence are ignored.
    pub tau_low: f64,
    pub match_iou_min: f64,
    pub tentative_min_hits: u32,
    pub max_frames_lost: u32,
    /// Pixels past the frame edge (along the belt) at which a coasting
    /// track is considered gone.
    pub exit_margin: f64,
    /// Freeze the tracker while the belt is stopped or reversed.
    pub gating: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            tau_high: 0.6,
            tau_low: 0.1,
            match_iou_min: 0.2,
            tentative_min_hits: 2,
            max_frames_lost: 30,
            exit_margin: 10.0,
            gating: true,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.tau_low && self.tau_low < self.tau_high && self.tau_high <= 1.0) {
            return Err(Error::Config(format!(
                "tracker thresholds need 0 <= tau_low < tau_high <= 1, got {} and {}",
                self.tau_low, self.tau_high
            )));
        }
        if !(0.0..=1.0).contains(&self.match_iou_min) {
            return Err(Error::Config("tracker.match_iou_min must lie in [0, 1]".into()));
        }
        if self.tentative_min_hits < 1 || self.max_frames_lost < 1 {
            return Err(Error::Config("tracker.tentative_min_hits and max_frames_lost must be >= 1".into()));
        }
        if !self.exit_margin.is_finite() {
            return Err(Error::Config("tracker.exit_margin must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lifecycle {
    Tentative,
    Active,
    Lost,
    Finalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FinalizeReason {
    /// Tentative track missed before it was confirmed.
    Unconfirmed,
    /// Coasted past the frame edge along the belt.
    Exited,
    /// Lost for more than `max_frames_lost` moving frames.
    TimedOut,
    EndOfStream,
}

/// Scores observed for a track in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub frame: u64,
    /// The matched detection's box.
    pub bbox: BBox,
    pub confidence: f64,
    pub class_scores: Option<ClassScores>,
    pub stage_scores: Option<StageScores>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: u64,
    pub lifecycle: Lifecycle,
    pub kalman: KalmanState,
    pub first_frame: u64,
    pub last_frame: u64,
    pub hits: u32,
    pub frames_lost: u32,
    pub history: Vec<ScoreRecord>,
    pub last_box: BBox,
    pub finalize_reason: Option<FinalizeReason>,
}

impl Track {
    fn start(track_id: u64, det: &Detection, kf: &KalmanFilter, cfg: &TrackerConfig) -> Self {
        Track {
            track_id,
            lifecycle: if cfg.tentative_min_hits <= 1 { Lifecycle::Active } else { Lifecycle::Tentative },
            kalman: kf.initiate(&det.bbox),
            first_frame: det.frame,
            last_frame: det.frame,
            hits: 1,
            frames_lost: 0,
            history: vec![record(det)],
            last_box: det.bbox,
            finalize_reason: None,
        }
    }

    pub fn is_live(&self) -> bool {
        self.lifecycle != Lifecycle::Finalized
    }

    /// Whether this track represents one counted fish.
    pub fn is_counted(&self, cfg: &TrackerConfig) -> bool {
        self.hits >= cfg.tentative_min_hits
    }

    /// Advance the Kalman state one frame and return the predicted box.
    pub fn predict(&mut self, kf: &KalmanFilter) -> BBox {
        debug_assert!(self.is_live(), "finalized tracks are immutable");
        self.kalman = kf.predict(&self.kalman);
        self.kalman.bbox()
    }

    fn finalize(&mut self, reason: FinalizeReason) {
        self.lifecycle = Lifecycle::Finalized;
        self.finalize_reason = Some(reason);
    }

    fn absorb(&mut self, det: &Detection, kf: &KalmanFilter, cfg: &TrackerConfig) {
        self.kalman = kf.update(&self.kalman, &det.bbox);
        self.hits += 1;
        self.frames_lost = 0;
        self.last_frame = det.frame;
        self.last_box = det.bbox;
        self.history.push(record(det));
        self.lifecycle = match self.lifecycle {
            Lifecycle::Tentative if self.hits < cfg.tentative_min_hits => Lifecycle::Tentative,
            _ => Lifecycle::Active,
        };
    }
}

fn record(det: &Detection) -> ScoreRecord {
    ScoreRecord {
        frame: det.frame,
        bbox: det.bbox,
        confidence: det.confidence,
        class_scores: det.class_scores,
        stage_scores: det.stage_scores,
    }
}

/// Frame size and belt direction the tracker works in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGeometry {
    pub width: f64,
    pub height: f64,
    /// Unit vector of forward belt motion.
    pub axis: (f64, f64),
}

impl FrameGeometry {
    pub fn new(width: f64, height: f64, motion: &MotionConfig) -> Self {
        FrameGeometry { width, height, axis: motion.axis() }
    }

    /// Largest projection of the frame onto the belt axis.
    fn exit_edge(&self) -> f64 {
        [(0.0, 0.0), (self.width, 0.0), (0.0, self.height), (self.width, self.height)]
            .iter()
            .map(|&(x, y)| x * self.axis.0 + y * self.axis.1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn has_exited(&self, b: &BBox, margin: f64) -> bool {
        let (cx, cy) = b.center();
        cx * self.axis.0 + cy * self.axis.1 > self.exit_edge() + margin
    }
}

/// All tracks of one stream plus the id counter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackSet {
    pub tracks: Vec<Track>,
    pub next_id: u64,
}

impl TrackSet {
    pub fn new() -> Self {
        TrackSet { tracks: Vec::new(), next_id: 1 }
    }

    pub fn live(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(|t| t.is_live())
    }
}

/// The per-frame association step.
#[derive(Debug, Clone)]
pub struct ByteTracker {
    pub cfg: TrackerConfig,
    pub geometry: FrameGeometry,
    kf: KalmanFilter,
}

impl ByteTracker {
    pub fn new(cfg: TrackerConfig, geometry: FrameGeometry) -> Result<Self> {
        cfg.validate()?;
        Ok(ByteTracker { cfg, geometry, kf: KalmanFilter::new() })
    }

    pub fn kalman(&self) -> &KalmanFilter {
        &self.kf
    }

    /// Process one frame. With the belt not moving forward the track set is
    /// left untouched.
    pub fn step(&self, set: &mut TrackSet, frame: u64, detections: &[Detection], belt: BeltState) -> Result<()> {
        if let Some(d) = detections.iter().find(|d| d.frame != frame) {
            return Err(Error::FrameMismatch { expected: frame, found: d.frame });
        }
        if belt != BeltState::Forward {
            return Ok(());
        }
        let cfg = &self.cfg;

        let live: Vec<usize> = (0..set.tracks.len()).filter(|&i| set.tracks[i].is_live()).collect();
        let mut predicted: BTreeMap<usize, BBox> = BTreeMap::new();
        for &i in &live {
            predicted.insert(i, set.tracks[i].predict(&self.kf));
        }

        let high: Vec<usize> = (0..detections.len()).filter(|&d| detections[d].confidence >= cfg.tau_high).collect();
        let low: Vec<usize> = (0..detections.len())
            .filter(|&d| detections[d].confidence >= cfg.tau_low && detections[d].confidence < cfg.tau_high)
            .collect();

        // stage 1: every live track against confident detections
        let boxes = |idx: &[usize]| idx.iter().map(|&d| detections[d].bbox).collect::<Vec<_>>();
        let pool: Vec<BBox> = live.iter().map(|i| predicted[i]).collect();
        let first = assign(&pool, &boxes(&high), cfg.match_iou_min);
        let mut matched: Vec<(usize, usize)> = first.pairs.iter().map(|&(t, d)| (live[t], high[d])).collect();

        // stage 2: remaining confirmed tracks against weak detections
        let remaining: Vec<usize> = first
            .unmatched_tracks
            .iter()
            .map(|&t| live[t])
            .filter(|&i| set.tracks[i].lifecycle != Lifecycle::Tentative)
            .collect();
        let pool: Vec<BBox> = remaining.iter().map(|i| predicted[i]).collect();
        let second = assign(&pool, &boxes(&low), cfg.match_iou_min);
        matched.extend(second.pairs.iter().map(|&(t, d)| (remaining[t], low[d])));

        let mut was_matched = vec![false; set.tracks.len()];
        for &(i, d) in &matched {
            set.tracks[i].absorb(&detections[d], &self.kf, cfg);
            was_matched[i] = true;
        }

        for &i in &live {
            if was_matched[i] {
                continue;
            }
            let track = &mut set.tracks[i];
            match track.lifecycle {
                Lifecycle::Tentative => {
                    track.finalize(FinalizeReason::Unconfirmed);
                    continue;
                }
                Lifecycle::Active => {
                    track.lifecycle = Lifecycle::Lost;
                    track.frames_lost = 1;
                }
                Lifecycle::Lost => track.frames_lost += 1,
                Lifecycle::Finalized => unreachable!("live tracks only"),
            }
            if self.geometry.has_exited(&predicted[&i], cfg.exit_margin) {
                track.finalize(FinalizeReason::Exited);
            } else if track.frames_lost > cfg.max_frames_lost {
                track.finalize(FinalizeReason::TimedOut);
            }
        }

        for &d in first.unmatched_detections.iter().map(|d| &high[*d]) {
            let id = set.next_id;
            set.next_id += 1;
            set.tracks.push(Track::start(id, &detections[d], &self.kf, cfg));
        }
        Ok(())
    }
}

/// Stream-level driver: applies gating, keeps the tracker frozen while the
/// belt catches up after a reversal, and collects finished tracks.
#[derive(Debug, Clone)]
pub struct Tracker {
    engine: ByteTracker,
    set: TrackSet,
    finished: Vec<Track>,
    last_frame: Option<u64>,
    /// Distance (px along the belt) still to recover after a reversal.
    reverse_debt_px: f64,
    /// Same, in frames, for reversals observed without a flow estimate.
    reverse_debt_frames: u32,
    catch_up_frames: u32,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, geometry: FrameGeometry) -> Result<Self> {
        Ok(Tracker {
            engine: ByteTracker::new(cfg, geometry)?,
            set: TrackSet::new(),
            finished: Vec::new(),
            last_frame: None,
            reverse_debt_px: 0.0,
            reverse_debt_frames: 0,
            catch_up_frames: 0,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.engine.cfg
    }

    pub fn track_set(&self) -> &TrackSet {
        &self.set
    }

    /// Belt state the association step should see for this frame.
    fn effective_state(&mut self, motion: BeltMotion) -> BeltState {
        if !self.engine.cfg.gating {
            return BeltState::Forward;
        }
        let along = motion.flow.map(|f| f.along(self.engine.geometry.axis));
        match motion.state {
            BeltState::Stopped => BeltState::Stopped,
            BeltState::Reversed => {
                match along {
                    Some(a) => self.reverse_debt_px += a.abs(),
                    None => self.reverse_debt_frames += 1,
                }
                BeltState::Reversed
            }
            BeltState::Forward => {
                if self.reverse_debt_px <= 0.0 && self.reverse_debt_frames == 0 {
                    return BeltState::Forward;
                }
                match along {
                    Some(a) => self.reverse_debt_px -= a,
                    None if self.reverse_debt_frames > 0 => self.reverse_debt_frames -= 1,
                    None => self.reverse_debt_px = 0.0,
                }
                if self.reverse_debt_px <= 0.0 {
                    self.reverse_debt_px = 0.0;
                }
                self.catch_up_frames += 1;
                let caught_up = self.reverse_debt_px <= 0.0 && self.reverse_debt_frames == 0;
                if caught_up || self.catch_up_frames > self.engine.cfg.max_frames_lost {
                    self.reverse_debt_px = 0.0;
                    self.reverse_debt_frames = 0;
                    self.catch_up_frames = 0;
                    return BeltState::Forward;
                }
                BeltState::Stopped
            }
        }
    }

    /// Feed one frame. Frames must be strictly increasing; frames with no
    /// detections still need to be fed so tracks age correctly.
    pub fn observe(&mut self, frame: u64, detections: &[Detection], motion: BeltMotion) -> Result<()> {
        if let Some(prev) = self.last_frame {
            if frame <= prev {
                return Err(Error::UnsortedFrames { previous: prev, next: frame });
            }
        }
        if let Some(d) = detections.iter().find(|d| d.frame != frame) {
            return Err(Error::FrameMismatch { expected: frame, found: d.frame });
        }
        self.last_frame = Some(frame);
        let state = self.effective_state(motion);
        self.engine.step(&mut self.set, frame, detections, state)?;
        let (done, live): (Vec<Track>, Vec<Track>) =
            std::mem::take(&mut self.set.tracks).into_iter().partition(|t| !t.is_live());
        self.set.tracks = live;
        self.finished.extend(done);
        Ok(())
    }

    /// End the stream: every remaining track is finalised. Tracks are
    /// returned in id order.
    pub fn finish(mut self) -> Vec<Track> {
        for mut t in self.set.tracks.drain(..) {
            t.finalize(FinalizeReason::EndOfStream);
            self.finished.push(t);
        }
        self.finished.sort_by_key(|t| t.track_id);
        self.finished
    }
}

/// Belt motion per frame from the flow stored in the stream. Frames without
/// a flow value repeat the previous frame's state; a stream without any
/// flow is treated as always moving forward.
pub fn motions_from_stream(stream: &[FrameDetections], motion: &MotionConfig) -> BTreeMap<u64, BeltMotion> {
    let flows: Vec<(u64, crate::motion::FlowVector)> =
        stream.iter().filter_map(|f| f.flow.map(|v| (f.frame, v))).collect();
    let states: Vec<BeltState> = flows.iter().map(|&(_, v)| crate::motion::classify_belt_state(v, motion)).collect();
    let states = if motion.smoothing_window > 1 {
        crate::motion::smooth_states(&states, motion.smoothing_window)
    } else {
        states
    };
    flows.iter().zip(states).map(|(&(frame, flow), state)| (frame, BeltMotion { state, flow: Some(flow) })).collect()
}

/// Track a whole stream. Every frame between the first and last record is
/// processed; all tracks come back finalised, in id order, including
/// unconfirmed ones (filter with [`Track::is_counted`]).
pub fn run_tracker(
    stream: &[FrameDetections],
    motions: &BTreeMap<u64, BeltMotion>,
    cfg: &TrackerConfig,
    geometry: FrameGeometry,
) -> Result<Vec<Track>> {
    for w in stream.windows(2) {
        if w[1].frame <= w[0].frame {
            return Err(Error::UnsortedFrames { previous: w[0].frame, next: w[1].frame });
        }
    }
    let mut tracker = Tracker::new(cfg.clone(), geometry)?;
    let (Some(first), Some(last)) = (stream.first(), stream.last()) else {
        return Ok(Vec::new());
    };
    let start = first.frame.min(motions.keys().next().copied().unwrap_or(first.frame));
    let end = last.frame.max(motions.keys().next_back().copied().unwrap_or(last.frame));
    let mut records = stream.iter().peekable();
    let mut motion = BeltMotion::forward();
    for frame in start..=end {
        if let Some(m) = motions.get(&frame) {
            motion = *m;
        }
        let dets: &[Detection] = match records.peek() {
            Some(r) if r.frame == frame => &records.next().expect("peeked").detections,
            _ => &[],
        };
        tracker.observe(frame, dets, motion)?;
    }
    Ok(tracker.finish())
}

//! Seeded conveyor-belt simulator.
//!
//! Fish ride the belt left to right along +x, spaced evenly in belt
//! coordinates, so stops and reversals move every fish together. The
//! detector sees each fish in every frame where enough of it is inside the
//! image, subject to misses and box jitter; spurious low-confidence boxes
//! are added on top. Each fish is "perceived" as one species drawn from the
//! classifier confusion row of its true species, and its class scores peak
//! on that species in every frame.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::aggregate::{label_all, AggregationConfig};
use crate::compose::{estimate_composition, CompositionEstimate};
use crate::detection::{ClassScores, Detection, FrameDetections, GroundTruthOperation};
use crate::error::{Error, Result};
use crate::geometry::{BBox, BitMask};
use crate::motion::{BeltMotion, BeltState, FlowVector, GrayFrame, MotionConfig};
use crate::rng::SimRng;
use crate::taxonomy::{PerSpecies, Species};
use crate::tracker::{motions_from_stream, run_tracker, FrameGeometry, Track, TrackerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopEvent {
    pub start: u64,
    pub duration: u64,
    /// Run the belt backwards instead of halting it.
    #[serde(default)]
    pub reverse: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfidenceModel {
    pub fish_mean: f64,
    pub fish_sd: f64,
    pub false_positive_mean: f64,
    pub false_positive_sd: f64,
}

impl Default for ConfidenceModel {
    fn default() -> Self {
        ConfidenceModel { fish_mean: 0.85, fish_sd: 0.05, false_positive_mean: 0.3, false_positive_sd: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub seed: u64,
    pub afo_id: String,
    pub fps: f64,
    /// Pixels per frame while the belt runs.
    pub belt_speed: f64,
    pub frame_width: usize,
    pub frame_height: usize,
    pub fish_count: BTreeMap<Species, u32>,
    pub fish_length: f64,
    pub fish_height: f64,
    /// Frames of belt travel between consecutive fish.
    pub spawn_spacing: f64,
    pub stop_events: Vec<StopEvent>,
    /// Share of a fish that must be inside the frame for it to be detected.
    pub min_visible_fraction: f64,
    pub miss_prob: f64,
    /// Expected spurious detections per frame.
    pub false_positive_rate: f64,
    pub confidence: ConfidenceModel,
    /// Row `i`: probability that a fish of species `i` is perceived as each
    /// species, in BET, SKJ, YFT, NO_TARGET order.
    pub classifier_confusion: [[f64; 4]; 4],
    /// Score given to the perceived species; the rest is split evenly.
    pub score_peak: f64,
    /// Standard deviation of per-frame noise added to every class score.
    pub score_noise: f64,
    /// Standard deviation of detection box position noise, in pixels.
    pub jitter_sd: f64,
    pub emit_masks: bool,
    /// Belt frames to keep simulating after the last fish has left.
    pub tail_frames: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            afo_id: "sim".into(),
            fps: 30.0,
            belt_speed: 8.0,
            frame_width: 640,
            frame_height: 360,
            fish_count: Species::ALL.iter().map(|&s| (s, 3)).collect(),
            fish_length: 120.0,
            fish_height: 48.0,
            spawn_spacing: 20.0,
            stop_events: Vec::new(),
            min_visible_fraction: 0.5,
            miss_prob: 0.0,
            false_positive_rate: 0.0,
            confidence: ConfidenceModel::default(),
            classifier_confusion: IDENTITY,
            score_peak: 0.7,
            score_noise: 0.0,
            jitter_sd: 0.0,
            emit_masks: false,
            tail_frames: 5,
        }
    }
}

const IDENTITY: [[f64; 4]; 4] =
    [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
const MAX_FRAMES: u64 = 1_000_000;

impl SimConfig {
    /// Defaults with every noise source off: no misses, no spurious
    /// detections, fixed confidence, no jitter, no score noise.
    pub fn noiseless(seed: u64) -> Self {
        SimConfig {
            seed,
            confidence: ConfidenceModel { fish_sd: 0.0, ..ConfidenceModel::default() },
            miss_prob: 0.0,
            false_positive_rate: 0.0,
            score_noise: 0.0,
            jitter_sd: 0.0,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("simulator.{name} must lie in [0, 1], got {v}")))
            }
        };
        prob("miss_prob", self.miss_prob)?;
        prob("min_visible_fraction", self.min_visible_fraction)?;
        prob("score_peak", self.score_peak)?;
        if !(self.belt_speed > 0.0 && self.belt_speed.is_finite()) {
            return Err(Error::Config("simulator.belt_speed must be positive".into()));
        }
        if !(self.false_positive_rate >= 0.0 && self.false_positive_rate.is_finite()) {
            return Err(Error::Config("simulator.false_positive_rate must be nonnegative".into()));
        }
        if !(self.jitter_sd >= 0.0 && self.score_noise >= 0.0) {
            return Err(Error::Config("simulator noise levels must be nonnegative".into()));
        }
        if !(self.fish_length > 0.0 && self.fish_height > 0.0 && self.spawn_spacing > 0.0) {
            return Err(Error::Config("simulator fish size and spacing must be positive".into()));
        }
        if self.fps <= 0.0 || self.frame_width == 0 || self.frame_height == 0 {
            return Err(Error::Config("simulator frame size and fps must be positive".into()));
        }
        for (i, row) in self.classifier_confusion.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "simulator.classifier_confusion row {i} is not a probability vector"
                )));
            }
        }
        if self.stop_events.iter().any(|e| e.duration == 0) {
            return Err(Error::Config("stop events need a positive duration".into()));
        }
        if self.fish_length >= self.frame_width as f64 || self.fish_height >= self.frame_height as f64 {
            return Err(Error::Infeasible(format!(
                "{}x{} fish do not fit a {}x{} frame",
                self.fish_length, self.fish_height, self.frame_width, self.frame_height
            )));
        }
        Ok(())
    }

    pub fn total_fish(&self) -> u32 {
        self.fish_count.values().sum()
    }

    /// Belt velocity along +x for the transition into `frame`.
    pub fn belt_velocity(&self, frame: u64) -> f64 {
        match self.stop_events.iter().find(|e| frame >= e.start && frame < e.start + e.duration) {
            Some(e) if e.reverse => -self.belt_speed,
            Some(_) => 0.0,
            None => self.belt_speed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimFish {
    pub fish_id: u64,
    pub species: Species,
    /// Species the simulated classifier favours for this fish.
    pub perceived: Species,
    /// Left edge at belt offset 0.
    pub x0: f64,
    pub y: f64,
    /// Frames in which the fish was visible enough to be detected.
    pub visible_frames: Vec<u64>,
}

impl SimFish {
    pub fn entry_frame(&self) -> Option<u64> {
        self.visible_frames.first().copied()
    }

    pub fn exit_frame(&self) -> Option<u64> {
        self.visible_frames.last().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTruth {
    pub fish: Vec<SimFish>,
    pub ground_truth: GroundTruthOperation,
    /// Cumulative belt displacement per frame.
    pub belt_offset: Vec<f64>,
    pub belt_states: Vec<BeltState>,
}

impl SimTruth {
    /// True box of a fish in a frame, unclipped.
    pub fn fish_box(&self, fish: &SimFish, frame: u64, cfg: &SimConfig) -> BBox {
        BBox::new(fish.x0 + self.belt_offset[frame as usize], fish.y, cfg.fish_length, cfg.fish_height)
            .expect("fish sizes are validated")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: SimConfig,
    pub stream: Vec<FrameDetections>,
    pub truth: SimTruth,
    /// Fish behind each emitted detection, aligned with `stream`; `None`
    /// for spurious detections.
    pub owners: Vec<Vec<Option<u64>>>,
}

impl Scenario {
    pub fn frame_count(&self) -> u64 {
        self.stream.len() as u64
    }

    pub fn detection_count(&self) -> usize {
        self.stream.iter().map(|f| f.detections.len()).sum()
    }

    pub fn geometry(&self, motion: &MotionConfig) -> FrameGeometry {
        FrameGeometry::new(self.config.frame_width as f64, self.config.frame_height as f64, motion)
    }

    /// Belt motion per frame from the emitted flow.
    pub fn motions(&self, motion: &MotionConfig) -> BTreeMap<u64, BeltMotion> {
        motions_from_stream(&self.stream, motion)
    }
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Generate a scenario. The same configuration always produces the same
/// scenario.
pub fn generate_scenario(cfg: &SimConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = SimRng::new(cfg.seed);

    let mut species: Vec<Species> =
        cfg.fish_count.iter().flat_map(|(&s, &n)| std::iter::repeat_n(s, n as usize)).collect();
    rng.shuffle(&mut species);
    let gap = cfg.spawn_spacing * cfg.belt_speed;
    let y_room = cfg.frame_height as f64 - cfg.fish_height;
    let mut fish: Vec<SimFish> = species
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let y = rng.uniform() * y_room;
            let perceived = Species::from_index(rng.categorical(&cfg.classifier_confusion[s.index()]))
                .expect("four confusion columns");
            SimFish {
                fish_id: i as u64 + 1,
                species: s,
                perceived,
                x0: -cfg.fish_length - i as f64 * gap,
                y,
                visible_frames: Vec::new(),
            }
        })
        .collect();

    // belt timeline: run until the last fish is out and every event is over
    let width = cfg.frame_width as f64;
    let needed = width + cfg.fish_length + fish.len() as f64 * gap;
    let events_end = cfg.stop_events.iter().map(|e| e.start + e.duration).max().unwrap_or(0);
    let mut offsets = vec![0.0];
    let mut states = vec![state_of(cfg.belt_velocity(0))];
    let mut f = 1u64;
    let mut tail = 0u64;
    loop {
        let done = *offsets.last().expect("nonempty") >= needed && f > events_end;
        if done {
            tail += 1;
            if tail > cfg.tail_frames {
                break;
            }
        }
        if f >= MAX_FRAMES {
            return Err(Error::Infeasible("belt never carries every fish out of view".into()));
        }
        let v = cfg.belt_velocity(f);
        offsets.push(offsets.last().expect("nonempty") + v);
        states.push(state_of(v));
        f += 1;
    }

    let mut counts = PerSpecies([0u64; 4]);
    for s in &species {
        counts[*s] += 1;
    }
    let ground_truth = GroundTruthOperation::new(cfg.afo_id.clone(), counts)?;
    let mut truth = SimTruth { fish: Vec::new(), ground_truth, belt_offset: offsets, belt_states: states };

    let mut stream = Vec::with_capacity(truth.belt_offset.len());
    let mut owners = Vec::with_capacity(truth.belt_offset.len());
    let full_area = cfg.fish_length * cfg.fish_height;
    for frame in 0..truth.belt_offset.len() as u64 {
        let mut dets = Vec::new();
        let mut who = Vec::new();
        for fsh in fish.iter_mut() {
            let b = truth.fish_box(fsh, frame, cfg);
            let Some(visible) = b.clip(width, cfg.frame_height as f64) else { continue };
            if visible.area() < cfg.min_visible_fraction * full_area {
                continue;
            }
            fsh.visible_frames.push(frame);
            if cfg.miss_prob > 0.0 && rng.bernoulli(cfg.miss_prob) {
                continue;
            }
            let observed = if cfg.jitter_sd > 0.0 {
                let (dx, dy) = (rng.normal() * cfg.jitter_sd, rng.normal() * cfg.jitter_sd);
                visible.translate(dx, dy)
            } else {
                visible
            };
            let conf = clamp01(cfg.confidence.fish_mean + cfg.confidence.fish_sd * rng.normal());
            let scores = fish_scores(fsh.perceived, cfg, &mut rng)?;
            dets.push(make_detection(frame, observed, conf, scores, cfg)?);
            who.push(Some(fsh.fish_id));
        }
        let n_fp =
            cfg.false_positive_rate.floor() as usize + usize::from(rng.bernoulli(cfg.false_positive_rate.fract()));
        for _ in 0..n_fp {
            let w = cfg.fish_length * (0.3 + 0.3 * rng.uniform());
            let h = cfg.fish_height * (0.3 + 0.3 * rng.uniform());
            let x = rng.uniform() * (width - w);
            let y = rng.uniform() * (cfg.frame_height as f64 - h);
            let b = BBox::new(x, y, w, h)?;
            let conf = clamp01(cfg.confidence.false_positive_mean + cfg.confidence.false_positive_sd * rng.normal());
            let raw = [0; 4].map(|_| 0.05 + rng.uniform());
            dets.push(make_detection(frame, b, conf, ClassScores::new(raw.map(|v| v / 1.05))?, cfg)?);
            who.push(None);
        }
        let dx = if frame == 0 {
            cfg.belt_velocity(0)
        } else {
            truth.belt_offset[frame as usize] - truth.belt_offset[frame as usize - 1]
        };
        stream.push(FrameDetections { frame, flow: Some(FlowVector::new(dx, 0.0)), detections: dets });
        owners.push(who);
    }
    truth.fish = fish;
    Ok(Scenario { config: cfg.clone(), stream, truth, owners })
}

fn state_of(v: f64) -> BeltState {
    if v > 0.0 {
        BeltState::Forward
    } else if v < 0.0 {
        BeltState::Reversed
    } else {
        BeltState::Stopped
    }
}

fn fish_scores(perceived: Species, cfg: &SimConfig, rng: &mut SimRng) -> Result<ClassScores> {
    let rest = (1.0 - cfg.score_peak) / 3.0;
    let mut raw = [rest; 4];
    raw[perceived.index()] = cfg.score_peak;
    if cfg.score_noise > 0.0 {
        for v in raw.iter_mut() {
            *v = (*v + cfg.score_noise * rng.normal()).clamp(1e-3, 1.0);
        }
    }
    ClassScores::new(raw)
}

fn make_detection(frame: u64, b: BBox, conf: f64, scores: ClassScores, cfg: &SimConfig) -> Result<Detection> {
    let mut d = Detection::new(frame, b, conf)?.with_class_scores(scores).with_stage_scores(scores.induced_stages());
    if cfg.emit_masks {
        let mask = BitMask::ellipse(cfg.frame_width, cfg.frame_height, &b);
        if mask.count() > 0 {
            d = d.with_mask(mask)?;
        }
    }
    Ok(d)
}

/// Grayscale frames of the belt: a fixed random texture that moves with
/// the belt, with fish drawn as bright ellipses. Useful for exercising flow
/// estimation on the simulated motion.
pub fn render_belt_frames(scenario: &Scenario, frames: std::ops::Range<u64>) -> Result<Vec<GrayFrame>> {
    let cfg = &scenario.config;
    let (w, h) = (cfg.frame_width, cfg.frame_height);
    frames
        .map(|frame| {
            let offset = scenario.truth.belt_offset[frame as usize].round() as i64;
            let mut px: Vec<u8> =
                (0..h).flat_map(|row| (0..w).map(move |col| texture(col as i64 - offset, row as i64))).collect();
            for fish in &scenario.truth.fish {
                let b = scenario.truth.fish_box(fish, frame, cfg);
                if b.clip(w as f64, h as f64).is_some() {
                    let mask = BitMask::ellipse(w, h, &b);
                    for (p, on) in px.iter_mut().zip(mask.bits()) {
                        if *on {
                            *p = 230;
                        }
                    }
                }
            }
            GrayFrame::new(w, h, px)
        })
        .collect()
}

/// Deterministic belt texture value at belt coordinates.
fn texture(x: i64, y: i64) -> u8 {
    let mut z = (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z ^= z >> 31;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 29;
    (40 + (z % 120)) as u8
}

/// How tracks relate to the simulated fish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IdentityReport {
    pub fish: usize,
    pub counted_tracks: usize,
    /// Counted tracks whose fish already had an earlier track.
    pub duplicates: usize,
    /// Fish without any counted track.
    pub missed: usize,
    /// Counted tracks made mostly of spurious detections.
    pub spurious: usize,
}

/// One 50-frame stop and one later reversal of 5 to 20 frames, placed at
/// seed-dependent times while fish are on the belt.
pub fn stop_and_reverse_events(seed: u64) -> Vec<StopEvent> {
    let mut r = SimRng::new(seed ^ 0xA5A5);
    let stop = 40 + r.below(120) as u64;
    let reverse = stop + 60 + r.below(100) as u64;
    let duration = 5 + r.below(16) as u64;
    vec![StopEvent { start: stop, duration: 50, reverse: false }, StopEvent { start: reverse, duration, reverse: true }]
}

/// Attribute each counted track to the fish behind most of its detections.
pub fn identity_report(scenario: &Scenario, tracks: &[Track], min_hits: u32) -> IdentityReport {
    let mut owner_of: HashMap<(u64, [u64; 4]), Option<u64>> = HashMap::new();
    for (frame, who) in scenario.stream.iter().zip(&scenario.owners) {
        for (d, o) in frame.detections.iter().zip(who) {
            owner_of.insert((frame.frame, <[f64; 4]>::from(d.bbox).map(f64::to_bits)), *o);
        }
    }
    let mut per_fish: HashMap<u64, usize> = HashMap::new();
    let mut spurious = 0;
    let mut counted = 0;
    for t in tracks.iter().filter(|t| t.hits >= min_hits) {
        counted += 1;
        let mut votes: BTreeMap<Option<u64>, usize> = BTreeMap::new();
        for r in &t.history {
            let key = (r.frame, <[f64; 4]>::from(r.bbox).map(f64::to_bits));
            *votes.entry(owner_of.get(&key).copied().flatten()).or_default() += 1;
        }
        let best = votes.iter().max_by_key(|(o, n)| (**n, std::cmp::Reverse(**o))).and_then(|(o, _)| *o);
        match best {
            Some(id) => *per_fish.entry(id).or_default() += 1,
            None => spurious += 1,
        }
    }
    let fish = scenario.truth.fish.len();
    IdentityReport {
        fish,
        counted_tracks: counted,
        duplicates: per_fish.values().map(|n| n - 1).sum(),
        missed: fish - per_fish.len(),
        spurious,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndToEnd {
    pub estimate: CompositionEstimate,
    /// `|predicted% - true%|` per species.
    pub abs_error: PerSpecies<f64>,
    pub identity: IdentityReport,
}

/// Simulate, track, label and compose one scenario and compare the
/// composition with the simulated truth.
pub fn end_to_end_error(
    sim: &SimConfig,
    tracker: &TrackerConfig,
    aggregation: &AggregationConfig,
    motion: &MotionConfig,
) -> Result<EndToEnd> {
    let scenario = generate_scenario(sim)?;
    let tracks = run_tracker(&scenario.stream, &scenario.motions(motion), tracker, scenario.geometry(motion))?;
    let labels = label_all(&tracks, aggregation, tracker.tentative_min_hits)?;
    let estimate = estimate_composition(&labels, &sim.afo_id)?.with_ground_truth(&scenario.truth.ground_truth)?;
    let truth = scenario.truth.ground_truth.percentages();
    let abs_error = PerSpecies::from_fn(|s| (estimate.percentages[s] - truth[s]).abs());
    let identity = identity_report(&scenario, &tracks, tracker.tentative_min_hits);
    Ok(EndToEnd { estimate, abs_error, identity })
}

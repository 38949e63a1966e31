//! Dominant belt motion between consecutive frames.
//!
//! The belt moves rigidly, so a robust statistic over many small block
//! displacements recovers its motion even when individual fish slide
//! relative to it. Displacements come from exhaustive block matching with
//! the sum of absolute differences; the frame flow is the component-wise
//! median over all textured blocks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 8-bit grayscale frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Config(format!("frame has {} pixels, expected {}x{}", pixels.len(), width, height)));
        }
        Ok(GrayFrame { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn at(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

/// Displacement in pixels per frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlowVector {
    pub dx: f64,
    pub dy: f64,
}

impl FlowVector {
    pub fn new(dx: f64, dy: f64) -> Self {
        FlowVector { dx, dy }
    }

    /// Signed length along `axis` (assumed unit).
    pub fn along(&self, axis: (f64, f64)) -> f64 {
        self.dx * axis.0 + self.dy * axis.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BeltState {
    Forward,
    Stopped,
    Reversed,
}

/// Belt state for one frame transition, with the flow it came from when known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeltMotion {
    pub state: BeltState,
    pub flow: Option<FlowVector>,
}

impl BeltMotion {
    pub fn forward() -> Self {
        BeltMotion { state: BeltState::Forward, flow: None }
    }

    pub fn from_flow(flow: FlowVector, cfg: &MotionConfig) -> Self {
        BeltMotion { state: classify_belt_state(flow, cfg), flow: Some(flow) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionConfig {
    /// Direction the belt carries fish; normalised on validation.
    pub forward_axis: [f64; 2],
    /// Minimum speed along the axis, px/frame, to count as moving.
    pub stop_threshold: f64,
    pub grid_step: usize,
    pub block_size: usize,
    pub search_radius: usize,
    /// Odd majority-filter window for state sequences; 1 disables smoothing.
    pub smoothing_window: usize,
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig {
            forward_axis: [1.0, 0.0],
            stop_threshold: 1.0,
            grid_step: 32,
            block_size: 16,
            search_radius: 24,
            smoothing_window: 1,
        }
    }
}

impl MotionConfig {
    pub fn validate(&self) -> Result<()> {
        let [ax, ay] = self.forward_axis;
        let norm = (ax * ax + ay * ay).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Config("motion.forward_axis must be a nonzero finite vector".into()));
        }
        if self.stop_threshold <= 0.0 || !self.stop_threshold.is_finite() {
            return Err(Error::Config("motion.stop_threshold must be positive".into()));
        }
        if self.block_size == 0 || self.grid_step == 0 {
            return Err(Error::Config("motion.block_size and motion.grid_step must be positive".into()));
        }
        if self.smoothing_window.is_multiple_of(2) {
            return Err(Error::Config("motion.smoothing_window must be odd".into()));
        }
        Ok(())
    }

    pub fn axis(&self) -> (f64, f64) {
        let [ax, ay] = self.forward_axis;
        let norm = (ax * ax + ay * ay).sqrt();
        (ax / norm, ay / norm)
    }
}

fn sad(prev: &GrayFrame, curr: &GrayFrame, bx: usize, by: usize, cx: usize, cy: usize, size: usize) -> u32 {
    let mut total = 0u32;
    for r in 0..size {
        let a = &prev.pixels[(by + r) * prev.width + bx..][..size];
        let b = &curr.pixels[(cy + r) * curr.width + cx..][..size];
        total += a.iter().zip(b).map(|(&p, &q)| u32::from(p.abs_diff(q))).sum::<u32>();
    }
    total
}

fn is_textured(frame: &GrayFrame, bx: usize, by: usize, size: usize) -> bool {
    let first = frame.at(bx, by);
    (0..size).any(|r| frame.pixels[(by + r) * frame.width + bx..][..size].iter().any(|&p| p != first))
}

/// Best displacement of the block at `(bx, by)` in `prev`, searched in `curr`.
/// Among equal costs the shortest displacement wins, then the first in
/// row-major search order.
fn match_block(prev: &GrayFrame, curr: &GrayFrame, bx: usize, by: usize, cfg: &MotionConfig) -> (i64, i64) {
    let size = cfg.block_size;
    let r = cfg.search_radius as i64;
    let mut best = (u32::MAX, i64::MAX, 0i64, 0i64);
    for dy in -r..=r {
        let cy = by as i64 + dy;
        if cy < 0 || cy as usize + size > curr.height {
            continue;
        }
        for dx in -r..=r {
            let cx = bx as i64 + dx;
            if cx < 0 || cx as usize + size > curr.width {
                continue;
            }
            let cost = sad(prev, curr, bx, by, cx as usize, cy as usize, size);
            let dist = dx * dx + dy * dy;
            if (cost, dist) < (best.0, best.1) {
                best = (cost, dist, dx, dy);
            }
        }
    }
    (best.2, best.3)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Dominant displacement from `prev` to `curr`.
pub fn estimate_flow(prev: &GrayFrame, curr: &GrayFrame, cfg: &MotionConfig) -> Result<FlowVector> {
    if prev.width != curr.width || prev.height != curr.height {
        return Err(Error::FrameDimensions(prev.width, prev.height, curr.width, curr.height));
    }
    let size = cfg.block_size;
    if size == 0 || prev.width < size || prev.height < size {
        return Err(Error::FrameTooSmall { width: prev.width, height: prev.height, block: size });
    }
    let step = cfg.grid_step.max(1);
    let (mut dxs, mut dys) = (Vec::new(), Vec::new());
    for by in (0..=prev.height - size).step_by(step) {
        for bx in (0..=prev.width - size).step_by(step) {
            if !is_textured(prev, bx, by, size) {
                continue;
            }
            let (dx, dy) = match_block(prev, curr, bx, by, cfg);
            dxs.push(dx as f64);
            dys.push(dy as f64);
        }
    }
    if dxs.is_empty() {
        return Ok(FlowVector::default());
    }
    Ok(FlowVector { dx: median(&mut dxs), dy: median(&mut dys) })
}

/// Belt state from the flow component along the forward axis.
pub fn classify_belt_state(flow: FlowVector, cfg: &MotionConfig) -> BeltState {
    let along = flow.along(cfg.axis());
    if along > cfg.stop_threshold {
        BeltState::Forward
    } else if along < -cfg.stop_threshold {
        BeltState::Reversed
    } else {
        BeltState::Stopped
    }
}

/// Centred majority filter. The window shrinks symmetrically at the ends;
/// a position keeps its own state unless another state holds a strict
/// majority of its window.
pub fn smooth_states(states: &[BeltState], window: usize) -> Vec<BeltState> {
    let half = window / 2;
    let n = states.len();
    (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let win = &states[i - h..=i + h];
            let count = |s: BeltState| win.iter().filter(|&&x| x == s).count();
            [BeltState::Forward, BeltState::Stopped, BeltState::Reversed]
                .into_iter()
                .find(|&s| 2 * count(s) > win.len())
                .unwrap_or(states[i])
        })
        .collect()
}

/// One belt state per consecutive frame pair.
pub fn belt_state_sequence(frames: &[GrayFrame], cfg: &MotionConfig) -> Result<Vec<BeltState>> {
    if frames.len() < 2 {
        return Err(Error::TooFew { needed: 2, got: frames.len() });
    }
    let flows = frame_flows(frames, cfg)?;
    let states: Vec<BeltState> = flows.iter().map(|&f| classify_belt_state(f, cfg)).collect();
    Ok(if cfg.smoothing_window > 1 { smooth_states(&states, cfg.smoothing_window) } else { states })
}

/// Flow for every consecutive pair, estimated in parallel.
pub fn frame_flows(frames: &[GrayFrame], cfg: &MotionConfig) -> Result<Vec<FlowVector>> {
    frames.par_windows(2).map(|w| estimate_flow(&w[0], &w[1], cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Deterministic texture; integer hash so every pixel differs from its
    /// neighbours and block matches are unambiguous.
    fn texture(width: usize, height: usize, seed: u64) -> Vec<u8> {
        (0..width * height)
            .map(|i| {
                let mut z = (i as u64).wrapping_add(seed).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                z ^= z >> 29;
                z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
                (z >> 56) as u8
            })
            .collect()
    }

    /// `curr(x, y) = prev(x - dx, y - dy)`, zero where that falls outside.
    fn shifted(prev: &GrayFrame, dx: i64, dy: i64) -> GrayFrame {
        let (w, h) = (prev.width as i64, prev.height as i64);
        let mut px = vec![0u8; prev.pixels.len()];
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = (x - dx, y - dy);
                if (0..w).contains(&sx) && (0..h).contains(&sy) {
                    px[(y * w + x) as usize] = prev.at(sx as usize, sy as usize);
                }
            }
        }
        GrayFrame::new(prev.width, prev.height, px).unwrap()
    }

    fn base() -> GrayFrame {
        GrayFrame::new(160, 96, texture(160, 96, 11)).unwrap()
    }

    #[test]
    fn recovers_synthetic_shifts() {
        let cfg = MotionConfig::default();
        let prev = base();
        for (dx, dy) in [(6, 0), (-4, 0), (3, -2)] {
            let f = estimate_flow(&prev, &shifted(&prev, dx, dy), &cfg).unwrap();
            assert!((f.dx - dx as f64).abs() <= 0.5, "dx {} vs {}", f.dx, dx);
            assert!((f.dy - dy as f64).abs() <= 0.5, "dy {} vs {}", f.dy, dy);
        }
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let prev = base();
        let f = estimate_flow(&prev, &prev, &MotionConfig::default()).unwrap();
        assert_eq!(f, FlowVector::new(0.0, 0.0));
        let flat = GrayFrame::new(64, 64, vec![7; 64 * 64]).unwrap();
        assert_eq!(estimate_flow(&flat, &flat, &MotionConfig::default()).unwrap(), FlowVector::default());
    }

    #[test]
    fn frame_errors() {
        let cfg = MotionConfig::default();
        let tiny = GrayFrame::new(8, 8, vec![0; 64]).unwrap();
        assert!(matches!(estimate_flow(&tiny, &tiny, &cfg), Err(Error::FrameTooSmall { .. })));
        let other = GrayFrame::new(160, 80, vec![0; 160 * 80]).unwrap();
        assert!(matches!(estimate_flow(&base(), &other, &cfg), Err(Error::FrameDimensions(..))));
        assert!(matches!(belt_state_sequence(&[base()], &cfg), Err(Error::TooFew { .. })));
    }

    #[test]
    fn classification_thresholds() {
        let cfg = MotionConfig::default();
        assert_eq!(classify_belt_state(FlowVector::new(5.0, 0.0), &cfg), BeltState::Forward);
        assert_eq!(classify_belt_state(FlowVector::new(0.2, 0.4), &cfg), BeltState::Stopped);
        assert_eq!(classify_belt_state(FlowVector::new(-4.0, 0.0), &cfg), BeltState::Reversed);
        assert_eq!(classify_belt_state(FlowVector::new(1.0, 0.0), &cfg), BeltState::Stopped);
    }

    #[test]
    fn negated_axis_swaps_forward_and_reversed() {
        let cfg = MotionConfig::default();
        let neg = MotionConfig { forward_axis: [-1.0, 0.0], ..cfg.clone() };
        for dx in [-7.0, -1.5, -0.3, 0.0, 0.8, 2.0, 9.0] {
            for dy in [-3.0, 0.0, 2.5] {
                let f = FlowVector::new(dx, dy);
                let expected = match classify_belt_state(f, &cfg) {
                    BeltState::Forward => BeltState::Reversed,
                    BeltState::Reversed => BeltState::Forward,
                    BeltState::Stopped => BeltState::Stopped,
                };
                assert_eq!(classify_belt_state(f, &neg), expected);
            }
        }
    }

    #[test]
    fn identical_frames_are_all_stopped() {
        let frames = vec![base(); 5];
        let states = belt_state_sequence(&frames, &MotionConfig::default()).unwrap();
        assert_eq!(states, vec![BeltState::Stopped; 4]);
    }

    #[test]
    fn forward_run_then_static_tail() {
        let mut frames = vec![base()];
        for _ in 0..3 {
            let next = shifted(frames.last().unwrap(), 5, 0);
            frames.push(next);
        }
        let last = frames.last().unwrap().clone();
        frames.push(last.clone());
        frames.push(last);
        let states = belt_state_sequence(&frames, &MotionConfig::default()).unwrap();
        use BeltState::*;
        assert_eq!(states, vec![Forward, Forward, Forward, Stopped, Stopped]);
    }

    #[test]
    fn majority_filter_removes_single_frame_jitter() {
        use BeltState::*;
        // index 2 and 5 are single-frame dips: windows (F,S,F) vote F
        let raw = [Forward, Forward, Stopped, Forward, Forward, Stopped, Forward, Forward];
        assert_eq!(smooth_states(&raw, 3), vec![Forward; 8]);
        // a three-way tie keeps the centre state
        assert_eq!(smooth_states(&[Forward, Stopped, Reversed], 3), vec![Forward, Stopped, Reversed]);
        // window 1 is the identity
        assert_eq!(smooth_states(&raw, 1), raw.to_vec());
    }

    #[test]
    fn smoothing_window_applies_to_sequences() {
        let mut frames = vec![base()];
        // F F S F F: a one-transition pause inside forward motion
        for step in [5, 5, 0, 5, 5] {
            let next = shifted(frames.last().unwrap(), step, 0);
            frames.push(next);
        }
        let cfg = MotionConfig { smoothing_window: 3, ..MotionConfig::default() };
        assert_eq!(belt_state_sequence(&frames, &cfg).unwrap(), vec![BeltState::Forward; 5]);
    }
}

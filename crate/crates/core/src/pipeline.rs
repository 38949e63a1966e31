//! Whole-file runs shared by the command-line tool and the tests.

use std::collections::BTreeMap;

use crate::aggregate::{label_all, label_history, AggregationConfig, TrackLabel};
use crate::compose::{estimate_composition, CompositionEstimate};
use crate::error::Result;
use crate::io::tables::TrackHistory;
use crate::io::{DetectionFile, Header, RunConfig};
use crate::motion::{classify_belt_state, smooth_states, BeltMotion, FlowVector, MotionConfig};
use crate::sim::Scenario;
use crate::tracker::{motions_from_stream, run_tracker, FrameGeometry, Track};

/// Detection file holding a simulated stream.
pub fn scenario_file(s: &Scenario) -> DetectionFile {
    DetectionFile {
        header: Header::detections(s.config.frame_width, s.config.frame_height, s.config.fps, &s.config.afo_id),
        stream: s.stream.clone(),
    }
}

/// Belt motion from externally estimated flows, `flows[k]` being the
/// motion between frame `first + k` and `first + k + 1`.
pub fn motions_from_flows(first: u64, flows: &[FlowVector], cfg: &MotionConfig) -> BTreeMap<u64, BeltMotion> {
    let states: Vec<_> = flows.iter().map(|&f| classify_belt_state(f, cfg)).collect();
    let states = if cfg.smoothing_window > 1 { smooth_states(&states, cfg.smoothing_window) } else { states };
    flows
        .iter()
        .zip(states)
        .enumerate()
        .map(|(k, (&f, state))| (first + k as u64 + 1, BeltMotion { state, flow: Some(f) }))
        .collect()
}

/// Track one file. Flows embedded in the file drive gating unless
/// `motions` is given.
pub fn track_file(
    file: &DetectionFile,
    cfg: &RunConfig,
    motions: Option<&BTreeMap<u64, BeltMotion>>,
) -> Result<Vec<Track>> {
    cfg.validate()?;
    let geometry = FrameGeometry::new(file.header.frame_width as f64, file.header.frame_height as f64, &cfg.motion);
    let own;
    let motions = match motions {
        Some(m) => m,
        None => {
            own = motions_from_stream(&file.stream, &cfg.motion);
            &own
        }
    };
    run_tracker(&file.stream, motions, &cfg.tracker, geometry)
}

/// Tracks that count as fish, in id order.
pub fn counted_tracks<'a>(tracks: &'a [Track], cfg: &RunConfig) -> Vec<&'a Track> {
    tracks.iter().filter(|t| t.is_counted(&cfg.tracker)).collect()
}

/// Track, label and count one file.
pub fn compose_file(file: &DetectionFile, cfg: &RunConfig) -> Result<(Vec<TrackLabel>, CompositionEstimate)> {
    let tracks = track_file(file, cfg, None)?;
    let labels = label_all(&tracks, &cfg.aggregation, cfg.tracker.tentative_min_hits)?;
    let estimate = estimate_composition(&labels, &file.header.afo_id)?;
    Ok((labels, estimate))
}

/// Label tracks read back from a track file, grouped by AFO in order of
/// first appearance.
pub fn label_track_file(tracks: &[TrackHistory], cfg: &AggregationConfig) -> Result<Vec<(String, Vec<TrackLabel>)>> {
    cfg.validate()?;
    let mut out: Vec<(String, Vec<TrackLabel>)> = Vec::new();
    for t in tracks {
        let label = label_history(t.track_id, &t.history, cfg)?;
        match out.iter_mut().find(|(id, _)| *id == t.afo_id) {
            Some((_, v)) => v.push(label),
            None => out.push((t.afo_id.clone(), vec![label])),
        }
    }
    Ok(out)
}

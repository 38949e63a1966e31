//! One species label per track from its per-frame scores.

use serde::{Deserialize, Serialize};

use crate::detection::{argmax, ClassScores, StageScores};
use crate::error::{Error, Result};
use crate::taxonomy::{PerSpecies, Species};
use crate::tracker::{ScoreRecord, Track};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Mean class scores, then argmax.
    #[default]
    Flat,
    /// Mean stage scores, then TARGET -> SKJ -> BET decisions.
    Hierarchical,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "flat" | "standard" => Ok(Method::Flat),
            "hierarchical" | "hier" => Ok(Method::Hierarchical),
            _ => Err(Error::Config(format!("unknown aggregation method '{s}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Flat => "flat",
            Method::Hierarchical => "hierarchical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AggregationConfig {
    pub method: Method,
    /// Decision threshold of all three hierarchical stages.
    pub stage_threshold: f64,
    /// Weight frames by detection confidence instead of equally.
    pub confidence_weighted: bool,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig { method: Method::Flat, stage_threshold: 0.5, confidence_weighted: false }
    }
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.stage_threshold > 0.0 && self.stage_threshold < 1.0) {
            return Err(Error::Config(format!(
                "aggregation.stage_threshold must lie in (0, 1), got {}",
                self.stage_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Aggregated {
    Flat(ClassScores),
    Hierarchical(StageScores),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackLabel {
    pub track_id: u64,
    pub label: Species,
    pub method: Method,
    pub aggregated: Aggregated,
}

/// Weighted mean that does not depend on the order of the inputs: terms
/// are summed in sorted order.
fn order_free_mean(values: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut terms: Vec<(f64, f64)> = values.map(|(v, w)| (v * w, w)).collect();
    let mut weights: Vec<f64> = terms.iter().map(|t| t.1).collect();
    terms.sort_by(|a, b| a.0.total_cmp(&b.0));
    weights.sort_by(f64::total_cmp);
    let num: f64 = terms.iter().map(|t| t.0).sum();
    let den: f64 = weights.iter().sum();
    num / den
}

/// Frame weights: equal, or the detection confidences when requested and
/// not all zero.
fn weights(confidences: &[f64], weighted: bool) -> Vec<f64> {
    if weighted && confidences.iter().any(|c| *c > 0.0) {
        confidences.to_vec()
    } else {
        vec![1.0; confidences.len()]
    }
}

/// Mean class scores over frames, then argmax with ties in
/// BET, SKJ, YFT, NO_TARGET order.
pub fn aggregate_flat(history: &[ClassScores]) -> Result<(Species, ClassScores)> {
    aggregate_flat_weighted(history, &vec![1.0; history.len()])
}

fn aggregate_flat_weighted(history: &[ClassScores], w: &[f64]) -> Result<(Species, ClassScores)> {
    if history.is_empty() {
        return Err(Error::Empty("score history"));
    }
    let mean = PerSpecies::from_fn(|s| order_free_mean(history.iter().zip(w).map(|(h, &w)| (h.get(s), w))));
    let label = argmax(&mean);
    let scores = ClassScores::new(mean.0)?;
    Ok((label, scores))
}

/// Mean stage scores over frames, then three binary decisions at
/// `threshold`. A mean exactly at the threshold continues towards TARGET,
/// SKJ and BET respectively.
pub fn aggregate_hierarchical(history: &[StageScores], threshold: f64) -> Result<(Species, StageScores)> {
    aggregate_hierarchical_weighted(history, &vec![1.0; history.len()], threshold)
}

fn aggregate_hierarchical_weighted(
    history: &[StageScores],
    w: &[f64],
    threshold: f64,
) -> Result<(Species, StageScores)> {
    if history.is_empty() {
        return Err(Error::Empty("score history"));
    }
    let mean = |f: fn(&StageScores) -> f64| order_free_mean(history.iter().zip(w).map(|(h, &w)| (f(h), w)));
    let m = StageScores { target: mean(|s| s.target), skj: mean(|s| s.skj), bet: mean(|s| s.bet) };
    Ok((decide(&m, threshold), m))
}

fn decide(m: &StageScores, threshold: f64) -> Species {
    if m.target < threshold {
        Species::NoTarget
    } else if m.skj >= threshold {
        Species::Skj
    } else if m.bet >= threshold {
        Species::Bet
    } else {
        Species::Yft
    }
}

/// Label one track from its score history.
pub fn label_track(track: &Track, cfg: &AggregationConfig) -> Result<TrackLabel> {
    label_history(track.track_id, &track.history, cfg)
}

/// Label a score history belonging to `track_id`.
pub fn label_history(track_id: u64, history: &[ScoreRecord], cfg: &AggregationConfig) -> Result<TrackLabel> {
    let conf: Vec<f64> = history.iter().map(|r| r.confidence).collect();
    let w = weights(&conf, cfg.confidence_weighted);
    let (label, aggregated) = match cfg.method {
        Method::Flat => {
            let scores = history
                .iter()
                .map(|r| r.class_scores)
                .collect::<Option<Vec<_>>>()
                .ok_or(Error::MissingScores { track_id, kind: "class" })?;
            let (label, mean) = aggregate_flat_weighted(&scores, &w)?;
            (label, Aggregated::Flat(mean))
        }
        Method::Hierarchical => {
            let scores = history
                .iter()
                .map(|r| r.stage_scores)
                .collect::<Option<Vec<_>>>()
                .ok_or(Error::MissingScores { track_id, kind: "stage" })?;
            let (label, mean) = aggregate_hierarchical_weighted(&scores, &w, cfg.stage_threshold)?;
            (label, Aggregated::Hierarchical(mean))
        }
    };
    Ok(TrackLabel { track_id, label, method: cfg.method, aggregated })
}

/// Labels for every track with at least `min_hits` matched detections, in
/// input order. A counted track without the scores `cfg.method` needs is an
/// error.
pub fn label_all(tracks: &[Track], cfg: &AggregationConfig, min_hits: u32) -> Result<Vec<TrackLabel>> {
    cfg.validate()?;
    tracks.iter().filter(|t| t.hits >= min_hits).map(|t| label_track(t, cfg)).collect()
}

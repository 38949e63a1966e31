//! Detection and ground-truth records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, BitMask};
use crate::motion::FlowVector;
use crate::taxonomy::{PerSpecies, Species};

/// Per-species classifier scores, normalised to sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScores(PerSpecies<f64>);

impl ClassScores {
    /// Validates raw scores (each in `[0, 1]`, not all zero) and rescales
    /// them to sum to one. Vectors already summing to one within `1e-12`
    /// are kept bit-for-bit.
    pub fn new(raw: [f64; 4]) -> Result<Self> {
        for (s, v) in Species::ALL.iter().zip(raw) {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidScores(format!("{s} score {v} outside [0, 1]")));
            }
        }
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidScores("all class scores are zero".into()));
        }
        if (sum - 1.0).abs() <= 1e-12 {
            return Ok(ClassScores(PerSpecies(raw)));
        }
        Ok(ClassScores(PerSpecies(raw.map(|v| v / sum))))
    }

    pub fn from_map(map: &BTreeMap<Species, f64>) -> Result<Self> {
        let mut raw = [0.0; 4];
        for s in Species::ALL {
            raw[s.index()] = *map.get(&s).ok_or_else(|| Error::InvalidScores(format!("missing {s} score")))?;
        }
        ClassScores::new(raw)
    }

    pub fn get(&self, s: Species) -> f64 {
        self.0[s]
    }

    pub fn values(&self) -> [f64; 4] {
        self.0 .0
    }

    pub fn to_map(&self) -> BTreeMap<Species, f64> {
        self.0.iter().map(|(s, &v)| (s, v)).collect()
    }

    /// Highest-scoring species; ties go to the earlier species in
    /// [`Species::ALL`].
    pub fn argmax(&self) -> Species {
        argmax(&self.0)
    }

    /// Stage scores induced by summing leaf probabilities over the taxonomy.
    pub fn induced_stages(&self) -> StageScores {
        let target = self.get(Species::Bet) + self.get(Species::Skj) + self.get(Species::Yft);
        let skj = if target > 0.0 { self.get(Species::Skj) / target } else { 0.0 };
        let bet_yft = self.get(Species::Bet) + self.get(Species::Yft);
        let bet = if bet_yft > 0.0 { self.get(Species::Bet) / bet_yft } else { 0.0 };
        StageScores { target: target.clamp(0.0, 1.0), skj: skj.clamp(0.0, 1.0), bet: bet.clamp(0.0, 1.0) }
    }
}

impl Serialize for ClassScores {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_map().serialize(serializer)
    }
}

pub(crate) fn argmax(v: &PerSpecies<f64>) -> Species {
    let mut best = Species::Bet;
    for s in Species::ALL {
        if v[s] > v[best] {
            best = s;
        }
    }
    best
}

/// Scores of the three binary stages of the hierarchical classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageScores {
    /// P(TARGET) against NO_TARGET.
    pub target: f64,
    /// P(SKJ) against BET_OR_YFT.
    pub skj: f64,
    /// P(BET) against YFT.
    pub bet: f64,
}

impl StageScores {
    pub fn new(target: f64, skj: f64, bet: f64) -> Result<Self> {
        for (name, v) in [("target", target), ("skj", skj), ("bet", bet)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidScores(format!("stage score {name}={v} outside [0, 1]")));
            }
        }
        Ok(StageScores { target, skj, bet })
    }
}

/// One fish candidate in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u64,
    pub bbox: BBox,
    pub mask: Option<BitMask>,
    pub confidence: f64,
    pub class_scores: Option<ClassScores>,
    pub stage_scores: Option<StageScores>,
}

impl Detection {
    pub fn new(frame: u64, bbox: BBox, confidence: f64) -> Result<Self> {
        let d = Detection { frame, bbox, mask: None, confidence, class_scores: None, stage_scores: None };
        d.validate()?;
        Ok(d)
    }

    pub fn with_class_scores(mut self, scores: ClassScores) -> Self {
        self.class_scores = Some(scores);
        self
    }

    pub fn with_stage_scores(mut self, scores: StageScores) -> Self {
        self.stage_scores = Some(scores);
        self
    }

    pub fn with_mask(mut self, mask: BitMask) -> Result<Self> {
        self.mask = Some(mask);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.confidence.is_finite() || !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidDetection(format!("confidence {} outside [0, 1]", self.confidence)));
        }
        if let Some(mask) = &self.mask {
            let extent = mask.extent().ok_or_else(|| Error::InvalidDetection("mask has no set pixels".into()))?;
            if extent.intersection_area(&self.bbox) <= 0.0 {
                return Err(Error::InvalidDetection("mask does not intersect its box".into()));
            }
        }
        Ok(())
    }
}

/// All detections of one frame, with the belt flow when it was supplied.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameDetections {
    pub frame: u64,
    pub flow: Option<FlowVector>,
    pub detections: Vec<Detection>,
}

/// Known species composition of one artificial fishing operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroundTruthOperation {
    pub afo_id: String,
    pub counts: PerSpecies<u64>,
}

impl GroundTruthOperation {
    pub fn new(afo_id: impl Into<String>, counts: PerSpecies<u64>) -> Result<Self> {
        let gt = GroundTruthOperation { afo_id: afo_id.into(), counts };
        if gt.total() == 0 {
            return Err(Error::ZeroGroundTruth);
        }
        Ok(gt)
    }

    pub fn total(&self) -> u64 {
        self.counts.0.iter().sum()
    }

    pub fn percentages(&self) -> PerSpecies<f64> {
        let total = self.total() as f64;
        self.counts.map(|_, &c| 100.0 * c as f64 / total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_scores_are_normalised_on_ingest() {
        let s = ClassScores::new([0.2, 0.6, 0.2, 0.2]).unwrap();
        assert!((s.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((s.get(Species::Skj) - 0.5).abs() < 1e-12);
        assert!(ClassScores::new([0.0; 4]).is_err());
        assert!(ClassScores::new([1.2, 0.0, 0.0, 0.0]).is_err());
        assert!(ClassScores::new([-0.1, 0.5, 0.5, 0.1]).is_err());
    }

    #[test]
    fn normalised_scores_are_kept_exactly() {
        let raw = [0.1, 0.7, 0.15, 0.05];
        assert_eq!(ClassScores::new(raw).unwrap().values(), raw);
    }

    #[test]
    fn argmax_ties_follow_species_order() {
        assert_eq!(ClassScores::new([0.25; 4]).unwrap().argmax(), Species::Bet);
        assert_eq!(ClassScores::new([0.1, 0.4, 0.4, 0.1]).unwrap().argmax(), Species::Skj);
    }

    #[test]
    fn induced_stages_follow_the_taxonomy() {
        let s = ClassScores::new([0.2, 0.3, 0.3, 0.2]).unwrap().induced_stages();
        assert!((s.target - 0.8).abs() < 1e-12);
        assert!((s.skj - 0.375).abs() < 1e-12);
        assert!((s.bet - 0.4).abs() < 1e-12);
    }

    #[test]
    fn detection_validation() {
        let bb = BBox::new(2.0, 2.0, 4.0, 4.0).unwrap();
        assert!(Detection::new(0, bb, 1.3).is_err());
        let d = Detection::new(0, bb, 0.9).unwrap();
        let far = BitMask::ellipse(20, 20, &BBox::new(12.0, 12.0, 6.0, 6.0).unwrap());
        assert!(d.clone().with_mask(far).is_err());
        let near = BitMask::ellipse(20, 20, &bb);
        assert!(d.with_mask(near).is_ok());
    }

    #[test]
    fn ground_truth_needs_fish() {
        assert!(GroundTruthOperation::new("x", PerSpecies([0, 0, 0, 0])).is_err());
        let gt = GroundTruthOperation::new("x", PerSpecies([1, 2, 1, 0])).unwrap();
        assert_eq!(gt.total(), 4);
        assert_eq!(gt.percentages().0, [25.0, 50.0, 25.0, 0.0]);
    }
}

//! COCO-style average precision over IoU thresholds 0.05..0.95.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou_box, iou_mask, BBox, BitMask};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPrediction {
    pub image: u64,
    pub bbox: BBox,
    pub mask: Option<BitMask>,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthBox {
    pub image: u64,
    pub bbox: BBox,
    pub mask: Option<BitMask>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IouKind {
    #[default]
    Box,
    Mask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Precision sampled at recall 0, 0.01, ..., 1.
    #[default]
    Coco101,
    /// Exact area under the precision envelope.
    AllPoints,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub iou: f64,
    pub ap: f64,
    pub true_positives: usize,
    /// `(recall, precision)` after each prediction in rank order.
    pub curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CocoResult {
    pub kind: IouKind,
    pub map: f64,
    /// Matched ground truth / total ground truth at IoU 0.5.
    pub recall: f64,
    pub thresholds: Vec<ThresholdResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionEvalResult {
    pub map_box: f64,
    pub map_mask: Option<f64>,
    pub recall: f64,
    pub box_result: CocoResult,
    pub mask_result: Option<CocoResult>,
}

/// The 19 thresholds `i / 20`, `i = 1..=19`.
pub fn iou_thresholds() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

fn rank_order(a: &ScoredPrediction, b: &ScoredPrediction) -> Ordering {
    b.confidence.total_cmp(&a.confidence).then(a.image.cmp(&b.image)).then_with(|| {
        let (pa, pb) = (<[f64; 4]>::from(a.bbox), <[f64; 4]>::from(b.bbox));
        pa.iter().zip(&pb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
    })
}

fn pair_iou(p: &ScoredPrediction, g: &GroundTruthBox, kind: IouKind) -> Result<f64> {
    match kind {
        IouKind::Box => Ok(iou_box(&p.bbox, &g.bbox)),
        IouKind::Mask => match (&p.mask, &g.mask) {
            (Some(a), Some(b)) => iou_mask(a, b),
            _ => Err(Error::InvalidDetection("mask IoU requested but a mask is missing".into())),
        },
    }
}

/// Class-agnostic average precision averaged over the 19 IoU thresholds.
///
/// Predictions are ranked by descending confidence (ties by image, then
/// box coordinates) and matched greedily: each one takes the unmatched
/// ground truth in its image with the highest IoU at or above the
/// threshold.
pub fn coco_map(
    predictions: &[ScoredPrediction],
    ground_truth: &[GroundTruthBox],
    kind: IouKind,
    interpolation: Interpolation,
) -> Result<CocoResult> {
    if ground_truth.is_empty() {
        return Err(Error::Empty("ground truth"));
    }
    if let Some(p) = predictions.iter().find(|p| !(0.0..=1.0).contains(&p.confidence)) {
        return Err(Error::InvalidDetection(format!("confidence {} outside [0, 1]", p.confidence)));
    }
    let mut ranked: Vec<&ScoredPrediction> = predictions.iter().collect();
    ranked.sort_by(|a, b| rank_order(a, b));

    // candidate ground truth per prediction, with IoU
    let mut candidates: Vec<Vec<(usize, f64)>> = Vec::with_capacity(ranked.len());
    for p in &ranked {
        let mut row = Vec::new();
        for (g, gt) in ground_truth.iter().enumerate() {
            if gt.image == p.image {
                let iou = pair_iou(p, gt, kind)?;
                if iou > 0.0 {
                    row.push((g, iou));
                }
            }
        }
        candidates.push(row);
    }

    let n_gt = ground_truth.len() as f64;
    let mut thresholds = Vec::with_capacity(19);
    for t in iou_thresholds() {
        let mut taken = vec![false; ground_truth.len()];
        let mut tp = 0usize;
        let mut curve = Vec::with_capacity(ranked.len());
        for (k, row) in candidates.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for &(g, iou) in row {
                if !taken[g] && iou >= t && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((g, iou));
                }
            }
            if let Some((g, _)) = best {
                taken[g] = true;
                tp += 1;
            }
            curve.push((tp as f64 / n_gt, tp as f64 / (k + 1) as f64));
        }
        thresholds.push(ThresholdResult { iou: t, ap: area(&curve, interpolation), true_positives: tp, curve });
    }
    let map = thresholds.iter().map(|r| r.ap).sum::<f64>() / thresholds.len() as f64;
    let recall = thresholds[9].true_positives as f64 / n_gt;
    Ok(CocoResult { kind, map, recall, thresholds })
}

/// Area under the precision envelope of a rank-ordered PR curve.
fn area(curve: &[(f64, f64)], interpolation: Interpolation) -> f64 {
    // envelope: best precision at this rank or any later one
    let mut envelope: Vec<f64> = curve.iter().map(|c| c.1).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    match interpolation {
        Interpolation::Coco101 => {
            let mut sum = 0.0;
            let mut k = 0;
            for i in 0..=100 {
                let r = i as f64 / 100.0;
                while k < curve.len() && curve[k].0 < r {
                    k += 1;
                }
                if k < curve.len() {
                    sum += envelope[k];
                }
            }
            sum / 101.0
        }
        Interpolation::AllPoints => {
            let mut prev = 0.0;
            let mut sum = 0.0;
            for (i, &(r, _)) in curve.iter().enumerate() {
                sum += (r - prev) * envelope[i];
                prev = r;
            }
            sum
        }
    }
}

/// Box metrics, plus mask metrics when every prediction and ground truth
/// carries a mask.
pub fn evaluate_detections(
    predictions: &[ScoredPrediction],
    ground_truth: &[GroundTruthBox],
    interpolation: Interpolation,
) -> Result<DetectionEvalResult> {
    let box_result = coco_map(predictions, ground_truth, IouKind::Box, interpolation)?;
    let has_masks = predictions.iter().all(|p| p.mask.is_some()) && ground_truth.iter().all(|g| g.mask.is_some());
    let mask_result =
        if has_masks { Some(coco_map(predictions, ground_truth, IouKind::Mask, interpolation)?) } else { None };
    Ok(DetectionEvalResult {
        map_box: box_result.map,
        map_mask: mask_result.as_ref().map(|r| r.map),
        recall: box_result.recall,
        box_result,
        mask_result,
    })
}

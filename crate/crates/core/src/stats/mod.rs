//! Evaluation statistics.

mod agreement;
mod coco;
mod confusion;
mod kfold;
mod wilcoxon;

pub use agreement::{expert_agreement, AgreementResult, ExpertMatrix, FishAgreement};
pub use coco::{
    coco_map, evaluate_detections, iou_thresholds, CocoResult, DetectionEvalResult, GroundTruthBox, Interpolation,
    IouKind, ScoredPrediction, ThresholdResult,
};
pub use confusion::{confusion, ConfusionMatrix};
pub use kfold::{repeated_stratified_kfold, Split};
pub use wilcoxon::{
    wilcoxon_signed_rank, wilcoxon_with, AlphaBands, Alternative, TestMethod, WilcoxonOptions, WilcoxonResult,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which standard deviation to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdConvention {
    /// Divide by `n - 1`.
    #[default]
    Sample,
    /// Divide by `n`.
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

/// Mean and standard deviation. A single value has sd 0 under either
/// convention.
pub fn mean_sd(values: &[f64], convention: SdConvention) -> Result<MeanSd> {
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let denom = match convention {
        SdConvention::Sample if n > 1 => (n - 1) as f64,
        SdConvention::Sample => return Ok(MeanSd { mean, sd: 0.0, n }),
        SdConvention::Population => n as f64,
    };
    Ok(MeanSd { mean, sd: (ss / denom).sqrt(), n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sd_conventions() {
        let v = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        let p = mean_sd(&v, SdConvention::Population).unwrap();
        assert_eq!(p.mean, 5.0);
        assert_eq!(p.sd, 2.0);
        let s = mean_sd(&v, SdConvention::Sample).unwrap();
        assert!((s.sd - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_sd(&[3.0], SdConvention::Sample).unwrap().sd, 0.0);
        assert!(mean_sd(&[], SdConvention::Sample).is_err());
    }
}

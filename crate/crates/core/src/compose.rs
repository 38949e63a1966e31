//! Catch composition from labelled tracks, and its error against ground truth.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::aggregate::TrackLabel;
use crate::detection::GroundTruthOperation;
use crate::error::{Error, Result};
use crate::stats::{mean_sd, wilcoxon_signed_rank, AlphaBands, MeanSd, SdConvention, WilcoxonResult};
use crate::taxonomy::{PerSpecies, Species};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionEstimate {
    pub afo_id: String,
    pub counts: PerSpecies<u64>,
    /// Share of labelled tracks, in percent.
    pub percentages: PerSpecies<f64>,
    /// Labelled tracks as a percentage of the ground-truth total, when known.
    pub segmented_fraction: Option<f64>,
}

impl CompositionEstimate {
    pub fn from_counts(afo_id: impl Into<String>, counts: PerSpecies<u64>) -> Result<Self> {
        let total: u64 = counts.0.iter().sum();
        if total == 0 {
            return Err(Error::Empty("labelled tracks"));
        }
        let percentages = counts.map(|_, &c| 100.0 * c as f64 / total as f64);
        Ok(CompositionEstimate { afo_id: afo_id.into(), counts, percentages, segmented_fraction: None })
    }

    pub fn total(&self) -> u64 {
        self.counts.0.iter().sum()
    }

    /// Attach the segmented fraction against a ground-truth operation.
    pub fn with_ground_truth(mut self, gt: &GroundTruthOperation) -> Result<Self> {
        self.segmented_fraction = Some(segmented_fraction(self.total(), gt.total())?);
        Ok(self)
    }
}

/// Count labels per species and convert to percentages of all labels.
pub fn estimate_composition(labels: &[TrackLabel], afo_id: &str) -> Result<CompositionEstimate> {
    let mut counts = PerSpecies([0u64; 4]);
    for l in labels {
        counts[l.label] += 1;
    }
    CompositionEstimate::from_counts(afo_id, counts)
}

/// `100 * tracked / gt_total`; may exceed 100 when fish are double counted.
pub fn segmented_fraction(tracked: u64, gt_total: u64) -> Result<f64> {
    if gt_total == 0 {
        return Err(Error::ZeroGroundTruth);
    }
    Ok(100.0 * tracked as f64 / gt_total as f64)
}

/// Predicted and true composition of one operation, in percent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionPair {
    pub afo_id: String,
    pub group: String,
    pub predicted: PerSpecies<f64>,
    pub truth: PerSpecies<f64>,
}

impl CompositionPair {
    pub fn abs_error(&self, s: Species) -> f64 {
        (self.predicted[s] - self.truth[s]).abs()
    }
}

/// How operations are grouped in an error table.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Grouping {
    /// Only the overall group.
    #[default]
    None,
    /// The part of the AFO id before the first `_` (the trip).
    IdPrefix,
    /// Explicit group per AFO id.
    Explicit(HashMap<String, String>),
}

impl Grouping {
    fn group_of(&self, afo_id: &str) -> Result<String> {
        match self {
            Grouping::None => Ok(ALL_GROUP.to_string()),
            Grouping::IdPrefix => Ok(afo_id.split('_').next().unwrap_or(afo_id).to_string()),
            Grouping::Explicit(map) => map.get(afo_id).cloned().ok_or_else(|| Error::UnmatchedAfo(afo_id.to_string())),
        }
    }
}

/// Name of the group holding every operation.
pub const ALL_GROUP: &str = "all";

/// Pair each estimate with the ground truth of the same AFO.
pub fn pair_with_truth(
    estimates: &[CompositionEstimate],
    gts: &[GroundTruthOperation],
    grouping: &Grouping,
) -> Result<Vec<CompositionPair>> {
    let by_id: HashMap<&str, &GroundTruthOperation> = gts.iter().map(|g| (g.afo_id.as_str(), g)).collect();
    estimates
        .iter()
        .map(|e| {
            let gt = by_id.get(e.afo_id.as_str()).ok_or_else(|| Error::UnmatchedAfo(e.afo_id.clone()))?;
            Ok(CompositionPair {
                afo_id: e.afo_id.clone(),
                group: grouping.group_of(&e.afo_id)?,
                predicted: e.percentages,
                truth: gt.percentages(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeciesError {
    pub mae: MeanSd,
    /// Paired test of predicted against true percentages across operations.
    pub wilcoxon: WilcoxonResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupErrors {
    pub group: String,
    pub afo_ids: Vec<String>,
    pub species: PerSpecies<SpeciesError>,
}

/// Per-species absolute composition error, per group and overall.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeciesErrorTable {
    pub sd: SdConvention,
    /// Named groups in sorted order, then [`ALL_GROUP`].
    pub groups: Vec<GroupErrors>,
}

impl SpeciesErrorTable {
    pub fn group(&self, name: &str) -> Option<&GroupErrors> {
        self.groups.iter().find(|g| g.group == name)
    }

    pub fn marker(&self, group: &str, species: Species, bands: &AlphaBands) -> Option<&'static str> {
        self.group(group).map(|g| bands.marker(g.species[species].wilcoxon.p_value))
    }
}

fn group_errors(group: String, pairs: &[&CompositionPair], sd: SdConvention) -> Result<GroupErrors> {
    let mut afo_ids: Vec<String> = pairs.iter().map(|p| p.afo_id.clone()).collect();
    afo_ids.sort();
    // sort by id so the result does not depend on input order
    let mut pairs = pairs.to_vec();
    pairs.sort_by(|a, b| a.afo_id.cmp(&b.afo_id));
    let mut out = Vec::with_capacity(4);
    for s in Species::ALL {
        let errs: Vec<f64> = pairs.iter().map(|p| p.abs_error(s)).collect();
        let pred: Vec<f64> = pairs.iter().map(|p| p.predicted[s]).collect();
        let truth: Vec<f64> = pairs.iter().map(|p| p.truth[s]).collect();
        out.push(SpeciesError { mae: mean_sd(&errs, sd)?, wilcoxon: wilcoxon_signed_rank(&pred, &truth)? });
    }
    let species: [SpeciesError; 4] = out.try_into().expect("four species");
    Ok(GroupErrors { group, afo_ids, species: PerSpecies(species) })
}

/// Error table over already paired compositions.
pub fn error_table(pairs: &[CompositionPair], sd: SdConvention) -> Result<SpeciesErrorTable> {
    if pairs.is_empty() {
        return Err(Error::Empty("composition pairs"));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = pairs.iter().find(|p| !seen.insert(p.afo_id.as_str())) {
        return Err(Error::InvalidDetection(format!("AFO '{}' appears twice", dup.afo_id)));
    }
    let mut by_group: BTreeMap<&str, Vec<&CompositionPair>> = BTreeMap::new();
    for p in pairs {
        by_group.entry(p.group.as_str()).or_default().push(p);
    }
    let mut groups = Vec::new();
    for (name, members) in &by_group {
        if *name != ALL_GROUP {
            groups.push(group_errors(name.to_string(), members, sd)?);
        }
    }
    let all: Vec<&CompositionPair> = pairs.iter().collect();
    groups.push(group_errors(ALL_GROUP.to_string(), &all, sd)?);
    Ok(SpeciesErrorTable { sd, groups })
}

/// Mean absolute error per species between estimates and ground truth.
pub fn species_mae(
    estimates: &[CompositionEstimate],
    gts: &[GroundTruthOperation],
    grouping: &Grouping,
    sd: SdConvention,
) -> Result<SpeciesErrorTable> {
    error_table(&pair_with_truth(estimates, gts, grouping)?, sd)
}

/// Segmented fraction of one operation under some approach.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentedValue {
    pub afo_id: String,
    pub group: String,
    pub percent: f64,
}

/// Two approaches compared on the same operations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentedComparison {
    pub group: String,
    pub first: MeanSd,
    pub second: MeanSd,
    /// Paired test of `first` against `second`.
    pub wilcoxon: WilcoxonResult,
}

/// Summarise and test paired segmented fractions per group and overall.
/// Both sides must cover the same AFO ids.
pub fn compare_segmented(
    first: &[SegmentedValue],
    second: &[SegmentedValue],
    sd: SdConvention,
) -> Result<Vec<SegmentedComparison>> {
    if first.is_empty() {
        return Err(Error::Empty("segmented fractions"));
    }
    if first.len() != second.len() {
        return Err(Error::LengthMismatch(first.len(), second.len()));
    }
    let other: HashMap<&str, &SegmentedValue> = second.iter().map(|v| (v.afo_id.as_str(), v)).collect();
    let mut by_group: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    let mut all = Vec::with_capacity(first.len());
    let mut sorted: Vec<&SegmentedValue> = first.iter().collect();
    sorted.sort_by(|a, b| a.afo_id.cmp(&b.afo_id));
    for a in sorted {
        let b = other.get(a.afo_id.as_str()).ok_or_else(|| Error::UnmatchedAfo(a.afo_id.clone()))?;
        if a.group != ALL_GROUP {
            by_group.entry(a.group.as_str()).or_default().push((a.percent, b.percent));
        }
        all.push((a.percent, b.percent));
    }
    let summarise = |group: &str, pairs: &[(f64, f64)]| -> Result<SegmentedComparison> {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        Ok(SegmentedComparison {
            group: group.to_string(),
            first: mean_sd(&x, sd)?,
            second: mean_sd(&y, sd)?,
            wilcoxon: wilcoxon_signed_rank(&x, &y)?,
        })
    };
    let mut out = Vec::new();
    for (g, pairs) in &by_group {
        out.push(summarise(g, pairs)?);
    }
    out.push(summarise(ALL_GROUP, &all)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::{Aggregated, Method};
    use crate::detection::ClassScores;

    fn label(id: u64, s: Species) -> TrackLabel {
        TrackLabel {
            track_id: id,
            label: s,
            method: Method::Flat,
            aggregated: Aggregated::Flat(ClassScores::new([0.25; 4]).unwrap()),
        }
    }

    #[test]
    fn counting_examples() {
        let l = [label(1, Species::Skj), label(2, Species::Skj), label(3, Species::Yft), label(4, Species::Bet)];
        let e = estimate_composition(&l, "x").unwrap();
        assert_eq!(e.percentages.0, [25.0, 50.0, 25.0, 0.0]);
        let nt = estimate_composition(&[label(1, Species::NoTarget)], "x").unwrap();
        assert_eq!(nt.percentages[Species::NoTarget], 100.0);
        assert!(estimate_composition(&[], "x").is_err());
    }

    #[test]
    fn segmented_fraction_examples() {
        assert_eq!(segmented_fraction(232, 232).unwrap(), 100.0);
        assert_eq!((segmented_fraction(244, 232).unwrap() * 10.0).round() / 10.0, 105.2);
        assert_eq!((segmented_fraction(219, 327).unwrap() * 10.0).round() / 10.0, 67.0);
        assert_eq!(segmented_fraction(0, 232).unwrap(), 0.0);
        assert!(matches!(segmented_fraction(3, 0), Err(Error::ZeroGroundTruth)));
    }

    #[test]
    fn estimate_against_itself_has_zero_error() {
        let gt = GroundTruthOperation::new("1_01", PerSpecies([3, 5, 2, 1])).unwrap();
        let e = CompositionEstimate::from_counts("1_01", gt.counts).unwrap();
        let t = species_mae(&[e], &[gt], &Grouping::None, SdConvention::Sample).unwrap();
        assert_eq!(t.groups.len(), 1);
        for s in Species::ALL {
            assert_eq!(t.groups[0].species[s].mae.mean, 0.0);
            assert_eq!(t.groups[0].species[s].mae.sd, 0.0);
        }
    }

    #[test]
    fn unmatched_afo_is_an_error() {
        let gt = GroundTruthOperation::new("a", PerSpecies([1, 0, 0, 0])).unwrap();
        let e = CompositionEstimate::from_counts("b", gt.counts).unwrap();
        assert!(matches!(species_mae(&[e], &[gt], &Grouping::None, SdConvention::Sample), Err(Error::UnmatchedAfo(_))));
    }

    #[test]
    fn grouping_by_trip_adds_an_overall_group() {
        let gts: Vec<GroundTruthOperation> = ["1_01", "1_02", "2_01"]
            .iter()
            .map(|id| GroundTruthOperation::new(*id, PerSpecies([1, 1, 1, 1])).unwrap())
            .collect();
        let est: Vec<CompositionEstimate> = ["1_01", "1_02", "2_01"]
            .iter()
            .map(|id| CompositionEstimate::from_counts(*id, PerSpecies([2, 1, 1, 0])).unwrap())
            .collect();
        let t = species_mae(&est, &gts, &Grouping::IdPrefix, SdConvention::Population).unwrap();
        let names: Vec<&str> = t.groups.iter().map(|g| g.group.as_str()).collect();
        assert_eq!(names, vec!["1", "2", "all"]);
        assert_eq!(t.group("1").unwrap().afo_ids, vec!["1_01", "1_02"]);
        assert_eq!(t.group("all").unwrap().species[Species::Bet].mae.mean, 25.0);
    }

    #[test]
    fn segmented_comparison_pairs_by_id() {
        let v = |id: &str, g: &str, p: f64| SegmentedValue { afo_id: id.into(), group: g.into(), percent: p };
        let a = [v("1_01", "1", 50.0), v("1_02", "1", 40.0), v("2_01", "2", 70.0)];
        let b = [v("2_01", "2", 90.0), v("1_02", "1", 55.0), v("1_01", "1", 60.0)];
        let c = compare_segmented(&a, &b, SdConvention::Population).unwrap();
        assert_eq!(c.iter().map(|x| x.group.as_str()).collect::<Vec<_>>(), vec!["1", "2", "all"]);
        assert_eq!(c[0].first.mean, 45.0);
        assert_eq!(c[0].second.mean, 57.5);
        assert_eq!(c[2].wilcoxon.n_effective, 3);
        let missing = [v("1_01", "1", 60.0), v("1_02", "1", 55.0), v("2_02", "2", 1.0)];
        assert!(matches!(compare_segmented(&a, &missing, SdConvention::Sample), Err(Error::UnmatchedAfo(_))));
    }
}

use serde::Serialize;

use crate::error::{Error, Result};
use crate::taxonomy::{Species, SpeciesLabel};

/// Rows are true labels, columns predictions, both in [`Species::ALL`] order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub labels: [Species; 4],
    pub counts: [[u64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn count(&self, truth: Species, predicted: Species) -> u64 {
        self.counts[truth.index()][predicted.index()]
    }

    pub fn row_total(&self, truth: Species) -> u64 {
        self.counts[truth.index()].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Row-normalised matrix; rows without samples are all zero.
    pub fn normalized(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in self.counts.iter().enumerate() {
            let total: u64 = row.iter().sum();
            if total > 0 {
                for j in 0..4 {
                    out[i][j] = row[j] as f64 / total as f64;
                }
            }
        }
        out
    }

    /// Per-class accuracy (recall): diagonal over row total.
    pub fn class_accuracy(&self, truth: Species) -> Option<f64> {
        let total = self.row_total(truth);
        (total > 0).then(|| self.count(truth, truth) as f64 / total as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        let diag: u64 = (0..4).map(|i| self.counts[i][i]).sum();
        (total > 0).then(|| diag as f64 / total as f64)
    }
}

/// Tally predictions against truth. FISH ground truth is skipped since it
/// names no species; other internal labels are rejected.
pub fn confusion(predicted: &[Species], truth: &[SpeciesLabel]) -> Result<ConfusionMatrix> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch(predicted.len(), truth.len()));
    }
    let mut counts = [[0u64; 4]; 4];
    for (p, t) in predicted.iter().zip(truth) {
        if *t == SpeciesLabel::Fish {
            continue;
        }
        let t = t.as_species().ok_or_else(|| Error::NotALeaf(t.to_string()))?;
        counts[t.index()][p.index()] += 1;
    }
    Ok(ConfusionMatrix { labels: Species::ALL, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_correct_is_identity() {
        let p: Vec<Species> = Species::ALL.to_vec();
        let t: Vec<SpeciesLabel> = p.iter().map(|&s| s.into()).collect();
        let m = confusion(&p, &t).unwrap();
        let n = m.normalized();
        for (i, row) in n.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(m.accuracy(), Some(1.0));
    }

    #[test]
    fn single_miss() {
        let m = confusion(&[Species::Yft], &[SpeciesLabel::Bet]).unwrap();
        assert_eq!(m.count(Species::Bet, Species::Yft), 1);
        assert_eq!(m.total(), 1);
        assert_eq!(m.class_accuracy(Species::Bet), Some(0.0));
        assert_eq!(m.class_accuracy(Species::Skj), None);
    }

    #[test]
    fn fish_is_skipped_and_internal_labels_rejected() {
        let m = confusion(&[Species::Bet, Species::Bet], &[SpeciesLabel::Fish, SpeciesLabel::Bet]).unwrap();
        assert_eq!(m.total(), 1);
        assert!(matches!(confusion(&[Species::Bet], &[SpeciesLabel::Target]), Err(Error::NotALeaf(_))));
        assert!(matches!(confusion(&[], &[SpeciesLabel::Bet]), Err(Error::LengthMismatch(0, 1))));
    }

    proptest! {
        #[test]
        fn matches_pairwise_tally(pairs in proptest::collection::vec((0usize..4, 0usize..4), 0..200)) {
            let p: Vec<Species> = pairs.iter().map(|&(a, _)| Species::from_index(a).unwrap()).collect();
            let t: Vec<SpeciesLabel> = pairs.iter().map(|&(_, b)| Species::from_index(b).unwrap().into()).collect();
            let m = confusion(&p, &t).unwrap();
            for ti in 0..4 {
                for pi in 0..4 {
                    let oracle = pairs.iter().filter(|&&(a, b)| a == pi && b == ti).count() as u64;
                    prop_assert_eq!(m.counts[ti][pi], oracle);
                }
                let row: f64 = m.normalized()[ti].iter().sum();
                if m.row_total(Species::from_index(ti).unwrap()) > 0 {
                    prop_assert!((row - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}

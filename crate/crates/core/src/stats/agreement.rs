//! Agreement between expert species identifications.

use serde::Serialize;

use super::{mean_sd, MeanSd, SdConvention};
use crate::error::{Error, Result};
use crate::taxonomy::Species;

/// Fish by expert grid of BET/YFT labels; `None` where an expert gave none.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpertMatrix {
    experts: usize,
    rows: Vec<(String, Vec<Option<Species>>)>,
}

impl ExpertMatrix {
    pub fn new(experts: usize, rows: Vec<(String, Vec<Option<Species>>)>) -> Result<Self> {
        if experts == 0 {
            return Err(Error::Empty("expert columns"));
        }
        for (id, cells) in &rows {
            if cells.len() != experts {
                return Err(Error::LengthMismatch(cells.len(), experts));
            }
            if let Some(s) = cells.iter().flatten().find(|s| !matches!(s, Species::Bet | Species::Yft)) {
                return Err(Error::InvalidScores(format!("fish {id}: expert label {s} is not BET or YFT")));
            }
        }
        Ok(ExpertMatrix { experts, rows })
    }

    pub fn experts(&self) -> usize {
        self.experts
    }

    pub fn rows(&self) -> &[(String, Vec<Option<Species>>)] {
        &self.rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FishAgreement {
    pub fish_id: String,
    pub labelled_by: usize,
    pub bet: f64,
    pub yft: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementResult {
    pub min_experts: usize,
    pub fish: Vec<FishAgreement>,
    /// Share of labels, in percent, averaged over retained fish.
    pub bet_percent: MeanSd,
    pub yft_percent: MeanSd,
    /// Fish labelled by every expert with the same species.
    pub unanimous_bet: Vec<String>,
    pub unanimous_yft: Vec<String>,
}

/// Keep fish labelled by at least `min_experts` experts and average the
/// per-fish share of BET and YFT labels over them.
pub fn expert_agreement(matrix: &ExpertMatrix, min_experts: usize, sd: SdConvention) -> Result<AgreementResult> {
    if min_experts == 0 {
        return Err(Error::Config("min_experts must be at least 1".into()));
    }
    let mut fish = Vec::new();
    let mut unanimous_bet = Vec::new();
    let mut unanimous_yft = Vec::new();
    for (id, cells) in matrix.rows() {
        let labelled = cells.iter().flatten().count();
        if labelled < min_experts {
            continue;
        }
        let bet = cells.iter().flatten().filter(|s| **s == Species::Bet).count();
        let yft = labelled - bet;
        if labelled == matrix.experts() {
            if bet == labelled {
                unanimous_bet.push(id.clone());
            } else if yft == labelled {
                unanimous_yft.push(id.clone());
            }
        }
        let bet_share = bet as f64 / labelled as f64;
        fish.push(FishAgreement { fish_id: id.clone(), labelled_by: labelled, bet: bet_share, yft: 1.0 - bet_share });
    }
    if fish.is_empty() {
        return Err(Error::Empty("fish with enough expert labels"));
    }
    let bet: Vec<f64> = fish.iter().map(|f| 100.0 * f.bet).collect();
    let yft: Vec<f64> = fish.iter().map(|f| 100.0 * f.yft).collect();
    Ok(AgreementResult {
        min_experts,
        bet_percent: mean_sd(&bet, sd)?,
        yft_percent: mean_sd(&yft, sd)?,
        fish,
        unanimous_bet,
        unanimous_yft,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, s: &str) -> (String, Vec<Option<Species>>) {
        let cells = s
            .chars()
            .map(|c| match c {
                'B' => Some(Species::Bet),
                'Y' => Some(Species::Yft),
                _ => None,
            })
            .collect();
        (id.to_string(), cells)
    }

    #[test]
    fn shares_and_unanimity() {
        let m = ExpertMatrix::new(
            9,
            vec![row("104", "BBBBBBBBB"), row("072", "BBBYBBBY."), row("009", "YY......."), row("045", "YYYYYYYYY")],
        )
        .unwrap();
        let r = expert_agreement(&m, 4, SdConvention::Sample).unwrap();
        assert_eq!(r.fish.len(), 3);
        assert_eq!(r.fish[0].bet, 1.0);
        assert_eq!(r.fish[1].bet, 0.75);
        assert_eq!(r.unanimous_bet, vec!["104"]);
        assert_eq!(r.unanimous_yft, vec!["045"]);
        assert!((r.bet_percent.mean - 175.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn eight_of_nine_is_not_unanimous() {
        let m = ExpertMatrix::new(9, vec![row("1", "BBBBBBBB.")]).unwrap();
        let r = expert_agreement(&m, 4, SdConvention::Sample).unwrap();
        assert!(r.unanimous_bet.is_empty());
    }

    #[test]
    fn shares_are_complementary() {
        for n in 1..=9 {
            for k in 0..=n {
                let cells: String = (0..9)
                    .map(|i| {
                        if i < k {
                            'B'
                        } else if i < n {
                            'Y'
                        } else {
                            '.'
                        }
                    })
                    .collect();
                let m = ExpertMatrix::new(9, vec![row("x", &cells)]).unwrap();
                let f = &expert_agreement(&m, 1, SdConvention::Sample).unwrap().fish[0];
                assert_eq!(f.bet + f.yft, 1.0);
                assert!((f.yft - (n - k) as f64 / n as f64).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn contract_errors() {
        assert!(ExpertMatrix::new(9, vec![row("1", "BB")]).is_err());
        let skj = ("1".to_string(), vec![Some(Species::Skj)]);
        assert!(ExpertMatrix::new(1, vec![skj]).is_err());
        let m = ExpertMatrix::new(9, vec![row("1", "BB.......")]).unwrap();
        assert!(expert_agreement(&m, 4, SdConvention::Sample).is_err());
        assert!(expert_agreement(&m, 0, SdConvention::Sample).is_err());
    }
}

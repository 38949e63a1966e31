use std::collections::BTreeMap;

use catchcomp::aggregate::{label_all, AggregationConfig, Method};
use catchcomp::compose::{
    error_table, estimate_composition, species_mae, CompositionEstimate, CompositionPair, Grouping,
};
use catchcomp::detection::GroundTruthOperation;
use catchcomp::motion::MotionConfig;
use catchcomp::sim::{end_to_end_error, generate_scenario, SimConfig};
use catchcomp::stats::SdConvention;
use catchcomp::taxonomy::{PerSpecies, Species};
use catchcomp::tracker::{run_tracker, TrackerConfig};
use proptest::prelude::*;

fn confused(seed: u64) -> SimConfig {
    let mut cfg = SimConfig::noiseless(seed);
    cfg.fish_count = BTreeMap::from([(Species::Bet, 8), (Species::Skj, 4), (Species::Yft, 6), (Species::NoTarget, 2)]);
    cfg.classifier_confusion[Species::Bet.index()] = [0.75, 0.0, 0.25, 0.0];
    cfg
}

#[test]
fn misclassified_bigeye_matches_the_closed_form() {
    // per run, |error| of BET and YFT is exactly 100 * (#BET seen as YFT) / N;
    // over runs its mean approaches 100 * 0.25 * n_bet / N
    let m = MotionConfig::default();
    let runs = 300;
    let mut sum = 0.0;
    let mut sq = 0.0;
    for seed in 0..runs {
        let cfg = confused(seed);
        let n = cfg.total_fish() as f64;
        let s = generate_scenario(&cfg).unwrap();
        let flipped = s.truth.fish.iter().filter(|f| f.species == Species::Bet && f.perceived == Species::Yft).count();
        let e = end_to_end_error(&cfg, &TrackerConfig::default(), &AggregationConfig::default(), &m).unwrap();
        let want = 100.0 * flipped as f64 / n;
        assert!((e.abs_error[Species::Bet] - want).abs() < 1e-9, "seed {seed}");
        assert!((e.abs_error[Species::Yft] - want).abs() < 1e-9, "seed {seed}");
        assert!(e.abs_error[Species::Skj] < 1e-9 && e.abs_error[Species::NoTarget] < 1e-9);
        sum += e.abs_error[Species::Bet];
        sq += e.abs_error[Species::Bet].powi(2);
    }
    let mean = sum / runs as f64;
    let expected = 100.0 * 0.25 * 8.0 / 20.0;
    let sd = (sq / runs as f64 - mean * mean).sqrt();
    let se = sd / (runs as f64).sqrt();
    assert!(mean > 0.0);
    assert!((mean - expected).abs() < 4.0 * se, "mean {mean}, expected {expected}, se {se}");
}

#[test]
fn hierarchical_labels_agree_on_induced_stage_scores() {
    let m = MotionConfig::default();
    for seed in 0..20 {
        let cfg = confused(seed);
        let s = generate_scenario(&cfg).unwrap();
        let tc = TrackerConfig::default();
        let tracks = run_tracker(&s.stream, &s.motions(&m), &tc, s.geometry(&m)).unwrap();
        let flat = label_all(&tracks, &AggregationConfig::default(), tc.tentative_min_hits).unwrap();
        let hier = AggregationConfig { method: Method::Hierarchical, ..AggregationConfig::default() };
        let hier = label_all(&tracks, &hier, tc.tentative_min_hits).unwrap();
        let a: Vec<_> = flat.iter().map(|l| l.label).collect();
        let b: Vec<_> = hier.iter().map(|l| l.label).collect();
        assert_eq!(a, b, "seed {seed}");
    }
}

#[test]
fn zero_tracks_give_no_labels() {
    assert!(label_all(&[], &AggregationConfig::default(), 3).unwrap().is_empty());
    assert!(estimate_composition(&[], "x").is_err());
}

fn arb_counts() -> impl Strategy<Value = [u64; 4]> {
    prop::array::uniform4(0u64..30).prop_filter("nonempty", |c| c.iter().sum::<u64>() > 0)
}

proptest! {
    #[test]
    fn percentages_sum_to_100(c in arb_counts()) {
        let e = CompositionEstimate::from_counts("x", PerSpecies(c)).unwrap();
        prop_assert!((e.percentages.0.iter().sum::<f64>() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn species_mae_ignores_afo_order(rows in prop::collection::vec((arb_counts(), arb_counts()), 2..8), rot in 0usize..8) {
        let gts: Vec<GroundTruthOperation> = rows.iter().enumerate()
            .map(|(i, (g, _))| GroundTruthOperation::new(format!("{}_{i}", i % 2 + 1), PerSpecies(*g)).unwrap())
            .collect();
        let est: Vec<CompositionEstimate> = rows.iter().enumerate()
            .map(|(i, (_, p))| CompositionEstimate::from_counts(format!("{}_{i}", i % 2 + 1), PerSpecies(*p)).unwrap())
            .collect();
        let a = species_mae(&est, &gts, &Grouping::IdPrefix, SdConvention::Sample).unwrap();
        let mut est2 = est.clone();
        est2.rotate_left(rot % est.len());
        est2.reverse();
        let b = species_mae(&est2, &gts, &Grouping::IdPrefix, SdConvention::Sample).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn estimate_against_itself_is_exact(rows in prop::collection::vec(arb_counts(), 1..6)) {
        let pairs: Vec<CompositionPair> = rows.iter().enumerate().map(|(i, c)| {
            let p = CompositionEstimate::from_counts(i.to_string(), PerSpecies(*c)).unwrap().percentages;
            CompositionPair { afo_id: i.to_string(), group: "g".into(), predicted: p, truth: p }
        }).collect();
        let t = error_table(&pairs, SdConvention::Sample).unwrap();
        for g in &t.groups {
            for s in Species::ALL {
                prop_assert_eq!(g.species[s].mae.mean, 0.0);
                prop_assert_eq!(g.species[s].mae.sd, 0.0);
                prop_assert!(g.species[s].wilcoxon.degenerate);
            }
        }
    }
}

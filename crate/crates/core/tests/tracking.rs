use catchcomp::aggregate::AggregationConfig;
use catchcomp::detection::{ClassScores, Detection, FrameDetections};
use catchcomp::geometry::BBox;
use catchcomp::motion::MotionConfig;
use catchcomp::sim::{
    end_to_end_error, generate_scenario, identity_report, stop_and_reverse_events, SimConfig, StopEvent,
};
use catchcomp::stats::{wilcoxon_with, Alternative, TestMethod, WilcoxonOptions};
use catchcomp::tracker::{run_tracker, FrameGeometry, TrackerConfig};

fn geometry() -> FrameGeometry {
    FrameGeometry::new(640.0, 360.0, &MotionConfig::default())
}

fn det(frame: u64, x: f64, y: f64) -> Detection {
    Detection::new(frame, BBox::new(x, y, 120.0, 48.0).unwrap(), 0.9)
        .unwrap()
        .with_class_scores(ClassScores::new([0.7, 0.1, 0.1, 0.1]).unwrap())
}

#[test]
fn two_fish_with_a_five_frame_occlusion_stay_two_tracks() {
    // B trails A by 70 px in an overlapping lane and drops out for 5 frames
    let mut stream = Vec::new();
    for f in 0..90u64 {
        let xa = -100.0 + 8.0 * f as f64;
        let xb = xa - 70.0;
        let mut dets = Vec::new();
        for (x, y) in [(xa, 150.0), (xb, 170.0)] {
            if x + 120.0 > 0.0 && x < 640.0 {
                let x0 = x.max(0.0);
                let w = (x + 120.0).min(640.0) - x0;
                if w >= 60.0 && !((40..45).contains(&f) && y == 170.0) {
                    dets.push(Detection::new(f, BBox::new(x0, y, w, 48.0).unwrap(), 0.9).unwrap());
                }
            }
        }
        stream.push(FrameDetections { frame: f, flow: None, detections: dets });
    }
    let cfg = TrackerConfig::default();
    let tracks = run_tracker(&stream, &Default::default(), &cfg, geometry()).unwrap();
    let counted: Vec<_> = tracks.iter().filter(|t| t.is_counted(&cfg)).collect();
    assert_eq!(counted.len(), 2, "{:#?}", counted.iter().map(|t| (t.track_id, t.hits)).collect::<Vec<_>>());
}

#[test]
fn hand_built_crossing_with_identical_boxes_in_a_stop() {
    // belt stopped for 50 frames with the fish mid-frame: boxes repeat
    let mut stream = Vec::new();
    let mut x = -60.0;
    for f in 0..200u64 {
        let moving = !(40..90).contains(&f);
        let flow = if moving { 8.0 } else { 0.0 };
        if moving {
            x += 8.0;
        }
        let dets = if x >= 0.0 && x + 120.0 <= 640.0 { vec![det(f, x, 100.0)] } else { vec![] };
        stream.push(FrameDetections {
            frame: f,
            flow: Some(catchcomp::motion::FlowVector::new(flow, 0.0)),
            detections: dets,
        });
    }
    let m = MotionConfig::default();
    let motions = catchcomp::tracker::motions_from_stream(&stream, &m);
    let cfg = TrackerConfig::default();
    let tracks = run_tracker(&stream, &motions, &cfg, geometry()).unwrap();
    assert_eq!(tracks.iter().filter(|t| t.is_counted(&cfg)).count(), 1);
}

#[test]
fn belt_stop_mid_crossing_keeps_the_count() {
    let m = MotionConfig::default();
    let cfg = TrackerConfig::default();
    for seed in 0..20 {
        let plain = SimConfig::noiseless(seed);
        let stopped =
            SimConfig { stop_events: vec![StopEvent { start: 100, duration: 50, reverse: false }], ..plain.clone() };
        let count = |c: &SimConfig| {
            let s = generate_scenario(c).unwrap();
            let tracks = run_tracker(&s.stream, &s.motions(&m), &cfg, s.geometry(&m)).unwrap();
            tracks.iter().filter(|t| t.is_counted(&cfg)).count()
        };
        let a = count(&plain);
        assert_eq!(a, plain.total_fish() as usize);
        assert_eq!(count(&stopped), a, "seed {seed}");
    }
}

#[test]
fn noiseless_runs_recover_counts_and_labels() {
    let m = MotionConfig::default();
    for seed in 0..100 {
        let e =
            end_to_end_error(&SimConfig::noiseless(seed), &TrackerConfig::default(), &AggregationConfig::default(), &m)
                .unwrap();
        assert_eq!(e.identity.counted_tracks, e.identity.fish, "seed {seed}");
        assert_eq!(e.identity.duplicates + e.identity.missed + e.identity.spurious, 0);
        assert_eq!(e.abs_error.0, [0.0; 4], "seed {seed}");
        assert_eq!(e.estimate.segmented_fraction, Some(100.0));
    }
}

#[test]
fn tracking_is_deterministic() {
    let m = MotionConfig::default();
    let s = generate_scenario(&SimConfig {
        miss_prob: 0.2,
        jitter_sd: 1.5,
        false_positive_rate: 0.2,
        ..SimConfig::default()
    })
    .unwrap();
    let run = || run_tracker(&s.stream, &s.motions(&m), &TrackerConfig::default(), s.geometry(&m)).unwrap();
    assert_eq!(run(), run());
}

/// Every started track, confirmed or not, per fish.
fn fragments(seed: u64, miss: f64) -> f64 {
    let m = MotionConfig::default();
    let cfg = SimConfig { miss_prob: miss, jitter_sd: 1.0, ..SimConfig::noiseless(seed) };
    let s = generate_scenario(&cfg).unwrap();
    let tracks = run_tracker(&s.stream, &s.motions(&m), &TrackerConfig::default(), s.geometry(&m)).unwrap();
    tracks.len() as f64 / s.truth.fish.len() as f64
}

#[test]
fn more_misses_never_mean_less_fragmentation() {
    let levels = [0.0, 0.3, 0.6, 0.9];
    let frag: Vec<Vec<f64>> = levels.iter().map(|&p| (0..50).map(|seed| fragments(seed, p)).collect()).collect();
    for w in frag.windows(2) {
        let decreases = w[0].iter().zip(&w[1]).filter(|(a, b)| b < a).count();
        let increases = w[0].iter().zip(&w[1]).filter(|(a, b)| b > a).count();
        // one-sided sign test of "fragmentation drops": must not be significant
        let opts = WilcoxonOptions { alternative: Alternative::Greater, method: Some(TestMethod::Exact) };
        let signs_down: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).signum()).collect();
        let zeros = vec![0.0; signs_down.len()];
        let p = wilcoxon_with(&signs_down, &zeros, opts).unwrap().p_value;
        assert!(p > 0.05, "fragmentation dropped: {decreases} down, {increases} up, p {p}");
        assert!(increases >= decreases);
    }
    // and it does grow overall
    let up = frag[0].iter().zip(&frag[3]).filter(|(a, b)| b > a).count();
    assert!(up >= 45, "{up}");
}

#[test]
fn gating_lowers_error_after_a_reversal() {
    let m = MotionConfig::default();
    let agg = AggregationConfig::default();
    let gated = TrackerConfig::default();
    let ungated = TrackerConfig { gating: false, ..TrackerConfig::default() };
    let total = |e: &catchcomp::sim::EndToEnd| e.abs_error.0.iter().sum::<f64>();
    let cfg = SimConfig { stop_events: stop_and_reverse_events(1), ..SimConfig::noiseless(1) };
    let on = end_to_end_error(&cfg, &gated, &agg, &m).unwrap();
    let off = end_to_end_error(&cfg, &ungated, &agg, &m).unwrap();
    assert!(total(&off) > total(&on));
    assert_eq!(total(&on), 0.0);
    for seed in 0..30 {
        let cfg = SimConfig { stop_events: stop_and_reverse_events(seed), ..SimConfig::noiseless(seed) };
        let on = end_to_end_error(&cfg, &gated, &agg, &m).unwrap();
        let off = end_to_end_error(&cfg, &ungated, &agg, &m).unwrap();
        assert!(total(&on) <= total(&off), "seed {seed}");
    }
}

#[test]
fn identity_report_sees_duplicates_without_gating() {
    let m = MotionConfig::default();
    let cfg = SimConfig { stop_events: stop_and_reverse_events(1), ..SimConfig::noiseless(1) };
    let s = generate_scenario(&cfg).unwrap();
    let tc = TrackerConfig { gating: false, ..TrackerConfig::default() };
    let tracks = run_tracker(&s.stream, &s.motions(&m), &tc, s.geometry(&m)).unwrap();
    let r = identity_report(&s, &tracks, tc.tentative_min_hits);
    assert!(r.duplicates > 0);
    assert_eq!(r.counted_tracks, r.fish - r.missed + r.duplicates + r.spurious);
}

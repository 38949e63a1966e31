//! Small hand-written SVG plots for `report`.

use std::fmt::Write as _;

use crate::stats::CocoResult;
use crate::taxonomy::{PerSpecies, Species};

const COLOURS: [&str; 4] = ["#c0392b", "#2471a3", "#d4ac0d", "#7f8c8d"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One operation in the composition chart.
pub struct CompositionBar<'a> {
    pub afo_id: &'a str,
    pub predicted: PerSpecies<f64>,
    pub truth: Option<PerSpecies<f64>>,
}

/// Stacked 100% bars per AFO: predicted, and ground truth next to it when
/// known.
pub fn composition_bars(bars: &[CompositionBar]) -> String {
    let bar_w = 18.0;
    let gap = 14.0;
    let left = 50.0;
    let top = 20.0;
    let plot_h = 220.0;
    let per_afo = 2.0 * bar_w + gap;
    let width = left + per_afo * bars.len().max(1) as f64 + 130.0;
    let height = top + plot_h + 70.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
    );
    for pct in [0, 25, 50, 75, 100] {
        let y = top + plot_h * (1.0 - pct as f64 / 100.0);
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##, width - 130.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{pct}%</text>"#, left - 4.0, y + 3.0);
    }
    let stack = |s: &mut String, x: f64, v: &PerSpecies<f64>, opacity: f64| {
        let total: f64 = v.0.iter().sum();
        let mut y = top + plot_h;
        for sp in Species::ALL {
            let h = if total > 0.0 { plot_h * v[sp] / total } else { 0.0 };
            y -= h;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{bar_w}" height="{h:.2}" fill="{}" fill-opacity="{opacity}"><title>{sp} {:.1}%</title></rect>"#,
                COLOURS[sp.index()],
                v[sp]
            );
        }
    };
    for (i, b) in bars.iter().enumerate() {
        let x = left + gap / 2.0 + per_afo * i as f64;
        stack(&mut s, x, &b.predicted, 1.0);
        if let Some(t) = &b.truth {
            stack(&mut s, x + bar_w, t, 0.45);
        }
        let lx = x + bar_w;
        let ly = top + plot_h + 12.0;
        let _ = writeln!(
            s,
            r#"<text x="{lx:.2}" y="{ly}" text-anchor="end" transform="rotate(-45 {lx:.2} {ly})">{}</text>"#,
            escape(b.afo_id)
        );
    }
    let lx = width - 120.0;
    for sp in Species::ALL {
        let y = top + 14.0 * sp.index() as f64;
        let _ = writeln!(s, r#"<rect x="{lx}" y="{y}" width="10" height="10" fill="{}"/>"#, COLOURS[sp.index()]);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{sp}</text>"#, lx + 14.0, y + 9.0);
    }
    let _ = writeln!(s, r#"<text x="{lx}" y="{}">left: predicted</text>"#, top + 70.0);
    let _ = writeln!(s, r#"<text x="{lx}" y="{}">right: truth</text>"#, top + 84.0);
    s.push_str("</svg>\n");
    s
}

/// Precision-recall curves at IoU 0.5 and 0.75 for each result.
pub fn pr_curves(results: &[(&str, &CocoResult)]) -> String {
    let (left, top, w, h) = (50.0, 20.0, 300.0, 220.0);
    let width = left + w + 160.0;
    let height = top + h + 40.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r##"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="#888"/>"##);
    for t in [0.0, 0.5, 1.0] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{t}</text>"#, left + w * t, top + h + 14.0);
        let _ =
            writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{t}</text>"#, left - 4.0, top + h * (1.0 - t) + 3.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">recall</text>"#, left + w / 2.0, top + h + 30.0);
    let mut legend = 0;
    for (ci, (name, r)) in results.iter().enumerate() {
        for (di, target) in [0.5, 0.75].iter().enumerate() {
            let Some(t) = r.thresholds.iter().find(|t| (t.iou - target).abs() < 1e-9) else { continue };
            let mut pts = String::new();
            let mut prev = (0.0, t.curve.first().map_or(0.0, |c| c.1));
            let _ = write!(pts, "{:.2},{:.2}", left + w * prev.0, top + h * (1.0 - prev.1));
            for &(rc, pr) in &t.curve {
                // step: move right at the previous precision, then jump
                let _ = write!(pts, " {:.2},{:.2}", left + w * rc, top + h * (1.0 - prev.1));
                let _ = write!(pts, " {:.2},{:.2}", left + w * rc, top + h * (1.0 - pr));
                prev = (rc, pr);
            }
            let dash = if di == 0 { "" } else { r#" stroke-dasharray="4 3""# };
            let colour = COLOURS[ci % COLOURS.len()];
            let _ = writeln!(s, r#"<polyline points="{pts}" fill="none" stroke="{colour}"{dash}/>"#);
            let ly = top + 14.0 * legend as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{colour}"{dash}/>"#,
                left + w + 10.0,
                ly + 5.0,
                left + w + 30.0,
                ly + 5.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}">{} IoU {target} AP {:.3}</text>"#,
                left + w + 34.0,
                ly + 9.0,
                escape(name),
                t.ap
            );
            legend += 1;
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::stats::{coco_map, GroundTruthBox, Interpolation, IouKind, ScoredPrediction};

    #[test]
    fn composition_chart_has_a_rect_per_species_and_bar() {
        let bars = [
            CompositionBar { afo_id: "1_01", predicted: PerSpecies([10.0, 50.0, 30.0, 10.0]), truth: None },
            CompositionBar {
                afo_id: "a<b",
                predicted: PerSpecies([0.0, 100.0, 0.0, 0.0]),
                truth: Some(PerSpecies([25.0; 4])),
            },
        ];
        let svg = composition_bars(&bars);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<title>").count(), 12);
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn pr_chart_is_deterministic() {
        let bb = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let p = [ScoredPrediction { image: 0, bbox: bb, mask: None, confidence: 0.9 }];
        let g = [GroundTruthBox { image: 0, bbox: bb, mask: None }];
        let r = coco_map(&p, &g, IouKind::Box, Interpolation::Coco101).unwrap();
        let a = pr_curves(&[("box", &r)]);
        assert_eq!(a, pr_curves(&[("box", &r)]));
        assert_eq!(a.matches("<polyline").count(), 2);
    }
}

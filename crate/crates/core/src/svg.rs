//! Deterministic SVG rendering of an eigenvalue spectrum against the unit
//! circle. No plotting toolkit: the output is a plain string, stable across
//! runs, so it can be golden-tested and diffed.

use crate::dmd::{SpectrumReport, StabilityFlag};

const SIZE: f64 = 440.0;
const MARGIN: f64 = 28.0;

/// Draw the unit circle, axes, and one marker per eigenvalue.
pub fn spectrum_svg(report: &SpectrumReport) -> String {
    let center = SIZE / 2.0;
    let max_mag = report
        .entries
        .iter()
        .map(|e| e.magnitude)
        .fold(1.0f64, f64::max);
    let scale = 1.15 * max_mag;
    let ppu = (SIZE / 2.0 - MARGIN) / scale;
    let unit_r = ppu;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" \
         viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    ));
    s.push_str(&format!(
        "  <rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"#ffffff\"/>\n"
    ));
    // Axes.
    s.push_str(&format!(
        "  <line x1=\"{MARGIN}\" y1=\"{center}\" x2=\"{:.2}\" y2=\"{center}\" \
         stroke=\"#cccccc\" stroke-width=\"1\"/>\n",
        SIZE - MARGIN
    ));
    s.push_str(&format!(
        "  <line x1=\"{center}\" y1=\"{MARGIN}\" x2=\"{center}\" y2=\"{:.2}\" \
         stroke=\"#cccccc\" stroke-width=\"1\"/>\n",
        SIZE - MARGIN
    ));
    // Unit circle.
    s.push_str(&format!(
        "  <circle cx=\"{center}\" cy=\"{center}\" r=\"{unit_r:.2}\" fill=\"none\" \
         stroke=\"#888888\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n"
    ));
    // Eigenvalue markers; the dominant one is drawn larger.
    for (i, e) in report.entries.iter().enumerate() {
        let x = center + e.eigenvalue.re * ppu;
        let y = center - e.eigenvalue.im * ppu;
        let radius = if i == report.dominant_index { 6.0 } else { 4.5 };
        let color = if e.magnitude > 1.0 + crate::dmd::TOL_UNIT {
            "#d62728"
        } else {
            "#1f77b4"
        };
        s.push_str(&format!(
            "  <circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{radius}\" fill=\"{color}\" \
             fill-opacity=\"0.85\"><title>lambda_{i} = {:.6} {:+.6}i (|lambda| = {:.6})</title></circle>\n",
            e.eigenvalue.re, e.eigenvalue.im, e.magnitude
        ));
    }
    let flag = match report.flag {
        StabilityFlag::Stable => "stable",
        StabilityFlag::Marginal => "marginal",
        StabilityFlag::Exploding => "exploding",
    };
    s.push_str(&format!(
        "  <text x=\"{MARGIN}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"13\" \
         fill=\"#333333\">dominant |lambda| = {:.6} ({flag})</text>\n",
        SIZE - 8.0,
        report.entries[report.dominant_index].magnitude
    ));
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmd::{fit, spectrum_report, ModeKind};
    use crate::numerics::RankPolicy;
    use crate::trajectory::TrajectorySet;

    fn report_for(states: Vec<Vec<f64>>, rank: usize) -> SpectrumReport {
        let data = TrajectorySet::single(states, 1.0, 0.0).unwrap();
        let model = fit(&data, RankPolicy::Fixed(rank), ModeKind::Exact).unwrap();
        spectrum_report(&model)
    }

    #[test]
    fn markers_match_eigenvalue_count_and_output_is_stable() {
        let states: Vec<Vec<f64>> = (0..9)
            .map(|k| vec![0.9f64.powi(k), 0.5f64.powi(k)])
            .collect();
        let report = report_for(states, 2);
        let svg = spectrum_svg(&report);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        // Two markers, the dashed unit circle, and the legend line.
        assert_eq!(svg.matches("<circle cx=").count(), 3);
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("stable"));
        assert_eq!(svg, spectrum_svg(&report));
    }

    #[test]
    fn growing_eigenvalue_marked_red() {
        let states: Vec<Vec<f64>> = (0..8).map(|k| vec![1.05f64.powi(k)]).collect();
        let svg = spectrum_svg(&report_for(states, 1));
        assert!(svg.contains("#d62728"));
        assert!(svg.contains("exploding"));
    }

    #[test]
    fn conjugate_pair_markers_mirror_about_real_axis() {
        // Rotation-flavored data produces a conjugate eigenvalue pair.
        let states: Vec<Vec<f64>> = (0..10)
            .map(|k| {
                let t = k as f64 * 0.7;
                vec![0.95f64.powi(k) * t.cos(), 0.95f64.powi(k) * t.sin()]
            })
            .collect();
        let report = report_for(states, 2);
        assert!(report.entries[0].eigenvalue.im > 0.0);
        let svg = spectrum_svg(&report);
        // Marker y-coordinates are mirrored around the canvas center.
        let cys: Vec<f64> = svg
            .match_indices("cy=\"")
            .filter_map(|(i, _)| {
                let rest = &svg[i + 4..];
                rest.split('"').next().and_then(|v| v.parse().ok())
            })
            .skip(1) // first match is the unit circle itself
            .collect();
        assert_eq!(cys.len(), 2);
        assert!((cys[0] + cys[1] - 2.0 * 220.0).abs() < 0.02, "{cys:?}");
    }

    #[test]
    fn single_marker_on_circle_at_angle_zero() {
        let states = vec![vec![2.0]; 6];
        let report = report_for(states, 1);
        let svg = spectrum_svg(&report);
        // lambda = 1: the marker sits on the circle along the +x axis.
        let center = 220.0;
        let ppu = (220.0 - 28.0) / 1.15;
        let expected = format!("cx=\"{:.2}\" cy=\"{center:.2}\"", center + ppu);
        assert!(svg.contains(&expected), "{svg}");
    }
}

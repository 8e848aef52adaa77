//! Minimal log-log scatter plots written as SVG text.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 480.0;
const M: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Scatter plot with logarithmic axes; non-positive points are skipped.
pub fn log_log(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let pts = || series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0 > 0.0 && p.1 > 0.0);
    let (x0, x1) = bounds(pts().map(|p| p.0.log10()));
    let (y0, y1) = bounds(pts().map(|p| p.1.log10()));
    let sx = |x: f64| M + (x.log10() - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y.log10() - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{title}</text>"#, W / 2.0);
    let _ = writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    for d in (x0.floor() as i32)..=(x1.ceil() as i32) {
        let x = 10f64.powi(d);
        if (d as f64) < x0 - 1e-9 || (d as f64) > x1 + 1e-9 {
            continue;
        }
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="11">1e{d}</text>"#, sx(x), H - M + 16.0);
    }
    for d in (y0.floor() as i32)..=(y1.ceil() as i32) {
        let y = 10f64.powi(d);
        if (d as f64) < y0 - 1e-9 || (d as f64) > y1 + 1e-9 {
            continue;
        }
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end" font-size="11">1e{d}</text>"#, M - 6.0, sy(y) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{xlabel}</text>"#, W / 2.0, H - 14.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        for &(x, y) in ser.points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0) {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let ly = M + 16.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<circle cx="{}" cy="{ly}" r="4" fill="{color}"/>"#, W - M - 80.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12">{}</text>"#, W - M - 70.0, ly + 4.0, ser.label);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_points_and_legend() {
        let svg = log_log(
            "t",
            "x",
            "y",
            &[Series { label: "a".into(), points: vec![(0.1, 1.0), (1.0, 10.0), (-1.0, 2.0)] }, Series { label: "b".into(), points: vec![(0.5, 3.0)] }],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        // three plotted points plus two legend markers
        assert_eq!(svg.matches("<circle").count(), 5);
    }
}

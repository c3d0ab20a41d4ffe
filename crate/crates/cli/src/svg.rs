//! Static log-log line plots.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 7] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Plots every series on log₂ axes; non-positive points are skipped.
pub fn log_log(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let logs: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| s.points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite()).map(|(x, y)| (x.log2(), y.log2())).collect())
        .collect();
    let all = logs.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    for k in (x0 as i64)..=(x1 as i64) {
        let x = px(k as f64);
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{}" text-anchor="middle">2^{k}</text>"#, H - PAD + 18.0);
    }
    for k in (y0 as i64)..=(y1 as i64) {
        let y = py(k as f64);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">2^{k}</text>"#, PAD - 6.0, y + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (i, (s, pts)) in series.iter().zip(&logs).enumerate() {
        let color = COLORS[i % COLORS.len()];
        if !pts.is_empty() {
            let d: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
            let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.join(" "));
        }
        let ly = PAD + 16.0 * i as f64;
        let _ = writeln!(svg, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, W - PAD - 90.0, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

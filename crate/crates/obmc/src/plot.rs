//! Minimal SVG log-log plots of rate tables: axes, points, fitted lines and
//! slope labels.

use std::fmt::Write as _;

use crate::table::RateRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Plots `log mean_excess` against `log n` for every group with a fit.
pub fn rate_svg(rows: &[RateRow]) -> String {
    let series: Vec<(&RateRow, &obmc_core::RateFit)> = rows
        .iter()
        .filter_map(|r| r.excess.as_ref().map(|f| (r, f)))
        .collect();
    let pts = series.iter().flat_map(|(_, f)| f.points.iter().copied());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for (x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{l} {t} L{l} {b} L{r} {b}" stroke="black" fill="none"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">log n</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">log mean excess</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (x, anchor, xx, yy) in [(x0, "start", l, b + 15.0), (x1, "end", r, b + 15.0)] {
        let _ = writeln!(
            s,
            r#"<text x="{xx}" y="{yy}" text-anchor="{anchor}">{x:.2}</text>"#
        );
    }
    for (y, yy) in [(y0, b), (y1, t + 10.0)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{yy}" text-anchor="end">{y:.2}</text>"#,
            l - 5.0
        );
    }
    for (k, (row, fit)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        for &(x, y) in &fit.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let line = |x: f64| fit.intercept + fit.slope * x;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}"/>"#,
            sx(x0),
            sy(line(x0)),
            sx(x1),
            sy(line(x1))
        );
        let label = format!(
            "{} {}x{} r={} gamma={}: slope {:.3}",
            row.estimator.name(),
            row.m1,
            row.m2,
            row.r,
            row.gamma,
            fit.slope
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            l + 10.0,
            t + 15.0 * (k as f64 + 1.0),
            escape(&label)
        );
    }
    s.push_str("</svg>\n");
    s
}

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::metrics::Metrics;
use super::replay::{mean_and_stderr, EvalReport};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// One labelled curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Mean and standard error across series at every x that appears in any
/// of them.
pub fn mean_band(series: &[Series]) -> Vec<(f64, f64, f64)> {
    let mut by_x: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for s in series {
        for &(x, y) in &s.points {
            if y.is_finite() {
                by_x.entry(x.to_bits()).or_insert((x, Vec::new())).1.push(y);
            }
        }
    }
    let mut out: Vec<(f64, f64, f64)> = by_x
        .into_values()
        .filter_map(|(x, ys)| mean_and_stderr(&ys).map(|(m, se)| (x, m, se)))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Renders a learning-curve SVG: one polyline per series, plus the mean
/// across series with a ±1 standard error band when `band` is set.
pub fn render_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    band: bool,
) -> String {
    let all: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .collect();
    let stats = if band { mean_band(series) } else { Vec::new() };
    let (mut x0, mut x1) = bounds(all.iter().map(|p| p.0));
    let (mut y0, mut y1) = bounds(
        all.iter()
            .map(|p| p.1)
            .chain(stats.iter().flat_map(|&(_, m, se)| [m - se, m + se])),
    );
    if x1 <= x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y1 <= y0 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    // axes and ticks
    let _ = writeln!(
        svg,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{l:.1}" y1="{b:.1}" x2="{r:.1}" y2="{b:.1}"/><line x1="{l:.1}" y1="{t:.1}" x2="{l:.1}" y2="{b:.1}"/></g>"#,
        l = MARGIN_L,
        r = WIDTH - MARGIN_R,
        t = MARGIN_T,
        b = HEIGHT - MARGIN_B
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(fx),
            HEIGHT - MARGIN_B + 18.0,
            tick(fx)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            sy(fy) + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0,
        escape(y_label)
    );

    if band && stats.len() > 1 {
        let mut d = String::new();
        for (i, &(x, m, se)) in stats.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.2},{:.2} ",
                if i == 0 { "M" } else { "L" },
                sx(x),
                sy(m + se)
            );
        }
        for &(x, m, se) in stats.iter().rev() {
            let _ = write!(d, "L{:.2},{:.2} ", sx(x), sy(m - se));
        }
        let _ = writeln!(
            svg,
            r##"<path class="band" d="{}Z" fill="#000000" fill-opacity="0.12" stroke="none"/>"##,
            d
        );
    }
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let colour = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<polyline class="series" fill="none" stroke="{colour}" stroke-width="1.2" stroke-opacity="0.8" points="{}"><title>{}</title></polyline>"#,
            pts.join(" "),
            escape(&s.label)
        );
        let _ = writeln!(
            svg,
            r#"<text class="legend" x="{:.1}" y="{:.1}" fill="{colour}">{}</text>"#,
            WIDTH - MARGIN_R - 120.0,
            MARGIN_T + 14.0 * (i as f64 + 1.0),
            escape(&s.label)
        );
    }
    if band && !stats.is_empty() {
        let d: Vec<String> = stats
            .iter()
            .enumerate()
            .map(|(i, &(x, m, _))| {
                format!(
                    "{}{:.2},{:.2}",
                    if i == 0 { "M" } else { "L" },
                    sx(x),
                    sy(m)
                )
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<path class="mean" d="{}" fill="none" stroke="black" stroke-width="2.2"/>"#,
            d.join(" ")
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Interval returns per member against environment steps.
pub fn plot_metrics(metrics: &Metrics, title: &str) -> String {
    let series: Vec<Series> = metrics
        .members()
        .into_iter()
        .map(|m| Series {
            label: format!("member {m}"),
            points: metrics.curve(m),
        })
        .collect();
    render_svg(title, "environment steps", "interval return", &series, true)
}

/// Replay learning curves, one per seed.
pub fn plot_report(report: &EvalReport) -> String {
    let series: Vec<Series> = report
        .per_seed
        .iter()
        .map(|r| Series {
            label: format!("seed {}", r.seed),
            points: r.curve.iter().map(|c| (c.step as f64, c.score)).collect(),
        })
        .collect();
    render_svg(
        &format!("replay of {}", report.schedule_id),
        "environment steps",
        "interval return",
        &series,
        true,
    )
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 {
        format!("{:.0}k", v / 1e3)
    } else if v.abs() >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

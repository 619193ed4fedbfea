//! Minimal SVG line chart with a log-scaled y axis.

use std::fmt::Write;

pub struct Series {
    pub label: String,
    pub points: Vec<(usize, f64)>,
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const LEGEND_ROWS: usize = 20;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One polyline per series; non-positive values break the line.
pub fn render_svg(title: &str, series: &[Series]) -> String {
    let positive = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.1 > 0.0 && p.1.is_finite());
    let (mut lo, mut hi, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY, 1usize);
    for &(t, v) in positive {
        lo = lo.min(v.log10());
        hi = hi.max(v.log10());
        tmax = tmax.max(t);
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    let (lo, hi) = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let x = |t: usize| LEFT + pw * t as f64 / tmax as f64;
    let y = |v: f64| TOP + ph * (hi - v.log10()) / (hi - lo);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, escape(title));
    let _ = writeln!(
        out,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
    );
    let step = ((hi - lo) / 8.0).ceil().max(1.0);
    let mut e = lo;
    while e <= hi {
        let yy = TOP + ph * (hi - e) / (hi - lo);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            yy + 4.0
        );
        e += step;
    }
    let xticks = 5.min(tmax);
    for k in 0..=xticks {
        let t = tmax * k / xticks;
        let xx = x(t);
        let _ = writeln!(
            out,
            r##"<line x1="{xx:.2}" y1="{:.2}" x2="{xx:.2}" y2="{:.2}" stroke="#333"/><text x="{xx:.2}" y="{:.2}" text-anchor="middle">{t}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">gradient norm (M*)</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut segment: Vec<String> = Vec::new();
        let flush = |segment: &mut Vec<String>, out: &mut String| {
            if !segment.is_empty() {
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    segment.join(" ")
                );
                segment.clear();
            }
        };
        for &(t, v) in &s.points {
            if v > 0.0 && v.is_finite() {
                segment.push(format!("{:.2},{:.2}", x(t), y(v)));
            } else {
                flush(&mut segment, &mut out);
            }
        }
        flush(&mut segment, &mut out);
        if i < LEGEND_ROWS {
            let ly = TOP + 14.0 * i as f64 + 8.0;
            let lx = WIDTH - RIGHT + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                lx + 18.0,
                lx + 22.0,
                ly + 4.0,
                escape(&s.label)
            );
        }
    }
    if series.len() > LEGEND_ROWS {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">+{} more</text>"#,
            WIDTH - RIGHT + 12.0,
            TOP + 14.0 * LEGEND_ROWS as f64 + 12.0,
            series.len() - LEGEND_ROWS
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_series_gives_one_polyline_on_a_log_axis() {
        let s = Series {
            label: "a@s0".into(),
            points: vec![(0, 1.0), (1, 0.1), (2, 0.01)],
        };
        let svg = render_svg("demo", &[s]);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains(">1e-2<") && svg.contains(">1e0<"));
        assert!(svg.contains(r#"points="70.00,40.00 320.00,225.00 570.00,410.00""#), "{svg}");
    }

    #[test]
    fn zeros_split_the_line() {
        let s = Series {
            label: "z".into(),
            points: vec![(0, 1.0), (1, 0.5), (2, 0.0), (3, 0.1), (4, 0.05)],
        };
        assert_eq!(render_svg("t", &[s]).matches("<polyline").count(), 2);
    }
}

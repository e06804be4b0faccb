//! Minimal SVG trace diagram: axes, one polyline per trace segment,
//! circles at predicted avoidances.

use std::fmt::Write;

use modesub::tracediagram::{AvoidancePrediction, Diagram};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

pub fn render(diagram: &Diagram, avoidances: &[AvoidancePrediction], ylim: f64) -> String {
    let (x0, x1) = (diagram.grid[0], *diagram.grid.last().unwrap());
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT / 2.0 - y / ylim * (HEIGHT / 2.0 - MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    // axes
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        sx(x0),
        sy(0.0),
        sx(x1),
        sy(0.0)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        sx(x0),
        sy(ylim),
        sx(x0),
        sy(-ylim)
    );
    for y in [-ylim, 0.0, ylim] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{y}</text>"#,
            sx(x0) - 6.0,
            sy(y) + 4.0
        );
    }
    for x in [x0, x1] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x}</text>"#,
            sx(x),
            HEIGHT - MARGIN / 2.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">kR/pi ({} {})</text>"#,
        WIDTH / 2.0,
        HEIGHT - 8.0,
        diagram.group,
        serde_json::to_string(&diagram.keep).unwrap_or_default().trim_matches('"')
    );
    for (i, tr) in diagram.traces.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut segment: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, s: &mut String| {
            if seg.len() > 1 {
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{} {}</title></polyline>"#,
                    seg.join(" "),
                    tr.source,
                    tr.label
                );
            }
            seg.clear();
        };
        for sample in &tr.samples {
            match sample.lambda {
                Some(l) if l.abs() <= ylim && !sample.pole_adjacent => {
                    segment.push(format!("{:.2},{:.2}", sx(sample.kr_over_pi), sy(l)));
                }
                _ => flush(&mut segment, &mut s),
            }
        }
        flush(&mut segment, &mut s);
    }
    for a in avoidances {
        let (x, y) = (a.event.kr_over_pi, a.event.lambda);
        if y.abs() <= ylim {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="6" fill="none" stroke="black" stroke-width="1.5"><title>{} x {}: {}</title></circle>"#,
                sx(x),
                sy(y),
                a.event.source_a,
                a.event.source_b,
                a.affected_irreps.join(", ")
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

//! Minimal static SVG line charts.

use std::fmt::Write as _;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 40.0;

pub struct Series<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
}

/// One polyline per series over a shared x axis; y runs over `[y_min, y_max]`.
pub fn line_chart(title: &str, x_labels: (&str, &str), series: &[Series<'_>], y_min: f64, y_max: f64) -> String {
    const COLORS: [&str; 11] = [
        "#000000", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
        "#17becf",
    ];
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let span = (y_max - y_min).max(f64::EPSILON);
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(svg, r#"<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="14">{}</text>"#, escape(title)).unwrap();
    writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="gray"/>"#
    )
    .unwrap();
    for (y, label) in [(MARGIN, y_max), (MARGIN + plot_h, y_min)] {
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{label:.2}</text>"#,
            MARGIN - 4.0,
            y + 3.0
        )
        .unwrap();
    }
    let bottom = HEIGHT - MARGIN + 14.0;
    writeln!(svg, r#"<text x="{MARGIN}" y="{bottom}" font-family="sans-serif" font-size="10">{}</text>"#, escape(x_labels.0)).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{bottom}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
        WIDTH - MARGIN,
        escape(x_labels.1)
    )
    .unwrap();

    for (k, s) in series.iter().enumerate() {
        let n = s.values.len().max(2) - 1;
        let points: Vec<String> = s
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let x = MARGIN + plot_w * i as f64 / n as f64;
                let y = MARGIN + plot_h * (1.0 - ((v - y_min) / span).clamp(0.0, 1.0));
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let color = COLORS[k % COLORS.len()];
        let width = if k == 0 { 1.5 } else { 0.8 };
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{}"><title>{}</title></polyline>"#,
            points.join(" "),
            escape(s.name)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_series() {
        let a = [0.1, 0.5, 0.9];
        let b = [0.2, 0.2];
        let svg = line_chart("t <1>", ("2020", "2021"), &[Series { name: "A", values: &a }, Series { name: "B", values: &b }], 0.0, 1.0);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("t &lt;1&gt;"));
        assert!(svg.ends_with("</svg>\n"));
    }
}

//! Minimal grouped bar chart renderer.

use std::fmt::Write as _;

const PALETTE: [&str; 4] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"];

/// One group of bars sharing an x label; values are in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarGroup {
    pub label: String,
    pub values: Vec<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn bar_chart(title: &str, series: &[&str], groups: &[BarGroup]) -> String {
    let (w, h, left, bottom, top) = (640.0, 360.0, 50.0, 60.0, 40.0);
    let plot_h = h - bottom - top;
    let group_w = (w - left - 20.0) / groups.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let y = top + plot_h * (1.0 - v);
        let _ = writeln!(
            s,
            "<line x1=\"{left}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"#ddd\"/><text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{v:.2}</text>",
            w - 20.0,
            left - 4.0,
            y + 4.0
        );
    }
    for (gi, g) in groups.iter().enumerate() {
        let x0 = left + gi as f64 * group_w + group_w * 0.1;
        for (si, v) in g.values.iter().enumerate() {
            let v = v.clamp(0.0, 1.0);
            let bh = plot_h * v;
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                x0 + si as f64 * bar_w,
                top + plot_h - bh,
                bar_w,
                bh,
                PALETTE[si % PALETTE.len()]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x0 + group_w * 0.4,
            h - bottom + 16.0,
            escape(&g.label)
        );
    }
    for (si, name) in series.iter().enumerate() {
        let x = left + si as f64 * 130.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            h - 22.0,
            PALETTE[si % PALETTE.len()],
            x + 14.0,
            h - 13.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_one_rect_per_value_plus_legend() {
        let svg = bar_chart(
            "a < b",
            &["x", "y"],
            &[BarGroup {
                label: "g".into(),
                values: vec![0.5, 1.0],
            }],
        );
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<rect").count(), 4);
        assert!(svg.contains("a &lt; b"));
    }
}

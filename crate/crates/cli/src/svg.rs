//! Minimal self-contained SVG bar charts.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

/// One bar: axis label and height.
pub struct Bar {
    pub label: String,
    pub value: f64,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders a bar chart. Only bars with a positive value get a `<rect>`;
/// the chart has no background rectangle, so the rect count equals the
/// number of nonzero bars.
pub fn bar_chart(title: &str, y_label: &str, bars: &[Bar]) -> String {
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let max = bars.iter().map(|b| b.value).fold(0.0f64, f64::max);
    let slot = if bars.is_empty() {
        plot_w
    } else {
        plot_w / bars.len() as f64
    };
    let base = HEIGHT - MARGIN;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        out,
        r#"  <text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        MARGIN / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"  <text x="12" y="{:.2}" font-family="sans-serif" font-size="11" transform="rotate(-90 12 {:.2})" text-anchor="middle">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    let _ = writeln!(
        out,
        r##"  <line x1="{MARGIN}" y1="{base}" x2="{:.2}" y2="{base}" stroke="#333" stroke-width="1"/>"##,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        out,
        r##"  <line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{base}" stroke="#333" stroke-width="1"/>"##
    );
    let _ = writeln!(
        out,
        r#"  <text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{max:.4}</text>"#,
        MARGIN - 4.0,
        MARGIN + 4.0
    );

    for (i, bar) in bars.iter().enumerate() {
        if bar.value <= 0.0 {
            continue;
        }
        let h = plot_h * bar.value / max;
        let x = MARGIN + i as f64 * slot;
        let _ = writeln!(
            out,
            r##"  <rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="#4477aa"><title>{}: {:.4}</title></rect>"##,
            base - h,
            (slot * 0.9).max(0.5),
            escape(&bar.label),
            bar.value
        );
    }

    // Label at most ~12 bars so dense histograms stay legible.
    let stride = bars.len().div_ceil(12).max(1);
    for (i, bar) in bars.iter().enumerate().step_by(stride) {
        let _ = writeln!(
            out,
            r#"  <text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="9" text-anchor="middle">{}</text>"#,
            MARGIN + (i as f64 + 0.5) * slot,
            base + 14.0,
            escape(&bar.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_bars_draw_nothing() {
        let bars = [
            Bar {
                label: "a".into(),
                value: 0.0,
            },
            Bar {
                label: "b".into(),
                value: 3.0,
            },
            Bar {
                label: "c".into(),
                value: 1.0,
            },
        ];
        let svg = bar_chart("t", "count", &bars);
        assert_eq!(svg.matches("<rect").count(), 2);
    }

    #[test]
    fn labels_are_escaped() {
        let svg = bar_chart("a<b & c", "y", &[]);
        assert!(svg.contains("a&lt;b &amp; c"));
        assert!(!svg.contains("<rect"));
    }
}

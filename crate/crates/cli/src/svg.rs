//! Minimal SVG writers for heatmaps and bar charts.

use std::fmt::Write;

use firmprod::Matrix;

const CELL: f64 = 24.0;

fn grey(v: f64, lo: f64, hi: f64) -> String {
    let t = if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
    let g = (255.0 * (1.0 - t)).round() as u8;
    format!("#{g:02x}{g:02x}{g:02x}")
}

/// Grid heatmap on a linear grey scale (white = low, black = high) with the
/// value range printed under the grid. Missing cells are drawn red.
pub fn heatmap(title: &str, grid: &Matrix<f64>) -> String {
    let (rows, cols) = (grid.nrows(), grid.ncols());
    let finite = grid.as_slice().iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let width = cols as f64 * CELL + 20.0;
    let height = rows as f64 * CELL + 60.0;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<text x="10" y="16">{}</text>"#, escape(title));
    for r in 0..rows {
        for c in 0..cols {
            let v = grid[(r, c)];
            let fill = if v.is_finite() { grey(v, lo, hi) } else { "#ff0000".into() };
            let _ = writeln!(
                s,
                r##"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#888" stroke-width="0.5"/>"##,
                10.0 + c as f64 * CELL,
                24.0 + r as f64 * CELL
            );
        }
    }
    let range = if lo.is_finite() { format!("min {lo:.4}  max {hi:.4}") } else { "no finite values".into() };
    let _ = writeln!(s, r#"<text x="10" y="{}">{range}</text>"#, height - 12.0);
    s.push_str("</svg>\n");
    s
}

/// Vertical bars, e.g. a scree plot of variance fractions.
pub fn bar_chart(title: &str, labels: &[String], values: &[f64]) -> String {
    let hi = values.iter().copied().fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
    let (bar, plot_h) = (28.0, 160.0);
    let width = values.len() as f64 * bar + 40.0;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{}" font-family="sans-serif" font-size="10">"#, plot_h + 60.0);
    let _ = writeln!(s, r#"<text x="10" y="14">{}</text>"#, escape(title));
    for (i, (l, &v)) in labels.iter().zip(values).enumerate() {
        let h = plot_h * v.max(0.0) / hi;
        let x = 20.0 + i as f64 * bar;
        let _ = writeln!(s, r##"<rect x="{x}" y="{}" width="{}" height="{h}" fill="#555"/>"##, 24.0 + plot_h - h, bar - 4.0);
        let _ = writeln!(s, r#"<text x="{x}" y="{}">{}</text>"#, plot_h + 38.0, escape(l));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_has_one_rect_per_cell_and_annotates_range() {
        let svg = heatmap("plane <1>", &Matrix::from_rows(&[[0.0, 1.0, 2.0], [3.0, 4.0, f64::NAN]]));
        assert_eq!(svg.matches("<rect").count(), 6);
        assert!(svg.contains("min 0.0000  max 4.0000"));
        assert!(svg.contains("#ffffff") && svg.contains("#000000") && svg.contains("#ff0000"));
        assert!(svg.contains("plane &lt;1&gt;"));
    }

    #[test]
    fn bars() {
        let svg = bar_chart("scree", &["PC1".into(), "PC2".into()], &[0.6, 0.3]);
        assert_eq!(svg.matches("<rect").count(), 2);
    }
}

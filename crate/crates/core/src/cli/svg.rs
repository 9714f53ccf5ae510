//! Minimal self-contained SVG plots rendered from the same values as the CSV
//! output. Purely a viewing convenience; nothing downstream parses these.

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 42.0;
const MARGIN_B: f64 = 54.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// One labeled polyline.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn finite_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        return (0.0, 1.0);
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    let s = if !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.4}")
    };
    // Trim trailing zeros of plain decimals for readability.
    if s.contains('.') && !s.contains('e') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN_L + (v - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_B - (v - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn open_svg(out: &mut String, title: &str) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
}

fn draw_axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1) = (MARGIN_L, WIDTH - MARGIN_R);
    let (y0, y1) = (HEIGHT - MARGIN_B, MARGIN_T);
    out.push_str(&format!(
        "<rect x=\"{x0}\" y=\"{y1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#444\"/>\n",
        x1 - x0,
        y0 - y1
    ));
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x_lo + t * (f.x_hi - f.x_lo);
        let yv = f.y_lo + t * (f.y_hi - f.y_lo);
        let xp = f.x(xv);
        let yp = f.y(yv);
        out.push_str(&format!(
            "<line x1=\"{xp:.1}\" y1=\"{y0}\" x2=\"{xp:.1}\" y2=\"{:.1}\" stroke=\"#444\"/>\n",
            y0 + 5.0
        ));
        out.push_str(&format!(
            "<text x=\"{xp:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            y0 + 20.0,
            tick_label(xv)
        ));
        out.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{yp:.1}\" x2=\"{x0}\" y2=\"{yp:.1}\" stroke=\"#444\"/>\n",
            x0 - 5.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            x0 - 9.0,
            yp + 4.0,
            tick_label(yv)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    ));
}

/// Multi-series line plot with shared axes and a legend.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x_lo, x_hi) = finite_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y_lo, y_hi) = finite_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let f = Frame { x_lo, x_hi, y_lo, y_hi };
    let mut out = String::new();
    open_svg(&mut out, title);
    draw_axes(&mut out, &f, x_label, y_label);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for &(x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) {
                continue;
            }
            path.push_str(&format!("{:.2},{:.2} ", f.x(x), f.y(y)));
        }
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
            path.trim_end()
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\" text-anchor=\"end\">{}</text>\n",
            WIDTH - MARGIN_R - 8.0,
            MARGIN_T + 18.0 + 17.0 * i as f64,
            escape(&s.label)
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Heat map over a rectangular grid; `z[i][j]` colors the cell at
/// `(xs[i], ys[j])`. An optional horizontal rule is drawn at `rule_y`.
pub fn heat_map(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    ys: &[f64],
    z: &[Vec<f64>],
    rule_y: Option<f64>,
) -> String {
    let (x_lo, x_hi) = finite_bounds(xs.iter().copied());
    let (y_lo, y_hi) = finite_bounds(ys.iter().copied());
    let f = Frame { x_lo, x_hi, y_lo, y_hi };
    let z_max = z
        .iter()
        .flat_map(|col| col.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    let mut out = String::new();
    open_svg(&mut out, title);
    // Cells first, frame on top.
    for (i, col) in z.iter().enumerate() {
        for (j, &v) in col.iter().enumerate() {
            let t = (v / z_max).clamp(0.0, 1.0);
            let r = (250.0 + t * (8.0 - 250.0)) as u8;
            let g = (250.0 + t * (48.0 - 250.0)) as u8;
            let b = (255.0 + t * (107.0 - 255.0)) as u8;
            // Cell spans halfway to its neighbors.
            let x_left = if i == 0 { xs[0] } else { 0.5 * (xs[i - 1] + xs[i]) };
            let x_right = if i + 1 == xs.len() { xs[i] } else { 0.5 * (xs[i] + xs[i + 1]) };
            let y_low = if j == 0 { ys[0] } else { 0.5 * (ys[j - 1] + ys[j]) };
            let y_high = if j + 1 == ys.len() { ys[j] } else { 0.5 * (ys[j] + ys[j + 1]) };
            out.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"rgb({r},{g},{b})\"/>\n",
                f.x(x_left),
                f.y(y_high),
                f.x(x_right) - f.x(x_left),
                f.y(y_low) - f.y(y_high),
            ));
        }
    }
    if let Some(y) = rule_y {
        if y.is_finite() && y >= f.y_lo && y <= f.y_hi {
            out.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"white\" stroke-width=\"2\" stroke-dasharray=\"6 4\"/>\n",
                f.x(f.x_lo),
                f.y(y),
                f.x(f.x_hi),
                f.y(y)
            ));
        }
    }
    draw_axes(&mut out, &f, x_label, y_label);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_is_deterministic_and_well_formed() {
        let s = vec![Series {
            label: "tau".to_string(),
            points: vec![(0.0, 0.0), (1.0, 2.0), (2.0, f64::NAN), (3.0, 1.0)],
        }];
        let a = line_plot("t", "x", "y", &s);
        let b = line_plot("t", "x", "y", &s);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
        assert_eq!(a.matches("<polyline").count(), 1);
    }

    #[test]
    fn heat_map_covers_grid() {
        let xs = [0.1, 0.2, 0.3];
        let ys = [1.0, 2.0];
        let z = vec![vec![0.0, 1.0], vec![0.5, 2.0], vec![1.5, 0.25]];
        let svg = heat_map("h", "x", "y", &xs, &ys, &z, Some(1.0));
        assert_eq!(svg.matches("<rect").count(), 1 + 1 + 6); // background + frame + cells
        assert!(svg.contains("stroke-dasharray"));
    }
}

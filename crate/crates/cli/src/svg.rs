//! Minimal SVG writers: scatter, heatmap and line plots.

use std::fmt::Write as _;

use ndarray::Array2;
use wgf_core::gan::BoundingBox;

const SIZE: f64 = 480.0;
const PAD: f64 = 24.0;

struct Frame {
    bbox: BoundingBox,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        PAD + (v - self.bbox.x_min) / (self.bbox.x_max - self.bbox.x_min) * (SIZE - 2.0 * PAD)
    }

    fn y(&self, v: f64) -> f64 {
        SIZE - PAD - (v - self.bbox.y_min) / (self.bbox.y_max - self.bbox.y_min) * (SIZE - 2.0 * PAD)
    }
}

fn open(title: &str) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{PAD}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
        PAD - 8.0,
        escape(title)
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Smallest square box around every point, with 5% padding.
pub fn fit_box<'a>(sets: impl IntoIterator<Item = &'a Array2<f64>>) -> BoundingBox {
    let mut m: f64 = 0.0;
    for p in sets {
        for v in p.iter().filter(|v| v.is_finite()) {
            m = m.max(v.abs());
        }
    }
    BoundingBox::square(if m > 0.0 { 1.05 * m } else { 1.0 })
}

/// First two columns of each set, one colour per set. Points outside `bbox`
/// are dropped.
pub fn scatter(title: &str, sets: &[(&Array2<f64>, &str)], bbox: BoundingBox) -> String {
    let f = Frame { bbox };
    let mut s = open(title);
    for (points, colour) in sets {
        let _ = writeln!(s, "<g fill=\"{colour}\" fill-opacity=\"0.5\">");
        for r in points.rows() {
            let (x, y) = (r[0], if r.len() > 1 { r[1] } else { 0.0 });
            if x < bbox.x_min || x > bbox.x_max || y < bbox.y_min || y > bbox.y_max {
                continue;
            }
            let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\"/>", f.x(x), f.y(y));
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

/// Greyscale heatmap; row `i` of `grid` is the `i`-th cell along y.
pub fn heatmap(title: &str, grid: &Array2<f64>, bbox: BoundingBox) -> String {
    let f = Frame { bbox };
    let (rows, cols) = grid.dim();
    let peak = grid.iter().cloned().fold(0.0f64, f64::max);
    let (cw, ch) = ((SIZE - 2.0 * PAD) / cols as f64, (SIZE - 2.0 * PAD) / rows as f64);
    let dy = (bbox.y_max - bbox.y_min) / rows as f64;
    let dx = (bbox.x_max - bbox.x_min) / cols as f64;
    let mut s = open(title);
    for ((i, j), v) in grid.indexed_iter() {
        let level = if peak > 0.0 { (v / peak).clamp(0.0, 1.0) } else { 0.0 };
        if level < 1e-3 {
            continue;
        }
        let shade = (255.0 * (1.0 - level)).round() as u8;
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"rgb({shade},{shade},{shade})\"/>",
            f.x(bbox.x_min + j as f64 * dx),
            f.y(bbox.y_min + (i + 1) as f64 * dy),
            cw + 0.05,
            ch + 0.05
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One polyline per series over a shared x axis. Non-finite values break the line.
pub fn lines(title: &str, x: &[f64], series: &[(&[f64], &str)]) -> String {
    let finite = |v: &&f64| v.is_finite();
    let (x0, x1) = (
        x.iter().filter(finite).cloned().fold(f64::INFINITY, f64::min),
        x.iter().filter(finite).cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let all = series.iter().flat_map(|(ys, _)| ys.iter()).filter(finite);
    let (y0, y1) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let widen = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
    let ((x0, x1), (y0, y1)) = if x0.is_finite() && y0.is_finite() {
        (widen(x0, x1), widen(y0, y1))
    } else {
        ((0.0, 1.0), (0.0, 1.0))
    };
    let f = Frame {
        bbox: BoundingBox {
            x_min: x0,
            x_max: x1,
            y_min: y0,
            y_max: y1,
        },
    };
    let mut s = open(title);
    let _ = writeln!(
        s,
        "<text x=\"{PAD}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">y in [{y0:.4e}, {y1:.4e}]</text>",
        SIZE - 6.0
    );
    for (ys, colour) in series {
        let mut path = String::new();
        let mut pen_down = false;
        for (&xv, &yv) in x.iter().zip(ys.iter()) {
            if !(xv.is_finite() && yv.is_finite()) {
                pen_down = false;
                continue;
            }
            let _ = write!(path, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, f.x(xv), f.y(yv));
            pen_down = true;
        }
        let _ = writeln!(s, "<path d=\"{path}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"1\"/>");
    }
    s.push_str("</svg>\n");
    s
}

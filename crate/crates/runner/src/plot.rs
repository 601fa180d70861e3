//! Minimal hand-written SVG: line plots and a density heat map with
//! polylines on top.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 440.0;
const MARGIN: f64 = 56.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    /// Pixel box: left, top, width, height.
    px: (f64, f64, f64, f64),
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64, w: f64, h: f64) -> Self {
        let pad = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Self {
            x0,
            x1,
            y0,
            y1,
            px: (MARGIN, 24.0, w - MARGIN - 16.0, h - 24.0 - MARGIN),
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (l, t, w, h) = self.px;
        (
            l + (x - self.x0) / (self.x1 - self.x0) * w,
            t + (1.0 - (y - self.y0) / (self.y1 - self.y0)) * h,
        )
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (l, t, w, h) = self.px;
        let _ = writeln!(
            out,
            r#"<rect x="{l}" y="{t}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
        );
        let b = t + h;
        for (v, anchor, x) in [(self.x0, "start", l), (self.x1, "end", l + w)] {
            let _ = writeln!(
                out,
                r#"<text x="{x}" y="{}" font-size="12" text-anchor="{anchor}">{}</text>"#,
                b + 16.0,
                num(v)
            );
        }
        for (v, y) in [(self.y0, b), (self.y1, t + 10.0)] {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{y}" font-size="12" text-anchor="end">{}</text>"#,
                l - 4.0,
                num(v)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{}</text>"#,
            l + w / 2.0,
            b + 36.0,
            escape(xlabel)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            t + h / 2.0,
            t + h / 2.0,
            escape(ylabel)
        );
    }

    fn polyline(&self, out: &mut String, pts: impl Iterator<Item = (f64, f64)>, style: &str) {
        let mut d = String::new();
        for (x, y) in pts {
            let (a, b) = self.map(x, y);
            let _ = write!(d, "{a:.2},{b:.2} ");
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" {style} points="{}"/>"#,
            d.trim_end()
        );
    }
}

fn num(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn header(title: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="16" font-size="14" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    out
}

/// Line plot of `ys` against `xs`, with optional vertical markers.
pub fn line_plot(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    xs: &[f64],
    ys: &[f64],
    markers: &[f64],
) -> String {
    let mut out = header(title);
    let fold = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            })
    };
    let (x0, x1) = fold(xs);
    let (_, y1) = fold(ys);
    let frame = Frame::new(x0, x1, 0.0, y1, W, H);
    frame.axes(&mut out, xlabel, ylabel);
    for &m in markers {
        let (a, top) = frame.map(m, frame.y1);
        let (_, bottom) = frame.map(m, frame.y0);
        let _ = writeln!(
            out,
            r##"<line x1="{a:.2}" y1="{top:.2}" x2="{a:.2}" y2="{bottom:.2}" stroke="#c33" stroke-dasharray="3 3"/>"##
        );
    }
    frame.polyline(
        &mut out,
        xs.iter().copied().zip(ys.iter().copied()),
        r##"stroke="#1f4e9c" stroke-width="1.5""##,
    );
    out.push_str("</svg>\n");
    out
}

/// Heat map of `density(x, y)` on `[lo, hi]` under the given polylines.
pub fn overlay(
    title: &str,
    lo: (f64, f64),
    hi: (f64, f64),
    cells: (usize, usize),
    density: impl Fn(f64, f64) -> f64,
    paths: &[Vec<(f64, f64)>],
) -> String {
    let mut out = header(title);
    let frame = Frame::new(lo.0, hi.0, lo.1, hi.1, W, H);
    let (nx, ny) = cells;
    let (dx, dy) = ((hi.0 - lo.0) / nx as f64, (hi.1 - lo.1) / ny as f64);
    let values: Vec<f64> = (0..nx * ny)
        .map(|k| {
            let (i, j) = (k % nx, k / nx);
            density(lo.0 + (i as f64 + 0.5) * dx, lo.1 + (j as f64 + 0.5) * dy)
        })
        .collect();
    let peak = values.iter().copied().fold(0.0, f64::max);
    let (_, _, pw, ph) = frame.px;
    let (cw, ch) = (pw / nx as f64, ph / ny as f64);
    for (k, v) in values.iter().enumerate() {
        let (i, j) = (k % nx, k / nx);
        let level = if peak > 0.0 { (v / peak).sqrt() } else { 0.0 };
        if level < 0.02 {
            continue;
        }
        let shade = (255.0 * (1.0 - level)).round() as u8;
        let (x, y) = frame.map(lo.0 + i as f64 * dx, lo.1 + (j + 1) as f64 * dy);
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},255)"/>"#,
            cw + 0.3,
            ch + 0.3
        );
    }
    frame.axes(&mut out, "x", "y");
    for p in paths {
        frame.polyline(
            &mut out,
            p.iter().copied(),
            r#"stroke="black" stroke-width="0.7""#,
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_is_well_formed() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [1.0, 0.0, 1.0];
        let svg = line_plot("a < b", "s", "rate", &xs, &ys, &[1.0]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<line ").count(), 1);
    }

    #[test]
    fn overlay_draws_cells_and_paths() {
        let svg = overlay(
            "t",
            (-1.0, -1.0),
            (1.0, 1.0),
            (4, 4),
            |x, y| (-(x * x + y * y)).exp(),
            &[vec![(-1.0, 0.0), (1.0, 0.0)]],
        );
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.matches("<rect").count() > 16);
    }
}

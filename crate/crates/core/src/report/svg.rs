use crate::matrix::DenseMatrix;
use crate::stats::KdeCurve;
use std::fmt::Write;

pub const VIEW_WIDTH: f64 = 1000.0;
pub const VIEW_HEIGHT: f64 = 700.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Scale {
    x0: f64,
    xs: f64,
    y0: f64,
    ys: f64,
}

impl Scale {
    fn fit(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>) -> Self {
        fn span(it: impl Iterator<Item = f64>) -> (f64, f64) {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
            if lo.is_finite() && hi > lo {
                (lo, hi - lo)
            } else {
                (if lo.is_finite() { lo - 0.5 } else { 0.0 }, 1.0)
            }
        }
        let (x0, xw) = span(xs);
        let (y0, yw) = span(ys);
        Self {
            x0,
            xs: (VIEW_WIDTH - 2.0 * MARGIN) / xw,
            y0,
            ys: (VIEW_HEIGHT - 2.0 * MARGIN) / yw,
        }
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.x0) * self.xs
    }

    fn y(&self, v: f64) -> f64 {
        VIEW_HEIGHT - MARGIN - (v - self.y0) * self.ys
    }
}

fn open(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {VIEW_WIDTH} {VIEW_HEIGHT}\" width=\"{VIEW_WIDTH}\" height=\"{VIEW_HEIGHT}\">"
    )
    .unwrap();
    writeln!(s, "<title>{}</title>", escape(title)).unwrap();
    writeln!(
        s,
        "<rect width=\"{VIEW_WIDTH}\" height=\"{VIEW_HEIGHT}\" fill=\"white\"/>"
    )
    .unwrap();
    s
}

/// 2-D scatter. Poisoned points get class `poisoned` and a red cross; the
/// rest are class `clean` and drawn as blue dots.
pub fn scatter_svg(points: &DenseMatrix, poisoned: Option<&[bool]>, title: &str) -> String {
    let sc = Scale::fit(
        points.row_iter().map(|r| r[0]),
        points.row_iter().map(|r| r[1]),
    );
    let mut s = open(title);
    s.push_str("<g class=\"clean\" fill=\"#1f77b4\" fill-opacity=\"0.5\">\n");
    let is_poisoned = |i: usize| poisoned.is_some_and(|f| f[i]);
    for r in points
        .row_iter()
        .enumerate()
        .filter(|(i, _)| !is_poisoned(*i))
        .map(|(_, r)| r)
    {
        writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\"/>",
            sc.x(r[0]),
            sc.y(r[1])
        )
        .unwrap();
    }
    s.push_str("</g>\n<g class=\"poisoned\" stroke=\"#d62728\" stroke-width=\"1.5\">\n");
    for r in points
        .row_iter()
        .enumerate()
        .filter(|(i, _)| is_poisoned(*i))
        .map(|(_, r)| r)
    {
        let (x, y) = (sc.x(r[0]), sc.y(r[1]));
        writeln!(
            s,
            "<path d=\"M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}\"/>",
            x - 3.0,
            y - 3.0,
            x + 3.0,
            y + 3.0,
            x - 3.0,
            y + 3.0,
            x + 3.0,
            y - 3.0
        )
        .unwrap();
    }
    s.push_str("</g>\n</svg>\n");
    s
}

/// Density curves on shared axes, one polyline per curve.
pub fn curves_svg(curves: &[(&str, &KdeCurve)], title: &str) -> String {
    let xs = curves.iter().flat_map(|(_, c)| c.grid.iter().copied());
    let ys = curves
        .iter()
        .flat_map(|(_, c)| c.density.iter().copied())
        .chain([0.0]);
    let sc = Scale::fit(xs, ys);
    let mut s = open(title);
    for (k, (name, c)) in curves.iter().enumerate() {
        let pts: Vec<String> = c
            .grid
            .iter()
            .zip(&c.density)
            .map(|(x, d)| format!("{:.2},{:.2}", sc.x(*x), sc.y(*d)))
            .collect();
        writeln!(
            s,
            "<polyline class=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            escape(name),
            PALETTE[k % PALETTE.len()],
            pts.join(" ")
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

//! Minimal standalone SVG figures: quantile boxes, profile bands, and
//! scatter plots. Every document embeds a provenance comment naming its
//! source artifacts.

use std::fmt::Write as _;

pub struct SvgCanvas {
    width: f64,
    height: f64,
    body: String,
}

const MARGIN: f64 = 55.0;

impl SvgCanvas {
    pub fn new(width: f64, height: f64, provenance: &str) -> Self {
        let mut body = String::new();
        let _ = writeln!(body, "<!-- source: {} -->", provenance.replace("--", "- -"));
        SvgCanvas { width, height, body }
    }

    fn plot_w(&self) -> f64 {
        self.width - 2.0 * MARGIN
    }

    fn plot_h(&self) -> f64 {
        self.height - 2.0 * MARGIN
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" \
             viewBox=\"0 0 {:.0} {:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }

    fn x_px(&self, frac: f64) -> f64 {
        MARGIN + frac * self.plot_w()
    }

    fn y_px(&self, frac: f64) -> f64 {
        self.height - MARGIN - frac * self.plot_h()
    }

    pub fn axes(&mut self, x_label: &str, y_label: &str, y_min: f64, y_max: f64) {
        let (x0, y0) = (self.x_px(0.0), self.y_px(0.0));
        let (x1, y1) = (self.x_px(1.0), self.y_px(1.0));
        let _ = writeln!(
            self.body,
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
             <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>"
        );
        let _ = writeln!(
            self.body,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            (x0 + x1) / 2.0,
            self.height - 12.0,
            escape(x_label)
        );
        let _ = writeln!(
            self.body,
            "<text x=\"14\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" \
             transform=\"rotate(-90 14 {})\">{}</text>",
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
        for (v, frac) in [(y_min, 0.0), (y_max, 1.0)] {
            let _ = writeln!(
                self.body,
                "<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{v:.3}</text>",
                x0 - 4.0,
                self.y_px(frac) + 3.0
            );
        }
    }

    /// One quantile box per series: whiskers q05-q95, box q25-q75, median.
    pub fn quantile_boxes(&mut self, labels: &[String], quantiles: &[[f64; 5]], y_max: f64) {
        let n = labels.len() as f64;
        let (height, plot_h, plot_w) = (self.height, self.plot_h(), self.plot_w());
        let y = move |v: f64| height - MARGIN - ((v / y_max).clamp(0.0, 1.0)) * plot_h;
        for (i, (label, q)) in labels.iter().zip(quantiles).enumerate() {
            let cx = self.x_px((i as f64 + 0.5) / n);
            let half = 0.28 * plot_w / n;
            let _ = writeln!(
                self.body,
                "<line x1=\"{cx}\" y1=\"{}\" x2=\"{cx}\" y2=\"{}\" stroke=\"black\"/>",
                y(q[0]),
                y(q[4])
            );
            let _ = writeln!(
                self.body,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#9ecae1\" stroke=\"black\"/>",
                cx - half,
                y(q[3]),
                2.0 * half,
                (y(q[1]) - y(q[3])).max(0.5)
            );
            let _ = writeln!(
                self.body,
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"2\"/>",
                cx - half,
                y(q[2]),
                cx + half,
                y(q[2])
            );
            let _ = writeln!(
                self.body,
                "<text x=\"{cx}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
                self.y_px(0.0) + 14.0,
                escape(label)
            );
        }
    }

    /// Credible band plus median line over an ordered x grid.
    pub fn profile_band(&mut self, x: &[f64], lo: &[f64], mid: &[f64], hi: &[f64], y_max: f64) {
        let (x_min, x_max) = bounds(x);
        let (height, plot_h, plot_w) = (self.height, self.plot_h(), self.plot_w());
        let xf = move |v: f64| {
            let frac = if x_max > x_min { (v - x_min) / (x_max - x_min) } else { 0.5 };
            MARGIN + frac * plot_w
        };
        let yf = move |v: f64| height - MARGIN - ((v / y_max).clamp(0.0, 1.0)) * plot_h;
        let mut poly = String::new();
        for (i, &xv) in x.iter().enumerate() {
            let _ = write!(poly, "{:.2},{:.2} ", xf(xv), yf(hi[i]));
        }
        for (i, &xv) in x.iter().enumerate().rev() {
            let _ = write!(poly, "{:.2},{:.2} ", xf(xv), yf(lo[i]));
        }
        let _ = writeln!(
            self.body,
            "<polygon points=\"{}\" fill=\"#c6dbef\" stroke=\"none\" opacity=\"0.8\"/>",
            poly.trim_end()
        );
        let mut path = String::new();
        for (i, &xv) in x.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            let _ = write!(path, "{cmd}{:.2} {:.2} ", xf(xv), yf(mid[i]));
        }
        let _ = writeln!(
            self.body,
            "<path d=\"{}\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\"/>",
            path.trim_end()
        );
    }

    /// Scatter two estimate series against the truth, with the diagonal.
    pub fn comparison_scatter(
        &mut self,
        truth: &[f64],
        first: &[f64],
        second: &[f64],
        range: (f64, f64),
    ) {
        let (lo, hi) = range;
        let f = move |v: f64| (v.clamp(lo, hi) - lo) / (hi - lo);
        let _ = writeln!(
            self.body,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>",
            self.x_px(0.0),
            self.y_px(0.0),
            self.x_px(1.0),
            self.y_px(1.0)
        );
        for (series, color) in [(first, "black"), (second, "#bbbbbb")] {
            for (&t, &e) in truth.iter().zip(series) {
                let (cx, cy) = (self.x_px(f(t)), self.y_px(f(e)));
                let _ = writeln!(
                    self.body,
                    "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"1.6\" fill=\"{color}\"/>"
                );
            }
        }
    }
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in v {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

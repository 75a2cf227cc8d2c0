//! Dependency-light SVG rendering of the funnel tube and output traces.
//!
//! The tube is drawn as circles of radius ψ(t) along the reference (the
//! first two output coordinates), the reference as a dotted polyline, and
//! each trajectory as a solid polyline.

use funnel_cbf::{FunnelBoundary, ReferenceSignal};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 30.0;
/// Number of tube circles drawn along the horizon.
const TUBE_CIRCLES: usize = 60;

/// One named trace in the output plane.
pub struct Trace<'a> {
    pub label: &'a str,
    pub color: &'a str,
    /// Points `(y1, y2)`.
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    min_x: f64,
    max_x: f64,
    min_y: f64,
    max_y: f64,
}

impl Frame {
    fn include(&mut self, x: f64, y: f64, pad: f64) {
        self.min_x = self.min_x.min(x - pad);
        self.max_x = self.max_x.max(x + pad);
        self.min_y = self.min_y.min(y - pad);
        self.max_y = self.max_y.max(y + pad);
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let sx = (WIDTH - 2.0 * MARGIN) / (self.max_x - self.min_x);
        let sy = (HEIGHT - 2.0 * MARGIN) / (self.max_y - self.min_y);
        let s = sx.min(sy);
        (
            MARGIN + (x - self.min_x) * s,
            // SVG y grows downward.
            HEIGHT - MARGIN - (y - self.min_y) * s,
        )
    }

    fn scale(&self) -> f64 {
        let sx = (WIDTH - 2.0 * MARGIN) / (self.max_x - self.min_x);
        let sy = (HEIGHT - 2.0 * MARGIN) / (self.max_y - self.min_y);
        sx.min(sy)
    }
}

fn polyline(frame: &Frame, pts: &[(f64, f64)], color: &str, dashed: bool) -> String {
    let mut d = String::new();
    for (i, (x, y)) in pts.iter().enumerate() {
        let (px, py) = frame.map(*x, *y);
        d.push_str(if i == 0 { "M" } else { "L" });
        d.push_str(&format!("{px:.2},{py:.2} "));
    }
    let dash = if dashed {
        " stroke-dasharray=\"4 4\""
    } else {
        ""
    };
    format!(
        "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>\n",
        d.trim_end()
    )
}

/// Render the tube, the reference, and the given traces over `[t0, t0+horizon]`.
pub fn render_plot(
    boundary: &FunnelBoundary,
    reference: &ReferenceSignal,
    t0: f64,
    horizon: f64,
    traces: &[Trace<'_>],
) -> String {
    let mut frame = Frame {
        min_x: f64::INFINITY,
        max_x: f64::NEG_INFINITY,
        min_y: f64::INFINITY,
        max_y: f64::NEG_INFINITY,
    };
    let tube: Vec<(f64, f64, f64)> = (0..=TUBE_CIRCLES)
        .map(|i| {
            let t = t0 + horizon * i as f64 / TUBE_CIRCLES as f64;
            let y = reference.y_r(t);
            (y[0], y[1], boundary.psi(t))
        })
        .collect();
    for (x, y, r) in &tube {
        frame.include(*x, *y, *r);
    }
    for trace in traces {
        for (x, y) in &trace.points {
            frame.include(*x, *y, 0.0);
        }
    }

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    ));
    for (x, y, r) in &tube {
        let (px, py) = frame.map(*x, *y);
        out.push_str(&format!(
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"{:.2}\" fill=\"none\" \
             stroke=\"#7aa8d8\" stroke-width=\"0.8\" opacity=\"0.7\"/>\n",
            r * frame.scale()
        ));
    }
    let ref_pts: Vec<(f64, f64)> = (0..=400)
        .map(|i| {
            let t = t0 + horizon * i as f64 / 400.0;
            let y = reference.y_r(t);
            (y[0], y[1])
        })
        .collect();
    out.push_str(&polyline(&frame, &ref_pts, "#1f4fa0", true));
    for trace in traces {
        out.push_str(&polyline(&frame, &trace.points, trace.color, false));
    }
    // Legend.
    let mut ly = 20.0;
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{ly}\" font-size=\"12\" fill=\"#1f4fa0\">reference (dotted), tube (circles)</text>\n",
        MARGIN
    ));
    for trace in traces {
        ly += 16.0;
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{ly}\" font-size=\"12\" fill=\"{}\">{}</text>\n",
            MARGIN, trace.color, trace.label
        ));
    }
    out.push_str("</svg>\n");
    out
}

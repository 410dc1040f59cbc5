//! Minimal self-contained SVG renderer for the figure panels.
//!
//! Each panel shows, back to front: the credible band as a filled polygon,
//! a thinned set of per-particle curves, the ensemble mean, and the dashed
//! ground truth. Output is plain text assembled with fixed formatting so a
//! rerun with identical inputs is byte-identical.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 18.0;
const MARGIN_T: f64 = 38.0;
const MARGIN_B: f64 = 50.0;
const TICKS: usize = 5;

/// One finished panel, ready to render.
#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Shared abscissas for every curve in the panel.
    pub x: Vec<f64>,
    /// Band edges (lower, upper), same length as `x`.
    pub band: (Vec<f64>, Vec<f64>),
    /// Thinned per-particle curves.
    pub particles: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub truth: Vec<f64>,
}

/// Indices that thin `len` items down to at most `max`, evenly spaced,
/// always including the first item.
pub fn thin_indices(len: usize, max: usize) -> Vec<usize> {
    if max == 0 || len == 0 {
        return Vec::new();
    }
    if len <= max {
        return (0..len).collect();
    }
    (0..max).map(|i| i * len / max).collect()
}

fn coord(v: f64) -> String {
    format!("{v:.2}")
}

/// Tick label: fixed decimal for moderate magnitudes, scientific otherwise,
/// trailing zeros trimmed.
fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    let s = if !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        let raw = format!("{v:.3}");
        let trimmed = raw.trim_end_matches('0').trim_end_matches('.');
        trimmed.to_string()
    };
    s
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn sx(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn sy(&self, y: f64) -> f64 {
        MARGIN_T + (self.y1 - y) / (self.y1 - self.y0) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn polyline_points(frame: &Frame, x: &[f64], y: &[f64]) -> String {
    let mut parts = Vec::with_capacity(x.len());
    for (a, b) in x.iter().zip(y) {
        parts.push(format!("{},{}", coord(frame.sx(*a)), coord(frame.sy(*b))));
    }
    parts.join(" ")
}

/// Render the panel to a standalone SVG document.
pub fn render(panel: &Panel) -> String {
    let m = panel.x.len();
    assert!(m >= 2, "panel needs at least two abscissas");
    assert_eq!(panel.band.0.len(), m);
    assert_eq!(panel.band.1.len(), m);
    assert_eq!(panel.mean.len(), m);
    assert_eq!(panel.truth.len(), m);
    assert!(panel.particles.iter().all(|c| c.len() == m));

    let x0 = panel.x.first().copied().unwrap();
    let x1 = panel.x.last().copied().unwrap();
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    let mut scan = |values: &[f64]| {
        for &v in values {
            if v.is_finite() {
                y_min = y_min.min(v);
                y_max = y_max.max(v);
            }
        }
    };
    scan(&panel.band.0);
    scan(&panel.band.1);
    scan(&panel.mean);
    scan(&panel.truth);
    for curve in &panel.particles {
        scan(curve);
    }
    if !y_min.is_finite() || !y_max.is_finite() {
        y_min = 0.0;
        y_max = 1.0;
    }
    let pad = 0.05 * (y_max - y_min).max(1e-12);
    let frame = Frame {
        x0,
        x1,
        y0: y_min - pad,
        y1: y_max + pad,
    };

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str(&format!(
        "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
    ));

    // Band polygon: upper edge left-to-right, lower edge back.
    let mut pts = Vec::with_capacity(2 * m);
    for (a, b) in panel.x.iter().zip(&panel.band.1) {
        pts.push(format!("{},{}", coord(frame.sx(*a)), coord(frame.sy(*b))));
    }
    for (a, b) in panel.x.iter().rev().zip(panel.band.0.iter().rev()) {
        pts.push(format!("{},{}", coord(frame.sx(*a)), coord(frame.sy(*b))));
    }
    out.push_str(&format!(
        "  <polygon class=\"band\" fill=\"#9ecae1\" fill-opacity=\"0.55\" stroke=\"none\" points=\"{}\"/>\n",
        pts.join(" ")
    ));

    for curve in &panel.particles {
        out.push_str(&format!(
            "  <polyline class=\"particle\" fill=\"none\" stroke=\"#9a9a9a\" stroke-opacity=\"0.45\" \
             stroke-width=\"0.6\" points=\"{}\"/>\n",
            polyline_points(&frame, &panel.x, curve)
        ));
    }

    out.push_str(&format!(
        "  <polyline class=\"mean\" fill=\"none\" stroke=\"#1f6feb\" stroke-width=\"1.8\" points=\"{}\"/>\n",
        polyline_points(&frame, &panel.x, &panel.mean)
    ));
    out.push_str(&format!(
        "  <polyline class=\"truth\" fill=\"none\" stroke=\"#111111\" stroke-width=\"1.5\" \
         stroke-dasharray=\"6,4\" points=\"{}\"/>\n",
        polyline_points(&frame, &panel.x, &panel.truth)
    ));

    // Axes.
    let bx = coord(MARGIN_L);
    let by = coord(HEIGHT - MARGIN_B);
    let rx = coord(WIDTH - MARGIN_R);
    let ty = coord(MARGIN_T);
    out.push_str(&format!(
        "  <line x1=\"{bx}\" y1=\"{ty}\" x2=\"{bx}\" y2=\"{by}\" stroke=\"#333333\" stroke-width=\"1\"/>\n"
    ));
    out.push_str(&format!(
        "  <line x1=\"{bx}\" y1=\"{by}\" x2=\"{rx}\" y2=\"{by}\" stroke=\"#333333\" stroke-width=\"1\"/>\n"
    ));

    // Ticks and labels.
    for i in 0..TICKS {
        let t = i as f64 / (TICKS - 1) as f64;
        let xv = frame.x0 + t * (frame.x1 - frame.x0);
        let sx = frame.sx(xv);
        out.push_str(&format!(
            "  <line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#333333\" stroke-width=\"1\"/>\n",
            coord(sx),
            by,
            coord(HEIGHT - MARGIN_B + 5.0)
        ));
        out.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-size=\"11\" font-family=\"sans-serif\" \
             text-anchor=\"middle\">{}</text>\n",
            coord(sx),
            coord(HEIGHT - MARGIN_B + 18.0),
            tick_label(xv)
        ));

        let yv = frame.y0 + t * (frame.y1 - frame.y0);
        let sy = frame.sy(yv);
        out.push_str(&format!(
            "  <line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"#333333\" stroke-width=\"1\"/>\n",
            coord(sy),
            coord(MARGIN_L - 5.0),
            bx
        ));
        out.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-size=\"11\" font-family=\"sans-serif\" \
             text-anchor=\"end\">{}</text>\n",
            coord(MARGIN_L - 8.0),
            coord(sy + 4.0),
            tick_label(yv)
        ));
    }

    out.push_str(&format!(
        "  <text x=\"{}\" y=\"22\" font-size=\"14\" font-family=\"sans-serif\" \
         text-anchor=\"middle\">{}</text>\n",
        coord(0.5 * WIDTH),
        panel.title
    ));
    out.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-size=\"12\" font-family=\"sans-serif\" \
         text-anchor=\"middle\">{}</text>\n",
        coord(MARGIN_L + 0.5 * (WIDTH - MARGIN_L - MARGIN_R)),
        coord(HEIGHT - 12.0),
        panel.x_label
    ));
    out.push_str(&format!(
        "  <text x=\"16\" y=\"{}\" font-size=\"12\" font-family=\"sans-serif\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        coord(MARGIN_T + 0.5 * (HEIGHT - MARGIN_T - MARGIN_B)),
        coord(MARGIN_T + 0.5 * (HEIGHT - MARGIN_T - MARGIN_B)),
        panel.y_label
    ));
    out.push_str("</svg>\n");
    out
}

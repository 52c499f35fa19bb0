//! Direct SVG emission for butterfly plots.
//!
//! Canvas: `viewBox="0 0 1000 800"`, plot area x ∈ [60, 940] for θ and
//! y ∈ [40, 740] for energy (top = highest energy).

use std::fmt::Write;

use nct_core::algebra::RationalTheta;
use nct_core::format::sig;

pub struct ThetaColumn {
    pub theta: RationalTheta,
    /// Merged band intervals `(min, max)`, ascending.
    pub bands: Vec<(f64, f64)>,
    /// Internal gaps `(lower, upper, t)`; `t` is absent when not computed.
    pub gaps: Vec<(f64, f64, Option<i64>)>,
}

const PALETTE: [&str; 10] =
    ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"];

/// Fill color of the gap regions labelled `t`.
pub fn color_for(t: i64) -> &'static str {
    PALETTE[t.rem_euclid(PALETTE.len() as i64) as usize]
}

struct Frame {
    x0: f64,
    x1: f64,
    e0: f64,
    e1: f64,
}

impl Frame {
    fn new(cols: &[ThetaColumn]) -> Self {
        let xs = cols.iter().map(|c| c.theta.value());
        let x0 = xs.clone().fold(0.0, f64::min);
        let x1 = xs.fold(1.0, f64::max);
        let lo = cols.iter().flat_map(|c| c.bands.first().map(|b| b.0)).fold(f64::INFINITY, f64::min);
        let hi = cols.iter().flat_map(|c| c.bands.last().map(|b| b.1)).fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (-1.0, 1.0) };
        let pad = 0.05 * (hi - lo);
        Self { x0, x1: if x1 > x0 { x1 } else { x0 + 1.0 }, e0: lo - pad, e1: hi + pad }
    }

    fn x(&self, theta: f64) -> String {
        sig(60.0 + 880.0 * (theta - self.x0) / (self.x1 - self.x0), 7)
    }

    fn y(&self, e: f64) -> String {
        sig(740.0 - 700.0 * (e - self.e0) / (self.e1 - self.e0), 7)
    }
}

fn header(out: &mut String, title: &str, frame: &Frame) {
    out.push_str("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1000 800\" width=\"1000\" height=\"800\">\n");
    let _ = writeln!(out, "<title>{title}</title>");
    out.push_str("<rect x=\"0\" y=\"0\" width=\"1000\" height=\"800\" fill=\"white\"/>\n");
    out.push_str("<path d=\"M 60 740 H 940 M 60 740 V 40\" stroke=\"#444\" stroke-width=\"1\" fill=\"none\"/>\n");
    let _ = writeln!(
        out,
        "<text x=\"500\" y=\"780\" text-anchor=\"middle\" font-size=\"18\">theta in [{}, {}]</text>",
        sig(frame.x0, 6),
        sig(frame.x1, 6)
    );
    let _ = writeln!(
        out,
        "<text x=\"20\" y=\"390\" font-size=\"18\" transform=\"rotate(-90 20 390)\">energy in [{}, {}]</text>",
        sig(frame.e0, 6),
        sig(frame.e1, 6)
    );
}

fn bands(out: &mut String, cols: &[ThetaColumn], frame: &Frame) {
    for c in cols {
        let x = frame.x(c.theta.value());
        for (b, (lo, hi)) in c.bands.iter().enumerate() {
            let _ = writeln!(
                out,
                "<path class=\"band\" data-theta=\"{}\" data-band=\"{b}\" d=\"M {x} {} V {}\" stroke=\"black\" stroke-width=\"2\"/>",
                c.theta,
                frame.y(*hi),
                frame.y(*lo)
            );
        }
    }
}

/// One vertical path per band at every θ.
pub fn butterfly(cols: &[ThetaColumn]) -> String {
    let frame = Frame::new(cols);
    let mut out = String::new();
    header(&mut out, "Hofstadter butterfly", &frame);
    bands(&mut out, cols, &frame);
    out.push_str("</svg>\n");
    out
}

/// Bands plus one colored path per internal gap region, colored by `t`.
pub fn butterfly_by_gap(cols: &[ThetaColumn], q: i64, r: i64) -> String {
    let frame = Frame::new(cols);
    let mut out = String::new();
    header(&mut out, &format!("Gap labels t for twist ({q},{r})"), &frame);
    for c in cols {
        let x = frame.x(c.theta.value());
        for (lo, hi, t) in &c.gaps {
            let Some(t) = t else { continue };
            let _ = writeln!(
                out,
                "<path class=\"gap\" data-theta=\"{}\" data-t=\"{t}\" d=\"M {x} {} V {}\" stroke=\"{}\" stroke-width=\"6\" stroke-opacity=\"0.8\"/>",
                c.theta,
                frame.y(*hi),
                frame.y(*lo),
                color_for(*t)
            );
        }
    }
    bands(&mut out, cols, &frame);
    out.push_str("</svg>\n");
    out
}

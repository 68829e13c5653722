//! Minimal self-contained SVG line charts.
//!
//! Everything is formatted with fixed precision, so regenerating a plot from
//! the same table yields byte-identical output.

use std::io::Write;
use std::path::Path;

use dpdbp_core::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 560.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 46.0;
const MARGIN_B: f64 = 56.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
];

/// One labelled curve, optionally with a shaded band around it.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// `(x, lo, hi)` envelope, drawn with the curve's color at low opacity.
    pub band: Vec<(f64, f64, f64)>,
}

pub struct Chart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub series: Vec<Series>,
    /// Clip the vertical range of the plot (data outside is dropped).
    pub y_clip: Option<(f64, f64)>,
    /// Dashed horizontal reference line.
    pub h_line: Option<f64>,
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 1000.0 || a < 0.01 {
        format!("{v:.2e}")
    } else if a >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

impl Chart<'_> {
    pub fn render_to(&self, path: &Path) -> Result<()> {
        let mut visible: Vec<(f64, f64)> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                if x.is_finite() && y.is_finite() {
                    visible.push((x, y));
                }
            }
            for &(x, lo, hi) in &s.band {
                if x.is_finite() && lo.is_finite() && hi.is_finite() {
                    visible.push((x, lo));
                    visible.push((x, hi));
                }
            }
        }
        if let Some((lo, hi)) = self.y_clip {
            visible.retain(|&(_, y)| y >= lo && y <= hi);
        }
        if visible.is_empty() {
            return Err(Error::Numerical("no finite points to plot".into()));
        }
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &visible {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if let Some((lo, hi)) = self.y_clip {
            y0 = y0.max(lo);
            y1 = y1.min(hi);
        }
        if x1 - x0 < 1e-12 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad = 0.04 * (y1 - y0);
        y0 -= pad;
        y1 += pad;

        let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
        let py = |y: f64| HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);
        let in_y = |y: f64| match self.y_clip {
            Some((lo, hi)) => y >= lo && y <= hi,
            None => true,
        };

        let mut s = String::new();
        s.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
             text-anchor=\"middle\">{}</text>\n",
            (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
            xml_escape(self.title)
        ));

        // axes, ticks, grid
        for k in 0..=5 {
            let t = k as f64 / 5.0;
            let xv = x0 + t * (x1 - x0);
            let yv = y0 + t * (y1 - y0);
            let gx = px(xv);
            let gy = py(yv);
            s.push_str(&format!(
                "<line x1=\"{gx:.2}\" y1=\"{:.2}\" x2=\"{gx:.2}\" y2=\"{:.2}\" \
                 stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
                py(y0),
                py(y1)
            ));
            s.push_str(&format!(
                "<line x1=\"{:.2}\" y1=\"{gy:.2}\" x2=\"{:.2}\" y2=\"{gy:.2}\" \
                 stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
                px(x0),
                px(x1)
            ));
            s.push_str(&format!(
                "<text x=\"{gx:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
                 text-anchor=\"middle\">{}</text>\n",
                HEIGHT - MARGIN_B + 18.0,
                fmt_tick(xv)
            ));
            s.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
                 text-anchor=\"end\">{}</text>\n",
                MARGIN_L - 8.0,
                gy + 4.0,
                fmt_tick(yv)
            ));
        }
        s.push_str(&format!(
            "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{:.1}\" height=\"{:.1}\" \
             fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n",
            WIDTH - MARGIN_L - MARGIN_R,
            HEIGHT - MARGIN_T - MARGIN_B
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" \
             text-anchor=\"middle\">{}</text>\n",
            (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
            HEIGHT - 12.0,
            xml_escape(self.x_label)
        ));
        s.push_str(&format!(
            "<text x=\"18\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" \
             text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
            (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
            (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
            xml_escape(self.y_label)
        ));

        if let Some(h) = self.h_line {
            if h >= y0 && h <= y1 {
                s.push_str(&format!(
                    "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
                     stroke=\"#444444\" stroke-width=\"1\" stroke-dasharray=\"6,4\"/>\n",
                    px(x0),
                    py(h),
                    px(x1),
                    py(h)
                ));
            }
        }

        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            // shaded envelope first so curves draw on top
            let band: Vec<&(f64, f64, f64)> = series
                .band
                .iter()
                .filter(|(x, lo, hi)| {
                    x.is_finite() && lo.is_finite() && hi.is_finite() && in_y(*lo) && in_y(*hi)
                })
                .collect();
            if band.len() >= 2 {
                let mut d = String::from("M");
                for (x, lo, _) in &band {
                    d.push_str(&format!(" {:.2},{:.2}", px(*x), py(*lo)));
                }
                for (x, _, hi) in band.iter().rev() {
                    d.push_str(&format!(" {:.2},{:.2}", px(*x), py(*hi)));
                }
                d.push_str(" Z");
                s.push_str(&format!(
                    "<path d=\"{d}\" fill=\"{color}\" fill-opacity=\"0.18\" stroke=\"none\"/>\n"
                ));
            }
            // the curve, broken at missing cells
            let mut segment: Vec<(f64, f64)> = Vec::new();
            let flush = |seg: &mut Vec<(f64, f64)>, s: &mut String| {
                if seg.len() >= 2 {
                    let pts: Vec<String> = seg
                        .iter()
                        .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                        .collect();
                    s.push_str(&format!(
                        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
                         stroke-width=\"1.8\"/>\n",
                        pts.join(" ")
                    ));
                } else if seg.len() == 1 {
                    let (x, y) = seg[0];
                    s.push_str(&format!(
                        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.4\" fill=\"{color}\"/>\n",
                        px(x),
                        py(y)
                    ));
                }
                seg.clear();
            };
            for &(x, y) in &series.points {
                if x.is_finite() && y.is_finite() && in_y(y) {
                    segment.push((x, y));
                } else {
                    flush(&mut segment, &mut s);
                }
            }
            flush(&mut segment, &mut s);

            // legend entry
            let ly = MARGIN_T + 14.0 + 20.0 * i as f64;
            let lx = WIDTH - MARGIN_R + 14.0;
            s.push_str(&format!(
                "<line x1=\"{lx:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
                 stroke=\"{color}\" stroke-width=\"2.2\"/>\n",
                lx + 26.0
            ));
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" \
                 font-size=\"12\">{}</text>\n",
                lx + 32.0,
                ly + 4.0,
                xml_escape(&series.label)
            ));
        }
        s.push_str("</svg>\n");

        let mut file = std::fs::File::create(path)?;
        file.write_all(s.as_bytes())?;
        Ok(())
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

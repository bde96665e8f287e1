//! SVG scatter plots of labeled event streams.
//!
//! Events are colored by confusion class against ground truth when both
//! predicted and true labels are available: detected real (red), undetected
//! real (orange), detected noise (blue), undetected noise (green). Without
//! ground truth, predicted real is red and predicted noise is blue.

use std::fmt::Write as _;

use crate::detect::LabelVector;
use crate::error::{Error, Result};
use crate::event::EventStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Xy,
    Xt,
    Yt,
}

impl std::str::FromStr for Projection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xy" => Ok(Projection::Xy),
            "xt" => Ok(Projection::Xt),
            "yt" => Ok(Projection::Yt),
            other => Err(Error::InvalidParameter(format!(
                "unknown projection '{other}' (expected xy, xt or yt)"
            ))),
        }
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 55.0;

struct Axis {
    lo: f64,
    hi: f64,
    label: &'static str,
}

impl Axis {
    fn to_px(&self, v: f64, px_lo: f64, px_hi: f64) -> f64 {
        if self.hi > self.lo {
            px_lo + (v - self.lo) / (self.hi - self.lo) * (px_hi - px_lo)
        } else {
            (px_lo + px_hi) / 2.0
        }
    }
}

fn axes(stream: &EventStream, proj: Projection) -> (Axis, Axis) {
    let x_axis = |label| Axis {
        lo: 0.0,
        hi: f64::from(stream.sensor_width().max(1)),
        label,
    };
    let y_axis = |label| Axis {
        lo: 0.0,
        hi: f64::from(stream.sensor_height().max(1)),
        label,
    };
    let t_axis = Axis {
        lo: stream.t_min(),
        hi: stream.t_max(),
        label: "t [s]",
    };
    match proj {
        Projection::Xy => (x_axis("x [px]"), y_axis("y [px]")),
        Projection::Xt => (t_axis, x_axis("x [px]")),
        Projection::Yt => (t_axis, y_axis("y [px]")),
    }
}

fn coords(stream: &EventStream, i: usize, proj: Projection) -> (f64, f64) {
    let e = &stream.events()[i];
    match proj {
        Projection::Xy => (f64::from(e.x), f64::from(e.y)),
        Projection::Xt => (e.t, f64::from(e.x)),
        Projection::Yt => (e.t, f64::from(e.y)),
    }
}

struct Group {
    name: &'static str,
    color: &'static str,
    points: Vec<(f64, f64)>,
}

/// Renders a scatter plot as an SVG 1.1 document.
///
/// `truth` is optional ground truth; pass `None` to color by prediction only.
pub fn render_svg(
    stream: &EventStream,
    pred: &LabelVector,
    truth: Option<&LabelVector>,
    proj: Projection,
    title: &str,
) -> Result<String> {
    let n = stream.len();
    if pred.y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pred.y.len(),
        });
    }
    if let Some(t) = truth {
        if t.y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: t.y.len(),
            });
        }
    }

    let mut groups = match truth {
        Some(_) => vec![
            Group { name: "detected real", color: "#d62728", points: vec![] },
            Group { name: "undetected real", color: "#ff7f0e", points: vec![] },
            Group { name: "detected noise", color: "#1f77b4", points: vec![] },
            Group { name: "undetected noise", color: "#2ca02c", points: vec![] },
        ],
        None => vec![
            Group { name: "predicted real", color: "#d62728", points: vec![] },
            Group { name: "predicted noise", color: "#1f77b4", points: vec![] },
        ],
    };

    let (ax, ay) = axes(stream, proj);
    let (px0, px1) = (MARGIN, WIDTH - MARGIN);
    let (py0, py1) = (HEIGHT - MARGIN, MARGIN); // SVG y grows downward

    for i in 0..n {
        let g = match truth {
            Some(t) => match (pred.y[i], t.y[i]) {
                (true, true) => 0,
                (false, true) => 1,
                (false, false) => 2,
                (true, false) => 3,
            },
            None => usize::from(!pred.y[i]),
        };
        let (vx, vy) = coords(stream, i, proj);
        groups[g]
            .points
            .push((ax.to_px(vx, px0, px1), ay.to_px(vy, py0, py1)));
    }

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    );
    let _ = write!(
        svg,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        escape_xml(title)
    );
    // Axes.
    let _ = write!(
        svg,
        "<line x1=\"{px0}\" y1=\"{py0}\" x2=\"{px1}\" y2=\"{py0}\" stroke=\"black\"/>\n\
         <line x1=\"{px0}\" y1=\"{py0}\" x2=\"{px0}\" y2=\"{py1}\" stroke=\"black\"/>\n"
    );
    // Axis labels and end-point ticks.
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
        (px0 + px1) / 2.0,
        HEIGHT - 12.0,
        escape_xml(ax.label)
    );
    let _ = write!(
        svg,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" \
         transform=\"rotate(-90 16 {})\">{}</text>\n",
        (py0 + py1) / 2.0,
        (py0 + py1) / 2.0,
        escape_xml(ay.label)
    );
    for (v, px, py, anchor) in [
        (ax.lo, px0, py0 + 16.0, "middle"),
        (ax.hi, px1, py0 + 16.0, "middle"),
        (ay.lo, px0 - 6.0, py0, "end"),
        (ay.hi, px0 - 6.0, py1 + 4.0, "end"),
    ] {
        let _ = write!(
            svg,
            "<text x=\"{px}\" y=\"{py}\" text-anchor=\"{anchor}\" \
             font-family=\"sans-serif\" font-size=\"10\">{v:.3}</text>\n"
        );
    }
    // Points, one <g> per class.
    for g in &groups {
        let _ = write!(svg, "<g fill=\"{}\" fill-opacity=\"0.7\">\n", g.color);
        for &(x, y) in &g.points {
            let _ = write!(svg, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"1.6\"/>\n");
        }
        svg.push_str("</g>\n");
    }
    // Legend.
    for (i, g) in groups.iter().enumerate() {
        let ly = py1 + 16.0 * i as f64;
        let _ = write!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{} ({})</text>\n",
            px1 - 150.0,
            ly,
            g.color,
            px1 - 135.0,
            ly + 9.0,
            g.name,
            g.points.len()
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Event, Label};

    fn fixture() -> (EventStream, LabelVector, LabelVector) {
        let events = (0..20)
            .map(|i| Event {
                x: i as u16,
                y: (i * 2) as u16,
                t: i as f64 * 0.01,
                label: Label::Unknown,
            })
            .collect();
        let stream = EventStream::new(events, 64, 64).unwrap();
        let pred = LabelVector {
            y: (0..20).map(|i| i % 2 == 0).collect(),
            degenerate: false,
        };
        let truth = LabelVector {
            y: (0..20).map(|i| i % 3 != 0).collect(),
            degenerate: false,
        };
        (stream, pred, truth)
    }

    #[test]
    fn svg_has_all_four_classes_with_truth() {
        let (s, p, t) = fixture();
        let svg = render_svg(&s, &p, Some(&t), Projection::Xy, "demo").unwrap();
        assert!(svg.starts_with("<?xml"));
        assert!(svg.contains("version=\"1.1\""));
        for name in ["detected real", "undetected real", "detected noise", "undetected noise"] {
            assert!(svg.contains(name), "missing legend entry {name}");
        }
        assert_eq!(svg.matches("<circle").count(), 20);
    }

    #[test]
    fn svg_two_classes_without_truth() {
        let (s, p, _) = fixture();
        let svg = render_svg(&s, &p, None, Projection::Xt, "demo").unwrap();
        assert!(svg.contains("predicted real"));
        assert!(svg.contains("predicted noise"));
        assert!(!svg.contains("undetected"));
    }

    #[test]
    fn length_mismatch_is_error() {
        let (s, p, _) = fixture();
        let short = LabelVector {
            y: vec![true; 5],
            degenerate: false,
        };
        assert!(render_svg(&s, &short, None, Projection::Xy, "x").is_err());
        assert!(render_svg(&s, &p, Some(&short), Projection::Xy, "x").is_err());
    }

    #[test]
    fn title_is_escaped() {
        let (s, p, _) = fixture();
        let svg = render_svg(&s, &p, None, Projection::Yt, "a<b&c").unwrap();
        assert!(svg.contains("a&lt;b&amp;c"));
    }

    #[test]
    fn projection_parses() {
        assert_eq!("xy".parse::<Projection>().unwrap(), Projection::Xy);
        assert!("zz".parse::<Projection>().is_err());
    }
}

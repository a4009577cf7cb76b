//! Figures: paired class-conditional histograms and the two-panel boundary
//! plot.

use invnet_core::interpret::{boundary_segment, invert_boundary_curve, BoundingBox, LinearBoundary};
use invnet_core::net::InvNetModel;
use invnet_core::data::LabeledDataset;
use invnet_core::Result;

use crate::svg::{Frame, Svg, CLASS_COLORS};

pub fn range_of(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Per-class counts over `bins` equal-width bins spanning `range`.
pub fn class_histograms(values: &[f64], labels: &[u8], bins: usize, range: (f64, f64)) -> [Vec<usize>; 2] {
    let mut counts = [vec![0; bins], vec![0; bins]];
    let width = (range.1 - range.0) / bins as f64;
    for (&v, &l) in values.iter().zip(labels) {
        let k = (((v - range.0) / width) as usize).min(bins - 1);
        counts[l as usize][k] += 1;
    }
    counts
}

fn histogram_panel(svg: &mut Svg, frame_at: (f64, f64), title: &str, values: &[f64], labels: &[u8], bins: usize) {
    let range = range_of(values.iter().copied());
    let counts = class_histograms(values, labels, bins, range);
    let peak = counts.iter().flatten().copied().max().unwrap_or(1).max(1);
    let frame = Frame {
        left: frame_at.0,
        top: frame_at.1,
        width: 300.0,
        height: 200.0,
        x_min: range.0,
        x_max: range.1,
        y_min: 0.0,
        y_max: peak as f64,
    };
    frame.draw_axes(svg, title, "value", "count");
    let width = (range.1 - range.0) / bins as f64;
    for (class, class_counts) in counts.iter().enumerate() {
        for (k, &c) in class_counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let lo = range.0 + k as f64 * width;
            let (x0, y0) = frame.map(lo, c as f64);
            let (x1, y1) = frame.map(lo + width, 0.0);
            svg.bar(x0, y0, x1 - x0, y1 - y0, CLASS_COLORS[class], 0.45);
        }
    }
}

/// Input-value and explanation-value histograms of one feature, side by side.
pub fn feature_histograms(
    header: &[String],
    name: &str,
    input: &[f64],
    explanation: &[f64],
    labels: &[u8],
    bins: usize,
) -> String {
    let mut svg = Svg::new(760.0, 290.0);
    for line in header {
        svg.comment(line);
    }
    svg.comment(&format!("feature {name}: class-conditional histograms"));
    histogram_panel(&mut svg, (60.0, 40.0), &format!("input {name}"), input, labels, bins);
    histogram_panel(&mut svg, (430.0, 40.0), &format!("explanation {name}"), explanation, labels, bins);
    legend(&mut svg, 60.0, 280.0);
    svg.finish()
}

fn legend(svg: &mut Svg, x: f64, y: f64) {
    for (class, color) in CLASS_COLORS.iter().enumerate() {
        let x = x + 90.0 * class as f64;
        svg.bar(x, y - 9.0, 10.0, 10.0, color, 0.8);
        svg.text(x + 14.0, y, 10.0, "start", &format!("class {class}"));
    }
}

fn frame_around(points: &[[f64; 2]], left: f64) -> Result<(Frame, BoundingBox)> {
    let bbox = BoundingBox::around(points, 0.05)?;
    let frame = Frame {
        left,
        top: 40.0,
        width: 320.0,
        height: 320.0,
        x_min: bbox.x_min,
        x_max: bbox.x_max,
        y_min: bbox.y_min,
        y_max: bbox.y_max,
    };
    Ok((frame, bbox))
}

fn inside(b: &BoundingBox, p: &[f64]) -> bool {
    p[0] >= b.x_min && p[0] <= b.x_max && p[1] >= b.y_min && p[1] <= b.y_max
}

/// Summary of a boundary plot, returned alongside the SVG.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPlot {
    pub svg: String,
    /// Samples lying on the side of the boundary matching their label.
    pub correct_side: usize,
    pub total: usize,
    pub curve: Vec<Vec<f64>>,
    pub example: usize,
}

/// Feature-domain scatter with the boundary line (left) and input-domain
/// scatter with the inverted boundary curve (right). One sample and its
/// projection are marked in both panels.
pub fn boundary_figure(
    header: &[String],
    model: &InvNetModel,
    data: &LabeledDataset,
    samples: usize,
    margin: f64,
) -> Result<BoundaryPlot> {
    let n = data.len();
    let mut z = Vec::with_capacity(n);
    for row in data.features().row_iter() {
        let t = model.transform(row)?;
        z.push([t[0], t[1]]);
    }
    let x: Vec<[f64; 2]> = data.features().row_iter().map(|r| [r[0], r[1]]).collect();
    let correct_side = (0..n)
        .filter(|&i| u8::from(model.feature_logit(&z[i]) > 0.0) == data.labels()[i])
        .count();

    let feature_box = BoundingBox::around(&z, margin)?;
    let segment = boundary_segment(model, &feature_box)?;
    let curve = invert_boundary_curve(model, samples, &feature_box)?;

    let boundary = LinearBoundary::of_model(model)?;
    // The marked pair is the class-0 sample at the median distance to the
    // boundary, a typical rather than extreme case.
    let mut class0: Vec<(f64, usize)> = Vec::new();
    for (i, zi) in z.iter().enumerate() {
        if data.labels()[i] == 0 {
            class0.push((boundary.score(zi)?.abs(), i));
        }
    }
    class0.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let example = class0.get(class0.len() / 2).map_or(0, |&(_, i)| i);
    let z_p = boundary.project(&z[example])?;
    let x_p = model.inverse_transform(&z_p)?;

    let mut svg = Svg::new(820.0, 420.0);
    for line in header {
        svg.comment(line);
    }
    svg.comment("left: feature domain; right: input domain");
    let (ff, _) = frame_around(&z, 60.0)?;
    let (fi, input_box) = frame_around(&x, 470.0)?;
    ff.draw_axes(&mut svg, "feature domain", "z1", "z2");
    fi.draw_axes(&mut svg, "input domain", "x1", "x2");
    for i in 0..n {
        let color = CLASS_COLORS[data.labels()[i] as usize];
        let (px, py) = ff.map(z[i][0], z[i][1]);
        svg.circle(px, py, 1.6, color, 0.5);
        let (px, py) = fi.map(x[i][0], x[i][1]);
        svg.circle(px, py, 1.6, color, 0.5);
    }
    svg.line(
        ff.map(segment[0][0], segment[0][1]),
        ff.map(segment[1][0], segment[1][1]),
        "#000",
        1.5,
        false,
    );
    // The preimage can leave the data window; draw only the visible runs.
    let mut run: Vec<(f64, f64)> = Vec::new();
    for p in &curve {
        if inside(&input_box, p) {
            run.push(fi.map(p[0], p[1]));
        } else if !run.is_empty() {
            if run.len() > 1 {
                svg.polyline(&run, "#000", 1.5);
            }
            run.clear();
        }
    }
    if run.len() > 1 {
        svg.polyline(&run, "#000", 1.5);
    }
    for (frame, a, b) in [(ff, z[example], [z_p[0], z_p[1]]), (fi, x[example], [x_p[0], x_p[1]])] {
        let pa = frame.map(a[0], a[1]);
        let pb = frame.map(b[0], b[1]);
        svg.line(pa, pb, "#2ca02c", 1.2, true);
        svg.circle(pa.0, pa.1, 3.5, "#2ca02c", 1.0);
        svg.circle(pb.0, pb.1, 3.5, "#000", 1.0);
    }
    legend(&mut svg, 60.0, 410.0);
    Ok(BoundaryPlot {
        svg: svg.finish(),
        correct_side,
        total: n,
        curve,
        example,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_every_value_once() {
        let v = [0.0, 0.5, 1.0, 1.0, 0.25];
        let l = [0, 0, 1, 1, 1];
        let c = class_histograms(&v, &l, 4, range_of(v));
        assert_eq!(c[0], [1, 0, 1, 0]);
        assert_eq!(c[1], [0, 1, 0, 2]);
    }

    #[test]
    fn constant_values_get_a_unit_range() {
        assert_eq!(range_of([2.0, 2.0]), (1.5, 2.5));
    }
}

//! SVG drawings of frame models and their deformed shapes.

use std::fmt::Write;

use crate::fea::DisplacementField;
use crate::geom::Point;
use crate::lattice::FrameModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// Displacement magnification; `None` scales the largest nodal
    /// translation to 10% of the drawing width.
    pub scale: Option<f64>,
    /// Points per deformed element.
    pub samples: usize,
    /// Pixels per millimetre.
    pub zoom: f64,
    pub margin: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { scale: None, samples: 12, zoom: 4.0, margin: 10.0 }
    }
}

pub fn autoscale(model: &FrameModel, field: &DisplacementField) -> f64 {
    let width = model.bounds().map_or(0.0, |(lo, hi)| hi.x - lo.x);
    let max = field.max_translation();
    if max > 0.0 && width > 0.0 {
        0.1 * width / max
    } else {
        1.0
    }
}

/// Cubic (Hermite) beam shape between the nodes of element `e`, magnified by
/// `scale`, as `samples + 1` points.
pub fn deformed_element(model: &FrameModel, field: &DisplacementField, e: usize, scale: f64, samples: usize) -> Vec<Point> {
    let [i, j] = model.elements[e].nodes;
    let (a, b) = (model.nodes[i], model.nodes[j]);
    let len = a.distance(&b);
    let (c, s) = ((b.x - a.x) / len, (b.y - a.y) / len);
    let [uxa, uya, ta] = field.values[i];
    let [uxb, uyb, tb] = field.values[j];
    let (axial_a, trans_a) = (uxa * c + uya * s, -uxa * s + uya * c);
    let (axial_b, trans_b) = (uxb * c + uyb * s, -uxb * s + uyb * c);
    let n = samples.max(1);
    (0..=n)
        .map(|k| {
            let xi = k as f64 / n as f64;
            let (x2, x3) = (xi * xi, xi * xi * xi);
            let u = (1.0 - xi) * axial_a + xi * axial_b;
            let v = (1.0 - 3.0 * x2 + 2.0 * x3) * trans_a
                + (xi - 2.0 * x2 + x3) * len * ta
                + (3.0 * x2 - 2.0 * x3) * trans_b
                + (x3 - x2) * len * tb;
            Point::new(a.x + xi * len * c + scale * (u * c - v * s), a.y + xi * len * s + scale * (u * s + v * c))
        })
        .collect()
}

/// SVG with an `undeformed` group and, when a field is given, a `deformed`
/// group; each holds one polyline per element. The scale used is recorded
/// in the metadata.
pub fn render_svg(model: &FrameModel, field: Option<&DisplacementField>, opts: &RenderOptions) -> String {
    let scale = field.map(|f| opts.scale.unwrap_or_else(|| autoscale(model, f)));
    let mut shapes: Vec<Vec<Point>> = Vec::new();
    let undeformed: Vec<Vec<Point>> = model.elements.iter().map(|e| vec![model.nodes[e.nodes[0]], model.nodes[e.nodes[1]]]).collect();
    shapes.extend(undeformed.iter().cloned());
    let deformed: Option<Vec<Vec<Point>>> =
        field.map(|f| (0..model.elements.len()).map(|e| deformed_element(model, f, e, scale.unwrap(), opts.samples)).collect());
    if let Some(d) = &deformed {
        shapes.extend(d.iter().cloned());
    }
    let pts = shapes.iter().flatten();
    let (mut x0, mut y0, mut x1, mut y1) = (0.0f64, 0.0f64, 1.0f64, 1.0f64);
    let mut first = true;
    for p in pts {
        if first {
            (x0, y0, x1, y1) = (p.x, p.y, p.x, p.y);
            first = false;
        }
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let m = opts.margin;
    let (w, h) = (x1 - x0 + 2.0 * m, y1 - y0 + 2.0 * m);
    let map = |p: &Point| ((p.x - x0 + m) * opts.zoom, (y1 - p.y + m) * opts.zoom);
    let polyline = |line: &[Point]| {
        let coords: Vec<String> = line
            .iter()
            .map(|p| {
                let (x, y) = map(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        format!("<polyline points=\"{}\"/>", coords.join(" "))
    };

    let mut out = String::new();
    let _ = writeln!(out, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.1}\" height=\"{:.1}\" viewBox=\"0 0 {:.3} {:.3}\">",
        w * opts.zoom,
        h * opts.zoom,
        w * opts.zoom,
        h * opts.zoom
    );
    let _ = writeln!(
        out,
        "<metadata>{{\"elements\": {}, \"deformation_scale\": {}, \"max_displacement_mm\": {}}}</metadata>",
        model.elements.len(),
        scale.map_or("null".to_string(), |s| s.to_string()),
        field.map_or("null".to_string(), |f| f.max_translation().to_string())
    );
    let _ = writeln!(out, "<g id=\"undeformed\" fill=\"none\" stroke=\"#9a9a9a\" stroke-width=\"1.5\">");
    for line in &undeformed {
        let _ = writeln!(out, "{}", polyline(line));
    }
    let _ = writeln!(out, "</g>");
    if let Some(d) = &deformed {
        let _ = writeln!(out, "<g id=\"deformed\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\">");
        for line in d {
            let _ = writeln!(out, "{}", polyline(line));
        }
        let _ = writeln!(out, "</g>");
    }
    let _ = writeln!(out, "</svg>");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::CellParams;
    use crate::fea::{solve, LoadCase};
    use crate::lattice::{assemble, DesignGrid, Material};

    fn loaded_cell() -> (FrameModel, DisplacementField) {
        let g = DesignGrid::from_codes(&["SP"]).unwrap();
        let m = assemble(&g, &CellParams::default(), Material::TPU).unwrap();
        let mut case = LoadCase::new();
        case.clamp(m.node_at(Point::new(0.0, 0.0)).unwrap());
        case.clamp(m.node_at(Point::new(10.0, 0.0)).unwrap());
        case.add_load(m.node_at(Point::new(0.0, 10.0)).unwrap(), -1.0, 0.0, 0.0);
        let u = solve(&m, &case).unwrap();
        (m, u)
    }

    #[test]
    fn deformed_shape_interpolates_nodes() {
        let (m, u) = loaded_cell();
        for e in 0..m.elements.len() {
            let pts = deformed_element(&m, &u, e, 2.0, 10);
            for (k, end) in [(0usize, 0usize), (10, 1)] {
                let n = m.elements[e].nodes[end];
                let expect = Point::new(m.nodes[n].x + 2.0 * u.values[n][0], m.nodes[n].y + 2.0 * u.values[n][1]);
                assert!(pts[k].distance(&expect) < 1e-9);
            }
        }
    }

    #[test]
    fn one_polyline_per_element_in_each_group() {
        let (m, u) = loaded_cell();
        let svg = render_svg(&m, Some(&u), &RenderOptions::default());
        assert_eq!(svg.matches("<polyline").count(), 2 * m.elements.len());
        assert!(svg.contains("deformation_scale"));
        let bare = render_svg(&m, None, &RenderOptions::default());
        assert_eq!(bare.matches("<polyline").count(), m.elements.len());
        assert_eq!(render_svg(&m, Some(&u), &RenderOptions::default()), svg);
    }

    #[test]
    fn autoscale_targets_a_tenth_of_the_width() {
        let (m, u) = loaded_cell();
        let s = autoscale(&m, &u);
        assert!((s * u.max_translation() - 1.0).abs() < 1e-12);
    }
}

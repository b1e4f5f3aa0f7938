//! Deterministic SVG plots of member paths and constraint regions.

use std::fmt::Write;

use moment_ensemble::geometry::{ObstacleSpec, Polyhedron};

const WIDTH: f64 = 800.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    /// One polyline per member, in plot order.
    pub paths: Vec<Vec<[f64; 2]>>,
    /// Secondary paths drawn dashed (e.g. an open-loop comparison).
    pub dashed: Vec<Vec<[f64; 2]>>,
    pub keep_in: Vec<Polyhedron>,
    pub waypoints: Vec<Polyhedron>,
    pub obstacles: Vec<ObstacleSpec>,
    pub start: Option<[f64; 2]>,
    pub goal: Option<[f64; 2]>,
}

type HalfPlanes = Vec<([f64; 2], f64)>;

/// Half-planes `a·x ≥ b` describing a two-sided polyhedron.
fn half_planes(p: &Polyhedron) -> HalfPlanes {
    let mut out = Vec::new();
    for ((a, lo), hi) in p.rows().iter().zip(p.lower()).zip(p.upper()) {
        if lo.is_finite() {
            out.push((*a, *lo));
        }
        if hi.is_finite() {
            out.push(([-a[0], -a[1]], -hi));
        }
    }
    out
}

fn obstacle_planes(o: &ObstacleSpec) -> HalfPlanes {
    o.rows().iter().copied().zip(o.bounds().iter().copied()).collect()
}

fn box_planes(lo: [f64; 2], hi: [f64; 2]) -> HalfPlanes {
    vec![([1.0, 0.0], lo[0]), ([0.0, 1.0], lo[1]), ([-1.0, 0.0], -hi[0]), ([0.0, -1.0], -hi[1])]
}

/// Vertices of the bounded polygon `∩ {a·x ≥ b}`, counter-clockwise.
fn polygon(planes: &[([f64; 2], f64)]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = Vec::new();
    for i in 0..planes.len() {
        for j in i + 1..planes.len() {
            let ((a, b), (c, d)) = (planes[i], planes[j]);
            let det = a[0] * c[1] - a[1] * c[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = [(b * c[1] - a[1] * d) / det, (a[0] * d - b * c[0]) / det];
            let scale = 1.0 + x[0].abs() + x[1].abs();
            let feasible = planes.iter().all(|(r, s)| r[0] * x[0] + r[1] * x[1] >= s - 1e-9 * scale);
            if feasible && !pts.iter().any(|p| (p[0] - x[0]).abs() + (p[1] - x[1]).abs() < 1e-9 * scale) {
                pts.push(x);
            }
        }
    }
    if pts.len() < 3 {
        return Vec::new();
    }
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    pts.sort_by(|p, q| {
        let ap = (p[1] - cy).atan2(p[0] - cx);
        let aq = (q[1] - cy).atan2(q[0] - cx);
        ap.total_cmp(&aq)
    });
    pts
}

struct View {
    lo: [f64; 2],
    hi: [f64; 2],
    scale: f64,
    height: f64,
}

impl View {
    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        (
            (p[0] - self.lo[0]) * self.scale + 20.0,
            self.height - 20.0 - (p[1] - self.lo[1]) * self.scale,
        )
    }

    fn points(&self, pts: &[[f64; 2]]) -> String {
        let parts: Vec<String> = pts
            .iter()
            .map(|p| {
                let (x, y) = self.map(*p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        parts.join(" ")
    }
}

fn view(plot: &Plot) -> View {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut add = |p: [f64; 2]| {
        if p[0].is_finite() && p[1].is_finite() {
            for i in 0..2 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
    };
    plot.paths.iter().chain(&plot.dashed).flatten().for_each(|p| add(*p));
    plot.start.into_iter().chain(plot.goal).for_each(&mut add);
    plot.obstacles.iter().flat_map(|o| polygon(&obstacle_planes(o))).for_each(&mut add);
    plot.waypoints.iter().flat_map(|w| polygon(&half_planes(w))).for_each(&mut add);
    // keep-in regions only widen the view when they are bounded
    for k in &plot.keep_in {
        let far = 1e4;
        let mut planes = half_planes(k);
        planes.extend(box_planes([-far, -far], [far, far]));
        let poly = polygon(&planes);
        if poly.iter().all(|p| p[0].abs() < 0.5 * far && p[1].abs() < 0.5 * far) {
            poly.into_iter().for_each(&mut add);
        }
    }
    if !lo[0].is_finite() {
        lo = [-1.0, -1.0];
        hi = [1.0, 1.0];
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-6);
    let pad = 0.08 * span;
    let lo = [lo[0] - pad, lo[1] - pad];
    let hi = [hi[0] + pad, hi[1] + pad];
    let scale = (WIDTH - 40.0) / (hi[0] - lo[0]);
    let height = (hi[1] - lo[1]) * scale + 40.0;
    View { lo, hi, scale, height }
}

pub fn render_svg(plot: &Plot) -> String {
    let v = view(plot);
    let clip = box_planes(v.lo, v.hi);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{:.0}" viewBox="0 0 {WIDTH:.0} {:.0}">"#,
        v.height, v.height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if !plot.title.is_empty() {
        let _ = writeln!(s, r#"<title>{}</title>"#, escape(&plot.title));
    }
    for k in &plot.keep_in {
        let mut planes = half_planes(k);
        planes.extend(clip.iter().copied());
        let _ = writeln!(
            s,
            r##"<polygon class="keep-in" points="{}" fill="none" stroke="#444" stroke-width="1.5"/>"##,
            v.points(&polygon(&planes))
        );
    }
    for w in &plot.waypoints {
        let mut planes = half_planes(w);
        planes.extend(clip.iter().copied());
        let _ = writeln!(
            s,
            r##"<polygon class="waypoint" points="{}" fill="none" stroke="#0044cc" stroke-width="2"/>"##,
            v.points(&polygon(&planes))
        );
    }
    for o in &plot.obstacles {
        let _ = writeln!(
            s,
            r##"<polygon class="obstacle" points="{}" fill="#d62728" fill-opacity="0.45" stroke="#8b0000"/>"##,
            v.points(&polygon(&obstacle_planes(o)))
        );
    }
    for (i, p) in plot.dashed.iter().enumerate() {
        let _ = writeln!(
            s,
            r##"<polyline class="dashed" points="{}" fill="none" stroke="{}" stroke-width="1" stroke-dasharray="5,4"/>"##,
            v.points(p),
            PALETTE[i % PALETTE.len()]
        );
    }
    for (i, p) in plot.paths.iter().enumerate() {
        let _ = writeln!(
            s,
            r##"<polyline class="member" points="{}" fill="none" stroke="{}" stroke-width="1" stroke-opacity="0.8"/>"##,
            v.points(p),
            PALETTE[i % PALETTE.len()]
        );
    }
    if let Some(p) = plot.start {
        let (x, y) = v.map(p);
        let _ = writeln!(s, r##"<circle class="start" cx="{x:.2}" cy="{y:.2}" r="5" fill="#000"/>"##);
    }
    if let Some(p) = plot.goal {
        let (x, y) = v.map(p);
        let _ = writeln!(
            s,
            r##"<rect class="goal" x="{:.2}" y="{:.2}" width="10" height="10" fill="#ff7f0e"/>"##,
            x - 5.0,
            y - 5.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_plot_has_only_constraints() {
        let plot = Plot {
            keep_in: vec![Polyhedron::from_box([0.0, 0.0], [1.0, 1.0]).unwrap()],
            ..Plot::default()
        };
        let svg = render_svg(&plot);
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert_eq!(svg.matches(r#"class="keep-in""#).count(), 1);
    }

    #[test]
    fn one_polygon_per_obstacle_and_one_line_per_path() {
        let plot = Plot {
            paths: (0..7).map(|i| vec![[0.0, i as f64], [1.0, i as f64]]).collect(),
            obstacles: vec![
                ObstacleSpec::from_box([2.0, 1.0], [6.0, 3.0], 20.0).unwrap(),
                ObstacleSpec::from_box([7.0, 1.0], [8.0, 3.0], 20.0).unwrap(),
            ],
            ..Plot::default()
        };
        let svg = render_svg(&plot);
        assert_eq!(svg.matches(r#"class="member""#).count(), 7);
        assert_eq!(svg.matches(r#"class="obstacle""#).count(), 2);
        assert_eq!(svg, render_svg(&plot));
    }

    #[test]
    fn square_vertices() {
        let v = polygon(&box_planes([0.0, 0.0], [2.0, 1.0]));
        assert_eq!(v.len(), 4);
        assert!(v.contains(&[2.0, 1.0]) && v.contains(&[0.0, 0.0]));
    }

    #[test]
    fn unbounded_slab_is_clipped() {
        let slab = Polyhedron::new(vec![[0.0, 1.0]], vec![0.0], vec![1.0]).unwrap();
        let plot = Plot {
            keep_in: vec![slab],
            paths: vec![vec![[0.0, 0.5], [3.0, 0.5]]],
            ..Plot::default()
        };
        let svg = render_svg(&plot);
        let line = svg.lines().find(|l| l.contains("keep-in")).unwrap();
        assert_eq!(line.matches(',').count(), 4);
    }
}

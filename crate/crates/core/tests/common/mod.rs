//! Test-side oracles. Nothing here calls the routines it is used to check: distances
//! are measured on ambient polylines, multiplicities are counted pointwise, lengths
//! are re-integrated from samples.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use geonet::multigraph::{EdgeId, VertexId, WeightedMultigraph};
use geonet::net::GammaNet;
use geonet::riemann::{ChartManifold, Sample};

pub type P4 = [f64; 4];

fn sub(a: &P4, b: &P4) -> P4 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

fn dot(a: &P4, b: &P4) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

pub fn dist(a: &P4, b: &P4) -> f64 {
    let d = sub(a, b);
    dot(&d, &d).sqrt()
}

pub fn point_segment(p: &P4, a: &P4, b: &P4) -> f64 {
    let ab = sub(b, a);
    let l2 = dot(&ab, &ab);
    let t = if l2 > 0.0 { (dot(&sub(p, a), &ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2], a[3] + t * ab[3]];
    dist(p, &q)
}

/// Distance between segments by minimizing over a clamped parameter pair.
pub fn segment_segment(a0: &P4, a1: &P4, b0: &P4, b1: &P4) -> f64 {
    let d1 = sub(a1, a0);
    let d2 = sub(b1, b0);
    let r = sub(a0, b0);
    let (a, e, f) = (dot(&d1, &d1), dot(&d2, &d2), dot(&d2, &r));
    let (mut s, mut t);
    if a <= 1e-300 && e <= 1e-300 {
        return dist(a0, b0);
    }
    if a <= 1e-300 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(&d1, &r);
        if e <= 1e-300 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(&d1, &d2);
            let den = a * e - b * b;
            s = if den > 1e-300 { ((b * f - c * e) / den).clamp(0.0, 1.0) } else { 0.0 };
            t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
        }
    }
    let p = [a0[0] + s * d1[0], a0[1] + s * d1[1], a0[2] + s * d1[2], a0[3] + s * d1[3]];
    let q = [b0[0] + t * d2[0], b0[1] + t * d2[1], b0[2] + t * d2[2], b0[3] + t * d2[3]];
    dist(&p, &q)
}

/// Ambient polyline of one edge with its multiplicity and end vertices.
pub struct Polyline {
    pub edge: EdgeId,
    pub ends: [VertexId; 2],
    pub multiplicity: u32,
    pub points: Vec<P4>,
    boxes: Vec<(usize, usize, P4, P4)>,
}

const BLOCK: usize = 16;

impl Polyline {
    fn new(edge: EdgeId, ends: [VertexId; 2], multiplicity: u32, points: Vec<P4>) -> Self {
        let mut boxes = Vec::new();
        let segs = points.len().saturating_sub(1);
        let mut i = 0;
        while i < segs {
            let j = (i + BLOCK).min(segs);
            let mut lo = [f64::INFINITY; 4];
            let mut hi = [f64::NEG_INFINITY; 4];
            for p in &points[i..=j] {
                for k in 0..4 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
            boxes.push((i, j, lo, hi));
            i = j;
        }
        Polyline { edge, ends, multiplicity, points, boxes }
    }

    /// Distance from `p` to the polyline.
    pub fn distance(&self, p: &P4) -> f64 {
        self.nearest(p).0
    }

    /// Distance to the polyline and the index of the closest segment.
    fn nearest(&self, p: &P4) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (i, j, lo, hi) in &self.boxes {
            if box_point(lo, hi, p) >= best.0 {
                continue;
            }
            for k in *i..*j {
                let d = point_segment(p, &self.points[k], &self.points[k + 1]);
                if d < best.0 {
                    best = (d, k);
                }
            }
        }
        best
    }

    /// Distance to the curve through the points, using parabolas through consecutive
    /// triples near the closest segment. Removes the chord error of [`Self::distance`].
    pub fn curve_distance(&self, p: &P4) -> f64 {
        let (d, k) = self.nearest(p);
        let n = self.points.len();
        if n < 3 {
            return d;
        }
        let mut best = d;
        for c in [k.max(1).min(n - 2), (k + 1).min(n - 2)] {
            let (a, b, e) = (self.points[c - 1], self.points[c], self.points[c + 1]);
            let at = |t: f64| -> f64 {
                let mut q = [0.0; 4];
                for i in 0..4 {
                    q[i] = b[i] + 0.5 * t * (e[i] - a[i]) + 0.5 * t * t * (e[i] - 2.0 * b[i] + a[i]);
                }
                dist(&q, p)
            };
            let (mut lo, mut hi) = (-1.0f64, 1.0f64);
            for _ in 0..80 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if at(m1) < at(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            best = best.min(at(0.5 * (lo + hi)));
        }
        best
    }
}

fn box_point(lo: &P4, hi: &P4, p: &P4) -> f64 {
    let mut s = 0.0;
    for k in 0..4 {
        let d = (lo[k] - p[k]).max(p[k] - hi[k]).max(0.0);
        s += d * d;
    }
    s.sqrt()
}

fn box_box(a: &(usize, usize, P4, P4), b: &(usize, usize, P4, P4)) -> f64 {
    let mut s = 0.0;
    for k in 0..4 {
        let d = (a.2[k] - b.3[k]).max(b.2[k] - a.3[k]).max(0.0);
        s += d * d;
    }
    s.sqrt()
}

fn amb(m: &ChartManifold, p: &geonet::riemann::ChartPoint) -> P4 {
    let a = m.ambient(p);
    [a[0], a[1], a[2], a[3]]
}

pub fn polylines(net: &GammaNet) -> Vec<Polyline> {
    let m = net.manifold();
    net.graph()
        .edges()
        .map(|e| Polyline::new(e.id, e.ends, e.multiplicity, net.edge_samples(e.id).iter().map(|p| amb(m, p)).collect()))
        .collect()
}

pub fn vertex_points(net: &GammaNet) -> BTreeMap<VertexId, P4> {
    net.positions().iter().map(|(v, p)| (*v, amb(net.manifold(), p))).collect()
}

/// Symmetric Hausdorff distance between the images, sampled at every stored point.
pub fn hausdorff(a: &GammaNet, b: &GammaNet) -> f64 {
    hausdorff_with(a, b, Polyline::distance)
}

/// As [`hausdorff`] with the chord error removed; resolves distances well below the
/// sample spacing squared.
pub fn smooth_hausdorff(a: &GammaNet, b: &GammaNet) -> f64 {
    hausdorff_with(a, b, Polyline::curve_distance)
}

fn hausdorff_with(a: &GammaNet, b: &GammaNet, d: fn(&Polyline, &P4) -> f64) -> f64 {
    let (pa, pb) = (polylines(a), polylines(b));
    let one_way = |from: &[Polyline], to: &[Polyline]| {
        from.iter()
            .flat_map(|l| l.points.iter())
            .map(|p| to.iter().map(|l| d(l, p)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(&pa, &pb).max(one_way(&pb, &pa))
}

/// Sum of multiplicities of edges passing within `tol` of `p`.
pub fn multiplicity_at(lines: &[Polyline], p: &P4, tol: f64) -> u32 {
    lines.iter().filter(|l| l.distance(p) <= tol).map(|l| l.multiplicity).sum()
}

/// Compares the pointwise multiplicity of two images at every `stride`-th sample of
/// both, away from the vertices of either net.
pub fn same_multiplicity(a: &GammaNet, b: &GammaNet, tol: f64, stride: usize) -> Result<(), String> {
    let (la, lb) = (polylines(a), polylines(b));
    let mut vertices: Vec<P4> = vertex_points(a).into_values().collect();
    vertices.extend(vertex_points(b).into_values());
    for lines in [&la, &lb] {
        for l in lines.iter() {
            for p in l.points.iter().step_by(stride.max(1)) {
                if vertices.iter().any(|v| dist(v, p) < 1e-3) {
                    continue;
                }
                let (ma, mb) = (multiplicity_at(&la, p, tol), multiplicity_at(&lb, p, tol));
                if ma != mb {
                    return Err(format!("multiplicity {ma} before, {mb} after at {p:?}"));
                }
            }
        }
    }
    Ok(())
}

/// Injectivity at tolerance `tol`: distinct vertices are apart, and segments of the
/// images are apart unless they share an end vertex within `near` of it or are
/// neighbours on one edge.
pub fn embedded(net: &GammaNet, tol: f64) -> Result<(), String> {
    let near = 1e-2;
    let verts = vertex_points(net);
    let vlist: Vec<(&VertexId, &P4)> = verts.iter().collect();
    for i in 0..vlist.len() {
        for j in i + 1..vlist.len() {
            if dist(vlist[i].1, vlist[j].1) <= tol {
                return Err(format!("vertices {} and {} coincide", vlist[i].0, vlist[j].0));
            }
        }
    }
    let lines = polylines(net);
    let near_vertex = |p: &P4, vs: &[VertexId]| vs.iter().any(|v| dist(&verts[v], p) < near);
    for (ia, a) in lines.iter().enumerate() {
        for b in &lines[ia..] {
            let same = a.edge == b.edge;
            let shared: Vec<VertexId> = a.ends.iter().filter(|v| b.ends.contains(v)).copied().collect();
            for ba in &a.boxes {
                for bb in &b.boxes {
                    if box_box(ba, bb) > tol {
                        continue;
                    }
                    for i in ba.0..ba.1 {
                        for j in bb.0..bb.1 {
                            if same && j <= i + 1 {
                                continue;
                            }
                            let (a0, a1) = (&a.points[i], &a.points[i + 1]);
                            let (b0, b1) = (&b.points[j], &b.points[j + 1]);
                            if (near_vertex(a0, &shared) || near_vertex(a1, &shared))
                                && (near_vertex(b0, &shared) || near_vertex(b1, &shared))
                            {
                                continue;
                            }
                            let d = segment_segment(a0, a1, b0, b1);
                            if d <= tol {
                                return Err(format!("edges {} and {} meet away from vertices ({d:e})", a.edge, b.edge));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn components_good(g: &WeightedMultigraph) -> bool {
    g.components().iter().all(|c| g.subgraph(c).is_good())
}

/// Isomorphism of the combinatorics carrying vertex images within `tol`, with equal
/// multiplicities and edge lengths.
pub fn same_net(a: &GammaNet, b: &GammaNet, tol: f64) -> Result<(), String> {
    let (va, vb) = (vertex_points(a), vertex_points(b));
    if va.len() != vb.len() || a.graph().edge_count() != b.graph().edge_count() {
        return Err("different vertex or edge counts".into());
    }
    let mut map = BTreeMap::new();
    let mut used = BTreeSet::new();
    for (v, p) in &va {
        let (w, d) = vb
            .iter()
            .filter(|(w, _)| !used.contains(*w))
            .map(|(w, q)| (*w, dist(p, q)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .ok_or("no vertex left")?;
        if d > tol {
            return Err(format!("vertex {v} moved by {d:e}"));
        }
        used.insert(w);
        map.insert(*v, w);
    }
    let mut free: Vec<_> = b.graph().edges().cloned().collect();
    let lines_b = polylines(b);
    for e in a.graph().edges() {
        let ends = [map[&e.ends[0]], map[&e.ends[1]]];
        let la = a.edge_length(e.id);
        let samples = a.edge_samples(e.id);
        let mid = amb(a.manifold(), &samples[samples.len() / 2]);
        let pos = free.iter().position(|f| {
            let same_ends = f.ends == ends || f.ends == [ends[1], ends[0]];
            let lb = b.edge_length(f.id);
            let pb = lines_b.iter().find(|l| l.edge == f.id).unwrap();
            same_ends && f.multiplicity == e.multiplicity && (la - lb).abs() <= tol && pb.distance(&mid) <= 1e-5
        });
        match pos {
            Some(k) => {
                free.remove(k);
            }
            None => return Err(format!("edge {} has no counterpart", e.id)),
        }
    }
    Ok(())
}

/// Minimizer of the summed distance to three planar points: grid search followed by
/// repeated local grids of shrinking spacing.
pub fn fermat_point(c: [[f64; 2]; 3]) -> [f64; 2] {
    let f = |x: f64, y: f64| c.iter().map(|p| ((x - p[0]).powi(2) + (y - p[1]).powi(2)).sqrt()).sum::<f64>();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &c {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let n = 200;
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for i in 0..=n {
        for j in 0..=n {
            let x = lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64;
            let y = lo[1] + (hi[1] - lo[1]) * j as f64 / n as f64;
            let v = f(x, y);
            if v < best.0 {
                best = (v, [x, y]);
            }
        }
    }
    let mut h = (hi[0] - lo[0]).max(hi[1] - lo[1]) / n as f64;
    while h > 1e-13 {
        let k = 10;
        let centre = best.1;
        for i in -k..=k {
            for j in -k..=k {
                let x = centre[0] + h * i as f64 / k as f64;
                let y = centre[1] + h * j as f64 / k as f64;
                let v = f(x, y);
                if v < best.0 {
                    best = (v, [x, y]);
                }
            }
        }
        h *= 0.25;
    }
    best.1
}

/// Lengths `2π·sqrt(p² + q²)` of closed geodesics of the square torus of side 2π, up
/// to `max_len`.
pub fn torus_spectrum(max_len: f64) -> Vec<f64> {
    let r = (max_len / (2.0 * PI)).ceil() as i64;
    let mut out: Vec<f64> = Vec::new();
    for p in -r..=r {
        for q in -r..=r {
            let l = 2.0 * PI * ((p * p + q * q) as f64).sqrt();
            if (p, q) != (0, 0) && l <= max_len {
                out.push(l);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    out
}

/// Composite Simpson on equally spaced values (trapezoid on a leftover interval).
pub fn simpson(values: &[f64], span: f64) -> f64 {
    let n = values.len() - 1;
    if n == 0 {
        return 0.0;
    }
    let h = span / n as f64;
    let even = n - n % 2;
    let mut s = 0.0;
    for i in (0..even).step_by(2) {
        s += h / 3.0 * (values[i] + 4.0 * values[i + 1] + values[i + 2]);
    }
    if even < n {
        s += 0.5 * h * (values[n - 1] + values[n]);
    }
    s
}

/// Length of a sampled curve under `m`, from the metric matrices.
pub fn curve_length(m: &ChartManifold, samples: &[Sample]) -> f64 {
    let speeds: Vec<f64> = samples
        .iter()
        .map(|s| {
            let g = m.metric(&s.point).unwrap();
            (s.velocity.transpose() * g * s.velocity)[(0, 0)].max(0.0).sqrt()
        })
        .collect();
    simpson(&speeds, 1.0)
}

/// Perimeter of the ellipse with semi-axes `a`, `b` by the midpoint rule.
pub fn ellipse_perimeter(a: f64, b: f64) -> f64 {
    let n = 200_000;
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * (k as f64 + 0.5) / n as f64;
            (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt()
        })
        .sum::<f64>()
        * 2.0
        * PI
        / n as f64
}

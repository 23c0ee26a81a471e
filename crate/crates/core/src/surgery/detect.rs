//! Coincidences between the pieces and nodes of a net. Separations below `tol/10`
//! count as contact, separations of at least `tol` as disjoint, and anything between
//! is refused.
//!
//! Candidates are screened on the sampled polylines and then refined on the geodesics
//! themselves, evaluated by re-integrating from the nearest stored sample.

use std::collections::HashMap;

use crate::error::{GeonetError, Result};
use crate::multigraph::EdgeId;
use crate::net::{GammaNet, Node, PieceEnd};
use crate::riemann::geodesic::integrate;
use crate::riemann::{Ambient, ChartManifold, ChartPoint, GeodesicSegment, Sample};

/// Tangent lines closer than this multiple of `tol` are not transverse.
pub const TRANSVERSE_FACTOR: f64 = 10.0;

const BLOCK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PieceRef {
    pub edge: EdgeId,
    pub piece: usize,
}

#[derive(Clone, Debug)]
pub enum Coincidence {
    /// Interior points of two pieces meet at a nonzero angle.
    Crossing { first: PieceRef, second: PieceRef, point: ChartPoint, angle: f64 },
    /// Two pieces share an arc of positive length.
    Overlap { first: PieceRef, second: PieceRef, length: f64 },
    /// A node lies on the interior of a piece it does not bound.
    NodeOnPiece { node: Node, piece: PieceRef, tau: f64 },
    /// Two distinct nodes occupy the same point.
    NodeCoincidence { first: Node, second: Node, distance: f64 },
}

struct Track<'a> {
    piece: PieceRef,
    seg: &'a GeodesicSegment,
    nodes: [Node; 2],
    ends: [PieceEnd; 2],
    amb: Vec<Ambient>,
    blocks: Vec<(usize, usize, Ambient, Ambient)>,
}

impl<'a> Track<'a> {
    fn new(m: &ChartManifold, net: &'a GammaNet, edge: EdgeId, piece: usize) -> Self {
        let seg = &net.edge(edge).pieces[piece];
        let amb: Vec<Ambient> = seg.samples.iter().map(|s| m.ambient(&s.point)).collect();
        let mut blocks = Vec::new();
        let mut i = 0;
        while i + 1 < amb.len() {
            let j = (i + BLOCK).min(amb.len() - 1);
            let (lo, hi) = bounds(&amb[i..=j]);
            blocks.push((i, j, lo, hi));
            i = j;
        }
        Track {
            piece: PieceRef { edge, piece },
            seg,
            nodes: [net.piece_node(edge, piece, 0), net.piece_node(edge, piece, 1)],
            ends: [PieceEnd { edge, piece, side: 0 }, PieceEnd { edge, piece, side: 1 }],
            amb,
            blocks,
        }
    }

    fn spacing(&self) -> f64 {
        self.amb.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max)
    }

    fn closest_to(&self, p: &Ambient, screen: f64) -> Option<(f64, f64)> {
        let n = (self.amb.len() - 1) as f64;
        let mut best: Option<(f64, f64)> = None;
        for (i0, i1, lo, hi) in &self.blocks {
            if !near_box(p, lo, hi, screen) {
                continue;
            }
            for i in *i0..*i1 {
                let (d, u) = point_segment(p, &self.amb[i], &self.amb[i + 1]);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, (i as f64 + u) / n));
                }
            }
        }
        best
    }
}

fn bounds(pts: &[Ambient]) -> (Ambient, Ambient) {
    let mut lo = pts[0];
    let mut hi = pts[0];
    for p in pts {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

fn near_box(p: &Ambient, lo: &Ambient, hi: &Ambient, r: f64) -> bool {
    (0..4).all(|k| p[k] >= lo[k] - r && p[k] <= hi[k] + r)
}

fn boxes_meet(a: (&Ambient, &Ambient), b: (&Ambient, &Ambient), r: f64) -> bool {
    (0..4).all(|k| a.0[k] - r <= b.1[k] && b.0[k] - r <= a.1[k])
}

fn point_segment(p: &Ambient, a: &Ambient, b: &Ambient) -> (f64, f64) {
    let d = b - a;
    let len2 = d.norm_squared();
    let u = if len2 > 0.0 { ((p - a).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
    ((a + d * u - p).norm(), u)
}

/// Closest points of two straight segments: distance and both parameters.
fn segment_segment(p0: &Ambient, p1: &Ambient, q0: &Ambient, q1: &Ambient) -> (f64, f64, f64) {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (mut s, mut t);
    if a <= f64::MIN_POSITIVE && e <= f64::MIN_POSITIVE {
        return (r.norm(), 0.0, 0.0);
    }
    if a <= f64::MIN_POSITIVE {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= f64::MIN_POSITIVE {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            s = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
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
    ((p0 + d1 * s - (q0 + d2 * t)).norm(), s, t)
}

/// Point and unit-parameter velocity at `tau`, integrated from the nearest sample.
pub(crate) fn evaluate(m: &ChartManifold, seg: &GeodesicSegment, tau: f64) -> Result<Sample> {
    let n = seg.steps;
    let k = ((tau * n as f64).round() as usize).min(n);
    let dt = tau - k as f64 / n as f64;
    let s = seg.samples[k];
    if dt.abs() < 1e-15 {
        return Ok(s);
    }
    let out = integrate(m, s.point, s.velocity * dt, 2, false, &mut [], false)?;
    let last = out.last().expect("integration yields a sample");
    Ok(Sample { point: last.point, velocity: last.velocity / dt })
}

fn ambient_velocity(m: &ChartManifold, s: &Sample) -> Ambient {
    let h = 1e-6 / s.velocity.norm().max(1e-300);
    let plus = ChartPoint { chart: s.point.chart, x: s.point.x + s.velocity * h };
    let minus = ChartPoint { chart: s.point.chart, x: s.point.x - s.velocity * h };
    (m.ambient(&plus) - m.ambient(&minus)) / (2.0 * h)
}

/// Distance from `p` to the piece and the parameter of the foot point, refined by
/// Newton's method on the squared distance.
fn project(m: &ChartManifold, seg: &GeodesicSegment, p: &Ambient, tau0: f64) -> Result<(f64, f64)> {
    let mut tau = tau0;
    for _ in 0..40 {
        let s = evaluate(m, seg, tau)?;
        let x = m.ambient(&s.point);
        let d = ambient_velocity(m, &s);
        let next = (tau - (x - p).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
        let done = (next - tau).abs() < 1e-15;
        tau = next;
        if done {
            break;
        }
    }
    Ok(((m.ambient(&evaluate(m, seg, tau)?.point) - p).norm(), tau))
}

/// Distance from a chart point to a piece with its foot parameter.
pub(crate) fn locate(m: &ChartManifold, seg: &GeodesicSegment, p: &ChartPoint) -> Result<(f64, f64)> {
    let x = m.ambient(p);
    let amb: Vec<Ambient> = seg.samples.iter().map(|s| m.ambient(&s.point)).collect();
    let n = (amb.len() - 1) as f64;
    let (mut best, mut tau) = (f64::INFINITY, 0.0);
    for (i, w) in amb.windows(2).enumerate() {
        let (d, u) = point_segment(&x, &w[0], &w[1]);
        if d < best {
            best = d;
            tau = (i as f64 + u) / n;
        }
    }
    project(m, seg, &x, tau)
}

/// Closest approach of two pieces near `(s0, t0)` by damped Gauss–Newton.
fn closest_pair(m: &ChartManifold, a: &GeodesicSegment, b: &GeodesicSegment, s0: f64, t0: f64) -> Result<(f64, f64, f64)> {
    let residual = |s: f64, t: f64| -> Result<(Ambient, Sample, Sample)> {
        let sa = evaluate(m, a, s)?;
        let sb = evaluate(m, b, t)?;
        Ok((m.ambient(&sa.point) - m.ambient(&sb.point), sa, sb))
    };
    let (mut s, mut t) = (s0, t0);
    let (mut r, mut sa, mut sb) = residual(s, t)?;
    for _ in 0..60 {
        let ja = ambient_velocity(m, &sa);
        let jb = -ambient_velocity(m, &sb);
        let (a11, a12, a22) = (ja.norm_squared(), ja.dot(&jb), jb.norm_squared());
        let mu = 1e-10 * (a11 + a22);
        let (g1, g2) = (ja.dot(&r), jb.dot(&r));
        let det = (a11 + mu) * (a22 + mu) - a12 * a12;
        let ds = -((a22 + mu) * g1 - a12 * g2) / det;
        let dt = -((a11 + mu) * g2 - a12 * g1) / det;
        let mut scale = 1.0;
        let mut moved = false;
        for _ in 0..20 {
            let ns = (s + scale * ds).clamp(0.0, 1.0);
            let nt = (t + scale * dt).clamp(0.0, 1.0);
            if (ns - s).abs() + (nt - t).abs() < 1e-16 {
                break;
            }
            let (nr, nsa, nsb) = residual(ns, nt)?;
            if nr.norm() <= r.norm() {
                moved = (ns - s).abs() + (nt - t).abs() > 1e-15;
                s = ns;
                t = nt;
                r = nr;
                sa = nsa;
                sb = nsb;
                break;
            }
            scale *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((r.norm(), s, t))
}

/// Angle between the tangent lines of two pieces at the given parameters.
fn line_angle(m: &ChartManifold, a: &GeodesicSegment, s: f64, b: &GeodesicSegment, t: f64) -> Result<f64> {
    let u = ambient_velocity(m, &evaluate(m, a, s)?).normalize();
    let mut v = ambient_velocity(m, &evaluate(m, b, t)?).normalize();
    if u.dot(&v) < 0.0 {
        v = -v;
    }
    Ok(2.0 * ((u - v).norm() / 2.0).min(1.0).asin())
}

/// Length of the common arc of two pieces, from the ends of each lying on the other.
pub(crate) fn overlap_length(m: &ChartManifold, a: &GeodesicSegment, b: &GeodesicSegment, tol: f64) -> Result<f64> {
    let mut params = Vec::new();
    for (tau, p) in [(0.0, a.start), (1.0, a.end)] {
        if locate(m, b, &p)?.0 < tol / 10.0 {
            params.push(tau);
        }
    }
    for p in [b.start, b.end] {
        let (d, tau) = locate(m, a, &p)?;
        if d < tol / 10.0 {
            params.push(tau);
        }
    }
    if params.len() < 2 {
        return Ok(0.0);
    }
    let lo = params.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = params.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((hi - lo) * a.length)
}

fn describe(p: &PieceRef) -> String {
    format!("edge {} piece {}", p.edge, p.piece)
}

fn ambiguous(what: String, distance: f64) -> GeonetError {
    GeonetError::AmbiguousGeometry { what, distance }
}

/// All coincidences of the net at tolerance `tol`, or an error if some separation
/// falls inside the refusal band `[tol/10, tol)`.
pub fn detect_coincidences(net: &GammaNet, tol: f64) -> Result<Vec<Coincidence>> {
    let m = net.manifold();
    let mut tracks = Vec::new();
    for (e, ne) in net.edges() {
        for k in 0..ne.pieces.len() {
            tracks.push(Track::new(m, net, *e, k));
        }
    }
    let h = tracks.iter().map(Track::spacing).fold(0.0, f64::max);
    let screen = TRANSVERSE_FACTOR * tol + h * h;
    let mut out = Vec::new();

    let nodes = net.nodes();
    let node_amb: Vec<Ambient> = nodes.iter().map(|n| m.ambient(&net.point(*n))).collect();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let d = (node_amb[i] - node_amb[j]).norm();
            if d < tol / 10.0 {
                out.push(Coincidence::NodeCoincidence { first: nodes[i], second: nodes[j], distance: d });
            } else if d < tol {
                return Err(ambiguous(format!("nodes {:?} and {:?}", nodes[i], nodes[j]), d));
            }
        }
    }

    for (node, x) in nodes.iter().zip(&node_amb) {
        for tr in &tracks {
            if tr.nodes.contains(node) {
                continue;
            }
            let Some((_, tau0)) = tr.closest_to(x, screen).filter(|(d, _)| *d < screen) else {
                continue;
            };
            let (d, tau) = project(m, tr.seg, x, tau0)?;
            let foot = m.ambient(&evaluate(m, tr.seg, tau)?.point);
            if tr.nodes.iter().any(|n| (m.ambient(&net.point(*n)) - foot).norm() < tol) {
                continue;
            }
            if d < tol / 10.0 {
                out.push(Coincidence::NodeOnPiece { node: *node, piece: tr.piece, tau });
            } else if d < tol {
                return Err(ambiguous(format!("node {node:?} and {}", describe(&tr.piece)), d));
            }
        }
    }

    for i in 0..tracks.len() {
        for j in i + 1..tracks.len() {
            if let Some(c) = piece_pair(net, &tracks[i], &tracks[j], tol, screen)? {
                out.push(c);
            }
        }
    }
    Ok(out)
}

fn piece_pair(net: &GammaNet, a: &Track, b: &Track, tol: f64, screen: f64) -> Result<Option<Coincidence>> {
    let m = net.manifold();
    let mut cands: Vec<(usize, usize, f64, f64, f64)> = Vec::new();
    for (i0, i1, alo, ahi) in &a.blocks {
        for (j0, j1, blo, bhi) in &b.blocks {
            if !boxes_meet((alo, ahi), (blo, bhi), screen) {
                continue;
            }
            for i in *i0..*i1 {
                for j in *j0..*j1 {
                    let (d, u, v) = segment_segment(&a.amb[i], &a.amb[i + 1], &b.amb[j], &b.amb[j + 1]);
                    if d < screen {
                        cands.push((i, j, d, u, v));
                    }
                }
            }
        }
    }
    if cands.is_empty() {
        return Ok(None);
    }
    let clusters = cluster(&cands);
    let shared: Vec<(usize, usize)> =
        (0..2).flat_map(|x| (0..2).map(move |y| (x, y))).filter(|(x, y)| a.nodes[*x] == b.nodes[*y]).collect();
    let (na, nb) = ((a.amb.len() - 1) as f64, (b.amb.len() - 1) as f64);
    let mut found: Option<Coincidence> = None;
    for members in clusters {
        let &(i, j, _, u, v) = members
            .iter()
            .map(|k| &cands[*k])
            .min_by(|x, y| x.2.total_cmp(&y.2))
            .expect("cluster is nonempty");
        let (d, s, t) = closest_pair(m, a.seg, b.seg, (i as f64 + u) / na, (j as f64 + v) / nb)?;
        let x = m.ambient(&evaluate(m, a.seg, s)?.point);
        let mut at_shared = false;
        for (ea, eb) in &shared {
            if (m.ambient(&net.point(a.nodes[*ea])) - x).norm() < tol {
                at_shared = true;
                let node = net.point(a.nodes[*ea]);
                let ua = net.inward_tangent(&a.ends[*ea])?;
                let ub = net.inward_tangent(&b.ends[*eb])?;
                let cos = m.inner(&node, &ua, &ub).clamp(-1.0, 1.0);
                if cos.acos() <= TRANSVERSE_FACTOR * tol {
                    let length = overlap_length(m, a.seg, b.seg, tol)?;
                    found = Some(Coincidence::Overlap { first: a.piece, second: b.piece, length });
                }
            }
        }
        if at_shared || d >= tol {
            continue;
        }
        if d >= tol / 10.0 {
            return Err(ambiguous(format!("{} and {}", describe(&a.piece), describe(&b.piece)), d));
        }
        let angle = line_angle(m, a.seg, s, b.seg, t)?;
        if angle <= TRANSVERSE_FACTOR * tol {
            let length = overlap_length(m, a.seg, b.seg, tol)?;
            if length >= tol {
                found = Some(Coincidence::Overlap { first: a.piece, second: b.piece, length });
            }
            continue;
        }
        let near_end = a.nodes.iter().chain(&b.nodes).any(|n| (m.ambient(&net.point(*n)) - x).norm() < tol);
        if near_end {
            continue;
        }
        let point = m.canonical(&evaluate(m, a.seg, s)?.point);
        found = Some(Coincidence::Crossing { first: a.piece, second: b.piece, point, angle });
    }
    Ok(found)
}

/// Groups candidate sample-segment pairs that touch in both indices.
fn cluster(cands: &[(usize, usize, f64, f64, f64)]) -> Vec<Vec<usize>> {
    let index: HashMap<(usize, usize), usize> = cands.iter().enumerate().map(|(k, c)| ((c.0, c.1), k)).collect();
    let mut parent: Vec<usize> = (0..cands.len()).collect();
    fn root(p: &mut [usize], mut k: usize) -> usize {
        while p[k] != k {
            p[k] = p[p[k]];
            k = p[k];
        }
        k
    }
    for (k, c) in cands.iter().enumerate() {
        for di in 0..=2usize {
            for dj in -2i64..=2 {
                let (Some(i), Some(j)) = (c.0.checked_add(di), usize::try_from(c.1 as i64 + dj).ok()) else {
                    continue;
                };
                if let Some(&l) = index.get(&(i, j)) {
                    let (ra, rb) = (root(&mut parent, k), root(&mut parent, l));
                    parent[ra] = rb;
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for k in 0..cands.len() {
        groups.entry(root(&mut parent, k)).or_default().push(k);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort();
    out
}

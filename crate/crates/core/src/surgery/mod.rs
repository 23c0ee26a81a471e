//! Regularization of stationary nets: subdivide, merge overlaps, split crossings and
//! identify coincident vertices until the net is an embedding, then erase balanced
//! vertices of degree two so that every component is good.
//!
//! Each step repeats a single rewrite on the first event in id order and records the
//! number of pending events before every rewrite; these counts strictly decrease.

mod detect;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

pub use detect::{detect_coincidences, Coincidence, PieceRef, TRANSVERSE_FACTOR};

use crate::error::{GeonetError, Result};
use crate::multigraph::{EdgeId, OverlapPattern, VertexId, WeightedMultigraph};
use crate::net::{GammaNet, NetEdge, Node, PieceEnd};
use crate::riemann::{ChartManifold, ChartPoint};

#[derive(Clone, Copy, Debug)]
pub struct SurgeryOptions {
    /// Coincidence tolerance in comparison coordinates.
    pub tol_geo: f64,
    /// Required balance of the input.
    pub tol_stat: f64,
    /// `|u1 + u2|_g` below which a degree-two vertex counts as a break point.
    pub colinear_tol: f64,
}

impl Default for SurgeryOptions {
    fn default() -> Self {
        SurgeryOptions { tol_geo: 1e-5, tol_stat: 1e-8, colinear_tol: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SurgeryOp {
    Subdivide { edge: EdgeId, pieces: usize },
    MergeOverlap { first: EdgeId, second: EdgeId, pattern: String, edges: Vec<EdgeId>, multiplicities: Vec<u32> },
    SplitCrossing { first: EdgeId, second: EdgeId, vertex: VertexId, edges: Vec<EdgeId>, angle: f64 },
    SplitAtVertex { edge: EdgeId, by: VertexId, vertex: VertexId, edges: Vec<EdgeId> },
    Identify { kept: VertexId, removed: VertexId },
    Erase { vertex: VertexId, first: EdgeId, second: EdgeId, edge: EdgeId, multiplicity: u32, is_loop: bool },
}

#[derive(Clone, Debug, Serialize)]
pub struct PassCounter {
    pub step: String,
    /// Pending events before each rewrite, ending with zero.
    pub counts: Vec<usize>,
}

impl PassCounter {
    pub fn strictly_decreasing(&self) -> bool {
        self.counts.windows(2).all(|w| w[1] < w[0])
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SurgeryLog {
    pub ops: Vec<SurgeryOp>,
    pub counters: Vec<PassCounter>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Regularized {
    pub net: GammaNet,
    pub log: SurgeryLog,
}

/// Rewrites guard against runaway loops on inputs that violate the preconditions.
const MAX_REWRITES: usize = 100_000;

/// Mutable graph, positions and reusable edge geometry between rewrites.
struct State {
    m: ChartManifold,
    graph: WeightedMultigraph,
    positions: BTreeMap<VertexId, ChartPoint>,
    known: BTreeMap<EdgeId, NetEdge>,
    pinned: BTreeSet<VertexId>,
}

impl State {
    fn of(net: &GammaNet) -> State {
        State {
            m: net.manifold().clone(),
            graph: net.graph().clone(),
            positions: net.positions().clone(),
            known: net.edges().clone(),
            pinned: net.pinned().clone(),
        }
    }

    fn finish(self) -> Result<GammaNet> {
        GammaNet::assemble(self.m, self.graph, self.positions, self.known, BTreeMap::new(), self.pinned)
    }

    /// Merges two vertices; a pinned vertex survives, otherwise the smaller id.
    fn identify(&mut self, a: VertexId, b: VertexId, log: &mut SurgeryLog) -> Result<VertexId> {
        let (mut keep, mut gone) = (a.min(b), a.max(b));
        if self.pinned.contains(&gone) && !self.pinned.contains(&keep) {
            std::mem::swap(&mut keep, &mut gone);
        }
        self.graph = self.graph.identify_vertices(keep, gone)?;
        self.positions.remove(&gone);
        self.pinned.remove(&gone);
        for (e, _) in self.graph.incidences(keep) {
            self.known.remove(&e);
        }
        log.ops.push(SurgeryOp::Identify { kept: keep, removed: gone });
        Ok(keep)
    }
}

fn pattern_name(p: &OverlapPattern) -> String {
    match p {
        OverlapPattern::Staggered { .. } => "staggered".into(),
        OverlapPattern::Containment { .. } => "containment".into(),
        OverlapPattern::TwoComponent { .. } => "two_component".into(),
    }
}

/// Regularizes a stationary net. The result is an embedding with the same image,
/// multiplicity function and length whose components are all good.
pub fn regularize(net: &GammaNet, opts: &SurgeryOptions) -> Result<Regularized> {
    net.require_stationary(opts.tol_stat)?;
    let tol = opts.tol_geo;
    let mut log = SurgeryLog::default();

    // step 1: pieces are already shorter than the injectivity bound; promote breaks
    for (e, ne) in net.edges() {
        if !ne.waypoints.is_empty() {
            log.ops.push(SurgeryOp::Subdivide { edge: *e, pieces: ne.pieces.len() });
        }
    }
    let mut work = net.expand_waypoints()?;

    // step 2
    let mut counts = Vec::new();
    loop {
        let pairs = overlap_pairs(&detect_coincidences(&work, tol)?);
        counts.push(pairs.len());
        if counts.len() == 1 {
            note_shared_overlaps(&pairs, &mut log);
        }
        let Some(&(e1, e2)) = pairs.first() else { break };
        work = merge_overlap(&work, e1, e2, tol, &mut log)?;
        guard(counts.len())?;
    }
    log.counters.push(PassCounter { step: "overlaps".into(), counts });

    // step 3
    let mut counts = Vec::new();
    loop {
        let events: Vec<Coincidence> = detect_coincidences(&work, tol)?
            .into_iter()
            .filter(|c| matches!(c, Coincidence::Crossing { .. } | Coincidence::NodeOnPiece { .. }))
            .collect();
        counts.push(events.len());
        let Some(ev) = events.first() else { break };
        work = split(&work, ev, &mut log)?;
        guard(counts.len())?;
    }
    log.counters.push(PassCounter { step: "crossings".into(), counts });

    // step 4
    let mut counts = Vec::new();
    loop {
        let pairs: Vec<(VertexId, VertexId)> = detect_coincidences(&work, tol)?
            .into_iter()
            .filter_map(|c| match c {
                Coincidence::NodeCoincidence { first: Node::Vertex(a), second: Node::Vertex(b), .. } => Some((a, b)),
                _ => None,
            })
            .collect();
        counts.push(pairs.len());
        let Some(&(a, b)) = pairs.first() else { break };
        let mut st = State::of(&work);
        st.identify(a, b, &mut log)?;
        work = st.finish()?;
        guard(counts.len())?;
    }
    log.counters.push(PassCounter { step: "vertex_coincidences".into(), counts });

    let leftover = detect_coincidences(&work, tol)?;
    if !leftover.is_empty() {
        return Err(GeonetError::InvalidInput(format!(
            "net is not embedded after surgery: {} coincidences remain",
            leftover.len()
        )));
    }

    // good-ification
    let mut counts = Vec::new();
    loop {
        let cands = erasable(&work, opts.colinear_tol)?;
        counts.push(cands.len());
        let Some(&(v, e1, e2)) = cands.first() else { break };
        work = erase(&work, v, e1, e2, &mut log)?;
        guard(counts.len())?;
    }
    log.counters.push(PassCounter { step: "break_vertices".into(), counts });

    if let Some(c) = work.graph().components().into_iter().find(|c| !work.graph().subgraph(c).is_good()) {
        log.notes.push(format!("component containing vertex {} is not good", c.first().copied().unwrap_or(0)));
    }
    Ok(Regularized { net: work, log })
}

fn guard(n: usize) -> Result<()> {
    if n > MAX_REWRITES {
        return Err(GeonetError::NonConvergence { iterations: n, defect: f64::NAN });
    }
    Ok(())
}

fn overlap_pairs(events: &[Coincidence]) -> Vec<(EdgeId, EdgeId)> {
    let set: BTreeSet<(EdgeId, EdgeId)> = events
        .iter()
        .filter_map(|c| match c {
            Coincidence::Overlap { first, second, .. } => Some((first.edge.min(second.edge), first.edge.max(second.edge))),
            _ => None,
        })
        .collect();
    set.into_iter().collect()
}

fn note_shared_overlaps(pairs: &[(EdgeId, EdgeId)], log: &mut SurgeryLog) {
    let mut seen: BTreeMap<EdgeId, usize> = BTreeMap::new();
    for (a, b) in pairs {
        *seen.entry(*a).or_default() += 1;
        *seen.entry(*b).or_default() += 1;
    }
    let multi: Vec<EdgeId> = seen.into_iter().filter(|(_, k)| *k > 1).map(|(e, _)| e).collect();
    if !multi.is_empty() {
        log.notes.push(format!(
            "edges {multi:?} overlap more than one edge; pairs are merged in id order and the intermediate edges depend on that order"
        ));
    }
}

/// Replaces two overlapping single-piece edges by the pieces of their union.
fn merge_overlap(work: &GammaNet, e1: EdgeId, e2: EdgeId, tol: f64, log: &mut SurgeryLog) -> Result<GammaNet> {
    let m = work.manifold();
    let sa = work.edge(e1).pieces[0].clone();
    let sb = work.edge(e2).pieces[0].clone();
    let mut st = State::of(work);
    let a0 = st.graph.edge(e1)?.ends;
    let b0 = st.graph.edge(e2)?.ends;
    for x in a0 {
        for y in b0 {
            if x != y
                && st.graph.has_vertex(x)
                && st.graph.has_vertex(y)
                && m.separation(&st.positions[&x], &st.positions[&y]) < tol / 10.0
            {
                st.identify(x, y, log)?;
            }
        }
    }
    let a = st.graph.edge(e1)?.ends;
    let b = st.graph.edge(e2)?.ends;
    // parameter of each end of one edge along the other, when it lies on it
    let along = |v: VertexId, own: [VertexId; 2], seg, st: &State| -> Result<Option<f64>> {
        if v == own[0] {
            return Ok(Some(0.0));
        }
        if v == own[1] {
            return Ok(Some(1.0));
        }
        let (d, tau) = detect::locate(m, seg, &st.positions[&v])?;
        Ok((d < tol / 10.0).then_some(tau))
    };
    let b_on_a = [along(b[0], a, &sa, &st)?, along(b[1], a, &sa, &st)?];
    let a_on_b = [along(a[0], b, &sb, &st)?, along(a[1], b, &sb, &st)?];
    let ordered = |x: VertexId, tx: f64, y: VertexId, ty: f64| if tx <= ty { (x, y) } else { (y, x) };
    let (outer, inner, pattern) = match (b_on_a, a_on_b) {
        ([Some(t0), Some(t1)], _) => {
            let (f, s) = ordered(b[0], t0, b[1], t1);
            (e1, e2, OverlapPattern::Containment { inner_first: f, inner_second: s })
        }
        (_, [Some(t0), Some(t1)]) => {
            let (f, s) = ordered(a[0], t0, a[1], t1);
            (e2, e1, OverlapPattern::Containment { inner_first: f, inner_second: s })
        }
        (bo, ao) if bo.iter().filter(|x| x.is_some()).count() == 1 && ao.iter().filter(|x| x.is_some()).count() == 1 => {
            let ia = usize::from(ao[1].is_some());
            let ib = usize::from(bo[1].is_some());
            (e1, e2, OverlapPattern::Staggered { outer1: a[1 - ia], inner2: b[ib], inner1: a[ia], outer2: b[1 - ib] })
        }
        _ => {
            return Err(GeonetError::InvalidInput(format!(
                "edges {e1} and {e2} overlap but neither has an end on the other"
            )))
        }
    };
    let (g, ids) = st.graph.replace_overlap(outer, inner, &pattern)?;
    let multiplicities = ids.iter().map(|e| g.edge(*e).map(|x| x.multiplicity)).collect::<Result<Vec<_>>>()?;
    st.graph = g;
    log.ops.push(SurgeryOp::MergeOverlap {
        first: outer,
        second: inner,
        pattern: pattern_name(&pattern),
        edges: ids,
        multiplicities,
    });
    st.finish()
}

/// Introduces a vertex at a crossing or where a vertex sits on another edge.
fn split(work: &GammaNet, ev: &Coincidence, log: &mut SurgeryLog) -> Result<GammaNet> {
    let mut st = State::of(work);
    match ev {
        Coincidence::Crossing { first, second, point, angle } => {
            let (g, v, ids) = st.graph.split_at_crossing(first.edge, second.edge)?;
            st.graph = g;
            st.positions.insert(v, *point);
            log.ops.push(SurgeryOp::SplitCrossing {
                first: first.edge,
                second: second.edge,
                vertex: v,
                edges: ids.to_vec(),
                angle: *angle,
            });
        }
        Coincidence::NodeOnPiece { node: Node::Vertex(by), piece, tau } => {
            let seg = &work.edge(piece.edge).pieces[piece.piece];
            let p = work.manifold().canonical(&detect::evaluate(work.manifold(), seg, *tau)?.point);
            let (g, inner, ids) = st.graph.subdivide_edge(piece.edge, 2)?;
            st.graph = g;
            st.positions.insert(inner[0], p);
            log.ops.push(SurgeryOp::SplitAtVertex { edge: piece.edge, by: *by, vertex: inner[0], edges: ids });
        }
        other => return Err(GeonetError::InvalidInput(format!("not a splitting event: {other:?}"))),
    }
    st.finish()
}

/// Free vertices with exactly two edge-ends from distinct non-loop edges of equal
/// multiplicity and opposite tangents, largest id first.
fn erasable(net: &GammaNet, colinear_tol: f64) -> Result<Vec<(VertexId, EdgeId, EdgeId)>> {
    let g = net.graph();
    let m = net.manifold();
    let mut out = Vec::new();
    for v in g.vertices().collect::<Vec<_>>().into_iter().rev() {
        if net.pinned().contains(&v) {
            continue;
        }
        let inc = g.incidences(v);
        if inc.len() != 2 || inc[0].0 == inc[1].0 {
            continue;
        }
        let (e1, e2) = (inc[0].0, inc[1].0);
        let (x, y) = (g.edge(e1)?, g.edge(e2)?);
        if x.is_loop() || y.is_loop() || x.multiplicity != y.multiplicity {
            continue;
        }
        let end = |e: EdgeId, side: usize| PieceEnd {
            edge: e,
            piece: if side == 0 { 0 } else { net.edge(e).pieces.len() - 1 },
            side,
        };
        let u1 = net.inward_tangent(&end(e1, inc[0].1))?;
        let u2 = net.inward_tangent(&end(e2, inc[1].1))?;
        let p = net.positions()[&v];
        if m.norm(&p, &(u1 + u2)) < colinear_tol {
            out.push((v, e1, e2));
        }
    }
    Ok(out)
}

/// Joins the two edges at a break vertex into one edge through it.
fn erase(net: &GammaNet, v: VertexId, e1: EdgeId, e2: EdgeId, log: &mut SurgeryLog) -> Result<GammaNet> {
    let g = net.graph();
    let (x, y) = (g.edge(e1)?.clone(), g.edge(e2)?.clone());
    let (g2, id) = g.erase_colinear_vertex(v, e1, e2)?;
    let mut into_v: Vec<ChartPoint> = net.edge(e1).waypoints.clone();
    if x.ends[0] == v {
        into_v.reverse();
    }
    let mut out_of_v: Vec<ChartPoint> = net.edge(e2).waypoints.clone();
    if y.ends[1] == v {
        out_of_v.reverse();
    }
    let mut wps = into_v;
    wps.push(net.positions()[&v]);
    wps.extend(out_of_v);
    let mut known = net.edges().clone();
    known.remove(&e1);
    known.remove(&e2);
    let mut positions = net.positions().clone();
    positions.remove(&v);
    let new_edge = g2.edge(id)?.clone();
    let out = GammaNet::assemble(
        net.manifold().clone(),
        g2,
        positions,
        known,
        BTreeMap::from([(id, wps)]),
        net.pinned().clone(),
    )?;
    log.ops.push(SurgeryOp::Erase {
        vertex: v,
        first: e1,
        second: e2,
        edge: id,
        multiplicity: new_edge.multiplicity,
        is_loop: new_edge.is_loop(),
    });
    Ok(out)
}

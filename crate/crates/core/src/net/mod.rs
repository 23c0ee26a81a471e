//! Γ-nets: a weighted multigraph realized on a manifold by vertex positions and
//! geodesic edges, with the length functional and its first and second variation.
//!
//! An edge is a chain of short geodesic pieces through optional waypoints. Waypoints
//! are free variables exactly like vertices of degree two, so a stationary net has
//! smooth edges. Closed geodesics are loops carrying at least two waypoints.

mod builders;
mod variation;

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{GeonetError, Result};
use crate::multigraph::{EdgeId, VertexId, WeightedMultigraph};
use crate::riemann::{geodesic_bvp_with, BvpOptions, ChartManifold, ChartPoint, GeodesicSegment, Mat2, Vec2};

pub use builders::{closed_geodesic_net, fermat_tripod, great_circle_net, theta_sphere, theta_sphere_rotated};
pub use variation::{hessian, hessian_and_classify, Classification, HessianOptions, NullVector, ReducedHessian, VariationReport};

/// A free or pinned location of the net: a graph vertex or a waypoint inside an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Vertex(VertexId),
    /// Waypoint `k` (0-based, in edge direction) of an edge.
    Waypoint(EdgeId, usize),
}

/// Geometry of one edge: interior waypoints and the geodesic pieces joining
/// `ends[0]`, the waypoints, and `ends[1]` in order.
#[derive(Clone, Debug)]
pub struct NetEdge {
    pub waypoints: Vec<ChartPoint>,
    pub pieces: Vec<GeodesicSegment>,
}

/// One end of a geodesic piece sitting at a node.
#[derive(Clone, Copy, Debug)]
pub struct PieceEnd {
    pub edge: EdgeId,
    pub piece: usize,
    /// 0 for the piece start, 1 for its end.
    pub side: usize,
}

#[derive(Clone, Debug)]
pub struct GammaNet {
    manifold: ChartManifold,
    graph: WeightedMultigraph,
    positions: BTreeMap<VertexId, ChartPoint>,
    edges: BTreeMap<EdgeId, NetEdge>,
    pinned: BTreeSet<VertexId>,
}

/// How piece geometry is recomputed after moving nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rebuild {
    /// Fresh boundary-value solves warm-started from the old pieces.
    Warm,
    /// Keep each piece's chart and step count: the length becomes a smooth function of
    /// the node coordinates, as finite differences require.
    Frozen,
}

impl GammaNet {
    /// Realizes `graph` with geodesic pieces through the given positions and waypoints.
    pub fn build(
        manifold: ChartManifold,
        graph: WeightedMultigraph,
        positions: BTreeMap<VertexId, ChartPoint>,
        mut waypoints: BTreeMap<EdgeId, Vec<ChartPoint>>,
        pinned: BTreeSet<VertexId>,
    ) -> Result<GammaNet> {
        for v in graph.vertices() {
            let p = positions
                .get(&v)
                .ok_or_else(|| GeonetError::InvalidInput(format!("vertex {v} has no position")))?;
            manifold.check_point(p)?;
        }
        if let Some(v) = positions.keys().find(|v| !graph.has_vertex(**v)) {
            return Err(GeonetError::InvalidInput(format!("position given for unknown vertex {v}")));
        }
        if let Some(v) = pinned.iter().find(|v| !graph.has_vertex(**v)) {
            return Err(GeonetError::InvalidInput(format!("unknown pinned vertex {v}")));
        }
        if let Some(e) = waypoints.keys().find(|e| graph.edge(**e).is_err()) {
            return Err(GeonetError::InvalidInput(format!("waypoints given for unknown edge {e}")));
        }
        let mut edges = BTreeMap::new();
        for e in graph.edges() {
            let wps = waypoints.remove(&e.id).unwrap_or_default();
            for p in &wps {
                manifold.check_point(p)?;
            }
            let mut chain = vec![positions[&e.ends[0]]];
            chain.extend(&wps);
            chain.push(positions[&e.ends[1]]);
            let mut pieces = Vec::with_capacity(chain.len() - 1);
            for w in chain.windows(2) {
                pieces.push(solve_piece(&manifold, e.id, &w[0], &w[1], &BvpOptions::default())?);
            }
            edges.insert(e.id, NetEdge { waypoints: wps, pieces });
        }
        Ok(GammaNet { manifold, graph, positions, edges, pinned })
    }

    /// As [`build`](Self::build), but edges present in `known` keep their geometry.
    /// Callers guarantee that kept edges still end at their vertices; positions and pins
    /// of vertices missing from `graph` are dropped.
    pub(crate) fn assemble(
        manifold: ChartManifold,
        graph: WeightedMultigraph,
        mut positions: BTreeMap<VertexId, ChartPoint>,
        mut known: BTreeMap<EdgeId, NetEdge>,
        mut waypoints: BTreeMap<EdgeId, Vec<ChartPoint>>,
        mut pinned: BTreeSet<VertexId>,
    ) -> Result<GammaNet> {
        for v in graph.vertices() {
            let p = positions
                .get(&v)
                .ok_or_else(|| GeonetError::InvalidInput(format!("vertex {v} has no position")))?;
            manifold.check_point(p)?;
        }
        let mut edges = BTreeMap::new();
        for e in graph.edges() {
            if let Some(ne) = known.remove(&e.id) {
                edges.insert(e.id, ne);
                continue;
            }
            let wps = waypoints.remove(&e.id).unwrap_or_default();
            let mut chain = vec![positions[&e.ends[0]]];
            chain.extend(&wps);
            chain.push(positions[&e.ends[1]]);
            let mut pieces = Vec::with_capacity(chain.len() - 1);
            for w in chain.windows(2) {
                pieces.push(solve_piece(&manifold, e.id, &w[0], &w[1], &BvpOptions::default())?);
            }
            edges.insert(e.id, NetEdge { waypoints: wps, pieces });
        }
        positions.retain(|v, _| graph.has_vertex(*v));
        pinned.retain(|v| graph.has_vertex(*v));
        Ok(GammaNet { manifold, graph, positions, edges, pinned })
    }

    pub fn manifold(&self) -> &ChartManifold {
        &self.manifold
    }

    pub fn graph(&self) -> &WeightedMultigraph {
        &self.graph
    }

    pub fn positions(&self) -> &BTreeMap<VertexId, ChartPoint> {
        &self.positions
    }

    pub fn edges(&self) -> &BTreeMap<EdgeId, NetEdge> {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &NetEdge {
        &self.edges[&e]
    }

    pub fn pinned(&self) -> &BTreeSet<VertexId> {
        &self.pinned
    }

    pub fn waypoints(&self) -> BTreeMap<EdgeId, Vec<ChartPoint>> {
        self.edges
            .iter()
            .filter(|(_, ne)| !ne.waypoints.is_empty())
            .map(|(e, ne)| (*e, ne.waypoints.clone()))
            .collect()
    }

    pub fn multiplicity(&self, e: EdgeId) -> u32 {
        self.graph.edge(e).expect("edge of the net").multiplicity
    }

    pub fn point(&self, node: Node) -> ChartPoint {
        match node {
            Node::Vertex(v) => self.positions[&v],
            Node::Waypoint(e, k) => self.edges[&e].waypoints[k],
        }
    }

    /// All nodes, vertices first, in id order.
    pub fn nodes(&self) -> Vec<Node> {
        let mut out: Vec<Node> = self.positions.keys().map(|v| Node::Vertex(*v)).collect();
        for (e, ne) in &self.edges {
            out.extend((0..ne.waypoints.len()).map(|k| Node::Waypoint(*e, k)));
        }
        out
    }

    /// Nodes that move: all waypoints and the unpinned vertices.
    pub fn free_nodes(&self) -> Vec<Node> {
        self.nodes()
            .into_iter()
            .filter(|n| !matches!(n, Node::Vertex(v) if self.pinned.contains(v)))
            .collect()
    }

    /// The node at the start (`side` 0) or end (`side` 1) of a piece.
    pub fn piece_node(&self, e: EdgeId, piece: usize, side: usize) -> Node {
        let k = piece + side;
        let ne = &self.edges[&e];
        let ends = self.graph.edge(e).expect("edge of the net").ends;
        if k == 0 {
            Node::Vertex(ends[0])
        } else if k == ne.pieces.len() {
            Node::Vertex(ends[1])
        } else {
            Node::Waypoint(e, k - 1)
        }
    }

    /// Piece-ends at every node.
    pub fn incidence(&self) -> BTreeMap<Node, Vec<PieceEnd>> {
        let mut out: BTreeMap<Node, Vec<PieceEnd>> = self.nodes().into_iter().map(|n| (n, Vec::new())).collect();
        for (e, ne) in &self.edges {
            for piece in 0..ne.pieces.len() {
                for side in 0..2 {
                    out.get_mut(&self.piece_node(*e, piece, side))
                        .expect("node exists")
                        .push(PieceEnd { edge: *e, piece, side });
                }
            }
        }
        out
    }

    /// Unit inward tangent of a piece-end, expressed in the chart of its node.
    pub fn inward_tangent(&self, end: &PieceEnd) -> Result<Vec2> {
        let seg = &self.edges[&end.edge].pieces[end.piece];
        let (at, t) = if end.side == 0 { (seg.start, seg.start_tangent) } else { (seg.end, seg.end_tangent) };
        let node = self.point(self.piece_node(end.edge, end.piece, end.side));
        self.manifold
            .map_vector(&at, &t, node.chart)
            .map(|(_, v)| v)
            .ok_or(GeonetError::NoTransition { chart: at.chart })
    }

    /// `Σ_E n(E) · L(f|_E)`.
    pub fn length(&self) -> f64 {
        self.edges
            .iter()
            .map(|(e, ne)| self.multiplicity(*e) as f64 * ne.pieces.iter().map(|p| p.length).sum::<f64>())
            .sum()
    }

    /// Unweighted length of one edge.
    pub fn edge_length(&self, e: EdgeId) -> f64 {
        self.edges[&e].pieces.iter().map(|p| p.length).sum()
    }

    /// `B(v) = Σ n(E) u_E(v)` at every node, in the node's chart.
    pub fn balancing_defect(&self) -> Result<BTreeMap<Node, Vec2>> {
        let mut out = BTreeMap::new();
        for (node, ends) in self.incidence() {
            let mut b = Vec2::zeros();
            for end in &ends {
                b += self.inward_tangent(end)? * self.multiplicity(end.edge) as f64;
            }
            out.insert(node, b);
        }
        Ok(out)
    }

    /// Largest `|B|_g` over free nodes; pinned vertices are excluded.
    pub fn max_defect(&self) -> Result<f64> {
        let defects = self.balancing_defect()?;
        Ok(self
            .free_nodes()
            .iter()
            .map(|n| self.manifold.norm(&self.point(*n), &defects[n]))
            .fold(0.0, f64::max))
    }

    /// Differential of the length in the coordinates of each free node: `-g B`.
    pub fn length_gradient(&self) -> Result<BTreeMap<Node, Vec2>> {
        let defects = self.balancing_defect()?;
        Ok(self
            .free_nodes()
            .into_iter()
            .map(|n| {
                let p = self.point(n);
                (n, -(self.manifold.metric_unchecked(p.chart, &p.x) * defects[&n]))
            })
            .collect())
    }

    /// Free coordinates as `(node, axis)` pairs, in node order.
    pub fn variables(&self) -> Vec<(Node, usize)> {
        self.free_nodes().into_iter().flat_map(|n| [(n, 0), (n, 1)]).collect()
    }

    /// Gradient flattened in the order of [`variables`](Self::variables).
    pub fn gradient_vector(&self) -> Result<Vec<f64>> {
        let g = self.length_gradient()?;
        Ok(self.variables().iter().map(|(n, i)| g[n][*i]).collect())
    }

    /// The net with some nodes moved; only pieces touching them are recomputed.
    pub fn with_points(&self, moves: &[(Node, ChartPoint)], rebuild: Rebuild) -> Result<GammaNet> {
        let mut out = self.clone();
        let mut touched = BTreeSet::new();
        for (node, p) in moves {
            self.manifold.check_point(p)?;
            match node {
                Node::Vertex(v) => {
                    *out.positions.get_mut(v).ok_or_else(|| GeonetError::InvalidInput(format!("no vertex {v}")))? = *p;
                }
                Node::Waypoint(e, k) => {
                    let slot = out
                        .edges
                        .get_mut(e)
                        .and_then(|ne| ne.waypoints.get_mut(*k))
                        .ok_or_else(|| GeonetError::InvalidInput(format!("no waypoint {k} on edge {e}")))?;
                    *slot = *p;
                }
            }
            touched.insert(*node);
        }
        let mut redo = Vec::new();
        for (e, ne) in &self.edges {
            for piece in 0..ne.pieces.len() {
                if touched.contains(&self.piece_node(*e, piece, 0)) || touched.contains(&self.piece_node(*e, piece, 1)) {
                    redo.push((*e, piece));
                }
            }
        }
        for (e, piece) in redo {
            out.resolve_piece(e, piece, rebuild, &self.edges[&e].pieces[piece])?;
        }
        Ok(out)
    }

    /// The same node positions under another metric on the same atlas.
    pub fn with_manifold(&self, manifold: ChartManifold) -> Result<GammaNet> {
        if !manifold.same_atlas(&self.manifold) {
            return Err(GeonetError::IncompatibleAtlases);
        }
        let mut out = self.clone();
        out.manifold = manifold;
        for (e, ne) in &self.edges {
            for piece in 0..ne.pieces.len() {
                out.resolve_piece(*e, piece, Rebuild::Warm, &ne.pieces[piece])?;
            }
        }
        Ok(out)
    }

    fn resolve_piece(&mut self, e: EdgeId, piece: usize, rebuild: Rebuild, old: &GeodesicSegment) -> Result<()> {
        let p = self.point(self.piece_node(e, piece, 0));
        let q = self.point(self.piece_node(e, piece, 1));
        let seg = match rebuild {
            Rebuild::Frozen => solve_piece(&self.manifold, e, &p, &q, &BvpOptions::following(old))?,
            Rebuild::Warm => {
                let warm = BvpOptions { steps: None, ..BvpOptions::following(old) };
                match solve_piece(&self.manifold, e, &p, &q, &warm) {
                    Ok(s) => s,
                    Err(err @ (GeonetError::OutsideUniqueness { .. } | GeonetError::DegenerateEdge { .. })) => {
                        return Err(err)
                    }
                    Err(_) => solve_piece(&self.manifold, e, &p, &q, &BvpOptions::default())?,
                }
            }
        };
        self.edges.get_mut(&e).expect("edge exists").pieces[piece] = seg;
        Ok(())
    }

    /// Moves every node to its canonical chart representation (geometry unchanged).
    pub fn canonicalized(&self) -> Result<GammaNet> {
        let moves: Vec<(Node, ChartPoint)> = self
            .nodes()
            .into_iter()
            .map(|n| (n, self.manifold.canonical(&self.point(n))))
            .filter(|(n, p)| *p != self.point(*n))
            .collect();
        if moves.is_empty() {
            return Ok(self.clone());
        }
        self.with_points(&moves, Rebuild::Warm)
    }

    /// Splits every piece longer than `max_len` at its midpoint by a new waypoint.
    pub fn subdivide_long_pieces(&self, max_len: f64) -> Result<GammaNet> {
        let mut waypoints = BTreeMap::new();
        let mut changed = false;
        for (e, ne) in &self.edges {
            let mut wps = Vec::new();
            for (k, seg) in ne.pieces.iter().enumerate() {
                if k > 0 {
                    wps.push(ne.waypoints[k - 1]);
                }
                if seg.length > max_len {
                    let parts = (seg.length / max_len).ceil() as usize;
                    for j in 1..parts {
                        wps.push(self.manifold.canonical(&seg.point_at(&self.manifold, j as f64 / parts as f64)?));
                    }
                    changed = true;
                }
            }
            waypoints.insert(*e, wps);
        }
        if !changed {
            return Ok(self.clone());
        }
        GammaNet::build(
            self.manifold.clone(),
            self.graph.clone(),
            self.positions.clone(),
            waypoints,
            self.pinned.clone(),
        )
    }

    /// The same net with every waypoint promoted to a graph vertex of degree two.
    pub fn expand_waypoints(&self) -> Result<GammaNet> {
        let mut graph = self.graph.clone();
        let mut positions = self.positions.clone();
        for (e, ne) in &self.edges {
            if ne.waypoints.is_empty() {
                continue;
            }
            let (g, inner, _) = graph.subdivide_edge(*e, ne.waypoints.len() + 1)?;
            graph = g;
            for (v, p) in inner.iter().zip(&ne.waypoints) {
                positions.insert(*v, *p);
            }
        }
        GammaNet::build(self.manifold.clone(), graph, positions, BTreeMap::new(), self.pinned.clone())
    }

    /// Sample points of every edge, in order, with the edge id.
    pub fn edge_samples(&self, e: EdgeId) -> Vec<ChartPoint> {
        let ne = &self.edges[&e];
        let mut out = Vec::new();
        for (k, seg) in ne.pieces.iter().enumerate() {
            let skip = usize::from(k > 0);
            out.extend(seg.samples.iter().skip(skip).map(|s| s.point));
        }
        out
    }

    /// Comparison coordinates of all sample points of all edges.
    pub fn image_samples(&self) -> Vec<crate::riemann::Ambient> {
        self.edges
            .keys()
            .flat_map(|e| self.edge_samples(*e))
            .map(|p| self.manifold.ambient(&p))
            .collect()
    }

    /// Checks the representation invariants: pieces end at their nodes, have positive
    /// length below the injectivity bound, and speed is conserved along them.
    pub fn check(&self) -> Result<()> {
        let inj = self.manifold.inj_radius_lb();
        for (e, ne) in &self.edges {
            for (k, seg) in ne.pieces.iter().enumerate() {
                if !(seg.length > 0.0) {
                    return Err(GeonetError::DegenerateEdge { edge: Some(*e) });
                }
                if seg.length >= inj {
                    return Err(GeonetError::OutsideUniqueness { length: seg.length, bound: inj });
                }
                for side in 0..2 {
                    let node = self.point(self.piece_node(*e, k, side));
                    let at = if side == 0 { seg.start } else { seg.end };
                    if self.manifold.separation(&node, &at) > 1e-9 * (1.0 + self.manifold.ambient(&node).norm()) {
                        return Err(GeonetError::InvalidInput(format!("piece {k} of edge {e} does not end at its node")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Error unless every free node is balanced to `tol`.
    pub fn require_stationary(&self, tol: f64) -> Result<f64> {
        let d = self.max_defect()?;
        if d > tol {
            return Err(GeonetError::NotStationary { defect: d, tol });
        }
        Ok(d)
    }
}

fn solve_piece(m: &ChartManifold, e: EdgeId, p: &ChartPoint, q: &ChartPoint, opts: &BvpOptions) -> Result<GeodesicSegment> {
    geodesic_bvp_with(m, p, q, opts).map_err(|err| match err {
        GeonetError::DegenerateEdge { .. } => GeonetError::DegenerateEdge { edge: Some(e) },
        other => other,
    })
}

/// `g`-orthonormal vector obtained by rotating `u` a quarter turn.
pub(crate) fn quarter_turn(g: &Mat2, u: &Vec2) -> Vec2 {
    let gu = g * u;
    let n = Vec2::new(-gu[1], gu[0]);
    n / (g * n).dot(&n).sqrt()
}

//! Weighted multigraphs: finite 1-complexes with positive integer multiplicities on
//! edges, plus the rewrite primitives used to regularize nets.
//!
//! Every primitive returns a fresh graph. Ids are never reused: new vertices and
//! edges draw from per-graph counters.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{GeonetError, Result};

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub ends: [VertexId; 2],
    pub multiplicity: u32,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.ends[0] == self.ends[1]
    }

    /// The end opposite to end index `i`.
    pub fn other(&self, i: usize) -> VertexId {
        self.ends[1 - i]
    }
}

#[derive(Clone, Debug, Default)]
pub struct WeightedMultigraph {
    vertices: BTreeSet<VertexId>,
    edges: BTreeMap<EdgeId, Edge>,
    next_vertex: VertexId,
    next_edge: EdgeId,
}

impl PartialEq for WeightedMultigraph {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.edges == other.edges
    }
}

/// An edge-end: the edge and which of its two ends (0 or 1) sits at the vertex.
pub type Incidence = (EdgeId, usize);

impl WeightedMultigraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(vertices: impl IntoIterator<Item = VertexId>, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut g = WeightedMultigraph::new();
        for v in vertices {
            g.insert_vertex(v)?;
        }
        for e in edges {
            g.insert_edge(e)?;
        }
        Ok(g)
    }

    pub fn insert_vertex(&mut self, v: VertexId) -> Result<()> {
        if !self.vertices.insert(v) {
            return Err(GeonetError::Graph(format!("duplicate vertex {v}")));
        }
        self.next_vertex = self.next_vertex.max(v + 1);
        Ok(())
    }

    pub fn insert_edge(&mut self, e: Edge) -> Result<()> {
        if e.multiplicity == 0 {
            return Err(GeonetError::Graph(format!("edge {} has multiplicity 0", e.id)));
        }
        for v in e.ends {
            if !self.vertices.contains(&v) {
                return Err(GeonetError::Graph(format!("edge {} uses undeclared vertex {v}", e.id)));
            }
        }
        if self.edges.contains_key(&e.id) {
            return Err(GeonetError::Graph(format!("duplicate edge {}", e.id)));
        }
        self.next_edge = self.next_edge.max(e.id + 1);
        self.edges.insert(e.id, e);
        Ok(())
    }

    pub fn add_vertex(&mut self) -> VertexId {
        let v = self.next_vertex;
        self.vertices.insert(v);
        self.next_vertex += 1;
        v
    }

    pub fn add_edge(&mut self, a: VertexId, b: VertexId, multiplicity: u32) -> Result<EdgeId> {
        let id = self.next_edge;
        self.insert_edge(Edge { id, ends: [a, b], multiplicity })?;
        Ok(id)
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices.iter().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_vertex(&self, v: VertexId) -> bool {
        self.vertices.contains(&v)
    }

    pub fn edge(&self, e: EdgeId) -> Result<&Edge> {
        self.edges.get(&e).ok_or_else(|| GeonetError::Graph(format!("no edge {e}")))
    }

    fn require_vertex(&self, v: VertexId) -> Result<()> {
        if self.vertices.contains(&v) {
            Ok(())
        } else {
            Err(GeonetError::Graph(format!("no vertex {v}")))
        }
    }

    /// Edge-ends at each vertex, in edge-id order.
    pub fn adjacency(&self) -> BTreeMap<VertexId, Vec<Incidence>> {
        let mut adj: BTreeMap<VertexId, Vec<Incidence>> = self.vertices.iter().map(|&v| (v, Vec::new())).collect();
        for e in self.edges.values() {
            for (i, v) in e.ends.iter().enumerate() {
                adj.get_mut(v).expect("endpoint declared").push((e.id, i));
            }
        }
        adj
    }

    pub fn incidences(&self, v: VertexId) -> Vec<Incidence> {
        let mut out = Vec::new();
        for e in self.edges.values() {
            for (i, w) in e.ends.iter().enumerate() {
                if *w == v {
                    out.push((e.id, i));
                }
            }
        }
        out
    }

    /// Number of edge-ends at `v` (loops count twice).
    pub fn degree(&self, v: VertexId) -> usize {
        self.incidences(v).len()
    }

    pub fn components(&self) -> Vec<BTreeSet<VertexId>> {
        let adj = self.adjacency();
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &start in &self.vertices {
            if seen.contains(&start) {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut stack = vec![start];
            seen.insert(start);
            while let Some(v) = stack.pop() {
                comp.insert(v);
                for &(e, i) in &adj[&v] {
                    let w = self.edges[&e].other(i);
                    if seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// The induced subgraph on a vertex set (edges with both ends inside).
    pub fn subgraph(&self, vertices: &BTreeSet<VertexId>) -> WeightedMultigraph {
        WeightedMultigraph {
            vertices: vertices.clone(),
            edges: self
                .edges
                .iter()
                .filter(|(_, e)| e.ends.iter().all(|v| vertices.contains(v)))
                .map(|(k, e)| (*k, e.clone()))
                .collect(),
            next_vertex: self.next_vertex,
            next_edge: self.next_edge,
        }
    }

    /// Connected with at least three edge-ends at every vertex.
    pub fn is_good_star(&self) -> bool {
        if self.vertices.is_empty() || !self.is_connected() {
            return false;
        }
        self.adjacency().values().all(|inc| inc.len() >= 3)
    }

    /// Connected, every vertex with exactly two edge-ends, one common multiplicity.
    pub fn is_cycle_graph(&self) -> bool {
        if self.edges.is_empty() || !self.is_connected() {
            return false;
        }
        let mut mult = self.edges.values().map(|e| e.multiplicity);
        let first = mult.next().expect("nonempty");
        mult.all(|n| n == first) && self.adjacency().values().all(|inc| inc.len() == 2)
    }

    pub fn is_good(&self) -> bool {
        self.is_good_star() || self.is_cycle_graph()
    }

    /// Replaces edge `e` by a path of `pieces` edges through `pieces - 1` new vertices,
    /// ordered from `ends[0]` to `ends[1]`. Returns the new vertices and edges in order.
    pub fn subdivide_edge(&self, e: EdgeId, pieces: usize) -> Result<(WeightedMultigraph, Vec<VertexId>, Vec<EdgeId>)> {
        if pieces == 0 {
            return Err(GeonetError::Graph("subdivision needs at least one piece".into()));
        }
        let edge = self.edge(e)?.clone();
        let mut g = self.clone();
        g.edges.remove(&e);
        let inner: Vec<VertexId> = (1..pieces).map(|_| g.add_vertex()).collect();
        let mut chain = vec![edge.ends[0]];
        chain.extend(&inner);
        chain.push(edge.ends[1]);
        let mut new_edges = Vec::with_capacity(pieces);
        for w in chain.windows(2) {
            new_edges.push(g.add_edge(w[0], w[1], edge.multiplicity)?);
        }
        Ok((g, inner, new_edges))
    }

    /// Replaces two overlapping edges by the pieces of the union of their images.
    pub fn replace_overlap(&self, e1: EdgeId, e2: EdgeId, pattern: &OverlapPattern) -> Result<(WeightedMultigraph, Vec<EdgeId>)> {
        if e1 == e2 {
            return Err(GeonetError::Graph("overlap needs two distinct edges".into()));
        }
        let a = self.edge(e1)?.clone();
        let b = self.edge(e2)?.clone();
        let (n1, n2) = (a.multiplicity, b.multiplicity);
        let same = |x: [VertexId; 2], y: [VertexId; 2]| x == y || x == [y[1], y[0]];
        let pieces: Vec<(VertexId, VertexId, u32)> = match *pattern {
            OverlapPattern::Staggered { outer1, inner2, inner1, outer2 } => {
                if !same(a.ends, [outer1, inner1]) || !same(b.ends, [inner2, outer2]) {
                    return Err(GeonetError::Graph("staggered pattern does not match edge ends".into()));
                }
                vec![(outer1, inner2, n1), (inner2, inner1, n1 + n2), (inner1, outer2, n2)]
            }
            OverlapPattern::Containment { inner_first, inner_second } => {
                // e2 lies inside e1; its ends appear along e1 in the given order
                if !same(b.ends, [inner_first, inner_second]) {
                    return Err(GeonetError::Graph("containment pattern does not match edge ends".into()));
                }
                vec![(a.ends[0], inner_first, n1), (inner_first, inner_second, n1 + n2), (inner_second, a.ends[1], n1)]
            }
            OverlapPattern::TwoComponent { e2_end_near_1, e2_end_near_0 } => {
                // e1 runs a0 → a1; e2 leaves e1 through a1, goes around and re-enters through a0
                if !same(b.ends, [e2_end_near_1, e2_end_near_0]) {
                    return Err(GeonetError::Graph("two-component pattern does not match edge ends".into()));
                }
                vec![
                    (a.ends[0], e2_end_near_0, n1 + n2),
                    (e2_end_near_0, e2_end_near_1, n1),
                    (e2_end_near_1, a.ends[1], n1 + n2),
                    (a.ends[1], a.ends[0], n2),
                ]
            }
        };
        let mut g = self.clone();
        g.edges.remove(&e1);
        g.edges.remove(&e2);
        let mut ids = Vec::new();
        for (x, y, n) in pieces {
            // pieces whose two ends are the same vertex carry no image
            if x != y {
                ids.push(g.add_edge(x, y, n)?);
            }
        }
        Ok((g, ids))
    }

    /// Introduces one vertex splitting both `e1` and `e2`; returns it and the four
    /// pieces `[e1 from ends[0], e1 to ends[1], e2 from ends[0], e2 to ends[1]]`.
    pub fn split_at_crossing(&self, e1: EdgeId, e2: EdgeId) -> Result<(WeightedMultigraph, VertexId, [EdgeId; 4])> {
        if e1 == e2 {
            return Err(GeonetError::Graph("crossing needs two distinct edges".into()));
        }
        let a = self.edge(e1)?.clone();
        let b = self.edge(e2)?.clone();
        let mut g = self.clone();
        g.edges.remove(&e1);
        g.edges.remove(&e2);
        let v = g.add_vertex();
        let p = [
            g.add_edge(a.ends[0], v, a.multiplicity)?,
            g.add_edge(v, a.ends[1], a.multiplicity)?,
            g.add_edge(b.ends[0], v, b.multiplicity)?,
            g.add_edge(v, b.ends[1], b.multiplicity)?,
        ];
        Ok((g, v, p))
    }

    /// Quotient identifying `v2` with `v1`; `v2` disappears.
    pub fn identify_vertices(&self, v1: VertexId, v2: VertexId) -> Result<WeightedMultigraph> {
        self.require_vertex(v1)?;
        self.require_vertex(v2)?;
        if v1 == v2 {
            return Ok(self.clone());
        }
        let mut g = self.clone();
        g.vertices.remove(&v2);
        for e in g.edges.values_mut() {
            for end in e.ends.iter_mut() {
                if *end == v2 {
                    *end = v1;
                }
            }
        }
        Ok(g)
    }

    /// Deletes a vertex whose only edge-ends come from `e1` and `e2` (equal
    /// multiplicities) and joins their far ends by one edge. If the far ends coincide
    /// the result is a loop there.
    pub fn erase_colinear_vertex(&self, v: VertexId, e1: EdgeId, e2: EdgeId) -> Result<(WeightedMultigraph, EdgeId)> {
        self.require_vertex(v)?;
        let a = self.edge(e1)?.clone();
        let b = self.edge(e2)?.clone();
        if e1 == e2 || a.is_loop() || b.is_loop() {
            return Err(GeonetError::Graph(format!("vertex {v}: erase needs two distinct non-loop edges")));
        }
        let inc = self.incidences(v);
        let mut listed: Vec<EdgeId> = inc.iter().map(|(e, _)| *e).collect();
        listed.sort_unstable();
        let mut expected = vec![e1, e2];
        expected.sort_unstable();
        if listed != expected {
            return Err(GeonetError::Graph(format!("vertex {v} does not have exactly the edge-ends of {e1} and {e2}")));
        }
        if a.multiplicity != b.multiplicity {
            return Err(GeonetError::Graph(format!(
                "multiplicity mismatch at vertex {v}: {} vs {}",
                a.multiplicity, b.multiplicity
            )));
        }
        let far = |e: &Edge| if e.ends[0] == v { e.ends[1] } else { e.ends[0] };
        let (w1, w2) = (far(&a), far(&b));
        let mut g = self.clone();
        g.edges.remove(&e1);
        g.edges.remove(&e2);
        g.vertices.remove(&v);
        let id = g.add_edge(w1, w2, a.multiplicity)?;
        Ok((g, id))
    }

    /// Sorted degree sequence with multiplicities, a cheap isomorphism invariant.
    pub fn signature(&self) -> (Vec<usize>, Vec<u32>, usize) {
        let mut deg: Vec<usize> = self.adjacency().values().map(|i| i.len()).collect();
        deg.sort_unstable();
        let mut mult: Vec<u32> = self.edges.values().map(|e| e.multiplicity).collect();
        mult.sort_unstable();
        let loops = self.edges.values().filter(|e| e.is_loop()).count();
        (deg, mult, loops)
    }
}

/// How two edges' images overlap along a common geodesic; vertex roles are ids of
/// the edges' endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverlapPattern {
    /// `outer1 —e1only— inner2 —both— inner1 —e2only— outer2`.
    Staggered { outer1: VertexId, inner2: VertexId, inner1: VertexId, outer2: VertexId },
    /// The second edge lies inside the first; its ends in order along the first.
    Containment { inner_first: VertexId, inner_second: VertexId },
    /// The union closes up: the intersection has two components, one at each end of the first edge.
    TwoComponent { e2_end_near_1: VertexId, e2_end_near_0: VertexId },
}

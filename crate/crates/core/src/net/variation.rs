//! Second variation of length in the finite vertex model and the non-degeneracy test.
//!
//! The Hessian is a central difference of the analytic gradient with every piece's
//! chart and step count frozen. It is expressed in `g`-orthonormal frames at each free
//! node. Balanced nodes with two piece-ends keep only their normal direction: sliding
//! such a node along its geodesic leaves the net unchanged.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::{quarter_turn, GammaNet, Node, Rebuild};
use crate::error::Result;
use crate::riemann::{parallel_transport, ChartPoint, Vec2};

#[derive(Clone, Copy, Debug)]
pub struct HessianOptions {
    pub tol_stat: f64,
    /// Relative eigenvalue threshold for null directions.
    pub tol_null: f64,
    /// Parallelism residual per unit length.
    pub tol_par: f64,
    /// Multiplier on the default difference step `1e-5·(1+|x|)`.
    pub step_scale: f64,
    /// A two-ended node is reduced to its normal when `|u₁+u₂|_g` is below this.
    pub reduce_tol: f64,
}

impl Default for HessianOptions {
    fn default() -> Self {
        HessianOptions { tol_stat: 1e-8, tol_null: 1e-6, tol_par: 1e-4, step_scale: 1.0, reduce_tol: 1e-4 }
    }
}

/// Hessian of length in per-node orthonormal frames.
#[derive(Clone, Debug)]
pub struct ReducedHessian {
    /// Coordinate variables in order.
    pub variables: Vec<(Node, usize)>,
    /// Symmetrized central-difference Hessian in chart coordinates.
    pub coordinate: DMatrix<f64>,
    /// Reduced directions: a node and a `g`-unit coordinate vector there.
    pub frame: Vec<(Node, Vec2)>,
    /// Nodes reduced to their normal direction.
    pub reduced_nodes: Vec<Node>,
    pub matrix: DMatrix<f64>,
    pub gradient: DVector<f64>,
}

impl ReducedHessian {
    /// Coordinate displacement of every free node for a vector in the reduced frame.
    pub fn displacement(&self, w: &DVector<f64>) -> Vec<(Node, Vec2)> {
        let mut out: Vec<(Node, Vec2)> = Vec::new();
        for ((node, e), c) in self.frame.iter().zip(w.iter()) {
            match out.last_mut() {
                Some((n, d)) if n == node => *d += e * *c,
                _ => out.push((*node, e * *c)),
            }
        }
        out
    }
}

pub fn hessian(net: &GammaNet, opts: &HessianOptions) -> Result<ReducedHessian> {
    let variables = net.variables();
    let grad0 = net.gradient_vector()?;
    let columns: Vec<Vec<f64>> = variables
        .par_iter()
        .map(|(node, axis)| -> Result<Vec<f64>> {
            let p = net.point(*node);
            let h = 1e-5 * (1.0 + p.x[*axis].abs()) * opts.step_scale;
            let shifted = |s: f64| -> Result<Vec<f64>> {
                let mut q: ChartPoint = p;
                q.x[*axis] += s;
                net.with_points(&[(*node, q)], Rebuild::Frozen)?.gradient_vector()
            };
            let gp = shifted(h)?;
            let gm = shifted(-h)?;
            Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        })
        .collect::<Result<_>>()?;
    let n = variables.len();
    let raw = DMatrix::from_fn(n, n, |i, j| columns[j][i]);
    let coordinate = (&raw + raw.transpose()) * 0.5;

    let incidence = net.incidence();
    let m = net.manifold();
    let mut frame = Vec::new();
    let mut reduced_nodes = Vec::new();
    for node in net.free_nodes() {
        let p = net.point(node);
        let g = m.metric_unchecked(p.chart, &p.x);
        let ends = &incidence[&node];
        let two_balanced = ends.len() == 2 && {
            let u0 = net.inward_tangent(&ends[0])?;
            let u1 = net.inward_tangent(&ends[1])?;
            net.multiplicity(ends[0].edge) == net.multiplicity(ends[1].edge)
                && m.norm(&p, &(u0 + u1)) < opts.reduce_tol
        };
        if two_balanced {
            let u = net.inward_tangent(&ends[0])?;
            frame.push((node, quarter_turn(&g, &u)));
            reduced_nodes.push(node);
        } else {
            let e1 = Vec2::new(1.0, 0.0) / g[(0, 0)].sqrt();
            frame.push((node, e1));
            frame.push((node, quarter_turn(&g, &e1)));
        }
    }
    // basis matrix from reduced coefficients to coordinate displacements
    let index: std::collections::BTreeMap<(Node, usize), usize> =
        variables.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut q = DMatrix::zeros(n, frame.len());
    for (c, (node, e)) in frame.iter().enumerate() {
        q[(index[&(*node, 0)], c)] = e[0];
        q[(index[&(*node, 1)], c)] = e[1];
    }
    let matrix = q.transpose() * &coordinate * &q;
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    let gradient = q.transpose() * DVector::from_vec(grad0);
    Ok(ReducedHessian { variables, coordinate, frame, reduced_nodes, matrix, gradient })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Nondegenerate,
    Degenerate,
    Indeterminate,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Nondegenerate => "nondegenerate",
            Classification::Degenerate => "degenerate",
            Classification::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Clone, Debug)]
pub struct NullVector {
    pub eigenvalue: f64,
    /// Coordinates in the reduced frame, scaled so the largest node displacement has
    /// `g`-norm one.
    pub vector: DVector<f64>,
    /// Largest `|P(w_a) − w_b|_g / L` over pieces.
    pub parallel_residual: f64,
}

#[derive(Clone, Debug)]
pub struct VariationReport {
    pub length: f64,
    pub defects: Vec<(Node, Vec2, f64)>,
    pub max_defect: f64,
    pub hessian: ReducedHessian,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub lambda_max: f64,
    pub null_vectors: Vec<NullVector>,
    /// Smallest `|λ|` among eigenpairs whose eigenvector is not parallel.
    pub min_nontrivial: f64,
    pub classification: Classification,
    pub tol_null: f64,
    pub tol_par: f64,
    pub caveat: &'static str,
}

/// Caveat attached to every classification: it concerns the finite vertex model.
pub const FINITE_MODEL_CAVEAT: &str =
    "classification of the finite vertex model; null vectors of the full second variation are assumed to correspond";

/// Full second-variation report of a stationary net.
pub fn hessian_and_classify(net: &GammaNet, opts: &HessianOptions) -> Result<VariationReport> {
    net.require_stationary(opts.tol_stat)?;
    let hess = hessian(net, opts)?;
    let eig = SymmetricEigen::new(hess.matrix.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let eigenvalues: Vec<f64> = order.iter().map(|i| eig.eigenvalues[*i]).collect();
    let lambda_max = eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let threshold = opts.tol_null * lambda_max;

    let mut null_vectors = Vec::new();
    let mut min_nontrivial = f64::INFINITY;
    let mut indeterminate = false;
    for &i in &order {
        let lambda = eig.eigenvalues[i];
        let a = lambda.abs();
        if a >= 0.1 * threshold && a <= 10.0 * threshold {
            indeterminate = true;
        }
        let v = eig.eigenvectors.column(i).into_owned();
        if a < threshold {
            let (vector, residual) = parallel_residual(net, &hess, &v)?;
            null_vectors.push(NullVector { eigenvalue: lambda, vector, parallel_residual: residual });
            if residual >= opts.tol_par {
                min_nontrivial = min_nontrivial.min(a);
            }
        } else {
            min_nontrivial = min_nontrivial.min(a);
        }
    }
    let classification = if indeterminate {
        Classification::Indeterminate
    } else if null_vectors.iter().any(|nv| nv.parallel_residual >= opts.tol_par) {
        Classification::Degenerate
    } else {
        Classification::Nondegenerate
    };
    let defects_map = net.balancing_defect()?;
    let defects: Vec<(Node, Vec2, f64)> = net
        .free_nodes()
        .into_iter()
        .map(|n| (n, defects_map[&n], net.manifold().norm(&net.point(n), &defects_map[&n])))
        .collect();
    let max_defect = defects.iter().fold(0.0f64, |a, d| a.max(d.2));
    Ok(VariationReport {
        length: net.length(),
        defects,
        max_defect,
        hessian: hess,
        eigenvalues,
        lambda_max,
        null_vectors,
        min_nontrivial,
        classification,
        tol_null: opts.tol_null,
        tol_par: opts.tol_par,
        caveat: FINITE_MODEL_CAVEAT,
    })
}

/// Extends a reduced-frame vector to node displacements, normalizes the largest to
/// unit length and measures its failure to be parallel along every piece. At reduced
/// nodes only the normal component is known and compared.
fn parallel_residual(net: &GammaNet, hess: &ReducedHessian, v: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let m = net.manifold();
    let disp: std::collections::BTreeMap<Node, Vec2> = hess.displacement(v).into_iter().collect();
    let scale = disp.iter().map(|(n, d)| m.norm(&net.point(*n), d)).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Ok((v.clone(), 0.0));
    }
    let at = |n: Node| disp.get(&n).map(|d| d / scale).unwrap_or_else(Vec2::zeros);
    let reduced = |n: Node| hess.reduced_nodes.contains(&n);
    let mut worst = 0.0f64;
    for (e, ne) in net.edges() {
        for (k, seg) in ne.pieces.iter().enumerate() {
            let (na, nb) = (net.piece_node(*e, k, 0), net.piece_node(*e, k, 1));
            let (pa, pb) = (net.point(na), net.point(nb));
            let wa = m.map_vector(&pa, &at(na), seg.start.chart).map(|x| x.1).unwrap_or_else(Vec2::zeros);
            let wb = m.map_vector(&pb, &at(nb), seg.end.chart).map(|x| x.1).unwrap_or_else(Vec2::zeros);
            let moved = parallel_transport(m, seg, wa)?;
            let diff = moved - wb;
            let r = if reduced(na) || reduced(nb) {
                let g = m.metric_unchecked(seg.end.chart, &seg.end.x);
                let nrm = quarter_turn(&g, &seg.end_tangent);
                m.inner(&seg.end, &diff, &nrm).abs()
            } else {
                m.norm(&seg.end, &diff)
            };
            worst = worst.max(r / seg.length);
        }
    }
    Ok((v / scale, worst))
}

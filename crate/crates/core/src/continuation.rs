//! Following a stationary net along a conformal family `g_t = (1 + tφ) g₀`.
//!
//! Secant predictor on free node coordinates, damped Newton corrector under `g_t`,
//! bisection of the t-step when the corrector fails. Degeneracy of the followed net is
//! a halt condition: the last certified t and the failing t are reported.

use serde::Serialize;

use crate::error::{GeonetError, Result};
use crate::net::{hessian_and_classify, Classification, GammaNet, HessianOptions, Node, Rebuild, VariationReport};
use crate::riemann::{ChartPoint, MetricFamily};
use crate::solver::{stationarize, SolverOptions};

#[derive(Clone, Copy, Debug)]
pub struct ContinuationOptions {
    /// Corrector; `max_iter` is the acceptance bound on corrector iterations.
    pub corrector: SolverOptions,
    pub hessian: HessianOptions,
    pub min_step: f64,
    /// Follow a start that is already degenerate. The degeneracy halt is then off and
    /// classifications are only reported.
    pub allow_degenerate_start: bool,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            corrector: SolverOptions { max_iter: 8, newton_switch: f64::INFINITY, ..SolverOptions::default() },
            hessian: HessianOptions::default(),
            min_step: 1e-6,
            allow_degenerate_start: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ContinuationStep {
    pub t: f64,
    pub net: GammaNet,
    pub report: VariationReport,
    /// Corrector iterations summed over the sub-steps that reached this t.
    pub corrector_iterations: usize,
    pub substeps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Halt {
    pub last_good_t: f64,
    pub failed_t: f64,
    pub min_nontrivial: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug)]
pub struct Continuation {
    pub steps: Vec<ContinuationStep>,
    /// Set when a degenerate net was met; the critical interval is `(last_good_t, failed_t]`.
    pub halted: Option<Halt>,
}

/// `grid` must start at 0, increase strictly, and stay within the family's range.
pub fn continue_net(net0: &GammaNet, fam: &MetricFamily, grid: &[f64], opts: &ContinuationOptions) -> Result<Continuation> {
    if grid.first() != Some(&0.0) {
        return Err(GeonetError::InvalidInput("the t-grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid.last().is_some_and(|t| *t > fam.t_max() * (1.0 + 1e-12)) {
        return Err(GeonetError::InvalidInput("the t-grid must increase strictly within [0, t_max]".into()));
    }
    let start = net0.with_manifold(fam.at(0.0))?;
    let report = hessian_and_classify(&start, &opts.hessian)?;
    let degenerate_start = report.classification == Classification::Degenerate;
    if degenerate_start && !opts.allow_degenerate_start {
        return Err(GeonetError::InvalidInput("the starting net is degenerate".into()));
    }
    let halting = !degenerate_start;
    let mut steps = vec![ContinuationStep { t: 0.0, net: start.clone(), report, corrector_iterations: 0, substeps: 0 }];
    let mut prev: Option<(f64, GammaNet)> = None;
    let mut cur = (0.0, start);
    for &target in &grid[1..] {
        let mut iterations = 0;
        let mut substeps = 0;
        let mut h = target - cur.0;
        while cur.0 < target {
            let t = (cur.0 + h).min(target);
            let pred = predict(&cur, prev.as_ref(), t, fam)?;
            match stationarize(&pred, &opts.corrector) {
                Ok(solved) => {
                    iterations += solved.iterations;
                    substeps += 1;
                    prev = Some(cur);
                    cur = (t, solved.net);
                    h = (2.0 * h).min(target - cur.0).max(opts.min_step);
                }
                Err(_) if h / 2.0 >= opts.min_step => h /= 2.0,
                Err(_) => return Err(GeonetError::ContinuationFailure { t, min_step: opts.min_step }),
            }
        }
        let report = hessian_and_classify(&cur.1, &opts.hessian)?;
        if halting && report.classification == Classification::Degenerate {
            let halt = Halt {
                last_good_t: steps.last().map(|s| s.t).unwrap_or(0.0),
                failed_t: target,
                min_nontrivial: report.min_nontrivial,
                threshold: report.tol_null * report.lambda_max,
            };
            return Ok(Continuation { steps, halted: Some(halt) });
        }
        steps.push(ContinuationStep { t: target, net: cur.1.clone(), report, corrector_iterations: iterations, substeps });
    }
    Ok(Continuation { steps, halted: None })
}

/// Secant extrapolation of free node coordinates when the two previous nets share
/// nodes and charts; otherwise the current net itself. Geometry is under `g_t`.
fn predict(cur: &(f64, GammaNet), prev: Option<&(f64, GammaNet)>, t: f64, fam: &MetricFamily) -> Result<GammaNet> {
    let base = cur.1.with_manifold(fam.at(t))?;
    let Some((t0, old)) = prev else { return Ok(base) };
    let (t1, net) = (cur.0, &cur.1);
    let nodes = net.free_nodes();
    if nodes != old.free_nodes() || t1 <= *t0 {
        return Ok(base);
    }
    let r = (t - t1) / (t1 - t0);
    let mut moves: Vec<(Node, ChartPoint)> = Vec::with_capacity(nodes.len());
    for n in nodes {
        let (p, q) = (net.point(n), old.point(n));
        if p.chart != q.chart {
            return Ok(base);
        }
        moves.push((n, ChartPoint { chart: p.chart, x: p.x + (p.x - q.x) * r }));
    }
    base.with_points(&moves, Rebuild::Warm).or(Ok(base))
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyRow {
    pub t: f64,
    pub length: f64,
    pub defect: f64,
    pub min_nontrivial: f64,
    pub classification: Classification,
}

/// One row per emitted net, sorted by t.
pub fn length_along_family(result: &Continuation) -> Vec<FamilyRow> {
    let mut rows: Vec<FamilyRow> = result
        .steps
        .iter()
        .map(|s| FamilyRow {
            t: s.t,
            length: s.net.length(),
            defect: s.report.max_defect,
            min_nontrivial: s.report.min_nontrivial,
            classification: s.report.classification,
        })
        .collect();
    rows.sort_by(|a, b| a.t.total_cmp(&b.t));
    rows
}

/// Uniform grid `0, t_max/steps, …, t_max`.
pub fn uniform_grid(t_max: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| t_max * k as f64 / steps.max(1) as f64).collect()
}

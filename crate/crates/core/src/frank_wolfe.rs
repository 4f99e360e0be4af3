//! Conditional-gradient least squares over a convex body given by a linear
//! maximization oracle.
//!
//! The solver keeps the full convex-combination history of the iterate, since
//! downstream consumers (synopses) need the vertex payloads, not just the point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights below this are dropped from the history.
pub const PRUNE_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex<P> {
    pub point: Vec<f64>,
    pub payload: P,
}

pub trait LinearOracle {
    type Payload: Clone;

    /// A point of the body (approximately) maximizing `<direction, v>`.
    fn maximize(&mut self, direction: &[f64]) -> Result<Vertex<Self::Payload>>;

    /// Additive suboptimality the oracle may incur per call.
    fn tolerance(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwStep {
    /// ||r - q||^2 after the step.
    pub objective: f64,
    /// <r - q_prev, v - q_prev> for the oracle vertex v.
    pub gap: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct FwIterate<P> {
    pub point: Vec<f64>,
    pub history: Vec<(f64, P)>,
    pub trace: Vec<FwStep>,
}

impl<P> FwIterate<P> {
    pub fn objective(&self, target: &[f64]) -> f64 {
        sq_dist(target, &self.point)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// argmin over alpha in [0,1] of ||r - alpha q - (1 - alpha) v||^2.
pub fn line_search(r: &[f64], q: &[f64], v: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((ri, qi), vi) in r.iter().zip(q).zip(v) {
        let dq = qi - vi;
        num += (ri - vi) * dq;
        den += dq * dq;
    }
    if den == 0.0 {
        return 0.0;
    }
    (num / den).clamp(0.0, 1.0)
}

/// Runs `iterations` steps starting from the oracle's maximizer in the direction of `target`.
pub fn frank_wolfe<O: LinearOracle>(
    oracle: &mut O,
    target: &[f64],
    iterations: usize,
) -> Result<FwIterate<O::Payload>> {
    let start = oracle.maximize(target)?;
    frank_wolfe_from(oracle, target, iterations, start)
}

pub fn frank_wolfe_from<O: LinearOracle>(
    oracle: &mut O,
    target: &[f64],
    iterations: usize,
    start: Vertex<O::Payload>,
) -> Result<FwIterate<O::Payload>> {
    if iterations == 0 {
        return Err(Error::InvalidParameter("Frank-Wolfe needs at least one iteration".into()));
    }
    if start.point.len() != target.len() {
        return Err(Error::InvalidParameter(format!(
            "start vertex has dimension {}, target {}",
            start.point.len(),
            target.len()
        )));
    }
    let mut point = start.point;
    let mut history = vec![(1.0, start.payload)];
    let mut trace = Vec::with_capacity(iterations);
    let mut direction = vec![0.0; target.len()];

    for _ in 0..iterations {
        for ((d, r), q) in direction.iter_mut().zip(target).zip(&point) {
            *d = r - q;
        }
        let v = oracle.maximize(&direction)?;
        if v.point.len() != target.len() {
            return Err(Error::InvalidParameter("oracle returned a vertex of wrong dimension".into()));
        }
        let gap = dot(&direction, &v.point) - dot(&direction, &point);
        let alpha = line_search(target, &point, &v.point);

        if alpha < 1.0 {
            for (q, vi) in point.iter_mut().zip(&v.point) {
                *q = alpha * *q + (1.0 - alpha) * vi;
            }
            for (w, _) in history.iter_mut() {
                *w *= alpha;
            }
            history.push((1.0 - alpha, v.payload));
            history.retain(|(w, _)| *w >= PRUNE_WEIGHT);
            let total: f64 = history.iter().map(|(w, _)| w).sum();
            for (w, _) in history.iter_mut() {
                *w /= total;
            }
        }
        trace.push(FwStep { objective: sq_dist(target, &point), gap, alpha });
    }
    Ok(FwIterate { point, history, trace })
}

/// Additive excess ||r - q_T||^2 - ||r - q*||^2 allowed after T iterations,
/// where `radius` bounds ||x|| over the body.
pub fn convergence_bound(radius: f64, iterations: usize) -> f64 {
    4.0 * radius * radius / (iterations as f64 + 3.0)
}

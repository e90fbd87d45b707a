//! Decentralized stochastic optimization for finite sums on an augmented graph.
//!
//! Graphs, problems, spectral data and sampling plans are immutable after
//! construction and safe to share across threads; solver states (including
//! their prox warm-start caches) belong to a single run.

pub mod apcg;
pub mod experiment;
pub mod graph;
pub mod problem;
pub mod schedule;
pub mod solver;
pub mod verify;

/// Least-squares slope of `(x, y)` points; used to fit convergence rates.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

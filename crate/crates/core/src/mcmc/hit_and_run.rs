//! Metropolized hit-and-run moves on correlation matrices.

use crate::centering::CorrelationMatrix;
use crate::error::Result;
use crate::numeric::{sample_truncated_normal, truncated_normal_mass};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::SQRT_2;

/// The random ingredients of one move: the step length `delta` and one
/// standard normal per off-diagonal pair, upper triangle in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct HitAndRunDraw {
    pub delta: f64,
    pub z: Vec<f64>,
}

impl HitAndRunDraw {
    /// `z` first, then `delta ~ N(0, scale^2)` truncated to
    /// `(-xi / sqrt 2, xi / sqrt 2)` with `xi` the least eigenvalue of `r`.
    pub fn sample<R: Rng + ?Sized>(r: &CorrelationMatrix, scale: f64, rng: &mut R) -> Self {
        let d = r.dims();
        let z: Vec<f64> = (0..d * (d - 1) / 2).map(|_| StandardNormal.sample(rng)).collect();
        let b = step_bound(r);
        let delta = sample_truncated_normal(0.0, scale, -b, b, rng);
        HitAndRunDraw { delta, z }
    }
}

/// Half-width of the truncation interval for `delta`.
pub fn step_bound(r: &CorrelationMatrix) -> f64 {
    r.least_eigenvalue().max(0.0) / SQRT_2
}

/// Symmetric perturbation with zero diagonal:
/// `h_ij = delta z_ij / ||z||`. Its Frobenius norm is `sqrt(2) |delta|`, so a
/// step inside the truncation interval moves no eigenvalue by more than the
/// least eigenvalue of the current matrix.
pub fn perturbation(d: usize, draw: &HitAndRunDraw) -> DMatrix<f64> {
    let norm = draw.z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut h = DMatrix::zeros(d, d);
    if norm == 0.0 {
        return h;
    }
    let mut t = 0;
    for i in 0..d {
        for j in i + 1..d {
            let v = draw.delta * draw.z[t] / norm;
            h[(i, j)] = v;
            h[(j, i)] = v;
            t += 1;
        }
    }
    h
}

/// Candidate `R + H` and `log q(R | R*) - log q(R* | R)`. The only
/// asymmetry is the state-dependent truncation of `delta`; a candidate from
/// which the reverse step would fall outside its own truncation interval
/// gets `-inf`. `None` when `R + H` is not positive definite.
pub fn propose_r(r: &CorrelationMatrix, draw: &HitAndRunDraw, scale: f64) -> Result<Option<(CorrelationMatrix, f64)>> {
    let h = perturbation(r.dims(), draw);
    let mut m = r.matrix() + h;
    // keep exact symmetry and unit diagonal
    for i in 0..r.dims() {
        m[(i, i)] = 1.0;
    }
    let candidate = match CorrelationMatrix::new(m) {
        Ok(c) if c.least_eigenvalue() > 0.0 => c,
        _ => return Ok(None),
    };
    if draw.delta == 0.0 {
        return Ok(Some((candidate, 0.0)));
    }
    let (b, b_star) = (step_bound(r), step_bound(&candidate));
    if draw.delta.abs() >= b_star {
        return Ok(Some((candidate, f64::NEG_INFINITY)));
    }
    let log_q = truncated_normal_mass(0.0, scale, -b, b).ln() - truncated_normal_mass(0.0, scale, -b_star, b_star).ln();
    Ok(Some((candidate, log_q)))
}

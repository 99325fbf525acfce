//! Deterministic "perfect" samples from bivariate Gaussians and their
//! mixtures, and the simulation models built from them.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, std_normal_cdf};
use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl GaussianComponent {
    fn covariance(&self) -> Result<Matrix2<f64>> {
        let c = Matrix2::new(self.cov[0][0], self.cov[0][1], self.cov[1][0], self.cov[1][1]);
        let det = c.determinant();
        if c[(0, 1)] != c[(1, 0)] || c[(0, 0)] <= 0.0 || det <= 0.0 {
            return Err(Error::InvalidParameter(format!("covariance {:?} is not symmetric positive definite", self.cov)));
        }
        Ok(c)
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        let [[a, b], [_, d]] = self.cov;
        let det = a * d - b * b;
        let (u, v) = (x[0] - self.mean[0], x[1] - self.mean[1]);
        let q = (d * u * u - 2.0 * b * u * v + a * v * v) / det;
        -0.5 * q - (2.0 * PI).ln() - 0.5 * det.ln()
    }
}

/// A weighted bivariate Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("mixture needs at least one component".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if components.iter().any(|c| !(c.weight > 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("mixture weights must be positive and sum to 1".into()));
        }
        for c in &components {
            c.covariance()?;
        }
        Ok(GaussianMixture { components })
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self.components.iter().map(|c| c.weight.ln() + c.ln_pdf(x)).collect();
        log_sum_exp(&terms)
    }

    pub fn marginal_cdf(&self, axis: usize, t: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * std_normal_cdf((t - c.mean[axis]) / c.cov[axis][axis].sqrt()))
            .sum()
    }

    pub fn marginal_ln_pdf(&self, axis: usize, t: f64) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let s = c.cov[axis][axis].sqrt();
                let z = (t - c.mean[axis]) / s;
                c.weight.ln() - 0.5 * z * z - 0.5 * (2.0 * PI).ln() - s.ln()
            })
            .collect();
        log_sum_exp(&terms)
    }

    /// Inverse of [`Self::marginal_cdf`] by bracketed bisection.
    pub fn marginal_quantile(&self, axis: usize, p: f64) -> f64 {
        let (mut lo, mut hi) = (-1.0, 1.0);
        while self.marginal_cdf(axis, lo) > p {
            lo *= 2.0;
        }
        while self.marginal_cdf(axis, hi) < p {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if self.marginal_cdf(axis, mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Copula density: joint density over the product of marginal densities
    /// at the marginal quantiles of `u`.
    pub fn copula_density(&self, u: &[f64]) -> f64 {
        if u.iter().any(|v| *v <= 0.0 || *v >= 1.0) {
            return 0.0;
        }
        let x = [self.marginal_quantile(0, u[0]), self.marginal_quantile(1, u[1])];
        (self.ln_pdf(&x) - self.marginal_ln_pdf(0, x[0]) - self.marginal_ln_pdf(1, x[1])).exp()
    }

    /// Maps each data row through the marginal CDFs.
    pub fn pseudo_observations(&self, data: &Dataset) -> Vec<Vec<f64>> {
        data.rows().map(|r| vec![self.marginal_cdf(0, r[0]), self.marginal_cdf(1, r[1])]).collect()
    }

    /// Perfect sample of `n` points. Components get points by largest
    /// remainder rounding of `w_c n` (ties to the earlier component).
    pub fn perfect_sample(&self, n: usize) -> Result<Vec<[f64; 2]>> {
        let mut out = Vec::with_capacity(n);
        for (c, m) in self.components.iter().zip(largest_remainder(&self.weights(), n)) {
            if m > 0 {
                let (a1, a2) = factor_near_sqrt(m);
                out.extend(perfect_sample_gaussian(c.mean, c.cov, a1, a2)?);
            }
        }
        Ok(out)
    }

    fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }
}

/// `a1 * a2 = n` with `a1` the largest divisor not above `sqrt(n)`.
pub fn factor_near_sqrt(n: usize) -> (usize, usize) {
    let mut a1 = (n as f64).sqrt() as usize;
    while a1 > 1 && n % a1 != 0 {
        a1 -= 1;
    }
    let a1 = a1.max(1);
    (a1, n / a1)
}

/// Integer counts summing to `n`, proportional to `weights`.
pub fn largest_remainder(weights: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// `a1` radii at chi(2) quantiles `(j - 1/2) / a1` times `a2` angles
/// `2 pi i / a2`; element `i a1 + j` is `(q_j cos r_i, q_j sin r_i)`, then
/// mapped through `mu + U s` with `U` the symmetric square root of `sigma`.
pub fn perfect_sample_gaussian(mu: [f64; 2], sigma: [[f64; 2]; 2], a1: usize, a2: usize) -> Result<Vec<[f64; 2]>> {
    if a1 == 0 || a2 == 0 {
        return Err(Error::InvalidParameter("grid factors must be positive".into()));
    }
    let cov = GaussianComponent { weight: 1.0, mean: mu, cov: sigma }.covariance()?;
    let eig = SymmetricEigen::new(cov);
    let root = eig.eigenvectors * Matrix2::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * eig.eigenvectors.transpose();
    let q: Vec<f64> = (0..a1)
        .map(|j| {
            let p = (j as f64 + 0.5) / a1 as f64;
            (-2.0 * (-p).ln_1p()).sqrt()
        })
        .collect();
    let mut out = Vec::with_capacity(a1 * a2);
    for i in 0..a2 {
        let r = 2.0 * PI * i as f64 / a2 as f64;
        let (s, c) = r.sin_cos();
        for &qj in &q {
            let y = root * Vector2::new(qj * c, qj * s);
            out.push([mu[0] + y[0], mu[1] + y[1]]);
        }
    }
    Ok(out)
}

/// The four bivariate simulation models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulationModel {
    /// Two-component mixture that mimics standard normal marginals joined
    /// by a Clayton copula with parameter 3.
    M1,
    /// Standard bivariate normal with correlation 0.5.
    M2,
    /// Equal mixture of correlations 0.5 and -0.9.
    M3,
    /// Equal mixture of unit-covariance normals at `-(1, 1)` and `(1, 1)`.
    M4,
}

impl SimulationModel {
    pub fn mixture(self) -> GaussianMixture {
        let comp = |weight, m: f64, rho| GaussianComponent { weight, mean: [m, m], cov: [[1.0, rho], [rho, 1.0]] };
        let components = match self {
            SimulationModel::M1 => vec![comp(0.4, -1.6, 0.85), comp(0.6, 0.0, -0.1)],
            SimulationModel::M2 => vec![comp(1.0, 0.0, 0.5)],
            SimulationModel::M3 => vec![comp(0.5, 0.0, 0.5), comp(0.5, 0.0, -0.9)],
            SimulationModel::M4 => vec![comp(0.5, -1.0, 0.0), comp(0.5, 1.0, 0.0)],
        };
        GaussianMixture::new(components).expect("model constants are valid")
    }

    pub fn perfect_sample(self, n: usize) -> Result<Dataset> {
        let pts = self.mixture().perfect_sample(n)?;
        Dataset::new(2, pts.concat(), Some(vec!["x1".into(), "x2".into()]))
    }
}

impl fmt::Display for SimulationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for SimulationModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "M1" => Ok(SimulationModel::M1),
            "M2" => Ok(SimulationModel::M2),
            "M3" => Ok(SimulationModel::M3),
            "M4" => Ok(SimulationModel::M4),
            other => Err(Error::Parse(format!("unknown model `{other}`, expected M1..M4"))),
        }
    }
}

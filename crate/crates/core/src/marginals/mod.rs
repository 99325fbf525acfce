//! Marginal models, pseudo-observations and the energy function driven by
//! the t-walk.

mod twalk;

pub use twalk::{Twalk, TwalkConfig, TwalkMove, TwalkStep, TwalkTarget};

use crate::bernstein::{BernsteinCopula, KernelBasis, UnitPoints};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, std_normal_cdf, std_normal_ln_pdf};
use crate::yett::YettCopula;
use statrs::distribution::{Beta, Continuous, ContinuousCDF, Gamma};
use std::fmt;
use std::str::FromStr;

/// Parametric CDF values are kept this far from 0 and 1.
pub const CDF_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `(mu, sigma)`
    Gaussian,
    /// `(mu, sigma)` of the underlying normal.
    LogNormal,
    /// `(shape, scale)`
    Gamma,
    /// `(a, b)`
    Beta,
    /// `(w, mu1, sigma1, mu2, sigma2)`: `w N(mu1, sigma1^2) + (1 - w) N(mu2, sigma2^2)`.
    GaussianMixture2,
}

impl Family {
    pub fn param_count(self) -> usize {
        match self {
            Family::GaussianMixture2 => 5,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::LogNormal => "lognormal",
            Family::Gamma => "gamma",
            Family::Beta => "beta",
            Family::GaussianMixture2 => "gaussian_mixture2",
        }
    }

    /// Natural parameter box of the family.
    pub fn default_support(self) -> Support {
        let inf = f64::INFINITY;
        let (lower, upper) = match self {
            Family::Gaussian | Family::LogNormal => (vec![-inf, 0.0], vec![inf, inf]),
            Family::Gamma | Family::Beta => (vec![0.0, 0.0], vec![inf, inf]),
            Family::GaussianMixture2 => (vec![0.0, -inf, 0.0, -inf, 0.0], vec![1.0, inf, inf, inf, inf]),
        };
        Support { lower, upper }
    }

    pub fn cdf(self, x: f64, theta: &[f64]) -> f64 {
        match self {
            Family::Gaussian => std_normal_cdf((x - theta[0]) / theta[1]),
            Family::LogNormal => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - theta[0]) / theta[1])
                }
            }
            Family::Gamma => gamma(theta).cdf(x.max(0.0)),
            Family::Beta => beta(theta).cdf(x.clamp(0.0, 1.0)),
            Family::GaussianMixture2 => {
                let w = theta[0];
                w * std_normal_cdf((x - theta[1]) / theta[2]) + (1.0 - w) * std_normal_cdf((x - theta[3]) / theta[4])
            }
        }
    }

    pub fn ln_pdf(self, x: f64, theta: &[f64]) -> f64 {
        match self {
            Family::Gaussian => std_normal_ln_pdf((x - theta[0]) / theta[1]) - theta[1].ln(),
            Family::LogNormal => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let l = x.ln();
                    std_normal_ln_pdf((l - theta[0]) / theta[1]) - theta[1].ln() - l
                }
            }
            Family::Gamma => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    gamma(theta).ln_pdf(x)
                }
            }
            Family::Beta => {
                if x <= 0.0 || x >= 1.0 {
                    f64::NEG_INFINITY
                } else {
                    beta(theta).ln_pdf(x)
                }
            }
            Family::GaussianMixture2 => {
                let a = theta[0].ln() + std_normal_ln_pdf((x - theta[1]) / theta[2]) - theta[2].ln();
                let b = (-theta[0]).ln_1p() + std_normal_ln_pdf((x - theta[3]) / theta[4]) - theta[4].ln();
                log_sum_exp(&[a, b])
            }
        }
    }
}

fn gamma(theta: &[f64]) -> Gamma {
    Gamma::new(theta[0], 1.0 / theta[1]).expect("parameters checked against support")
}

fn beta(theta: &[f64]) -> Beta {
    Beta::new(theta[0], theta[1]).expect("parameters checked against support")
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "lognormal" => Ok(Family::LogNormal),
            "gamma" => Ok(Family::Gamma),
            "beta" => Ok(Family::Beta),
            "gaussian_mixture2" | "mixture2" => Ok(Family::GaussianMixture2),
            other => Err(Error::Parse(format!("unknown marginal family `{other}`"))),
        }
    }
}

/// Open parameter box: each coordinate lies strictly between its bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Support {
    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.lower.len()
            && theta.iter().zip(self.lower.iter().zip(&self.upper)).all(|(t, (lo, hi))| t > lo && t < hi)
    }
}

/// Parametric marginal with a flat prior on its support.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricMarginal {
    family: Family,
    theta: Vec<f64>,
    support: Support,
}

impl ParametricMarginal {
    pub fn new(family: Family, theta: Vec<f64>) -> Result<Self> {
        Self::with_support(family, theta, family.default_support())
    }

    /// The support must lie inside the family's natural parameter box.
    pub fn with_support(family: Family, theta: Vec<f64>, support: Support) -> Result<Self> {
        let natural = family.default_support();
        let n = family.param_count();
        if support.lower.len() != n || support.upper.len() != n {
            return Err(Error::InvalidParameter(format!("{family} takes {n} parameters")));
        }
        let nested = (0..n).all(|i| {
            support.lower[i] >= natural.lower[i] && support.upper[i] <= natural.upper[i] && support.lower[i] < support.upper[i]
        });
        if !nested {
            return Err(Error::InvalidParameter(format!("support {support:?} is not inside the {family} parameter space")));
        }
        if !support.contains(&theta) {
            return Err(Error::InvalidParameter(format!("{family} parameters {theta:?} outside support")));
        }
        Ok(ParametricMarginal { family, theta, support })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn support(&self) -> &Support {
        &self.support
    }
}

/// Empirical distribution function `rank / (n + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() || sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("empirical CDF needs a nonempty finite sample".into()));
        }
        sample.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted: sample })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// `(#{X < t} + (#{X = t} + 1) / 2) / (n + 1)`. On sample values this is
    /// the average rank over `n + 1`; elsewhere it sits halfway between the
    /// neighbouring ranks, so the result is always inside (0, 1).
    pub fn eval(&self, t: f64) -> f64 {
        let below = self.sorted.partition_point(|v| *v < t);
        let upto = self.sorted.partition_point(|v| *v <= t);
        let ties = upto - below;
        (below as f64 + (ties as f64 + 1.0) / 2.0) / (self.sorted.len() as f64 + 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MarginalModel {
    Parametric(ParametricMarginal),
    Empirical(EmpiricalCdf),
}

impl MarginalModel {
    pub fn param_count(&self) -> usize {
        match self {
            MarginalModel::Parametric(p) => p.family.param_count(),
            MarginalModel::Empirical(_) => 0,
        }
    }
}

/// Pseudo-observations plus the number of parametric CDF values that had
/// to be clamped away from 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObservations {
    pub points: UnitPoints,
    pub clamped: usize,
}

/// One marginal model per axis. Parameters of the parametric axes are
/// stacked in axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSet {
    models: Vec<MarginalModel>,
}

impl MarginalSet {
    pub fn new(models: Vec<MarginalModel>) -> Result<Self> {
        if models.len() < 2 {
            return Err(Error::InvalidParameter("need a marginal model for at least two axes".into()));
        }
        Ok(MarginalSet { models })
    }

    /// Empirical CDFs built from the columns of `data`.
    pub fn empirical(data: &Dataset) -> Result<Self> {
        let models = (0..data.dims())
            .map(|j| EmpiricalCdf::new(data.column(j)).map(MarginalModel::Empirical))
            .collect::<Result<_>>()?;
        Self::new(models)
    }

    pub fn models(&self) -> &[MarginalModel] {
        &self.models
    }

    pub fn dims(&self) -> usize {
        self.models.len()
    }

    /// True when there is nothing to sample.
    pub fn is_frozen(&self) -> bool {
        self.param_count() == 0
    }

    pub fn param_count(&self) -> usize {
        self.models.iter().map(MarginalModel::param_count).sum()
    }

    pub fn theta(&self) -> Vec<f64> {
        self.models
            .iter()
            .filter_map(|m| match m {
                MarginalModel::Parametric(p) => Some(p.theta.iter().copied()),
                MarginalModel::Empirical(_) => None,
            })
            .flatten()
            .collect()
    }

    pub fn in_support(&self, theta: &[f64]) -> bool {
        if theta.len() != self.param_count() {
            return false;
        }
        let mut off = 0;
        for m in &self.models {
            if let MarginalModel::Parametric(p) = m {
                let n = p.family.param_count();
                if !p.support.contains(&theta[off..off + n]) {
                    return false;
                }
                off += n;
            }
        }
        true
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if !self.in_support(theta) {
            return Err(Error::InvalidParameter(format!("marginal parameters {theta:?} outside support")));
        }
        let mut off = 0;
        for m in &mut self.models {
            if let MarginalModel::Parametric(p) = m {
                let n = p.family.param_count();
                p.theta.copy_from_slice(&theta[off..off + n]);
                off += n;
            }
        }
        Ok(())
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.dims() != self.dims() {
            return Err(Error::InvalidData(format!(
                "data has {} columns but {} marginals are configured",
                data.dims(),
                self.dims()
            )));
        }
        Ok(())
    }

    /// `u_ij = F_j(x_ij)` at the current parameters.
    pub fn pseudo_observations(&self, data: &Dataset) -> Result<PseudoObservations> {
        self.pseudo_observations_at(data, &self.theta())
    }

    /// `u_ij = F_j(x_ij)` with the parametric axes evaluated at `theta`.
    pub fn pseudo_observations_at(&self, data: &Dataset, theta: &[f64]) -> Result<PseudoObservations> {
        self.check_data(data)?;
        if !self.in_support(theta) {
            return Err(Error::InvalidParameter(format!("marginal parameters {theta:?} outside support")));
        }
        let d = self.dims();
        let mut values = vec![0.0; data.len() * d];
        let mut clamped = 0;
        let mut off = 0;
        for (j, m) in self.models.iter().enumerate() {
            match m {
                MarginalModel::Empirical(e) => {
                    for (i, row) in data.rows().enumerate() {
                        values[i * d + j] = e.eval(row[j]);
                    }
                }
                MarginalModel::Parametric(p) => {
                    let n = p.family.param_count();
                    let th = &theta[off..off + n];
                    off += n;
                    for (i, row) in data.rows().enumerate() {
                        let u = p.family.cdf(row[j], th);
                        let c = u.clamp(CDF_CLAMP, 1.0 - CDF_CLAMP);
                        if c != u {
                            clamped += 1;
                        }
                        values[i * d + j] = c;
                    }
                }
            }
        }
        Ok(PseudoObservations { points: UnitPoints::new(d, values)?, clamped })
    }

    /// `sum_i sum_j log f_j(x_ij | theta_j)` over the parametric axes.
    pub fn ln_marginal_density(&self, data: &Dataset, theta: &[f64]) -> f64 {
        data.rows().map(|row| self.ln_marginal_density_row(row, theta)).sum()
    }

    /// `sum_j log f_j(x_j | theta_j)` for one observation.
    pub fn ln_marginal_density_row(&self, row: &[f64], theta: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut off = 0;
        for (j, m) in self.models.iter().enumerate() {
            if let MarginalModel::Parametric(p) = m {
                let n = p.family.param_count();
                total += p.family.ln_pdf(row[j], &theta[off..off + n]);
                off += n;
            }
        }
        total
    }

    /// Negative log posterior of the marginal parameters given the copula:
    /// `-sum log f_j - sum log b_k(F(x_i)) - sum log pi_j`. The priors are
    /// flat, so the last term is zero inside the support; outside it the
    /// energy is `+inf`.
    pub fn energy(&self, data: &Dataset, g: &YettCopula, theta: &[f64]) -> Result<f64> {
        self.check_data(data)?;
        if !self.in_support(theta) {
            return Ok(f64::INFINITY);
        }
        let marg = self.ln_marginal_density(data, theta);
        if !marg.is_finite() {
            return Ok(f64::INFINITY);
        }
        let u = self.pseudo_observations_at(data, theta)?;
        let copula = copula_loglik(g, &u.points)?;
        if !copula.is_finite() {
            return Ok(f64::INFINITY);
        }
        Ok(-marg - copula)
    }
}

fn copula_loglik(g: &YettCopula, points: &UnitPoints) -> Result<f64> {
    if points.dims() != g.degree().dims() {
        return Err(Error::InvalidData("pseudo-observations do not match copula dimension".into()));
    }
    Ok(BernsteinCopula::new(g).loglik(points)?.value)
}

/// Copula log-likelihood through a prebuilt kernel basis.
pub fn basis_loglik(basis: &KernelBasis, g: &YettCopula) -> f64 {
    let mut scratch = Vec::new();
    (0..basis.len()).map(|i| basis.ln_density(i, g.masses(), &mut scratch)).sum()
}

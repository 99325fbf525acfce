//! TOML run configuration. Unknown keys are errors.

use anyhow::{bail, Context, Result};
use bernstein_yett::centering::ProjectionOptions;
use bernstein_yett::diagnostics::SimulationModel;
use bernstein_yett::marginals::{MarginalModel, ParametricMarginal};
use bernstein_yett::mcmc::{BaselineConfig, RunConfig};
use bernstein_yett::{
    CenteringCopula, CorrelationMatrix, Dataset, Degree, DistanceKind, Family, HastingsForm, MarginalSet, PriorSpec,
    ProposalKind,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub data: DataSection,
    pub prior: PriorSection,
    pub proposal: ProposalSection,
    pub run: RunSection,
    #[serde(default)]
    pub marginals: MarginalsSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    /// Force header handling; detected from the first row when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<bool>,
    /// Keep a random subset of this many rows (drawn with `seed`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    L2,
    Car,
    Icar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CenteringKind {
    Independence,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub kind: PriorKind,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default = "default_centering")]
    pub centering: CenteringKind,
    /// Upper triangle of the initial centering correlation, row by row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
}

fn default_centering() -> CenteringKind {
    CenteringKind::Independence
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalName {
    Ire,
    Gre,
    Vertex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HastingsName {
    Exact,
    Printed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalSection {
    pub kind: ProposalName,
    #[serde(default = "one")]
    pub u: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default = "default_hastings")]
    pub hastings: HastingsName,
}

fn one() -> usize {
    1
}

fn default_hastings() -> HastingsName {
    HastingsName::Exact
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// One entry per axis, or a single entry used for every axis.
    pub k: Vec<usize>,
    pub iterations: usize,
    #[serde(default)]
    pub burnin: usize,
    #[serde(default = "one")]
    pub thin: usize,
    #[serde(default = "one")]
    pub chains: usize,
    #[serde(default = "default_r_scale")]
    pub r_scale: f64,
    #[serde(default = "yes")]
    pub update_r: bool,
    #[serde(default = "one")]
    pub g_subsweeps: usize,
    #[serde(default = "default_qmc")]
    pub qmc_points: usize,
}

fn default_r_scale() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

fn default_qmc() -> usize {
    1 << 16
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalsKind {
    /// Rank-based pseudo-observations.
    Empirical,
    /// Families given in `families`, parameters sampled.
    Parametric,
    /// Data already on the unit cube.
    Uniform,
    /// Marginals of a built-in simulation model, treated as known.
    Known,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalsSection {
    pub kind: MarginalsKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub families: Vec<String>,
    /// Starting parameters, one list per axis (empty for empirical axes).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub theta: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

impl Default for MarginalsSection {
    fn default() -> Self {
        MarginalsSection { kind: MarginalsKind::Empirical, families: Vec::new(), theta: Vec::new(), model: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    /// Functionals whose ESS goes into the summary: `cells`, `loglik`,
    /// `logprior`, `r`, `theta`.
    pub ess: Vec<String>,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection { ess: vec!["cells".into(), "loglik".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    #[serde(default = "yes")]
    pub gaussian: bool,
    #[serde(default = "default_baseline_iterations")]
    pub iterations: usize,
    #[serde(default = "default_baseline_burnin")]
    pub burnin: usize,
    #[serde(default = "default_baseline_scale")]
    pub scale: f64,
}

fn default_baseline_iterations() -> usize {
    5000
}

fn default_baseline_burnin() -> usize {
    1000
}

fn default_baseline_scale() -> f64 {
    0.1
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in config {}", path.display()))?;
        if cfg.data.path.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.data.path = dir.join(&cfg.data.path);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Every problem found, not just the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.prior.alpha > 0.0 && self.prior.alpha.is_finite()) {
            problems.push(format!("prior.alpha must be positive, got {}", self.prior.alpha));
        }
        match (self.prior.kind, self.prior.gamma) {
            (PriorKind::Car, Some(g)) if !(g > 0.0 && g < 1.0) => {
                problems.push(format!("prior.gamma must lie in (0, 1), got {g}"))
            }
            (PriorKind::L2 | PriorKind::Icar, Some(_)) => problems.push("prior.gamma only applies to kind = \"car\"".into()),
            _ => {}
        }
        if self.prior.rho.is_some() && self.prior.centering != CenteringKind::Gaussian {
            problems.push("prior.rho needs centering = \"gaussian\"".into());
        }
        if self.proposal.u == 0 {
            problems.push("proposal.u must be at least 1".into());
        }
        match (self.proposal.kind, self.proposal.tau) {
            (ProposalName::Vertex, None) => problems.push("proposal.tau is required for kind = \"vertex\"".into()),
            (ProposalName::Vertex, Some(t)) if !(t > 0.0 && t.is_finite()) => {
                problems.push(format!("proposal.tau must be positive, got {t}"))
            }
            _ => {}
        }
        if self.run.k.is_empty() || self.run.k.contains(&0) {
            problems.push("run.k needs positive entries".into());
        }
        if self.run.thin == 0 {
            problems.push("run.thin must be at least 1".into());
        }
        if self.run.iterations > 0 && self.run.burnin >= self.run.iterations {
            problems.push("run.burnin must be below run.iterations".into());
        }
        if self.run.chains == 0 {
            problems.push("run.chains must be at least 1".into());
        }
        if !(self.run.r_scale > 0.0) {
            problems.push("run.r_scale must be positive".into());
        }
        if self.run.g_subsweeps == 0 {
            problems.push("run.g_subsweeps must be at least 1".into());
        }
        match self.marginals.kind {
            MarginalsKind::Parametric => {
                if self.marginals.families.is_empty() {
                    problems.push("marginals.families is required for kind = \"parametric\"".into());
                }
                if self.marginals.theta.len() != self.marginals.families.len() {
                    problems.push("marginals.theta needs one list per entry of marginals.families".into());
                }
                for f in &self.marginals.families {
                    if f != "empirical" && f.parse::<Family>().is_err() {
                        problems.push(format!("unknown marginal family `{f}`"));
                    }
                }
            }
            MarginalsKind::Known => match &self.marginals.model {
                None => problems.push("marginals.model is required for kind = \"known\"".into()),
                Some(m) if m.parse::<SimulationModel>().is_err() => problems.push(format!("unknown model `{m}`")),
                _ => {}
            },
            _ => {}
        }
        if self.marginals.kind != MarginalsKind::Known && self.marginals.model.is_some() {
            problems.push("marginals.model only applies to kind = \"known\"".into());
        }
        if self.report.ess.is_empty() {
            problems.push("report.ess must name at least one functional".into());
        }
        for f in &self.report.ess {
            if !["cells", "loglik", "logprior", "r", "theta"].contains(&f.as_str()) {
                problems.push(format!("unknown ESS functional `{f}`"));
            }
        }
        if let Some(b) = &self.baseline {
            if b.burnin >= b.iterations {
                problems.push("baseline.burnin must be below baseline.iterations".into());
            }
            if self.marginals.kind == MarginalsKind::Parametric {
                problems.push("the Gaussian baseline needs fixed marginals".into());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            bail!("invalid configuration:\n  - {}", problems.join("\n  - "))
        }
    }

    pub fn degree(&self, dims: usize) -> Result<Degree> {
        let k = match self.run.k.as_slice() {
            [k] => vec![*k; dims],
            ks if ks.len() == dims => ks.to_vec(),
            ks => bail!("run.k has {} entries but the data have {dims} columns", ks.len()),
        };
        Ok(Degree::new(k)?)
    }

    pub fn prior_spec(&self, dims: usize) -> Result<PriorSpec> {
        let distance = match self.prior.kind {
            PriorKind::L2 => DistanceKind::L2,
            PriorKind::Icar => DistanceKind::Icar,
            PriorKind::Car => DistanceKind::Car { gamma: self.prior.gamma.unwrap_or(0.99) },
        };
        let centering = match self.prior.centering {
            CenteringKind::Independence => CenteringCopula::Independence,
            CenteringKind::Gaussian => CenteringCopula::Gaussian(match &self.prior.rho {
                Some(rho) => CorrelationMatrix::from_upper_triangle(dims, rho)?,
                None => CorrelationMatrix::identity(dims),
            }),
        };
        Ok(PriorSpec { distance, alpha: self.prior.alpha, centering })
    }

    pub fn proposal_kind(&self) -> ProposalKind {
        match self.proposal.kind {
            ProposalName::Ire => ProposalKind::Ire { u: self.proposal.u },
            ProposalName::Gre => ProposalKind::Gre { u: self.proposal.u },
            ProposalName::Vertex => ProposalKind::VertexLine {
                tau: self.proposal.tau.unwrap_or(1.0),
                hastings: match self.proposal.hastings {
                    HastingsName::Exact => HastingsForm::Exact,
                    HastingsName::Printed => HastingsForm::Printed,
                },
            },
        }
    }

    pub fn run_config(&self, dims: usize, stream: u64) -> Result<RunConfig> {
        let mut rc = RunConfig::new(self.degree(dims)?, self.proposal_kind(), self.prior_spec(dims)?);
        rc.iterations = self.run.iterations;
        rc.burnin = self.run.burnin;
        rc.thin = self.run.thin;
        rc.seed = self.seed;
        rc.stream = stream;
        rc.r_hr = self.run.r_scale;
        rc.update_r = self.run.update_r;
        rc.g_subsweeps = self.run.g_subsweeps;
        rc.projection = ProjectionOptions { qmc_points: self.run.qmc_points, ..ProjectionOptions::default() };
        rc.validate()?;
        Ok(rc)
    }

    /// Marginal models for the parametric and empirical cases.
    pub fn marginal_set(&self, data: &Dataset) -> Result<MarginalSet> {
        if self.marginals.kind == MarginalsKind::Empirical {
            return Ok(MarginalSet::empirical(data)?);
        }
        if self.marginals.families.len() != data.dims() {
            bail!("marginals.families has {} entries but the data have {} columns", self.marginals.families.len(), data.dims());
        }
        let models = self
            .marginals
            .families
            .iter()
            .zip(&self.marginals.theta)
            .enumerate()
            .map(|(j, (f, theta))| {
                if f == "empirical" {
                    return Ok(MarginalModel::Empirical(bernstein_yett::marginals::EmpiricalCdf::new(data.column(j))?));
                }
                let family: Family = f.parse()?;
                Ok(MarginalModel::Parametric(
                    ParametricMarginal::new(family, theta.clone()).with_context(|| format!("marginal {j} ({f})"))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MarginalSet::new(models)?)
    }

    pub fn baseline_config(&self) -> Option<BaselineConfig> {
        self.baseline.as_ref().filter(|b| b.gaussian).map(|b| BaselineConfig {
            iterations: b.iterations,
            burnin: b.burnin,
            thin: 1,
            seed: self.seed,
            scale: b.scale,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
seed = 7

[data]
path = "ames.csv"
subsample = 1000

[prior]
kind = "car"
alpha = 25.0
gamma = 0.9
centering = "gaussian"
rho = [0.3]

[proposal]
kind = "vertex"
tau = 40.0

[run]
k = [10]
iterations = 2000
burnin = 500
thin = 5

[baseline]
iterations = 3000
"#;

    #[test]
    fn round_trip() {
        let cfg = Config::parse(EXAMPLE).unwrap();
        let echo = cfg.to_toml().unwrap();
        let again = Config::parse(&echo).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(echo, again.to_toml().unwrap());
        assert_eq!(cfg.run.chains, 1);
        assert_eq!(cfg.marginals.kind, MarginalsKind::Empirical);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = EXAMPLE.replace("thin = 5", "thin = 5\nthinning = 2");
        assert!(Config::parse(&bad).is_err());
    }

    #[test]
    fn problems_are_listed_together() {
        let bad = EXAMPLE.replace("alpha = 25.0", "alpha = -1.0").replace("tau = 40.0", "u = 0");
        let msg = format!("{:#}", Config::parse(&bad).unwrap_err());
        assert!(msg.contains("prior.alpha"), "{msg}");
        assert!(msg.contains("proposal.u"), "{msg}");
        assert!(msg.contains("proposal.tau"), "{msg}");
    }

    #[test]
    fn alpha_has_no_default() {
        let bad = EXAMPLE.replace("alpha = 25.0\n", "");
        assert!(Config::parse(&bad).is_err());
    }

    #[test]
    fn degree_expansion() {
        let cfg = Config::parse(EXAMPLE).unwrap();
        assert_eq!(cfg.degree(3).unwrap().as_slice(), &[10, 10, 10]);
        assert_eq!(cfg.prior_spec(2).unwrap().distance, DistanceKind::Car { gamma: 0.9 });
    }
}

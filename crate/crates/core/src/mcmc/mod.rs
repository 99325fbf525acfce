//! Metropolis-within-Gibbs sampler: copula block, centering correlation
//! block and marginal parameter block, in that order per sweep.

mod baseline;
mod chain_file;
mod hit_and_run;

pub use baseline::{fit_gaussian_copula, BaselineConfig, BaselineFit};
pub use chain_file::{read_chain, Chain, ChainHeader, ChainRecord, ChainWriter, CHAIN_FORMAT_VERSION};
pub use hit_and_run::{perturbation, propose_r, step_bound, HitAndRunDraw};

use crate::bernstein::{KernelBasis, UnitPoints, LOG_SPACE_THRESHOLD};
use crate::centering::{CenteringCopula, CorrelationMatrix, ProjectionOptions};
use crate::data::Dataset;
use crate::diagnostics::{Waic, WaicAccumulator};
use crate::error::{Error, Result};
use crate::marginals::{basis_loglik, MarginalSet, Twalk, TwalkConfig, TwalkTarget};
use crate::prior::{diff_vector, Prior, PriorSpec};
use crate::proposals::{propose, Proposal, ProposalKind};
use crate::yett::{Degree, YettCopula};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Cached likelihood terms are rebuilt from scratch this often (in sweeps).
const REFRESH_EVERY: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub degree: Degree,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// RNG stream, so chains sharing a seed stay independent.
    pub stream: u64,
    pub proposal: ProposalKind,
    pub prior: PriorSpec,
    /// Scale of the hit-and-run step for `R`.
    pub r_hr: f64,
    /// Sample `R` when the centering copula is Gaussian; otherwise it stays
    /// fixed at its initial value.
    pub update_r: bool,
    /// Copula updates per sweep.
    pub g_subsweeps: usize,
    pub twalk: TwalkConfig,
    pub projection: ProjectionOptions,
}

impl RunConfig {
    pub fn new(degree: Degree, proposal: ProposalKind, prior: PriorSpec) -> Self {
        RunConfig {
            degree,
            iterations: 1000,
            burnin: 0,
            thin: 1,
            seed: 0,
            stream: 0,
            proposal,
            prior,
            r_hr: 0.5,
            update_r: true,
            g_subsweeps: 1,
            twalk: TwalkConfig::default(),
            projection: ProjectionOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be at least 1".into()));
        }
        if self.iterations > 0 && self.burnin >= self.iterations {
            return Err(Error::InvalidParameter(format!(
                "burnin ({}) must be below iterations ({})",
                self.burnin, self.iterations
            )));
        }
        if self.g_subsweeps == 0 {
            return Err(Error::InvalidParameter("g_subsweeps must be at least 1".into()));
        }
        if !(self.r_hr > 0.0 && self.r_hr.is_finite()) {
            return Err(Error::InvalidParameter(format!("r_hr must be positive, got {}", self.r_hr)));
        }
        if let Some(r) = self.prior.centering.correlation() {
            if r.dims() != self.degree.dims() {
                return Err(Error::InvalidParameter("centering correlation does not match the dimension".into()));
            }
        }
        self.proposal.validate()?;
        self.twalk.validate()?;
        self.prior.validate()
    }

    /// Number of states `run` will save.
    pub fn saved_count(&self) -> usize {
        if self.iterations <= self.burnin {
            0
        } else {
            (self.iterations - self.burnin).div_ceil(self.thin)
        }
    }
}

/// What the likelihood sees: pseudo-observations, and optionally the raw
/// data and marginal models behind them.
#[derive(Debug, Clone)]
pub struct Observations {
    points: UnitPoints,
    data: Option<Dataset>,
    marginals: Option<MarginalSet>,
    clamped: usize,
}

impl Observations {
    /// No data: the chain samples the prior.
    pub fn none(dims: usize) -> Self {
        Observations { points: UnitPoints::empty(dims), data: None, marginals: None, clamped: 0 }
    }

    /// Observations already on the copula scale (known marginals).
    pub fn copula(points: UnitPoints) -> Self {
        Observations { points, data: None, marginals: None, clamped: 0 }
    }

    pub fn data(data: Dataset, marginals: MarginalSet) -> Result<Self> {
        let u = marginals.pseudo_observations(&data)?;
        if u.clamped > 0 {
            log::warn!("{} CDF values clamped away from 0 or 1", u.clamped);
        }
        Ok(Observations { points: u.points, data: Some(data), marginals: Some(marginals), clamped: u.clamped })
    }

    pub fn points(&self) -> &UnitPoints {
        &self.points
    }

    pub fn dataset(&self) -> Option<&Dataset> {
        self.data.as_ref()
    }

    pub fn marginals(&self) -> Option<&MarginalSet> {
        self.marginals.as_ref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn sampled_marginals(&self) -> bool {
        self.marginals.as_ref().is_some_and(|m| !m.is_frozen())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BlockStats {
    pub attempted: u64,
    pub accepted: u64,
}

impl BlockStats {
    pub fn rate(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempted as f64
        }
    }

    fn record(&mut self, accepted: bool) {
        self.attempted += 1;
        self.accepted += u64::from(accepted);
    }
}

/// A snapshot of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub g: YettCopula,
    pub r: Option<CorrelationMatrix>,
    pub theta: Option<Vec<f64>>,
    /// Copula log-likelihood of the pseudo-observations.
    pub copula_loglik: f64,
    /// `sum log f_j(x_ij)` over parametric margins.
    pub marginal_loglik: f64,
    /// `D(G, G0)` against the current projected centering copula.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub iterations: usize,
    pub saved: usize,
    pub g: BlockStats,
    pub r: Option<BlockStats>,
    pub marginals: Option<BlockStats>,
    pub runtime_secs: f64,
    pub waic: Option<Waic>,
    /// Pointwise log-likelihood moments behind `waic`, for pooling chains.
    pub waic_state: Option<WaicAccumulator>,
    pub clamped_cdf_values: usize,
}

/// A scored copula candidate, ready to be accepted.
#[derive(Debug, Clone)]
pub struct GCandidate {
    pub proposal: Proposal,
    pub copula_loglik: f64,
    pub distance: f64,
    /// `log r` of the Metropolis-Hastings test.
    pub log_ratio: f64,
    dens: Vec<f64>,
    ln_dens: Vec<f64>,
}

struct MarginalTarget<'a> {
    set: &'a MarginalSet,
    data: &'a Dataset,
    g: &'a YettCopula,
}

impl TwalkTarget for MarginalTarget<'_> {
    fn energy(&mut self, theta: &[f64]) -> f64 {
        self.set.energy(self.data, self.g, theta).unwrap_or(f64::INFINITY)
    }

    fn in_support(&self, theta: &[f64]) -> bool {
        self.set.in_support(theta)
    }
}

pub struct Sampler {
    config: RunConfig,
    prior: Prior,
    obs: Observations,
    basis: KernelBasis,
    dens: Vec<f64>,
    ln_dens: Vec<f64>,
    copula_loglik: f64,
    marginal_loglik: f64,
    v: Vec<f64>,
    distance: f64,
    g: YettCopula,
    twalk: Option<Twalk>,
    twalk_stale: bool,
    rng: ChaCha8Rng,
    stats: [BlockStats; 3],
    sweeps: usize,
    scratch: Vec<f64>,
}

impl Sampler {
    /// Starts at the projected centering copula.
    pub fn new(config: RunConfig, obs: Observations) -> Result<Self> {
        config.validate()?;
        let prior = Prior::with_options(config.prior.clone(), &config.degree, config.projection)?;
        let g = prior.center().clone();
        Self::with_initial(config, obs, prior, g)
    }

    /// Starts at `g`.
    pub fn with_start(config: RunConfig, obs: Observations, g: YettCopula) -> Result<Self> {
        config.validate()?;
        let prior = Prior::with_options(config.prior.clone(), &config.degree, config.projection)?;
        Self::with_initial(config, obs, prior, g)
    }

    fn with_initial(config: RunConfig, obs: Observations, prior: Prior, g: YettCopula) -> Result<Self> {
        if g.degree() != &config.degree {
            return Err(Error::DegreeMismatch {
                left: g.degree().as_slice().to_vec(),
                right: config.degree.as_slice().to_vec(),
            });
        }
        g.validate(1e-9)?;
        if obs.points.dims() != config.degree.dims() {
            return Err(Error::InvalidData(format!(
                "observations have {} columns, degree has {} axes",
                obs.points.dims(),
                config.degree.dims()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(config.stream);
        let basis = KernelBasis::new(&config.degree, &obs.points)?;
        let v = diff_vector(&g, prior.center());
        let distance = prior.distance_fn().quadratic(&v);
        let mut s = Sampler {
            basis,
            dens: Vec::new(),
            ln_dens: Vec::new(),
            copula_loglik: 0.0,
            marginal_loglik: 0.0,
            v,
            distance,
            g,
            twalk: None,
            twalk_stale: false,
            rng,
            stats: [BlockStats::default(); 3],
            sweeps: 0,
            scratch: Vec::new(),
            config,
            prior,
            obs,
        };
        s.refresh_likelihood();
        if let (Some(m), Some(data)) = (&s.obs.marginals, &s.obs.data) {
            s.marginal_loglik = m.ln_marginal_density(data, &m.theta());
        }
        if s.obs.sampled_marginals() {
            s.twalk = Some(s.start_twalk()?);
        }
        if !s.copula_loglik.is_finite() && !s.obs.is_empty() {
            return Err(Error::InvalidData("the starting copula gives zero likelihood".into()));
        }
        Ok(s)
    }

    fn start_twalk(&self) -> Result<Twalk> {
        let set = self.obs.marginals.as_ref().expect("sampled marginals");
        let data = self.obs.data.as_ref().expect("sampled marginals come with data");
        let x = set.theta();
        let mut target = MarginalTarget { set, data, g: &self.g };
        // second point: a small deterministic offset, shrunk until valid
        let mut scale = 0.05;
        for _ in 0..60 {
            let xp: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(i, v)| v + scale * v.abs().max(0.1) * if i % 2 == 0 { 1.0 } else { -1.0 })
                .collect();
            if set.in_support(&xp) && target.energy(&xp).is_finite() {
                return Twalk::new(self.config.twalk, x, xp, &mut target);
            }
            scale /= 2.0;
        }
        Err(Error::InvalidParameter("could not find a second t-walk starting point".into()))
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn observations(&self) -> &Observations {
        &self.obs
    }

    pub fn g(&self) -> &YettCopula {
        &self.g
    }

    pub fn stats(&self) -> (BlockStats, BlockStats, BlockStats) {
        (self.stats[0], self.stats[1], self.stats[2])
    }

    pub fn r_active(&self) -> bool {
        self.config.update_r && self.prior.spec().centering.correlation().is_some()
    }

    pub fn state(&self) -> ChainState {
        ChainState {
            g: self.g.clone(),
            r: self.prior.spec().centering.correlation().cloned(),
            theta: self.obs.marginals.as_ref().filter(|m| !m.is_frozen()).map(MarginalSet::theta),
            copula_loglik: self.copula_loglik,
            marginal_loglik: self.marginal_loglik,
            distance: self.distance,
        }
    }

    pub fn log_prior(&self) -> f64 {
        -0.5 * self.prior.alpha() * self.distance
    }

    /// Recomputes every density from the current basis.
    fn refresh_likelihood(&mut self) {
        let n = self.basis.len();
        self.dens.resize(n, 0.0);
        self.ln_dens.resize(n, 0.0);
        let mut total = 0.0;
        for i in 0..n {
            let d = self.basis.density(i, self.g.masses(), &mut self.scratch);
            self.dens[i] = d;
            self.ln_dens[i] = if d >= LOG_SPACE_THRESHOLD {
                d.ln()
            } else {
                self.basis.ln_density(i, self.g.masses(), &mut self.scratch)
            };
            total += self.ln_dens[i];
        }
        self.copula_loglik = total;
        self.v = diff_vector(&self.g, self.prior.center());
        self.distance = self.prior.distance_fn().quadratic(&self.v);
    }

    /// Copula log-likelihood and distance of `g` computed from scratch.
    pub fn full_terms(&self, g: &YettCopula) -> Result<(f64, f64)> {
        Ok((basis_loglik(&self.basis, g), self.prior.distance(g)?))
    }

    /// Largest gap between the cached terms and a full recomputation.
    pub fn cache_error(&self) -> Result<f64> {
        let (ll, dist) = self.full_terms(&self.g)?;
        let mut err = (ll - self.copula_loglik).abs().max((dist - self.distance).abs());
        if let (Some(m), Some(data)) = (&self.obs.marginals, &self.obs.data) {
            err = err.max((m.ln_marginal_density(data, &m.theta()) - self.marginal_loglik).abs());
        }
        Ok(err)
    }

    /// Scores a candidate against the cached state.
    pub fn score(&mut self, proposal: Proposal) -> GCandidate {
        let cand = &proposal.candidate;
        let changes = self.g.diff_cells(cand);
        let n = self.basis.len();
        let d = self.config.degree.dims();
        let sparse = changes.len() * d < self.config.degree.cell_count();
        let mut dens = vec![0.0; n];
        let mut ln_dens = vec![0.0; n];
        let mut ll = 0.0;
        for i in 0..n {
            let di = if sparse {
                self.dens[i] + self.basis.delta(i, &changes)
            } else {
                self.basis.density(i, cand.masses(), &mut self.scratch)
            };
            dens[i] = di;
            ln_dens[i] = if di >= LOG_SPACE_THRESHOLD {
                di.ln()
            } else {
                self.basis.ln_density(i, cand.masses(), &mut self.scratch)
            };
            ll += ln_dens[i];
        }
        let distance = if sparse {
            (self.distance + self.prior.distance_fn().delta(&self.v, &changes)).max(0.0)
        } else {
            self.prior.distance(cand).expect("same degree")
        };
        let log_ratio =
            ll - self.copula_loglik - 0.5 * self.prior.alpha() * (distance - self.distance) + proposal.log_hastings;
        GCandidate { proposal, copula_loglik: ll, distance, log_ratio, dens, ln_dens }
    }

    /// Moves to a scored candidate.
    pub fn commit(&mut self, cand: GCandidate) {
        for (c, dv) in self.g.diff_cells(&cand.proposal.candidate) {
            self.v[c] += dv;
        }
        self.g = cand.proposal.candidate;
        self.dens = cand.dens;
        self.ln_dens = cand.ln_dens;
        self.copula_loglik = cand.copula_loglik;
        self.distance = cand.distance;
        self.twalk_stale = true;
    }

    pub fn update_g(&mut self) -> bool {
        let accepted = match propose(&self.config.proposal, &self.g, &mut self.rng) {
            None => false,
            Some(p) => {
                let cand = self.score(p);
                let ok = accept(cand.log_ratio, &mut self.rng);
                if ok {
                    self.commit(cand);
                }
                ok
            }
        };
        self.stats[0].record(accepted);
        accepted
    }

    pub fn update_r(&mut self) -> Result<bool> {
        let r = self.current_r()?;
        let draw = HitAndRunDraw::sample(&r, self.config.r_hr, &mut self.rng);
        self.update_r_with(&draw)
    }

    fn current_r(&self) -> Result<CorrelationMatrix> {
        self.prior
            .spec()
            .centering
            .correlation()
            .cloned()
            .ok_or_else(|| Error::InvalidParameter("R updates need a Gaussian centering copula".into()))
    }

    /// Hit-and-run step with the given draw. The acceptance uniform still
    /// comes from the sampler's RNG.
    pub fn update_r_with(&mut self, draw: &HitAndRunDraw) -> Result<bool> {
        let r = self.current_r()?;
        let accepted = match propose_r(&r, draw, self.config.r_hr)? {
            None => {
                log::warn!("hit-and-run candidate is not positive definite; rejected");
                false
            }
            Some((_, lq)) if lq == f64::NEG_INFINITY => false,
            Some((cand, lq)) => {
                let centering = CenteringCopula::Gaussian(cand);
                let center = self.prior.project(&centering)?;
                let dist = self.prior.distance_fn().between(&self.g, &center)?;
                let log_r = 0.5 * self.prior.alpha() * (self.distance - dist) + lq;
                let ok = draw.delta == 0.0 || accept(log_r, &mut self.rng);
                if ok {
                    self.v = diff_vector(&self.g, &center);
                    self.distance = dist;
                    self.prior.set_centering(centering, center);
                }
                ok
            }
        };
        self.stats[1].record(accepted);
        Ok(accepted)
    }

    /// One t-walk step on the marginal parameters. Returns `Ok(false)` when
    /// the marginals are frozen.
    pub fn update_marginals(&mut self) -> Result<bool> {
        let (Some(tw), Some(set), Some(data)) = (self.twalk.as_mut(), self.obs.marginals.as_ref(), self.obs.data.as_ref())
        else {
            return Ok(false);
        };
        let mut target = MarginalTarget { set, data, g: &self.g };
        if self.twalk_stale {
            tw.refresh(&mut target);
            self.twalk_stale = false;
        }
        let step = tw.step(&mut target, &mut self.rng);
        self.stats[2].record(step.accepted);
        if step.accepted && step.moved == 0 {
            let theta = tw.x().to_vec();
            self.set_theta(&theta)?;
        }
        Ok(step.accepted)
    }

    fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        let set = self.obs.marginals.as_mut().expect("sampled marginals");
        let data = self.obs.data.as_ref().expect("sampled marginals come with data");
        set.set_theta(theta)?;
        let u = set.pseudo_observations(data)?;
        self.obs.clamped = self.obs.clamped.max(u.clamped);
        self.marginal_loglik = set.ln_marginal_density(data, theta);
        self.obs.points = u.points;
        self.basis = KernelBasis::new(&self.config.degree, &self.obs.points)?;
        self.refresh_likelihood();
        Ok(())
    }

    pub fn sweep(&mut self) -> Result<()> {
        for _ in 0..self.config.g_subsweeps {
            self.update_g();
        }
        if self.r_active() {
            self.update_r()?;
        }
        if self.twalk.is_some() {
            self.update_marginals()?;
        }
        self.sweeps += 1;
        if self.sweeps % REFRESH_EVERY == 0 {
            self.refresh_likelihood();
        }
        Ok(())
    }

    pub fn record(&self, iteration: usize) -> ChainRecord {
        let state = self.state();
        ChainRecord {
            iteration,
            masses: state.g.masses().to_vec(),
            r_upper: state.r.map(|r| r.upper_triangle()).unwrap_or_default(),
            theta: state.theta.unwrap_or_default(),
            loglik: self.copula_loglik + self.marginal_loglik,
            log_prior: self.log_prior(),
        }
    }

    pub fn chain_header(&self, config_echo: impl Into<String>) -> ChainHeader {
        let d = self.config.degree.dims();
        ChainHeader {
            degree: self.config.degree.clone(),
            r_len: if self.prior.spec().centering.correlation().is_some() { d * (d - 1) / 2 } else { 0 },
            theta_len: self.obs.marginals.as_ref().filter(|m| !m.is_frozen()).map_or(0, MarginalSet::param_count),
            config: config_echo.into(),
        }
    }

    /// Per-observation log-likelihood of the current state, copula plus
    /// parametric margins.
    pub fn pointwise_loglik(&self) -> Vec<f64> {
        let mut out = self.ln_dens.clone();
        if let (Some(set), Some(data)) = (&self.obs.marginals, &self.obs.data) {
            if !set.is_frozen() {
                let theta = set.theta();
                for (o, row) in out.iter_mut().zip(data.rows()) {
                    *o += set.ln_marginal_density_row(row, &theta);
                }
            }
        }
        out
    }

    /// Runs the configured sweeps, handing every saved state to `sink`.
    pub fn run<F>(&mut self, mut sink: F) -> Result<RunSummary>
    where
        F: FnMut(&ChainRecord) -> Result<()>,
    {
        let start = Instant::now();
        let mut waic = (!self.obs.is_empty()).then(|| WaicAccumulator::new(self.obs.len()));
        let mut saved = 0;
        let (burnin, thin) = (self.config.burnin, self.config.thin);
        for it in 0..self.config.iterations {
            self.sweep()?;
            if it >= burnin && (it - burnin) % thin == 0 {
                sink(&self.record(it))?;
                if let Some(acc) = waic.as_mut() {
                    acc.push(&self.pointwise_loglik())?;
                }
                saved += 1;
            }
        }
        let waic_state = waic.filter(|acc| acc.samples() > 0);
        let waic = waic_state.as_ref().map(WaicAccumulator::finish).transpose()?;
        Ok(RunSummary {
            iterations: self.config.iterations,
            saved,
            g: self.stats[0],
            r: self.r_active().then_some(self.stats[1]),
            marginals: self.twalk.is_some().then_some(self.stats[2]),
            runtime_secs: start.elapsed().as_secs_f64(),
            waic,
            waic_state,
            clamped_cdf_values: self.obs.clamped,
        })
    }
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    if log_ratio.is_nan() {
        return false;
    }
    rng.random::<f64>().ln() < log_ratio
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::SimulationModel;
    use crate::marginals::{Family, MarginalModel, ParametricMarginal};
    use crate::prior::DistanceKind;
    use crate::proposals::HastingsForm;

    fn spec(centering: CenteringCopula, alpha: f64) -> PriorSpec {
        PriorSpec { distance: DistanceKind::Icar, alpha, centering }
    }

    fn m2_points(n: usize) -> UnitPoints {
        let data = SimulationModel::M2.perfect_sample(n).unwrap();
        let mix = SimulationModel::M2.mixture();
        UnitPoints::from_rows(&mix.pseudo_observations(&data)).unwrap()
    }

    #[test]
    fn zero_iterations() {
        let cfg = RunConfig {
            iterations: 0,
            ..RunConfig::new(Degree::uniform(2, 3).unwrap(), ProposalKind::Ire { u: 1 }, spec(CenteringCopula::Independence, 1.0))
        };
        let mut s = Sampler::new(cfg, Observations::none(2)).unwrap();
        let mut n = 0;
        let sum = s.run(|_| {
            n += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(n, 0);
        assert_eq!(sum.saved, 0);
        assert!(sum.waic.is_none());
    }

    #[test]
    fn incremental_ratio_matches_full_recomputation() {
        for proposal in [
            ProposalKind::Ire { u: 3 },
            ProposalKind::Gre { u: 1 },
            ProposalKind::VertexLine { tau: 50.0, hastings: HastingsForm::Exact },
        ] {
            let cfg = RunConfig::new(Degree::uniform(2, 5).unwrap(), proposal, spec(CenteringCopula::Independence, 5.0));
            let mut s = Sampler::new(cfg, Observations::copula(m2_points(100))).unwrap();
            for _ in 0..100 {
                let Some(p) = propose(&proposal, &s.g, &mut s.rng) else { continue };
                let (ll0, d0) = s.full_terms(s.g()).unwrap();
                let (ll1, d1) = s.full_terms(&p.candidate).unwrap();
                let lh = p.log_hastings;
                let cand = s.score(p);
                let full = ll1 - ll0 - 2.5 * (d1 - d0) + lh;
                assert!((cand.log_ratio - full).abs() < 1e-9, "{} vs {full}", cand.log_ratio);
                if accept(cand.log_ratio, &mut s.rng) {
                    s.commit(cand);
                }
            }
        }
    }

    #[test]
    fn rejected_step_leaves_state_unchanged() {
        let cfg = RunConfig::new(Degree::uniform(2, 4).unwrap(), ProposalKind::Ire { u: 2 }, spec(CenteringCopula::Independence, 1e6));
        let mut s = Sampler::new(cfg, Observations::copula(m2_points(50))).unwrap();
        for _ in 0..200 {
            let before = s.state();
            if !s.update_g() {
                assert_eq!(before, s.state());
            }
        }
    }

    #[test]
    fn cache_coherence_after_runs() {
        let r = CorrelationMatrix::bivariate(0.2).unwrap();
        let mut cfg = RunConfig::new(Degree::uniform(2, 4).unwrap(), ProposalKind::Ire { u: 2 }, spec(CenteringCopula::Gaussian(r), 20.0));
        cfg.iterations = 1000;
        let mut s = Sampler::new(cfg, Observations::copula(m2_points(80))).unwrap();
        s.run(|rec| {
            assert!(rec.copula(&Degree::uniform(2, 4).unwrap()).unwrap().is_valid());
            Ok(())
        })
        .unwrap();
        assert!(s.cache_error().unwrap() < 1e-9);
        assert!(s.stats().1.attempted == 1000);
    }

    #[test]
    fn zero_step_r_update_always_accepted() {
        let r = CorrelationMatrix::bivariate(0.4).unwrap();
        let cfg = RunConfig::new(Degree::uniform(2, 4).unwrap(), ProposalKind::Ire { u: 1 }, spec(CenteringCopula::Gaussian(r.clone()), 10.0));
        let mut s = Sampler::new(cfg, Observations::none(2)).unwrap();
        for _ in 0..20 {
            s.update_g();
            assert!(s.update_r_with(&HitAndRunDraw { delta: 0.0, z: vec![1.3] }).unwrap());
        }
        assert_eq!(s.state().r.unwrap(), r);
    }

    #[test]
    fn bivariate_r_acceptance_matches_direct_distances() {
        let r = CorrelationMatrix::bivariate(0.3).unwrap();
        let alpha = 40.0;
        let cfg = RunConfig::new(Degree::uniform(2, 5).unwrap(), ProposalKind::Ire { u: 1 }, spec(CenteringCopula::Gaussian(r.clone()), alpha));
        let mut s = Sampler::new(cfg, Observations::none(2)).unwrap();
        for _ in 0..50 {
            s.update_g();
        }
        let draw = HitAndRunDraw { delta: 0.15, z: vec![0.8] };
        let (cand, lq) = propose_r(&r, &draw, 0.5).unwrap().unwrap();
        let d_old = s.prior().distance(s.g()).unwrap();
        let new_center = CenteringCopula::Gaussian(cand.clone()).project_to_yett(s.g().degree()).unwrap();
        let d_new = crate::prior::Distance::new(DistanceKind::Icar, s.g().degree()).between(s.g(), &new_center).unwrap();
        let expected = 0.5 * alpha * (d_old - d_new) + lq;
        // replay the acceptance uniform
        let mut probe = s.rng.clone();
        let u: f64 = probe.random();
        let accepted = s.update_r_with(&draw).unwrap();
        assert_eq!(accepted, expected >= 0.0 || u.ln() < expected);
        if accepted {
            assert!((s.state().distance - d_new).abs() < 1e-12);
            assert_eq!(s.state().r.unwrap(), cand);
        }
    }

    #[test]
    fn same_seed_same_chain() {
        let run = || {
            let mut cfg = RunConfig::new(Degree::uniform(2, 3).unwrap(), ProposalKind::Gre { u: 1 }, spec(CenteringCopula::Independence, 3.0));
            cfg.iterations = 300;
            cfg.thin = 7;
            cfg.seed = 11;
            let mut s = Sampler::new(cfg, Observations::copula(m2_points(30))).unwrap();
            let mut recs = Vec::new();
            s.run(|r| {
                recs.push(r.clone());
                Ok(())
            })
            .unwrap();
            recs
        };
        let a = run();
        assert_eq!(a.len(), 43);
        assert_eq!(a, run());
    }

    #[test]
    fn parametric_marginals_are_sampled() {
        let data = SimulationModel::M2.perfect_sample(200).unwrap();
        let gauss = |mu, s| MarginalModel::Parametric(ParametricMarginal::new(Family::Gaussian, vec![mu, s]).unwrap());
        let set = MarginalSet::new(vec![gauss(0.5, 1.5), gauss(-0.5, 0.7)]).unwrap();
        let mut cfg = RunConfig::new(Degree::uniform(2, 4).unwrap(), ProposalKind::Ire { u: 2 }, spec(CenteringCopula::Independence, 5.0));
        cfg.iterations = 3000;
        cfg.burnin = 1000;
        let mut s = Sampler::new(cfg, Observations::data(data, set).unwrap()).unwrap();
        let mut thetas = Vec::new();
        let summary = s
            .run(|r| {
                thetas.push(r.theta.clone());
                Ok(())
            })
            .unwrap();
        assert!(summary.marginals.unwrap().accepted > 0);
        assert!(summary.waic.is_some());
        let m = thetas.iter().map(|t| t[0]).sum::<f64>() / thetas.len() as f64;
        let sd = thetas.iter().map(|t| t[1]).sum::<f64>() / thetas.len() as f64;
        assert!(m.abs() < 0.2, "{m}");
        assert!((sd - 1.0).abs() < 0.2, "{sd}");
        assert!(s.cache_error().unwrap() < 1e-9);
    }
}

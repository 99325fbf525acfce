//! Gaussian copula fitted by hit-and-run Metropolis on `R` under a flat
//! prior. Used as a reference model when comparing WAIC.

use super::hit_and_run::{propose_r, HitAndRunDraw};
use crate::bernstein::UnitPoints;
use crate::centering::{CorrelationMatrix, GaussianCopulaDensity};
use crate::diagnostics::{Waic, WaicAccumulator};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub scale: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { iterations: 5000, burnin: 1000, thin: 1, seed: 0, scale: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineFit {
    pub posterior_mean: CorrelationMatrix,
    pub acceptance: f64,
    pub waic: Waic,
}

fn pointwise(r: &CorrelationMatrix, points: &UnitPoints) -> Result<Vec<f64>> {
    let dens = GaussianCopulaDensity::new(r)?;
    Ok(points.rows().map(|u| dens.ln_density(u)).collect())
}

pub fn fit_gaussian_copula(points: &UnitPoints, config: &BaselineConfig) -> Result<BaselineFit> {
    if points.is_empty() {
        return Err(Error::InvalidData("no observations".into()));
    }
    if config.thin == 0 || config.burnin >= config.iterations {
        return Err(Error::InvalidParameter("need thin >= 1 and burnin < iterations".into()));
    }
    let d = points.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut r = CorrelationMatrix::identity(d);
    let mut ll_i = pointwise(&r, points)?;
    let mut ll: f64 = ll_i.iter().sum();
    let mut acc = WaicAccumulator::new(points.len());
    let mut sum = vec![0.0; d * (d - 1) / 2];
    let (mut accepted, mut saved) = (0usize, 0usize);
    for it in 0..config.iterations {
        let draw = HitAndRunDraw::sample(&r, config.scale, &mut rng);
        if let Some((cand, lq)) = propose_r(&r, &draw, config.scale)? {
            if lq.is_finite() {
                let cand_i = pointwise(&cand, points)?;
                let cand_ll: f64 = cand_i.iter().sum();
                let log_r = cand_ll - ll + lq;
                if log_r >= 0.0 || rng.random::<f64>().ln() < log_r {
                    r = cand;
                    ll_i = cand_i;
                    ll = cand_ll;
                    accepted += 1;
                }
            }
        }
        if it >= config.burnin && (it - config.burnin) % config.thin == 0 {
            acc.push(&ll_i)?;
            for (s, v) in sum.iter_mut().zip(r.upper_triangle()) {
                *s += v;
            }
            saved += 1;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / saved as f64).collect();
    Ok(BaselineFit {
        posterior_mean: CorrelationMatrix::from_upper_triangle(d, &mean)?,
        acceptance: accepted as f64 / config.iterations as f64,
        waic: acc.finish()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::SimulationModel;

    #[test]
    fn recovers_correlation() {
        let data = SimulationModel::M2.perfect_sample(900).unwrap();
        let u = SimulationModel::M2.mixture().pseudo_observations(&data);
        let points = UnitPoints::from_rows(&u).unwrap();
        let fit = fit_gaussian_copula(&points, &BaselineConfig::default()).unwrap();
        assert!((fit.posterior_mean.get(0, 1) - 0.5).abs() < 0.05, "{}", fit.posterior_mean.get(0, 1));
        assert!(fit.acceptance > 0.05);
        assert!(fit.waic.waic.is_finite());
    }
}

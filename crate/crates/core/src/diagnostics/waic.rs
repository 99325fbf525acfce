use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waic {
    /// `-2 (lppd - p_waic)`; lower is better.
    pub waic: f64,
    /// `sum_i log mean_s exp(ll_si)`.
    pub lppd: f64,
    /// `sum_i var_s(ll_si)`.
    pub p_waic: f64,
    pub samples: usize,
    /// Only one draw was seen, so the variance term is zero.
    pub single_sample: bool,
}

/// WAIC from a draws-by-observations matrix given as rows.
pub fn waic(loglik: &[Vec<f64>]) -> Result<Waic> {
    let n = loglik.first().map_or(0, Vec::len);
    let mut acc = WaicAccumulator::new(n);
    for row in loglik {
        acc.push(row)?;
    }
    acc.finish()
}

/// Streaming version of [`waic`]: one pass, O(n) memory. Keeps a running
/// log-sum-exp and Welford moments per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct WaicAccumulator {
    samples: usize,
    max: Vec<f64>,
    scaled_sum: Vec<f64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl WaicAccumulator {
    pub fn new(observations: usize) -> Self {
        WaicAccumulator {
            samples: 0,
            max: vec![f64::NEG_INFINITY; observations],
            scaled_sum: vec![0.0; observations],
            mean: vec![0.0; observations],
            m2: vec![0.0; observations],
        }
    }

    pub fn observations(&self) -> usize {
        self.max.len()
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.max.len() {
            return Err(Error::InvalidData(format!(
                "log-likelihood row has {} entries, expected {}",
                row.len(),
                self.max.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite pointwise log-likelihood".into()));
        }
        self.samples += 1;
        let s = self.samples as f64;
        for (i, &l) in row.iter().enumerate() {
            if l > self.max[i] {
                self.scaled_sum[i] = self.scaled_sum[i] * (self.max[i] - l).exp() + 1.0;
                self.max[i] = l;
            } else {
                self.scaled_sum[i] += (l - self.max[i]).exp();
            }
            let delta = l - self.mean[i];
            self.mean[i] += delta / s;
            self.m2[i] += delta * (l - self.mean[i]);
        }
        Ok(())
    }

    /// Folds in the draws of another accumulator over the same observations,
    /// as if they had been pushed here.
    pub fn merge(&mut self, other: &WaicAccumulator) -> Result<()> {
        if other.max.len() != self.max.len() {
            return Err(Error::InvalidData("accumulators cover different observations".into()));
        }
        if other.samples == 0 {
            return Ok(());
        }
        if self.samples == 0 {
            *self = other.clone();
            return Ok(());
        }
        let (na, nb) = (self.samples as f64, other.samples as f64);
        let n = na + nb;
        for i in 0..self.max.len() {
            let m = self.max[i].max(other.max[i]);
            self.scaled_sum[i] =
                self.scaled_sum[i] * (self.max[i] - m).exp() + other.scaled_sum[i] * (other.max[i] - m).exp();
            self.max[i] = m;
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.samples += other.samples;
        Ok(())
    }

    /// Uses the sample variance (denominator `S - 1`).
    pub fn finish(&self) -> Result<Waic> {
        if self.samples == 0 || self.max.is_empty() {
            return Err(Error::InvalidData("WAIC needs at least one draw and one observation".into()));
        }
        let s = self.samples as f64;
        let lppd: f64 = self.max.iter().zip(&self.scaled_sum).map(|(m, t)| m + (t / s).ln()).sum();
        let p_waic = if self.samples > 1 { self.m2.iter().sum::<f64>() / (s - 1.0) } else { 0.0 };
        Ok(Waic { waic: -2.0 * (lppd - p_waic), lppd, p_waic, samples: self.samples, single_sample: self.samples == 1 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_entries() {
        let w = waic(&[vec![-1.5], vec![-1.5], vec![-1.5]]).unwrap();
        assert!((w.waic - 3.0).abs() < 1e-15);
        assert_eq!(w.p_waic, 0.0);
        let single = waic(&[vec![-0.5, -2.0]]).unwrap();
        assert!(single.single_sample);
        assert_eq!(single.waic, 5.0);
    }

    #[test]
    fn two_draw_hand_case() {
        // observation 1: ll = (-1, -2); observation 2: ll = (-0.5, -0.5)
        let w = waic(&[vec![-1.0, -0.5], vec![-2.0, -0.5]]).unwrap();
        let lppd = ((-1f64).exp() + (-2f64).exp()).ln() - 2f64.ln() - 0.5;
        let p = 0.5; // sample variance of (-1, -2)
        assert!((w.lppd - lppd).abs() < 1e-14);
        assert!((w.p_waic - p).abs() < 1e-14);
        assert!((w.waic - (-2.0 * (lppd - p))).abs() < 1e-13);
    }

    #[test]
    fn uniform_shift_is_affine() {
        let rows: Vec<Vec<f64>> = (0..20).map(|s| (0..7).map(|i| -((s * 3 + i) % 5) as f64 * 0.3 - 1.0).collect()).collect();
        let c = 0.7;
        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + c).collect()).collect();
        let a = waic(&rows).unwrap();
        let b = waic(&shifted).unwrap();
        assert!((b.waic - (a.waic - 2.0 * 7.0 * c)).abs() < 1e-10);
    }

    #[test]
    fn stable_for_large_magnitudes() {
        let w = waic(&[vec![-1000.0], vec![-1001.0]]).unwrap();
        assert!(w.waic.is_finite());
        let lppd = -1000.0 + ((1.0 + (-1f64).exp()) / 2.0).ln();
        assert!((w.lppd - lppd).abs() < 1e-10);
    }

    #[test]
    fn merge_matches_single_pass() {
        let rows: Vec<Vec<f64>> = (0..9).map(|s| vec![-(s as f64).sin() - 1.0, -0.3 * s as f64]).collect();
        let whole = waic(&rows).unwrap();
        let mut a = WaicAccumulator::new(2);
        let mut b = WaicAccumulator::new(2);
        for (s, r) in rows.iter().enumerate() {
            if s < 4 { a.push(r).unwrap() } else { b.push(r).unwrap() }
        }
        a.merge(&b).unwrap();
        let merged = a.finish().unwrap();
        assert_eq!(merged.samples, 9);
        assert!((merged.waic - whole.waic).abs() < 1e-12);
        assert!((merged.p_waic - whole.p_waic).abs() < 1e-12);
    }
}

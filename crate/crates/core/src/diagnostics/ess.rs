use crate::error::{Error, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Effective sample size of one scalar chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ess {
    pub value: f64,
    /// Set when the chain has zero variance; `value` is then the length.
    pub degenerate: bool,
}

/// Biased autocorrelations `rho_0..rho_{n-1}` via a zero-padded FFT.
pub fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(m, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for c in &mut buf {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let c0 = buf[0].re;
    if c0 <= 0.0 {
        return vec![1.0; n];
    }
    buf[..n].iter().map(|c| c.re / c0).collect()
}

/// `N / (1 + 2 sum rho_t)` with the sum truncated by the initial monotone
/// sequence rule: pair sums `rho_2m + rho_2m+1` are accumulated while
/// positive and forced to be non-increasing. Capped at `N`.
pub fn ess(x: &[f64]) -> Result<Ess> {
    let n = x.len();
    if n < 10 {
        return Err(Error::InvalidData(format!("ESS needs at least 10 values, got {n}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("chain contains non-finite values".into()));
    }
    if x.iter().all(|v| *v == x[0]) {
        return Ok(Ess { value: n as f64, degenerate: true });
    }
    let rho = autocorrelation(x);
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = (rho[2 * m] + rho[2 * m + 1]).min(prev);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        prev = pair;
        m += 1;
    }
    let value = (n as f64 / tau.max(1e-300)).min(n as f64);
    Ok(Ess { value, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn autocorrelation_matches_direct_sum() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let rho = autocorrelation(&x);
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        for lag in [0, 1, 5, 17, 49] {
            let c: f64 = (0..n - lag).map(|i| (x[i] - mean) * (x[i + lag] - mean)).sum();
            assert!((rho[lag] - c / c0).abs() < 1e-12);
        }
    }

    #[test]
    fn white_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let e = ess(&x).unwrap();
        assert!(e.value > 9000.0 && e.value <= 11_000.0, "{}", e.value);
    }

    #[test]
    fn ar1_matches_analytic_value() {
        let phi: f64 = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = Vec::with_capacity(100_000);
        let mut v = 0.0;
        for _ in 0..100_000 {
            let e: f64 = StandardNormal.sample(&mut rng);
            v = phi * v + (1.0 - phi * phi).sqrt() * e;
            x.push(v);
        }
        let target = 1e5 * (1.0 - phi) / (1.0 + phi);
        let e = ess(&x).unwrap().value;
        assert!((e / target - 1.0).abs() < 0.15, "{e} vs {target}");
    }

    #[test]
    fn constant_chain_is_flagged() {
        let e = ess(&[2.5; 40]).unwrap();
        assert_eq!(e.value, 40.0);
        assert!(e.degenerate);
        assert!(ess(&[1.0; 5]).is_err());
    }
}

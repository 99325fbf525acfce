//! The t-walk: a self-adjusting sampler that moves one of two coupled
//! points using the other as a guide.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Tuning constants. The defaults are the sampler's published ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwalkConfig {
    /// Walk scale.
    pub aw: f64,
    /// Traverse scale.
    pub at: f64,
    /// Expected number of coordinates moved per step.
    pub n1phi: f64,
    /// Probabilities of traverse, walk, blow and hop.
    pub move_weights: [f64; 4],
}

impl Default for TwalkConfig {
    fn default() -> Self {
        TwalkConfig { aw: 1.5, at: 6.0, n1phi: 4.0, move_weights: [0.4918, 0.4918, 0.0082, 0.0082] }
    }
}

impl TwalkConfig {
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.move_weights.iter().sum();
        if !(self.aw > 0.0 && self.at > 1.0 && self.n1phi > 0.0)
            || self.move_weights.iter().any(|w| !(*w >= 0.0))
            || (total - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidParameter(format!("bad t-walk settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwalkMove {
    Traverse,
    Walk,
    Blow,
    Hop,
}

/// Outcome of one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwalkStep {
    pub kind: TwalkMove,
    /// 0 when `x` moved, 1 when `x'` moved.
    pub moved: usize,
    pub accepted: bool,
}

/// Energy `-log` target (up to a constant) and support indicator.
pub trait TwalkTarget {
    fn energy(&mut self, x: &[f64]) -> f64;
    fn in_support(&self, x: &[f64]) -> bool;
}

impl<E: FnMut(&[f64]) -> f64, S: Fn(&[f64]) -> bool> TwalkTarget for (E, S) {
    fn energy(&mut self, x: &[f64]) -> f64 {
        (self.0)(x)
    }

    fn in_support(&self, x: &[f64]) -> bool {
        (self.1)(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Twalk {
    config: TwalkConfig,
    points: [Vec<f64>; 2],
    energies: [f64; 2],
}

impl Twalk {
    /// Both starting points must lie in the support and differ in every
    /// coordinate.
    pub fn new<T: TwalkTarget + ?Sized>(config: TwalkConfig, x: Vec<f64>, xp: Vec<f64>, target: &mut T) -> Result<Self> {
        config.validate()?;
        if x.is_empty() || x.len() != xp.len() {
            return Err(Error::InvalidParameter("t-walk points must have the same nonzero length".into()));
        }
        if x.iter().zip(&xp).any(|(a, b)| a == b) {
            return Err(Error::InvalidParameter("t-walk starting points must differ in every coordinate".into()));
        }
        if !target.in_support(&x) || !target.in_support(&xp) {
            return Err(Error::InvalidParameter("t-walk starting point outside support".into()));
        }
        let energies = [target.energy(&x), target.energy(&xp)];
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter("t-walk starting point has infinite energy".into()));
        }
        Ok(Twalk { config, points: [x, xp], energies })
    }

    pub fn config(&self) -> &TwalkConfig {
        &self.config
    }

    pub fn x(&self) -> &[f64] {
        &self.points[0]
    }

    pub fn xp(&self) -> &[f64] {
        &self.points[1]
    }

    pub fn energies(&self) -> [f64; 2] {
        self.energies
    }

    /// Recomputes both cached energies; needed whenever the target changes.
    pub fn refresh<T: TwalkTarget + ?Sized>(&mut self, target: &mut T) {
        self.energies = [target.energy(&self.points[0]), target.energy(&self.points[1])];
    }

    pub fn step<T: TwalkTarget + ?Sized, R: Rng + ?Sized>(&mut self, target: &mut T, rng: &mut R) -> TwalkStep {
        let n = self.points[0].len();
        let c = self.config;
        let u: f64 = rng.random();
        let w = c.move_weights;
        let kind = if u < w[0] {
            TwalkMove::Traverse
        } else if u < w[0] + w[1] {
            TwalkMove::Walk
        } else if u < w[0] + w[1] + w[2] {
            TwalkMove::Blow
        } else {
            TwalkMove::Hop
        };
        let moved = usize::from(rng.random::<f64>() >= 0.5);
        let a = &self.points[moved];
        let b = &self.points[1 - moved];
        let pphi = c.n1phi.min(n as f64) / n as f64;
        let phi: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < pphi).collect();
        let nphi = phi.iter().filter(|p| **p).count();
        let rejected = TwalkStep { kind, moved, accepted: false };
        if nphi == 0 {
            return rejected;
        }

        let mut y = a.clone();
        let mut log_extra = 0.0;
        match kind {
            TwalkMove::Walk => {
                for i in (0..n).filter(|&i| phi[i]) {
                    let v: f64 = rng.random();
                    let h = c.aw / (1.0 + c.aw) * (c.aw * v * v + 2.0 * v - 1.0);
                    y[i] = a[i] + (a[i] - b[i]) * h;
                }
            }
            TwalkMove::Traverse => {
                let beta = traverse_beta(c.at, rng);
                for i in (0..n).filter(|&i| phi[i]) {
                    y[i] = b[i] + beta * (b[i] - a[i]);
                }
                log_extra = (nphi as f64 - 2.0) * beta.ln();
            }
            TwalkMove::Blow => {
                let sigma = spread(a, b, &phi);
                for i in (0..n).filter(|&i| phi[i]) {
                    let z: f64 = StandardNormal.sample(rng);
                    y[i] = b[i] + sigma * z;
                }
                let sigma_back = spread(&y, b, &phi);
                log_extra = gauss_energy(&y, b, sigma, &phi) - gauss_energy(a, b, sigma_back, &phi);
            }
            TwalkMove::Hop => {
                let sigma = spread(a, b, &phi) / 3.0;
                for i in (0..n).filter(|&i| phi[i]) {
                    let z: f64 = StandardNormal.sample(rng);
                    y[i] = a[i] + sigma * z;
                }
                let sigma_back = spread(&y, b, &phi) / 3.0;
                log_extra = gauss_energy(&y, a, sigma, &phi) - gauss_energy(a, &y, sigma_back, &phi);
            }
        }

        if !target.in_support(&y) || y.iter().zip(b).any(|(p, q)| p == q) {
            return rejected;
        }
        let uy = target.energy(&y);
        if !uy.is_finite() {
            return rejected;
        }
        let log_a = self.energies[moved] - uy + log_extra;
        if log_a >= 0.0 || rng.random::<f64>().ln() < log_a {
            self.points[moved] = y;
            self.energies[moved] = uy;
            return TwalkStep { kind, moved, accepted: true };
        }
        rejected
    }
}

/// Draws the traverse scale from the density proportional to `beta^at`
/// below one and `beta^(-at)` above.
fn traverse_beta<R: Rng + ?Sized>(at: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    if u < (at - 1.0) / (2.0 * at) {
        (v.ln() / (at + 1.0)).exp()
    } else {
        (v.ln() / (1.0 - at)).exp()
    }
}

fn spread(a: &[f64], b: &[f64], phi: &[bool]) -> f64 {
    a.iter().zip(b).zip(phi).filter(|(_, p)| **p).map(|((x, y), _)| (x - y).abs()).fold(0.0, f64::max)
}

/// `-log` of the isotropic normal density of `h` around `center` on the
/// selected coordinates, without the `2 pi` constant.
fn gauss_energy(h: &[f64], center: &[f64], sigma: f64, phi: &[bool]) -> f64 {
    let nphi = phi.iter().filter(|p| **p).count() as f64;
    let sq: f64 = h.iter().zip(center).zip(phi).filter(|(_, p)| **p).map(|((x, c), _)| (x - c).powi(2)).sum();
    nphi * sigma.ln() + 0.5 * sq / (sigma * sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_target() -> (impl FnMut(&[f64]) -> f64, impl Fn(&[f64]) -> bool) {
        (|x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>(), |_: &[f64]| true)
    }

    fn moments(samples: &[f64]) -> (f64, f64) {
        let n = samples.len() as f64;
        let m = samples.iter().sum::<f64>() / n;
        (m, samples.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n)
    }

    #[test]
    fn standard_normal_moments() {
        let mut target = gaussian_target();
        let mut tw = Twalk::new(TwalkConfig::default(), vec![0.3], vec![-1.0], &mut target).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut xs = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            tw.step(&mut target, &mut rng);
            xs.push(tw.x()[0]);
        }
        let (m, v) = moments(&xs);
        assert!(m.abs() < 0.05, "mean {m}");
        assert!(v > 0.9 && v < 1.1, "variance {v}");
    }

    #[test]
    fn correlated_normal_in_six_dimensions() {
        // coordinates scaled by 1..6; exercises partial coordinate moves
        let mut target = (
            |x: &[f64]| 0.5 * x.iter().enumerate().map(|(i, v)| (v / (i + 1) as f64).powi(2)).sum::<f64>(),
            |_: &[f64]| true,
        );
        let mut tw = Twalk::new(TwalkConfig::default(), vec![0.1; 6], vec![-0.2; 6], &mut target).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut last = Vec::new();
        for _ in 0..300_000 {
            tw.step(&mut target, &mut rng);
            last.push(tw.x()[5]);
        }
        let (m, v) = moments(&last);
        assert!(m.abs() < 0.6, "mean {m}");
        assert!((v / 36.0 - 1.0).abs() < 0.15, "variance {v}");
    }

    #[test]
    fn outside_support_always_rejected() {
        let mut target = (|x: &[f64]| 0.5 * x[0] * x[0], |x: &[f64]| x[0] > 10.0);
        let mut tw = Twalk::new(TwalkConfig::default(), vec![11.0], vec![12.0], &mut target).unwrap();
        let mut block = (|x: &[f64]| 0.5 * x[0] * x[0], |_: &[f64]| false);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert!(!tw.step(&mut block, &mut rng).accepted);
        }
        assert_eq!(tw.x(), &[11.0]);
        assert_eq!(tw.xp(), &[12.0]);
    }

    #[test]
    fn deterministic_replay() {
        let run = |seed| {
            let mut target = gaussian_target();
            let mut tw = Twalk::new(TwalkConfig::default(), vec![0.3, 1.0], vec![-1.0, 2.0], &mut target).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..500 {
                tw.step(&mut target, &mut rng);
            }
            (tw.x().to_vec(), tw.xp().to_vec())
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn identical_start_rejected() {
        let mut target = gaussian_target();
        assert!(Twalk::new(TwalkConfig::default(), vec![1.0, 2.0], vec![1.0, 3.0], &mut target).is_err());
    }
}

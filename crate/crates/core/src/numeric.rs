//! Small numerical kernels shared across the crate: standard normal
//! functions, Gauss-Legendre rules, the bivariate normal CDF, a shifted
//! Halton point set and truncated-normal sampling.

use rand::Rng;
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{PI, SQRT_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x / SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn std_normal_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Inverse of the standard normal CDF. Returns `±inf` at 0 and 1.
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    // One Halley step: the series inverse is only good to about 1e-10.
    let e = std_normal_cdf(x) - p;
    let step = e / std_normal_pdf(x);
    x - step / (1.0 + 0.5 * x * step)
}

pub fn ln_choose(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| v * half).collect(),
    )
}

/// `P(X <= h, Y <= k)` for a standard bivariate normal with correlation `rho`.
///
/// Genz's BVND scheme (Drezner-Wesolowsky with Gauss-Legendre in the
/// arcsine variable, and the asymptotic expansion for |rho| >= 0.925).
/// Absolute error is around 1e-15.
pub fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> f64 {
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return std_normal_cdf(k);
    }
    if k == f64::INFINITY {
        return std_normal_cdf(h);
    }
    upper_orthant(-h, -k, rho).clamp(0.0, 1.0)
}

/// `P(X > dh, Y > dk)` with correlation `r`.
fn upper_orthant(dh: f64, dk: f64, r: f64) -> f64 {
    const TWO_PI: f64 = 2.0 * PI;
    let points = if r.abs() < 0.3 {
        6
    } else if r.abs() < 0.75 {
        12
    } else {
        20
    };
    let (x_all, w_all) = gauss_legendre(points);
    // Genz tabulates the negative half of the symmetric rule.
    let half = points / 2;
    let xs = &x_all[..half];
    let ws = &w_all[..half];

    let h = dh;
    let mut k = dk;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for (x, w) in xs.iter().zip(ws) {
            let sn = (asr * (x + 1.0) / 2.0).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            let sn = (asr * (-x + 1.0) / 2.0).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
        }
        bvn = bvn * asr / (2.0 * TWO_PI) + std_normal_cdf(-h) * std_normal_cdf(-k);
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let as_ = (1.0 - r) * (1.0 + r);
            let mut a = as_.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            bvn = a
                * (-(bs / as_ + hk) / 2.0).exp()
                * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
            if hk > -160.0 {
                let b = bs.sqrt();
                bvn -= (-hk / 2.0).exp()
                    * TWO_PI.sqrt()
                    * std_normal_cdf(-b / a)
                    * b
                    * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for (x, w) in xs.iter().zip(ws) {
                let xs1 = (a * (x + 1.0)).powi(2);
                let rs = (1.0 - xs1).sqrt();
                bvn += a
                    * w
                    * ((-bs / (2.0 * xs1) - hk / (1.0 + rs)).exp() / rs
                        - (-(bs / xs1 + hk) / 2.0).exp() * (1.0 + c * xs1 * (1.0 + d * xs1)));
                let xs2 = as_ * (-x + 1.0).powi(2) / 4.0;
                let rs = (1.0 - xs2).sqrt();
                bvn += a
                    * w
                    * (-(bs / xs2 + hk) / 2.0).exp()
                    * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                        - (1.0 + c * xs2 * (1.0 + d * xs2)));
            }
            bvn = -bvn / TWO_PI;
        }
        if r > 0.0 {
            bvn += std_normal_cdf(-h.max(k));
        } else {
            bvn = -bvn + (std_normal_cdf(-h) - std_normal_cdf(-k)).max(0.0);
        }
    }
    bvn
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

/// Randomly shifted (Cranley-Patterson) Halton points in `[0,1)^d`.
///
/// Returned row-major, `count * dims` values. Every coordinate is strictly
/// inside the open unit interval.
pub fn shifted_halton<R: Rng + ?Sized>(count: usize, dims: usize, rng: &mut R) -> Vec<f64> {
    assert!(dims <= PRIMES.len(), "Halton supports at most {} dims", PRIMES.len());
    let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
    let mut out = Vec::with_capacity(count * dims);
    for i in 0..count {
        for (j, s) in shift.iter().enumerate() {
            let mut v = radical_inverse(i as u64 + 1, PRIMES[j]) + s;
            if v >= 1.0 {
                v -= 1.0;
            }
            out.push(v.clamp(1e-16, 1.0 - 1e-16));
        }
    }
    out
}

/// Normalizing mass of `N(mean, sd)` on `(lo, hi)`.
pub fn truncated_normal_mass(mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    // Work in the tail that keeps precision.
    if a > 0.0 {
        std_normal_cdf(-a) - std_normal_cdf(-b)
    } else {
        std_normal_cdf(b) - std_normal_cdf(a)
    }
}

pub fn truncated_normal_ln_pdf(x: f64, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    if x < lo || x > hi {
        return f64::NEG_INFINITY;
    }
    std_normal_ln_pdf((x - mean) / sd) - sd.ln() - truncated_normal_mass(mean, sd, lo, hi).ln()
}

/// Inverse-CDF draw from `N(mean, sd)` truncated to `(lo, hi)`.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> f64 {
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let u: f64 = rng.random();
    let x = if a > 0.0 {
        // upper tail: sample through survival functions
        let sa = std_normal_cdf(-a);
        let sb = std_normal_cdf(-b);
        -std_normal_quantile(sa - u * (sa - sb))
    } else {
        let fa = std_normal_cdf(a);
        let fb = std_normal_cdf(b);
        std_normal_quantile(fa + u * (fb - fa))
    };
    (mean + sd * x).clamp(lo, hi)
}

/// Numerically stable `ln(sum(exp(values)))`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(7);
        // degree 13 is exact with 7 nodes
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((integral - 2.0 / 13.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(512);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-12);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn normal_quantile_inverts_cdf() {
        for &p in &[1e-10, 0.001, 0.2, 0.5, 0.77, 0.999] {
            let x = std_normal_quantile(p);
            assert!((std_normal_cdf(x) - p).abs() < 1e-14 * p.max(1e-3));
        }
        assert_eq!(std_normal_quantile(0.5), 0.0);
    }

    #[test]
    fn orthant_probability_matches_closed_form() {
        for &rho in &[-0.95, -0.8, -0.5, -0.1, 0.0, 0.2, 0.5, 0.8, 0.93, 0.99] {
            let expected = 0.25 + f64::asin(rho) / (2.0 * PI);
            let got = bivariate_normal_cdf(0.0, 0.0, rho);
            assert!((got - expected).abs() < 1e-13, "rho={rho}: {got} vs {expected}");
        }
    }

    // Independent oracle: P(X<=h, Y<=k) = int_{-inf}^{h} phi(x) Phi((k - rho x)/sqrt(1-rho^2)) dx
    fn bvn_by_quadrature(h: f64, k: f64, rho: f64) -> f64 {
        let lo = -12.0;
        let (x, w) = gauss_legendre_interval(400, lo, h);
        let s = (1.0 - rho * rho).sqrt();
        x.iter()
            .zip(&w)
            .map(|(x, w)| w * std_normal_pdf(*x) * std_normal_cdf((k - rho * x) / s))
            .sum()
    }

    #[test]
    fn bivariate_cdf_matches_quadrature_oracle() {
        let cases = [
            (0.3, -0.7, 0.5),
            (-1.2, 0.4, -0.6),
            (1.5, 1.5, 0.95),
            (-0.5, 2.0, -0.97),
            (0.0, 0.8, 0.1),
            (-2.0, -2.0, 0.85),
            (2.5, -0.1, 0.4),
        ];
        for (h, k, rho) in cases {
            let got = bivariate_normal_cdf(h, k, rho);
            let want = bvn_by_quadrature(h, k, rho);
            assert!((got - want).abs() < 1e-11, "({h},{k},{rho}): {got} vs {want}");
        }
    }

    #[test]
    fn bivariate_cdf_handles_infinite_limits() {
        assert_eq!(bivariate_normal_cdf(f64::NEG_INFINITY, 0.3, 0.5), 0.0);
        assert!((bivariate_normal_cdf(f64::INFINITY, 0.3, 0.5) - std_normal_cdf(0.3)).abs() < 1e-16);
        assert!((bivariate_normal_cdf(-0.4, f64::INFINITY, 0.5) - std_normal_cdf(-0.4)).abs() < 1e-16);
    }

    #[test]
    fn truncated_normal_stays_in_bounds_and_has_right_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = sample_truncated_normal(1.0, 0.4, 0.0, 1.2, &mut rng);
            assert!((0.0..=1.2).contains(&x));
            sum += x;
        }
        // mean of the truncated law by quadrature
        let (xs, ws) = gauss_legendre_interval(200, 0.0, 1.2);
        let z = truncated_normal_mass(1.0, 0.4, 0.0, 1.2);
        let mean: f64 = xs
            .iter()
            .zip(&ws)
            .map(|(x, w)| w * x * std_normal_pdf((x - 1.0) / 0.4) / 0.4 / z)
            .sum();
        assert!((sum / n as f64 - mean).abs() < 3e-3);
        let total: f64 = xs
            .iter()
            .zip(&ws)
            .map(|(x, w)| w * truncated_normal_ln_pdf(*x, 1.0, 0.4, 0.0, 1.2).exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn halton_points_are_in_open_cube() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = shifted_halton(1000, 4, &mut rng);
        assert_eq!(pts.len(), 4000);
        assert!(pts.iter().all(|v| *v > 0.0 && *v < 1.0));
        let mean: f64 = pts.iter().step_by(4).sum::<f64>() / 1000.0;
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = [-1000.0, -1000.0];
        assert!((log_sum_exp(&v) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}

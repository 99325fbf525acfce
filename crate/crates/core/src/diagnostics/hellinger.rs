use crate::numeric::{gauss_legendre_interval, shifted_halton};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Integration rule over the unit cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quadrature {
    /// Tensor Gauss-Legendre with `nodes` points per axis.
    GaussLegendre { nodes: usize },
    /// Equal-weight shifted Halton points.
    Qmc { points: usize, seed: u64 },
}

impl Quadrature {
    /// 64 nodes per axis up to two dimensions, 2^16 QMC points above.
    pub fn default_for(dims: usize) -> Self {
        if dims <= 2 {
            Quadrature::GaussLegendre { nodes: 64 }
        } else {
            Quadrature::Qmc { points: 1 << 16, seed: 0x4e11 }
        }
    }

    /// Nodes (row-major, `dims` per node) and weights.
    pub fn rule(&self, dims: usize) -> (Vec<f64>, Vec<f64>) {
        match *self {
            Quadrature::GaussLegendre { nodes } => {
                let (x, w) = gauss_legendre_interval(nodes, 0.0, 1.0);
                let total = nodes.pow(dims as u32);
                let mut points = Vec::with_capacity(total * dims);
                let mut weights = Vec::with_capacity(total);
                for mut flat in 0..total {
                    let mut wt = 1.0;
                    let start = points.len();
                    points.resize(start + dims, 0.0);
                    for j in (0..dims).rev() {
                        let i = flat % nodes;
                        flat /= nodes;
                        points[start + j] = x[i];
                        wt *= w[i];
                    }
                    weights.push(wt);
                }
                (points, weights)
            }
            Quadrature::Qmc { points, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (shifted_halton(points, dims, &mut rng), vec![1.0 / points as f64; points])
            }
        }
    }
}

/// `sqrt(1 - integral sqrt(f g))` over the unit cube, clipped to `[0, 1]`.
pub fn hellinger<F, G>(f: F, g: G, dims: usize, quadrature: Quadrature) -> f64
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    let (points, weights) = quadrature.rule(dims);
    let bc: f64 = points
        .chunks_exact(dims)
        .zip(&weights)
        .map(|(z, w)| w * (f(z).max(0.0) * g(z).max(0.0)).sqrt())
        .sum();
    (1.0 - bc).clamp(0.0, 1.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::BernsteinCopula;
    use crate::centering::{CorrelationMatrix, GaussianCopulaDensity};
    use crate::yett::{Degree, RectangleExchange, YettCopula};
    use rand::Rng;

    fn gaussian_density(rho: f64) -> GaussianCopulaDensity {
        GaussianCopulaDensity::new(&CorrelationMatrix::bivariate(rho).unwrap()).unwrap()
    }

    #[test]
    fn identical_densities() {
        let d = Degree::uniform(2, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut g = YettCopula::independence(&d);
        for _ in 0..50 {
            let ex = RectangleExchange::random(&d, &mut rng).unwrap();
            let (lo, hi) = ex.bounds(&g);
            g = ex.apply(&g, lo + (hi - lo) * rng.random::<f64>()).unwrap();
        }
        let b = BernsteinCopula::new(&g);
        let h = hellinger(|z| b.density(z), |z| b.density(z), 2, Quadrature::default_for(2));
        assert!(h < 1e-7, "{h}");
    }

    #[test]
    fn independence_vs_gaussian() {
        // Bhattacharyya coefficient of N(0, R) and N(0, I):
        // det(R)^(1/4) / det((R + I) / 2)^(1/2)
        let rho: f64 = 0.5;
        let bc = (1.0 - rho * rho).powf(0.25) / (1.0 - rho * rho / 4.0).sqrt();
        let exact = (1.0 - bc).sqrt();
        let g = gaussian_density(rho);
        let h = hellinger(|_| 1.0, |z| g.density(z), 2, Quadrature::default_for(2));
        assert!((h - exact).abs() < 1e-4, "{h} vs {exact}");
        let reference = hellinger(|_| 1.0, |z| g.density(z), 2, Quadrature::GaussLegendre { nodes: 512 });
        assert!((h - reference).abs() < 1e-4, "{h} vs {reference}");
    }

    #[test]
    fn symmetric() {
        let f = gaussian_density(0.3);
        let g = gaussian_density(-0.6);
        let a = hellinger(|z| f.density(z), |z| g.density(z), 2, Quadrature::default_for(2));
        let b = hellinger(|z| g.density(z), |z| f.density(z), 2, Quadrature::default_for(2));
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn disjoint_supports() {
        let left = |z: &[f64]| if z[0] < 0.5 { 2.0 } else { 0.0 };
        let right = |z: &[f64]| if z[0] >= 0.5 { 2.0 } else { 0.0 };
        let h = hellinger(left, right, 2, Quadrature::default_for(2));
        assert!((h - 1.0).abs() < 1e-7);
    }

    #[test]
    fn qmc_rule_in_four_dimensions() {
        // independence vs itself, and total mass of the rule
        let (pts, w) = Quadrature::default_for(4).rule(4);
        assert_eq!(pts.len(), 4 * w.len());
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let r = CorrelationMatrix::from_rows(
            4,
            &[1.0, 0.4, 0.6, 0.7, 0.4, 1.0, 0.7, 0.3, 0.6, 0.7, 1.0, 0.2, 0.7, 0.3, 0.2, 1.0],
        )
        .unwrap();
        let g = GaussianCopulaDensity::new(&r).unwrap();
        let h = hellinger(|_| 1.0, |z| g.density(z), 4, Quadrature::default_for(4));
        // closed form through the Bhattacharyya coefficient of N(0, R), N(0, I)
        let det = r.matrix().determinant();
        let mid = (r.matrix() + nalgebra::DMatrix::<f64>::identity(4, 4)) / 2.0;
        let exact = (1.0 - det.powf(0.25) / mid.determinant().sqrt()).sqrt();
        assert!((h - exact).abs() < 5e-3, "{h} vs {exact}");
    }
}

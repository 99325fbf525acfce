//! Centering copulas and their projection onto yett cell masses.

use crate::error::{Error, Result};
use crate::numeric::{bivariate_normal_cdf, shifted_halton, std_normal_quantile};
use crate::yett::{rescale_marginals, Degree, YettCopula};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SYMMETRY_TOL: f64 = 1e-12;

/// Symmetric, unit-diagonal, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    r: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn new(r: DMatrix<f64>) -> Result<Self> {
        let d = r.nrows();
        if d < 2 || r.ncols() != d {
            return Err(Error::InvalidCorrelation(format!("shape {}x{}", d, r.ncols())));
        }
        for i in 0..d {
            if (r[(i, i)] - 1.0).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidCorrelation(format!("diagonal entry {i} is {}", r[(i, i)])));
            }
            for j in 0..i {
                if (r[(i, j)] - r[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidCorrelation(format!("not symmetric at ({i},{j})")));
                }
            }
        }
        let c = CorrelationMatrix { r };
        let xi = c.least_eigenvalue();
        if xi < 0.0 {
            return Err(Error::InvalidCorrelation(format!("least eigenvalue {xi} < 0")));
        }
        Ok(c)
    }

    pub fn identity(d: usize) -> Self {
        CorrelationMatrix { r: DMatrix::identity(d, d) }
    }

    pub fn bivariate(rho: f64) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]))
    }

    pub fn from_rows(d: usize, values: &[f64]) -> Result<Self> {
        if values.len() != d * d {
            return Err(Error::InvalidCorrelation(format!("need {} entries", d * d)));
        }
        Self::new(DMatrix::from_row_slice(d, d, values))
    }

    /// Builds the matrix from its strict upper triangle in row order.
    pub fn from_upper_triangle(d: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != d * (d - 1) / 2 {
            return Err(Error::InvalidCorrelation(format!(
                "need {} off-diagonal entries, got {}",
                d * (d - 1) / 2,
                upper.len()
            )));
        }
        let mut r = DMatrix::identity(d, d);
        let mut it = upper.iter();
        for i in 0..d {
            for j in i + 1..d {
                let v = *it.next().expect("length checked");
                r[(i, j)] = v;
                r[(j, i)] = v;
            }
        }
        Self::new(r)
    }

    pub fn upper_triangle(&self) -> Vec<f64> {
        let d = self.dims();
        (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).map(|ij| self.r[ij]).collect()
    }

    pub fn dims(&self) -> usize {
        self.r.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.r[(i, j)]
    }

    pub fn least_eigenvalue(&self) -> f64 {
        least_eigenvalue(&self.r)
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn least_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Density of the Gaussian copula with correlation `R`, with the inverse and
/// log-determinant computed once.
#[derive(Debug, Clone)]
pub struct GaussianCopulaDensity {
    precision_minus_identity: DMatrix<f64>,
    half_ln_det: f64,
}

impl GaussianCopulaDensity {
    pub fn new(r: &CorrelationMatrix) -> Result<Self> {
        let chol = r
            .matrix()
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidCorrelation("matrix is singular".into()))?;
        let half_ln_det = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let d = r.dims();
        let precision_minus_identity = chol.inverse() - DMatrix::identity(d, d);
        Ok(GaussianCopulaDensity { precision_minus_identity, half_ln_det })
    }

    pub fn ln_density(&self, u: &[f64]) -> f64 {
        let z = DVector::from_iterator(u.len(), u.iter().map(|&v| std_normal_quantile(v)));
        if z.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        -self.half_ln_det - 0.5 * (z.transpose() * &self.precision_minus_identity * &z)[(0, 0)]
    }

    pub fn density(&self, u: &[f64]) -> f64 {
        self.ln_density(u).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CenteringCopula {
    Independence,
    Gaussian(CorrelationMatrix),
}

impl CenteringCopula {
    pub fn correlation(&self) -> Option<&CorrelationMatrix> {
        match self {
            CenteringCopula::Independence => None,
            CenteringCopula::Gaussian(r) => Some(r),
        }
    }

    pub fn density(&self, u: &[f64]) -> f64 {
        match self {
            CenteringCopula::Independence => 1.0,
            CenteringCopula::Gaussian(r) => GaussianCopulaDensity::new(r).map_or(f64::NAN, |g| g.density(u)),
        }
    }

    /// Cell probabilities on the regular grid, using default settings.
    pub fn project_to_yett(&self, degree: &Degree) -> Result<YettCopula> {
        Projector::new(degree, ProjectionOptions::default()).project(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    /// Number of quasi-Monte Carlo points for more than two dimensions.
    pub qmc_points: usize,
    pub seed: u64,
    pub max_repair_iterations: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions { qmc_points: 1 << 16, seed: 0x5eed, max_repair_iterations: 10_000 }
    }
}

/// Computes yett projections for a fixed degree, reusing the quadrature
/// points between calls.
#[derive(Debug, Clone)]
pub struct Projector {
    degree: Degree,
    options: ProjectionOptions,
    thresholds: Vec<Vec<f64>>,
    scores: Option<Vec<f64>>,
}

impl Projector {
    pub fn new(degree: &Degree, options: ProjectionOptions) -> Self {
        let thresholds = degree
            .as_slice()
            .iter()
            .map(|&k| (0..=k).map(|i| std_normal_quantile(i as f64 / k as f64)).collect())
            .collect();
        Projector { degree: degree.clone(), options, thresholds, scores: None }
    }

    pub fn degree(&self) -> &Degree {
        &self.degree
    }

    pub fn project(&mut self, g0: &CenteringCopula) -> Result<YettCopula> {
        let r = match g0 {
            CenteringCopula::Independence => return Ok(YettCopula::independence(&self.degree)),
            CenteringCopula::Gaussian(r) => r,
        };
        if r.dims() != self.degree.dims() {
            return Err(Error::DegreeMismatch {
                left: vec![r.dims()],
                right: vec![self.degree.dims()],
            });
        }
        let mut mass = if self.degree.dims() == 2 {
            self.bivariate_cells(r.get(0, 1))
        } else {
            self.qmc_cells(r)?
        };
        let converged = rescale_marginals(&self.degree, &mut mass, self.options.max_repair_iterations);
        if !converged {
            log::warn!("marginal repair did not reach 1e-12 within {} sweeps", self.options.max_repair_iterations);
        }
        YettCopula::from_masses_with_tol(self.degree.clone(), mass, 1e-9)
    }

    fn bivariate_cells(&self, rho: f64) -> Vec<f64> {
        let (h, g) = (&self.thresholds[0], &self.thresholds[1]);
        let (k1, k2) = (self.degree.k(0), self.degree.k(1));
        let mut cum = vec![0.0; (k1 + 1) * (k2 + 1)];
        for a in 0..=k1 {
            for b in 0..=k2 {
                cum[a * (k2 + 1) + b] = if a == k1 {
                    b as f64 / k2 as f64
                } else if b == k2 {
                    a as f64 / k1 as f64
                } else {
                    bivariate_normal_cdf(h[a], g[b], rho)
                };
            }
        }
        let at = |a: usize, b: usize| cum[a * (k2 + 1) + b];
        let mut mass = Vec::with_capacity(k1 * k2);
        for a in 0..k1 {
            for b in 0..k2 {
                let m = at(a + 1, b + 1) - at(a, b + 1) - at(a + 1, b) + at(a, b);
                mass.push(m.max(0.0));
            }
        }
        mass
    }

    fn qmc_cells(&mut self, r: &CorrelationMatrix) -> Result<Vec<f64>> {
        let d = self.degree.dims();
        let chol = r
            .matrix()
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidCorrelation("projection needs a positive definite matrix".into()))?;
        let l = chol.l();
        let n = self.options.qmc_points;
        let seed = self.options.seed;
        let scores = self.scores.get_or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            shifted_halton(n, d, &mut rng).into_iter().map(std_normal_quantile).collect()
        });
        let mut counts = vec![0u32; self.degree.cell_count()];
        let strides = self.degree.strides().to_vec();
        let lower: Vec<f64> = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| if j <= i { l[(i, j)] } else { 0.0 }).collect();
        // cell index on an axis = number of interior thresholds at or below y
        let interior: Vec<&[f64]> = (0..d).map(|j| &self.thresholds[j][1..self.degree.k(j)]).collect();
        for z in scores.chunks_exact(d) {
            let mut flat = 0;
            for i in 0..d {
                let row = &lower[i * d..i * d + i + 1];
                let y: f64 = row.iter().zip(z).map(|(a, b)| a * b).sum();
                let cell = interior[i].iter().filter(|&&b| b <= y).count();
                flat += cell * strides[i];
            }
            counts[flat] += 1;
        }
        Ok(counts.into_iter().map(|c| c as f64 / n as f64).collect())
    }
}

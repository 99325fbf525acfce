use crate::bernstein::{BernsteinCopula, UnitPoints};
use crate::error::{Error, Result};
use crate::yett::YettCopula;

/// Running mean of yett copulas. Bernstein densities are linear in the
/// weights, so the density of the mean copula is the pointwise mean of the
/// densities.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMean {
    sum: Option<YettCopula>,
    count: usize,
}

impl Default for PosteriorMean {
    fn default() -> Self {
        Self::new()
    }
}

impl PosteriorMean {
    pub fn new() -> Self {
        PosteriorMean { sum: None, count: 0 }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, g: &YettCopula) -> Result<()> {
        match &mut self.sum {
            None => self.sum = Some(g.clone()),
            Some(s) => {
                if s.degree() != g.degree() {
                    return Err(Error::DegreeMismatch {
                        left: s.degree().as_slice().to_vec(),
                        right: g.degree().as_slice().to_vec(),
                    });
                }
                for (a, b) in s.masses_mut().iter_mut().zip(g.masses()) {
                    *a += b;
                }
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn mean(&self) -> Result<YettCopula> {
        let s = self.sum.as_ref().ok_or_else(|| Error::InvalidData("empty chain".into()))?;
        let scale = 1.0 / self.count as f64;
        let mass = s.masses().iter().map(|v| v * scale).collect();
        YettCopula::from_masses_with_tol(s.degree().clone(), mass, 1e-9)
    }
}

pub fn posterior_mean_copula<'a, I>(chain: I) -> Result<YettCopula>
where
    I: IntoIterator<Item = &'a YettCopula>,
{
    let mut acc = PosteriorMean::new();
    for g in chain {
        acc.push(g)?;
    }
    acc.mean()
}

/// Posterior mean Bernstein density at each point.
pub fn posterior_mean_density<'a, I>(chain: I, points: &UnitPoints) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a YettCopula>,
{
    let mean = posterior_mean_copula(chain)?;
    let b = BernsteinCopula::new(&mean);
    Ok(points.rows().map(|z| b.density(z)).collect())
}

/// Midpoints of an `m x m` grid on the unit square, first coordinate slowest.
pub fn grid_points(m: usize) -> UnitPoints {
    let mut values = Vec::with_capacity(2 * m * m);
    for a in 0..m {
        for b in 0..m {
            values.push((a as f64 + 0.5) / m as f64);
            values.push((b as f64 + 0.5) / m as f64);
        }
    }
    UnitPoints::new(2, values).expect("midpoints lie inside the unit square")
}

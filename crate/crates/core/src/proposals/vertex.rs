use super::Proposal;
use crate::error::{Error, Result};
use crate::numeric::{sample_truncated_normal, truncated_normal_ln_pdf, truncated_normal_mass};
use crate::yett::{rescale_marginals, Degree, YettCopula, ZERO_SNAP};
use rand::seq::SliceRandom;
use rand::Rng;

/// Which Hastings correction the vertex-line kernel uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HastingsForm {
    /// Ratio of truncated-normal normalizers with a fixed line
    /// parameterization: `Z(1) / Z(eps*)`, with `Z(c)` the mass of
    /// `N(c, 1/sqrt(tau))` on `(0, eps_M)`.
    Printed,
    /// Ratio of the reverse and forward densities with respect to Lebesgue
    /// measure on the polytope. The reverse move is parameterized from the
    /// candidate, which rescales the line by `eps*`, and the radial change of
    /// variables around the vertex contributes `eps*^(m-2)` where `m` is the
    /// polytope dimension.
    #[default]
    Exact,
}

/// Draws a vertex of the polytope of yett copulas.
///
/// With equal sides the vertex puts `1/k` on the cells
/// `(i, s_2(i), ..., s_d(i))` for independent uniform permutations `s_j`,
/// which is uniform over vertices. For two axes with unequal sides the
/// northwest-corner rule is run on shuffled row and column orders, in exact
/// integer units of `1/lcm(k_1, k_2)`; this always yields a vertex but not a
/// uniform one. Unequal sides with more than two axes are not supported.
pub fn sample_vertex<R: Rng + ?Sized>(degree: &Degree, rng: &mut R) -> Result<YettCopula> {
    let d = degree.dims();
    let cells = degree.cell_count();
    let mut mass = vec![0.0; cells];
    if degree.is_equal_sided() {
        let k = degree.k(0);
        let perms: Vec<Vec<usize>> = (1..d)
            .map(|_| {
                let mut p: Vec<usize> = (0..k).collect();
                p.shuffle(rng);
                p
            })
            .collect();
        let mut idx = vec![0; d];
        for i in 0..k {
            idx[0] = i;
            for j in 1..d {
                idx[j] = perms[j - 1][i];
            }
            mass[degree.flat(&idx)] = 1.0 / k as f64;
        }
        return Ok(YettCopula::from_masses_unchecked(degree.clone(), mass));
    }
    if d != 2 {
        return Err(Error::Unsupported(
            "vertex sampling with unequal sides needs exactly two axes".into(),
        ));
    }
    let (k1, k2) = (degree.k(0), degree.k(1));
    let total = lcm(k1, k2);
    let mut rows: Vec<usize> = (0..k1).collect();
    let mut cols: Vec<usize> = (0..k2).collect();
    rows.shuffle(rng);
    cols.shuffle(rng);
    let mut row_left = vec![total / k1; k1];
    let mut col_left = vec![total / k2; k2];
    let (mut a, mut b) = (0, 0);
    while a < k1 && b < k2 {
        let (r, c) = (rows[a], cols[b]);
        let units = row_left[r].min(col_left[c]);
        mass[r * k2 + c] = units as f64 / total as f64;
        row_left[r] -= units;
        col_left[c] -= units;
        if row_left[r] == 0 {
            a += 1;
        }
        if col_left[c] == 0 {
            b += 1;
        }
    }
    Ok(YettCopula::from_masses_unchecked(degree.clone(), mass))
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    a / gcd(a, b) * b
}

/// The line `eps * G + (1 - eps) * E` through the state and a vertex.
#[derive(Debug, Clone)]
pub struct VertexLine<'a> {
    g: &'a YettCopula,
    vertex: YettCopula,
    eps_max: f64,
}

impl<'a> VertexLine<'a> {
    pub fn new(g: &'a YettCopula, vertex: YettCopula) -> Result<Self> {
        if g.degree() != vertex.degree() {
            return Err(Error::DegreeMismatch {
                left: g.degree().as_slice().to_vec(),
                right: vertex.degree().as_slice().to_vec(),
            });
        }
        // cells where the vertex exceeds G shrink as eps grows
        let eps_max = g
            .masses()
            .iter()
            .zip(vertex.masses())
            .filter(|(gc, ec)| ec > gc)
            .map(|(gc, ec)| ec / (ec - gc))
            .fold(f64::INFINITY, f64::min);
        Ok(VertexLine { g, vertex, eps_max })
    }

    pub fn vertex(&self) -> &YettCopula {
        &self.vertex
    }

    /// Largest `eps` that stays in the polytope; infinite when `G == E`.
    pub fn eps_max(&self) -> f64 {
        self.eps_max
    }

    pub fn point(&self, eps: f64) -> Result<YettCopula> {
        if !(0.0..=self.eps_max).contains(&eps) {
            return Err(Error::StepOutOfBounds { epsilon: eps, lo: 0.0, hi: self.eps_max });
        }
        if eps == 1.0 {
            return Ok(self.g.clone());
        }
        let mut mass: Vec<f64> = self
            .g
            .masses()
            .iter()
            .zip(self.vertex.masses())
            .map(|(gc, ec)| {
                let v = eps * gc + (1.0 - eps) * ec;
                if v.abs() < ZERO_SNAP { 0.0 } else { v.max(0.0) }
            })
            .collect();
        // Steps with eps > 1 amplify rounding error in the marginals, so
        // pull them back every time.
        rescale_marginals(self.g.degree(), &mut mass, 4);
        Ok(YettCopula::from_masses_unchecked(self.g.degree().clone(), mass))
    }

    /// `log q(G | G*) - log q(G* | G)` for a move to `eps_star`.
    pub fn log_hastings(&self, eps_star: f64, tau: f64, form: HastingsForm) -> f64 {
        let sd = 1.0 / tau.sqrt();
        let em = self.eps_max;
        match form {
            HastingsForm::Printed => {
                truncated_normal_mass(1.0, sd, 0.0, em).ln() - truncated_normal_mass(eps_star, sd, 0.0, em).ln()
            }
            HastingsForm::Exact => {
                let m = self.g.degree().polytope_dimension() as f64;
                truncated_normal_ln_pdf(1.0 / eps_star, 1.0, sd, 0.0, em / eps_star)
                    - truncated_normal_ln_pdf(eps_star, 1.0, sd, 0.0, em)
                    + (m - 2.0) * eps_star.ln()
            }
        }
    }
}

/// Vertex-line proposal: draw a vertex, then `eps*` from `N(1, 1/sqrt(tau))`
/// truncated to `(0, eps_M)`.
pub fn propose_vertex_line<R: Rng + ?Sized>(
    g: &YettCopula,
    tau: f64,
    form: HastingsForm,
    rng: &mut R,
) -> Result<Proposal> {
    let vertex = sample_vertex(g.degree(), rng)?;
    let line = VertexLine::new(g, vertex)?;
    if !line.eps_max().is_finite() {
        return Ok(Proposal { candidate: g.clone(), log_hastings: 0.0 });
    }
    let eps = sample_truncated_normal(1.0, 1.0 / tau.sqrt(), 0.0, line.eps_max(), rng);
    let eps = eps.max(f64::MIN_POSITIVE);
    Ok(Proposal { candidate: line.point(eps)?, log_hastings: line.log_hastings(eps, tau, form) })
}

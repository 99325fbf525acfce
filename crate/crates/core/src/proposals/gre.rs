use super::Proposal;
use crate::error::{Error, Result};
use crate::yett::{Degree, YettCopula, ZERO_SNAP};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeMap;

/// Attempts per step at drawing a pair of permuted diagonals that do not
/// cancel out.
pub const GRE_MAX_RETRIES: usize = 100;

/// One generalized rectangle exchange: the direction `Z1 - Z2` stored as
/// net per-cell coefficients, shared cells already cancelled.
#[derive(Debug, Clone, PartialEq)]
pub struct GreMove {
    coefficients: Vec<(usize, f64)>,
}

impl GreMove {
    /// Builds the move from the support cells of `Z1` and `Z2`, each holding
    /// mass `1/k_m`. Both supports must use every index at most once per axis
    /// and cover the same index set on each axis.
    pub fn from_cells(degree: &Degree, z1: &[Vec<usize>], z2: &[Vec<usize>]) -> Result<Self> {
        let km = *degree.as_slice().iter().min().expect("d >= 2");
        if z1.len() != km || z2.len() != km {
            return Err(Error::InvalidParameter(format!("need {km} support cells in each of Z1 and Z2")));
        }
        for j in 0..degree.dims() {
            let mut a: Vec<usize> = z1.iter().map(|c| c[j]).collect();
            let mut b: Vec<usize> = z2.iter().map(|c| c[j]).collect();
            a.sort_unstable();
            b.sort_unstable();
            let distinct = a.windows(2).all(|w| w[0] != w[1]);
            if !distinct || a != b || a.last().is_some_and(|&m| m >= degree.k(j)) {
                return Err(Error::InvalidParameter(format!(
                    "axis {} supports of Z1 and Z2 are not permutations of one index set",
                    j + 1
                )));
            }
        }
        let w = 1.0 / km as f64;
        let mut net: BTreeMap<usize, f64> = BTreeMap::new();
        for c in z1 {
            *net.entry(degree.flat(c)).or_default() += w;
        }
        for c in z2 {
            *net.entry(degree.flat(c)).or_default() -= w;
        }
        Ok(GreMove { coefficients: net.into_iter().filter(|(_, v)| *v != 0.0).collect() })
    }

    /// Random permutations of every axis give `Z1`; shuffling the occupied
    /// indices of each axis gives `Z2`. Consumes one shuffle per axis for
    /// each of the two steps.
    pub fn random<R: Rng + ?Sized>(degree: &Degree, rng: &mut R) -> Self {
        let d = degree.dims();
        let km = *degree.as_slice().iter().min().expect("d >= 2");
        let mut z1 = vec![vec![0; d]; km];
        let mut z2 = vec![vec![0; d]; km];
        for j in 0..d {
            let mut perm: Vec<usize> = (0..degree.k(j)).collect();
            perm.shuffle(rng);
            let support = &perm[..km];
            let mut image = support.to_vec();
            image.shuffle(rng);
            for i in 0..km {
                z1[i][j] = support[i];
                // rho maps support[t] to image[t]; z1 cell i sits at support[i]
                z2[i][j] = image[i];
            }
        }
        Self::from_cells(degree, &z1, &z2).expect("supports share index sets by construction")
    }

    pub fn coefficients(&self) -> &[(usize, f64)] {
        &self.coefficients
    }

    pub fn is_null(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Range of `eps` keeping `g + eps (Z1 - Z2)` nonnegative.
    pub fn bounds(&self, g: &YettCopula) -> (f64, f64) {
        let w = g.masses();
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for &(c, a) in &self.coefficients {
            if a > 0.0 {
                lo = lo.max(-w[c] / a);
            } else {
                hi = hi.min(w[c] / -a);
            }
        }
        (lo, hi)
    }

    pub fn apply(&self, g: &YettCopula, eps: f64) -> Result<YettCopula> {
        let (lo, hi) = self.bounds(g);
        if eps < lo || eps > hi {
            return Err(Error::StepOutOfBounds { epsilon: eps, lo, hi });
        }
        let mut out = g.clone();
        let w = out.masses_mut();
        for &(c, a) in &self.coefficients {
            let v = w[c] + eps * a;
            w[c] = if v.abs() < ZERO_SNAP { 0.0 } else { v.max(0.0) };
        }
        Ok(out)
    }
}

/// `u` generalized rectangle exchanges with uniform amounts. Returns `None`
/// when a step needs more than [`GRE_MAX_RETRIES`] draws to find a non-null
/// direction.
pub fn propose_gre<R: Rng + ?Sized>(g: &YettCopula, u: usize, rng: &mut R) -> Option<Proposal> {
    let mut candidate = g.clone();
    for _ in 0..u {
        let mv = (0..GRE_MAX_RETRIES)
            .map(|_| GreMove::random(g.degree(), rng))
            .find(|m| !m.is_null())?;
        let (lo, hi) = mv.bounds(&candidate);
        let eps = if hi > lo { lo + (hi - lo) * rng.random::<f64>() } else { 0.0 };
        candidate = mv.apply(&candidate, eps).expect("amount drawn inside bounds");
    }
    Some(Proposal { candidate, log_hastings: 0.0 })
}

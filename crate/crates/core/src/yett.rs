//! Yett-uniform copulas: piecewise-uniform copulas on the regular grid with
//! `k_j` cells along axis `j`, stored as a dense cell-mass tensor.

use crate::error::{Error, Result};
use rand::seq::index::sample;
use rand::Rng;
use std::fmt;
use std::str::FromStr;

/// Tolerance used when checking that masses sum to one and that every grid
/// marginal equals `1 / k_j`.
pub const VALIDATION_TOL: f64 = 1e-12;

/// Masses smaller than this in absolute value are snapped to zero after an
/// update.
pub const ZERO_SNAP: f64 = 1e-15;

/// Number of cells per axis, `k = (k_1, ..., k_d)` with `d >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Degree {
    k: Vec<usize>,
    strides: Vec<usize>,
}

impl Degree {
    pub fn new(k: Vec<usize>) -> Result<Self> {
        if k.len() < 2 {
            return Err(Error::InvalidDegree(format!(
                "need at least two axes, got {}",
                k.len()
            )));
        }
        if let Some(j) = k.iter().position(|&v| v == 0) {
            return Err(Error::InvalidDegree(format!("k_{} must be positive", j + 1)));
        }
        let mut strides = vec![1; k.len()];
        for j in (0..k.len() - 1).rev() {
            strides[j] = strides[j + 1] * k[j + 1];
        }
        Ok(Degree { k, strides })
    }

    /// Same number of cells on each of `d` axes.
    pub fn uniform(d: usize, k: usize) -> Result<Self> {
        Self::new(vec![k; d])
    }

    pub fn dims(&self) -> usize {
        self.k.len()
    }

    pub fn k(&self, axis: usize) -> usize {
        self.k[axis]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.k
    }

    pub fn cell_count(&self) -> usize {
        self.k.iter().product()
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn is_equal_sided(&self) -> bool {
        self.k.iter().all(|&v| v == self.k[0])
    }

    /// Affine dimension of the polytope of yett copulas of this degree.
    pub fn polytope_dimension(&self) -> usize {
        let d = self.dims();
        self.cell_count() + d - 1 - self.k.iter().sum::<usize>()
    }

    /// Flat row-major offset of a zero-based multi-index.
    pub fn flat(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims());
        index.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Zero-based multi-index of a flat offset.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims()];
        for (j, s) in self.strides.iter().enumerate() {
            out[j] = flat / s;
            flat %= s;
        }
        out
    }

    /// Zero-based coordinate of `flat` along `axis`.
    pub fn coord(&self, flat: usize, axis: usize) -> usize {
        (flat / self.strides[axis]) % self.k[axis]
    }

    fn check_index(&self, index: &[usize]) -> Result<()> {
        if index.len() != self.dims() || index.iter().zip(&self.k).any(|(i, k)| i >= k) {
            return Err(Error::CellOutOfRange {
                index: index.to_vec(),
                degree: self.k.clone(),
            });
        }
        Ok(())
    }
}

/// Zero-based cell multi-index; entry `j` is `nu_j - 1` in one-based terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellIndex(pub Vec<usize>);

impl CellIndex {
    pub fn new(degree: &Degree, index: Vec<usize>) -> Result<Self> {
        degree.check_index(&index)?;
        Ok(CellIndex(index))
    }
}

/// A yett-uniform copula: nonnegative cell masses with uniform grid marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct YettCopula {
    degree: Degree,
    mass: Vec<f64>,
}

impl YettCopula {
    /// The independence copula, every cell carrying `prod_j 1/k_j`.
    pub fn independence(degree: &Degree) -> Self {
        let cells = degree.cell_count();
        YettCopula {
            degree: degree.clone(),
            mass: vec![1.0 / cells as f64; cells],
        }
    }

    /// Validates and wraps a row-major mass vector.
    pub fn from_masses(degree: Degree, mass: Vec<f64>) -> Result<Self> {
        Self::from_masses_with_tol(degree, mass, VALIDATION_TOL)
    }

    pub fn from_masses_with_tol(degree: Degree, mass: Vec<f64>, tol: f64) -> Result<Self> {
        let c = YettCopula { degree, mass };
        c.validate(tol)?;
        Ok(c)
    }

    /// Wraps masses without checking. Callers guarantee validity.
    pub(crate) fn from_masses_unchecked(degree: Degree, mass: Vec<f64>) -> Self {
        debug_assert_eq!(mass.len(), degree.cell_count());
        YettCopula { degree, mass }
    }

    pub fn degree(&self) -> &Degree {
        &self.degree
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub(crate) fn masses_mut(&mut self) -> &mut [f64] {
        &mut self.mass
    }

    pub fn into_masses(self) -> Vec<f64> {
        self.mass
    }

    pub fn mass(&self, index: &CellIndex) -> f64 {
        self.mass[self.degree.flat(&index.0)]
    }

    pub fn mass_at(&self, index: &[usize]) -> f64 {
        self.mass[self.degree.flat(index)]
    }

    /// Sums of the cell masses within each slice `nu_axis = m`.
    pub fn marginal_sums(&self, axis: usize) -> Vec<f64> {
        let mut sums = vec![0.0; self.degree.k(axis)];
        for (flat, m) in self.mass.iter().enumerate() {
            sums[self.degree.coord(flat, axis)] += m;
        }
        sums
    }

    /// Checks nonnegativity, total mass and every axis marginal.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.mass.len() != self.degree.cell_count() {
            return Err(Error::InvalidMasses(format!(
                "expected {} cells, got {}",
                self.degree.cell_count(),
                self.mass.len()
            )));
        }
        if let Some((i, m)) = self
            .mass
            .iter()
            .enumerate()
            .find(|(_, m)| !m.is_finite() || **m < 0.0)
        {
            return Err(Error::InvalidMasses(format!(
                "cell {:?} has mass {m}",
                self.degree.unflatten(i)
            )));
        }
        let total: f64 = self.mass.iter().sum();
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidMasses(format!("total mass {total} != 1")));
        }
        for axis in 0..self.degree.dims() {
            let target = 1.0 / self.degree.k(axis) as f64;
            for (m, s) in self.marginal_sums(axis).iter().enumerate() {
                if (s - target).abs() > tol {
                    return Err(Error::InvalidMasses(format!(
                        "axis {} slice {} sums to {s}, expected {target}",
                        axis + 1,
                        m + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate(VALIDATION_TOL).is_ok()
    }

    /// Largest absolute cellwise difference.
    pub fn max_abs_diff(&self, other: &YettCopula) -> f64 {
        self.mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Flat offsets and mass differences `other - self` for every cell that
    /// differs.
    pub fn diff_cells(&self, other: &YettCopula) -> Vec<(usize, f64)> {
        self.mass
            .iter()
            .zip(&other.mass)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, (a, b))| (i, b - a))
            .collect()
    }
}

/// Row-major textual form: `d k_1 ... k_d` on the first line, then one mass
/// per line with 17 significant digits.
impl fmt::Display for YettCopula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.degree.dims())?;
        for k in self.degree.as_slice() {
            write!(f, " {k}")?;
        }
        writeln!(f)?;
        for m in &self.mass {
            writeln!(f, "{m:.16e}")?;
        }
        Ok(())
    }
}

impl FromStr for YettCopula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header line".into()))?;
        let fields: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header token {t:?}"))))
            .collect::<Result<_>>()?;
        let (&d, k) = fields
            .split_first()
            .ok_or_else(|| Error::Parse("empty header".into()))?;
        if k.len() != d {
            return Err(Error::Parse(format!("header declares d={d} but lists {} sizes", k.len())));
        }
        let degree = Degree::new(k.to_vec())?;
        let mass: Vec<f64> = lines
            .flat_map(|l| l.split_whitespace())
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad mass {t:?}"))))
            .collect::<Result<_>>()?;
        if mass.len() != degree.cell_count() {
            return Err(Error::Parse(format!(
                "expected {} masses, found {}",
                degree.cell_count(),
                mass.len()
            )));
        }
        YettCopula::from_masses(degree, mass)
    }
}

/// Alternately rescales each axis so its slices carry `1/k_j`. Returns
/// whether the largest slice error fell below 1e-12.
pub fn rescale_marginals(degree: &Degree, mass: &mut [f64], max_iter: usize) -> bool {
    let d = degree.dims();
    for _ in 0..max_iter {
        let mut worst: f64 = 0.0;
        for j in 0..d {
            let target = 1.0 / degree.k(j) as f64;
            let mut sums = vec![0.0; degree.k(j)];
            for (f, m) in mass.iter().enumerate() {
                sums[degree.coord(f, j)] += m;
            }
            for s in &sums {
                worst = worst.max((s - target).abs());
            }
            for (f, m) in mass.iter_mut().enumerate() {
                let s = sums[degree.coord(f, j)];
                if s > 0.0 {
                    *m *= target / s;
                }
            }
        }
        if worst < 1e-13 {
            return true;
        }
    }
    (0..d).all(|j| {
        let target = 1.0 / degree.k(j) as f64;
        let mut sums = vec![0.0; degree.k(j)];
        for (f, m) in mass.iter().enumerate() {
            sums[degree.coord(f, j)] += m;
        }
        sums.iter().all(|s| (s - target).abs() < 1e-12)
    })
}

/// One rectangle exchange: two axes, the anchor coordinates on every other
/// axis, and the two corner indices on each of the chosen axes (zero-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RectangleExchange {
    pub axes: (usize, usize),
    /// Full-length multi-index; the entries at `axes` are ignored.
    pub anchor: Vec<usize>,
    pub rows: (usize, usize),
    pub cols: (usize, usize),
}

impl RectangleExchange {
    pub fn new(
        degree: &Degree,
        axes: (usize, usize),
        anchor: Vec<usize>,
        rows: (usize, usize),
        cols: (usize, usize),
    ) -> Result<Self> {
        let (i, j) = axes;
        if i == j || i >= degree.dims() || j >= degree.dims() {
            return Err(Error::DegenerateExchange(format!("bad axes {axes:?}")));
        }
        if rows.0 == rows.1 || cols.0 == cols.1 {
            return Err(Error::DegenerateExchange(format!(
                "corner indices must differ, got rows {rows:?} cols {cols:?}"
            )));
        }
        let mut probe = anchor.clone();
        if probe.len() != degree.dims() {
            return Err(Error::DegenerateExchange("anchor length mismatch".into()));
        }
        probe[i] = rows.0.max(rows.1);
        probe[j] = cols.0.max(cols.1);
        degree.check_index(&probe)?;
        Ok(RectangleExchange { axes, anchor, rows, cols })
    }

    /// Draws axes, anchors and distinct corners uniformly. `None` when no
    /// two axes have at least two cells.
    pub fn random<R: Rng + ?Sized>(degree: &Degree, rng: &mut R) -> Option<Self> {
        let eligible: Vec<usize> = (0..degree.dims()).filter(|&j| degree.k(j) >= 2).collect();
        if eligible.len() < 2 {
            return None;
        }
        let pick = sample(rng, eligible.len(), 2);
        let (mut i, mut j) = (eligible[pick.index(0)], eligible[pick.index(1)]);
        if i > j {
            std::mem::swap(&mut i, &mut j);
        }
        let anchor: Vec<usize> = (0..degree.dims())
            .map(|a| if a == i || a == j { 0 } else { rng.random_range(0..degree.k(a)) })
            .collect();
        let r = sample(rng, degree.k(i), 2);
        let c = sample(rng, degree.k(j), 2);
        Some(RectangleExchange {
            axes: (i, j),
            anchor,
            rows: (r.index(0), r.index(1)),
            cols: (c.index(0), c.index(1)),
        })
    }

    /// Flat offsets of the corners `(a1,b1), (a1,b2), (a2,b1), (a2,b2)`.
    pub fn corners(&self, degree: &Degree) -> [usize; 4] {
        let mut idx = self.anchor.clone();
        let (i, j) = self.axes;
        let mut at = |a: usize, b: usize| {
            idx[i] = a;
            idx[j] = b;
            degree.flat(&idx)
        };
        [
            at(self.rows.0, self.cols.0),
            at(self.rows.0, self.cols.1),
            at(self.rows.1, self.cols.0),
            at(self.rows.1, self.cols.1),
        ]
    }

    /// Feasible interval for the exchanged amount.
    pub fn bounds(&self, c: &YettCopula) -> (f64, f64) {
        let [p11, p12, p21, p22] = self.corners(c.degree());
        let w = c.masses();
        let lo = (-w[p12]).max(-w[p21]);
        let hi = w[p11].min(w[p22]);
        (lo, hi)
    }

    /// Returns a new copula with `epsilon` moved around the rectangle.
    pub fn apply(&self, c: &YettCopula, epsilon: f64) -> Result<YettCopula> {
        let mut out = c.clone();
        self.apply_in_place(&mut out, epsilon)?;
        Ok(out)
    }

    pub(crate) fn apply_in_place(&self, c: &mut YettCopula, epsilon: f64) -> Result<()> {
        let (lo, hi) = self.bounds(c);
        if epsilon < lo || epsilon > hi {
            return Err(Error::StepOutOfBounds { epsilon, lo, hi });
        }
        let [p11, p12, p21, p22] = self.corners(c.degree());
        let w = c.masses_mut();
        for (p, sign) in [(p11, -1.0), (p12, 1.0), (p21, 1.0), (p22, -1.0)] {
            let v = w[p] + sign * epsilon;
            w[p] = if v.abs() < ZERO_SNAP { 0.0 } else { v };
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn paper_matrix() -> YettCopula {
        let m = [1., 1., 4., 2., 2., 4., 1., 1., 3., 1., 1., 3.];
        YettCopula::from_masses(
            Degree::new(vec![3, 4]).unwrap(),
            m.iter().map(|v| v / 24.0).collect(),
        )
        .unwrap()
    }

    #[test]
    fn degree_rejects_bad_input() {
        assert!(Degree::new(vec![3]).is_err());
        assert!(Degree::new(vec![3, 0]).is_err());
        let d = Degree::new(vec![3, 4, 2]).unwrap();
        assert_eq!(d.cell_count(), 24);
        assert_eq!(d.flat(&[2, 3, 1]), 23);
        assert_eq!(d.unflatten(23), vec![2, 3, 1]);
        assert_eq!(d.coord(23, 1), 3);
        assert_eq!(Degree::new(vec![2, 2]).unwrap().polytope_dimension(), 1);
        assert_eq!(Degree::new(vec![3, 4]).unwrap().polytope_dimension(), 6);
    }

    #[test]
    fn independence_cells() {
        let c = YettCopula::independence(&Degree::new(vec![3, 4]).unwrap());
        assert!(c.masses().iter().all(|m| (m - 1.0 / 12.0).abs() < 1e-17));
        let c = YettCopula::independence(&Degree::uniform(2, 2).unwrap());
        assert!(c.masses().iter().all(|m| *m == 0.25));
        let c = YettCopula::independence(&Degree::uniform(4, 5).unwrap());
        assert!(c.masses().iter().all(|m| (m - 1.0 / 625.0).abs() < 1e-18));
        for s in c.marginal_sums(0) {
            assert!((s - 0.2).abs() < 1e-14);
        }
        assert!(c.is_valid());
    }

    #[test]
    fn validation_catches_broken_marginals() {
        let d = Degree::uniform(2, 2).unwrap();
        assert!(YettCopula::from_masses(d.clone(), vec![0.5, 0.0, 0.0, 0.5]).is_ok());
        assert!(YettCopula::from_masses(d.clone(), vec![0.5, 0.5, 0.0, 0.0]).is_err());
        assert!(YettCopula::from_masses(d.clone(), vec![0.6, -0.1, -0.1, 0.6]).is_err());
        assert!(YettCopula::from_masses(d, vec![0.25; 3]).is_err());
    }

    #[test]
    fn exchange_bounds_examples() {
        let d = Degree::uniform(2, 2).unwrap();
        let c = YettCopula::independence(&d);
        let ex = RectangleExchange::new(&d, (0, 1), vec![0, 0], (0, 1), (0, 1)).unwrap();
        assert_eq!(ex.bounds(&c), (-0.25, 0.25));

        let g = paper_matrix();
        let ex = RectangleExchange::new(g.degree(), (0, 1), vec![0, 0], (0, 1), (1, 2)).unwrap();
        let (lo, hi) = ex.bounds(&g);
        // Lower bound is max(-W(1,3), -W(2,2)) = -4/24.
        assert!((lo + 4.0 / 24.0).abs() < 1e-17);
        assert!((hi - 1.0 / 24.0).abs() < 1e-17);
    }

    #[test]
    fn zero_corner_caps_upper_bound() {
        let d = Degree::uniform(2, 2).unwrap();
        let c = YettCopula::from_masses(d.clone(), vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        let ex = RectangleExchange::new(&d, (0, 1), vec![0, 0], (0, 1), (0, 1)).unwrap();
        assert!(ex.bounds(&c).1 <= 0.0);
    }

    #[test]
    fn degenerate_corners_are_rejected() {
        let d = Degree::uniform(2, 3).unwrap();
        assert!(matches!(
            RectangleExchange::new(&d, (0, 1), vec![0, 0], (1, 1), (0, 2)),
            Err(Error::DegenerateExchange(_))
        ));
        assert!(RectangleExchange::new(&d, (0, 1), vec![0, 0], (0, 1), (2, 2)).is_err());
    }

    #[test]
    fn apply_exchange_examples() {
        let d = Degree::uniform(2, 2).unwrap();
        let c = YettCopula::independence(&d);
        let ex = RectangleExchange::new(&d, (0, 1), vec![0, 0], (0, 1), (0, 1)).unwrap();
        assert_eq!(ex.apply(&c, 0.0).unwrap(), c);
        let moved = ex.apply(&c, 0.25).unwrap();
        assert_eq!(moved.masses(), &[0.0, 0.5, 0.5, 0.0]);
        let moved = ex.apply(&c, -0.25).unwrap();
        assert_eq!(moved.masses(), &[0.5, 0.0, 0.0, 0.5]);
        assert!(matches!(ex.apply(&c, 0.3), Err(Error::StepOutOfBounds { .. })));
    }

    #[test]
    fn random_exchanges_preserve_validity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in [vec![3, 4], vec![5, 5], vec![3, 3, 3], vec![2, 1, 3]] {
            let d = Degree::new(k).unwrap();
            let mut c = YettCopula::independence(&d);
            for _ in 0..10_000 {
                let ex = RectangleExchange::random(&d, &mut rng).unwrap();
                let (lo, hi) = ex.bounds(&c);
                let eps = lo + (hi - lo) * rng.random::<f64>();
                c = ex.apply(&c, eps).unwrap();
                c.validate(VALIDATION_TOL).unwrap();
            }
        }
    }

    #[test]
    fn random_exchange_needs_two_nontrivial_axes() {
        let d = Degree::new(vec![1, 4, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(RectangleExchange::random(&d, &mut rng).is_none());
    }

    #[test]
    fn two_by_two_walk_reaches_both_vertices() {
        let d = Degree::uniform(2, 2).unwrap();
        let mut c = YettCopula::independence(&d);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut hit_diag, mut hit_anti) = (false, false);
        for _ in 0..100_000 {
            let ex = RectangleExchange::random(&d, &mut rng).unwrap();
            let (lo, hi) = ex.bounds(&c);
            c = ex.apply(&c, lo + (hi - lo) * rng.random::<f64>()).unwrap();
            hit_diag |= (c.masses()[0] - 0.5).abs() < 1e-3;
            hit_anti |= c.masses()[0] < 1e-3;
            if hit_diag && hit_anti {
                break;
            }
        }
        assert!(hit_diag && hit_anti);
    }

    #[test]
    fn text_format_header_and_parse_errors() {
        let g = paper_matrix();
        let text = g.to_string();
        assert!(text.starts_with("2 3 4\n"));
        assert_eq!(text.lines().count(), 13);
        assert!("2 3\n0.5".parse::<YettCopula>().is_err());
        assert!("".parse::<YettCopula>().is_err());
        assert!("2 2 2\n0.5\n0.5\n0.5\n0.5\n".parse::<YettCopula>().is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip_is_exact(seed in any::<u64>(), steps in 0usize..50) {
            let d = Degree::new(vec![3, 4]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut c = YettCopula::independence(&d);
            for _ in 0..steps {
                let ex = RectangleExchange::random(&d, &mut rng).unwrap();
                let (lo, hi) = ex.bounds(&c);
                c = ex.apply(&c, lo + (hi - lo) * rng.random::<f64>()).unwrap();
            }
            let back: YettCopula = c.to_string().parse().unwrap();
            prop_assert_eq!(back, c);
        }
    }
}

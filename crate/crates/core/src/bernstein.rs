//! Bernstein copulas: the smooth copula obtained from a yett copula by
//! replacing each grid cell with a product of beta densities.

use crate::error::{Error, Result};
use crate::numeric::{ln_choose, log_sum_exp};
use crate::yett::{Degree, YettCopula};
use nalgebra::DMatrix;

/// Densities below this are recomputed in log space.
pub const LOG_SPACE_THRESHOLD: f64 = 1e-300;

/// A point of the closed unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPoint(Vec<f64>);

impl UnitPoint {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidData(format!("{z:?} is outside the unit cube")));
        }
        Ok(UnitPoint(z))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `n` points of the unit cube stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPoints {
    dims: usize,
    values: Vec<f64>,
}

impl UnitPoints {
    pub fn new(dims: usize, values: Vec<f64>) -> Result<Self> {
        if dims == 0 || values.len() % dims != 0 {
            return Err(Error::InvalidData(format!(
                "{} values do not form rows of width {dims}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidData(format!("value {v} is outside [0, 1]")));
        }
        Ok(UnitPoints { dims, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dims = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dims) {
            return Err(Error::InvalidData("ragged rows".into()));
        }
        Self::new(dims.max(1), rows.concat())
    }

    pub fn empty(dims: usize) -> Self {
        UnitPoints { dims, values: Vec::new() }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dims..(i + 1) * self.dims]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dims)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Beta(ν, k − ν + 1) densities for ν = 1..k along one axis.
#[derive(Debug, Clone)]
pub struct AxisKernel {
    k: usize,
    ln_coef: Vec<f64>,
}

impl AxisKernel {
    pub fn new(k: usize) -> Self {
        let lk = (k as f64).ln();
        let ln_coef = (0..k).map(|v| lk + ln_choose(k - 1, v)).collect();
        AxisKernel { k, ln_coef }
    }

    /// Writes the `k` kernel values at `z` into `out`. At the boundary the
    /// kernels take their limits: `k` for the first (z=0) or last (z=1)
    /// kernel, zero elsewhere.
    pub fn eval(&self, z: f64, out: &mut [f64]) {
        let k = self.k;
        if k == 1 {
            out[0] = 1.0;
            return;
        }
        if z <= 0.0 || z >= 1.0 {
            out[..k].fill(0.0);
            out[if z <= 0.0 { 0 } else { k - 1 }] = k as f64;
            return;
        }
        let (lz, l1z) = (z.ln(), (-z).ln_1p());
        for (v, o) in out[..k].iter_mut().enumerate() {
            *o = (self.ln_coef[v] + v as f64 * lz + (k - 1 - v) as f64 * l1z).exp();
        }
    }

    /// Log kernel values; `-inf` where the kernel vanishes.
    pub fn eval_ln(&self, z: f64, out: &mut [f64]) {
        let k = self.k;
        if k == 1 {
            out[0] = 0.0;
            return;
        }
        if z <= 0.0 || z >= 1.0 {
            out[..k].fill(f64::NEG_INFINITY);
            out[if z <= 0.0 { 0 } else { k - 1 }] = (k as f64).ln();
            return;
        }
        let (lz, l1z) = (z.ln(), (-z).ln_1p());
        for (v, o) in out[..k].iter_mut().enumerate() {
            *o = self.ln_coef[v] + v as f64 * lz + (k - 1 - v) as f64 * l1z;
        }
    }
}

/// Sum over cells of `w[c] * prod_j vecs[j][c_j]`, contracting the last axis
/// first. `scratch` is reused between calls.
pub fn contract(degree: &Degree, w: &[f64], vecs: &[&[f64]], scratch: &mut Vec<f64>) -> f64 {
    let k = degree.as_slice();
    if k.len() == 2 {
        let (k1, k2) = (k[0], k[1]);
        let (a, b) = (vecs[0], vecs[1]);
        return (0..k1)
            .map(|r| {
                let row = &w[r * k2..(r + 1) * k2];
                a[r] * row.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
            })
            .sum();
    }
    scratch.clear();
    scratch.extend_from_slice(w);
    let mut len = w.len();
    for j in (0..k.len()).rev() {
        let kj = k[j];
        len /= kj;
        let v = vecs[j];
        for r in 0..len {
            let s: f64 = scratch[r * kj..(r + 1) * kj].iter().zip(v).map(|(x, y)| x * y).sum();
            scratch[r] = s;
        }
    }
    scratch[0]
}

/// Kernel values of every axis at every point, laid out point-major so one
/// point's `sum_j k_j` values are contiguous.
#[derive(Debug, Clone)]
pub struct KernelBasis {
    degree: Degree,
    offsets: Vec<usize>,
    width: usize,
    values: Vec<f64>,
    points: UnitPoints,
}

impl KernelBasis {
    pub fn new(degree: &Degree, points: &UnitPoints) -> Result<Self> {
        if points.dims() != degree.dims() {
            return Err(Error::InvalidData(format!(
                "points have {} coordinates, copula has {}",
                points.dims(),
                degree.dims()
            )));
        }
        let kernels: Vec<AxisKernel> = degree.as_slice().iter().map(|&k| AxisKernel::new(k)).collect();
        let mut offsets = Vec::with_capacity(degree.dims());
        let mut width = 0;
        for &k in degree.as_slice() {
            offsets.push(width);
            width += k;
        }
        let mut values = vec![0.0; width * points.len()];
        for (i, z) in points.rows().enumerate() {
            let block = &mut values[i * width..(i + 1) * width];
            for (j, ker) in kernels.iter().enumerate() {
                ker.eval(z[j], &mut block[offsets[j]..]);
            }
        }
        Ok(KernelBasis { degree: degree.clone(), offsets, width, values, points: points.clone() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn degree(&self) -> &Degree {
        &self.degree
    }

    pub fn points(&self) -> &UnitPoints {
        &self.points
    }

    pub fn axis(&self, i: usize, j: usize) -> &[f64] {
        let s = i * self.width + self.offsets[j];
        &self.values[s..s + self.degree.k(j)]
    }

    /// Density of the Bernstein copula with weights `w` at point `i`.
    pub fn density(&self, i: usize, w: &[f64], scratch: &mut Vec<f64>) -> f64 {
        let d = self.degree.dims();
        let mut vecs: [&[f64]; 8] = [&[]; 8];
        if d <= 8 {
            for (j, v) in vecs.iter_mut().enumerate().take(d) {
                *v = self.axis(i, j);
            }
            contract(&self.degree, w, &vecs[..d], scratch)
        } else {
            let vecs: Vec<&[f64]> = (0..d).map(|j| self.axis(i, j)).collect();
            contract(&self.degree, w, &vecs, scratch)
        }
    }

    /// Density change at point `i` when cell `c` changes by `dw`, for each
    /// `(c, dw)` in `changes`.
    pub fn delta(&self, i: usize, changes: &[(usize, f64)]) -> f64 {
        let block = &self.values[i * self.width..(i + 1) * self.width];
        let strides = self.degree.strides();
        let k = self.degree.as_slice();
        changes
            .iter()
            .map(|&(c, dw)| {
                let mut p = dw;
                for j in 0..k.len() {
                    p *= block[self.offsets[j] + (c / strides[j]) % k[j]];
                }
                p
            })
            .sum()
    }

    /// Log density at point `i`. Uses the direct sum unless it underflows.
    pub fn ln_density(&self, i: usize, w: &[f64], scratch: &mut Vec<f64>) -> f64 {
        let dens = self.density(i, w, scratch);
        if dens >= LOG_SPACE_THRESHOLD {
            dens.ln()
        } else {
            ln_density_log_space(&self.degree, w, self.points.row(i))
        }
    }
}

fn ln_density_log_space(degree: &Degree, w: &[f64], z: &[f64]) -> f64 {
    let logs: Vec<Vec<f64>> = degree
        .as_slice()
        .iter()
        .zip(z)
        .map(|(&k, &x)| {
            let mut out = vec![0.0; k];
            AxisKernel::new(k).eval_ln(x, &mut out);
            out
        })
        .collect();
    let terms: Vec<f64> = w
        .iter()
        .enumerate()
        .filter(|(_, m)| **m > 0.0)
        .map(|(c, m)| {
            m.ln() + (0..degree.dims()).map(|j| logs[j][degree.coord(c, j)]).sum::<f64>()
        })
        .collect();
    if terms.is_empty() {
        f64::NEG_INFINITY
    } else {
        log_sum_exp(&terms)
    }
}

/// Log-likelihood of a point set together with the number of points where
/// the density is exactly zero (the value is then `-inf`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    pub zero_density_points: usize,
}

/// The Bernstein copula induced by a yett copula.
#[derive(Debug, Clone, Copy)]
pub struct BernsteinCopula<'a> {
    base: &'a YettCopula,
}

impl<'a> BernsteinCopula<'a> {
    pub fn new(base: &'a YettCopula) -> Self {
        BernsteinCopula { base }
    }

    pub fn base(&self) -> &YettCopula {
        self.base
    }

    fn degree(&self) -> &Degree {
        self.base.degree()
    }

    fn axis_values(&self, z: &[f64]) -> Vec<Vec<f64>> {
        self.degree()
            .as_slice()
            .iter()
            .zip(z)
            .map(|(&k, &x)| {
                let mut out = vec![0.0; k];
                AxisKernel::new(k).eval(x, &mut out);
                out
            })
            .collect()
    }

    pub fn density(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.degree().dims());
        let vals = self.axis_values(z);
        let vecs: Vec<&[f64]> = vals.iter().map(Vec::as_slice).collect();
        contract(self.degree(), self.base.masses(), &vecs, &mut Vec::new()).max(0.0)
    }

    pub fn ln_density(&self, z: &[f64]) -> f64 {
        let dens = self.density(z);
        if dens >= LOG_SPACE_THRESHOLD {
            dens.ln()
        } else {
            ln_density_log_space(self.degree(), self.base.masses(), z)
        }
    }

    /// Distribution function: the cumulative yett masses at the grid
    /// vertices, weighted by binomial probabilities on each axis.
    pub fn cdf(&self, z: &[f64]) -> f64 {
        let degree = self.degree();
        let k = degree.as_slice();
        let ext = Degree::new(k.iter().map(|v| v + 1).collect()).expect("valid degree");
        // cumulative masses on the (k_j + 1)-point vertex grid
        let mut cum = vec![0.0; ext.cell_count()];
        for (c, m) in self.base.masses().iter().enumerate() {
            let idx: Vec<usize> = degree.unflatten(c).iter().map(|v| v + 1).collect();
            cum[ext.flat(&idx)] = *m;
        }
        for j in 0..ext.dims() {
            let s = ext.strides()[j];
            for f in 0..cum.len() {
                if ext.coord(f, j) > 0 {
                    cum[f] += cum[f - s];
                }
            }
        }
        let pmfs: Vec<Vec<f64>> = k.iter().zip(z).map(|(&kj, &x)| binomial_pmf(kj, x)).collect();
        let vecs: Vec<&[f64]> = pmfs.iter().map(Vec::as_slice).collect();
        contract(&ext, &cum, &vecs, &mut Vec::new()).clamp(0.0, 1.0)
    }

    /// Density of the `axis` marginal, computed from the collapsed weights.
    /// Equal to one for every valid yett copula.
    pub fn marginal_density(&self, axis: usize, t: f64) -> f64 {
        let k = self.degree().k(axis);
        let sums = self.base.marginal_sums(axis);
        let mut vals = vec![0.0; k];
        AxisKernel::new(k).eval(t, &mut vals);
        sums.iter().zip(&vals).map(|(a, b)| a * b).sum()
    }

    pub fn loglik(&self, points: &UnitPoints) -> Result<LogLikelihood> {
        let basis = KernelBasis::new(self.degree(), points)?;
        let mut scratch = Vec::new();
        let mut value = 0.0;
        let mut zero_density_points = 0;
        for i in 0..basis.len() {
            let l = basis.ln_density(i, self.base.masses(), &mut scratch);
            if l == f64::NEG_INFINITY {
                zero_density_points += 1;
            }
            value += l;
        }
        Ok(LogLikelihood { value, zero_density_points })
    }

    /// Probability the Bernstein copula assigns to each yett grid cell.
    pub fn cell_masses(&self) -> Vec<f64> {
        let degree = self.degree();
        let mut t = self.base.masses().to_vec();
        for j in 0..degree.dims() {
            t = mode_product(degree, &t, j, &cell_kernel_matrix(degree.k(j)));
        }
        t
    }
}

fn binomial_pmf(k: usize, z: f64) -> Vec<f64> {
    if z <= 0.0 || z >= 1.0 {
        let mut out = vec![0.0; k + 1];
        out[if z <= 0.0 { 0 } else { k }] = 1.0;
        return out;
    }
    let (lz, l1z) = (z.ln(), (-z).ln_1p());
    (0..=k)
        .map(|v| (ln_choose(k, v) + v as f64 * lz + (k - v) as f64 * l1z).exp())
        .collect()
}

/// `K[m, v]` is the mass the kernel Beta(v+1, k−v) puts on the cell
/// `[m/k, (m+1)/k]`.
pub fn cell_kernel_matrix(k: usize) -> DMatrix<f64> {
    // Beta(v+1, k-v) cdf at t equals P(Binomial(k, t) >= v+1).
    let upper_tail = |t: f64| -> Vec<f64> {
        let pmf = binomial_pmf(k, t);
        let mut tail = vec![0.0; k + 1];
        let mut acc = 0.0;
        for s in (0..=k).rev() {
            acc += pmf[s];
            tail[s] = acc;
        }
        tail
    };
    let tails: Vec<Vec<f64>> = (0..=k).map(|m| upper_tail(m as f64 / k as f64)).collect();
    DMatrix::from_fn(k, k, |m, v| tails[m + 1][v + 1] - tails[m][v + 1])
}

/// Applies the matrix `a` (rows indexed by the new coordinate) along `axis`.
fn mode_product(degree: &Degree, t: &[f64], axis: usize, a: &DMatrix<f64>) -> Vec<f64> {
    let k = degree.k(axis);
    let stride = degree.strides()[axis];
    let mut out = vec![0.0; t.len()];
    for (f, o) in out.iter_mut().enumerate() {
        let m = degree.coord(f, axis);
        let base = f - m * stride;
        *o = (0..k).map(|v| a[(m, v)] * t[base + v * stride]).sum();
    }
    out
}

/// Recovers the yett weights whose Bernstein copula has the given cell
/// masses, by inverting the per-axis cell-kernel matrices.
pub fn recover_weights(degree: &Degree, cell_masses: &[f64], tol: f64) -> Result<YettCopula> {
    if cell_masses.len() != degree.cell_count() {
        return Err(Error::InvalidMasses(format!(
            "expected {} cell masses, got {}",
            degree.cell_count(),
            cell_masses.len()
        )));
    }
    let mut t = cell_masses.to_vec();
    for j in 0..degree.dims() {
        let inv = cell_kernel_matrix(degree.k(j))
            .try_inverse()
            .ok_or_else(|| Error::InvalidMasses("singular cell-kernel matrix".into()))?;
        t = mode_product(degree, &t, j, &inv);
    }
    for v in &mut t {
        if v.abs() < tol {
            *v = v.max(0.0);
        }
    }
    YettCopula::from_masses_with_tol(degree.clone(), t, tol)
}

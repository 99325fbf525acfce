//! Grid-uniform copulas on arbitrary (not necessarily regular) grids.
//!
//! Only used to refine a yett copula by grid division; the sampler never
//! touches this type.

use crate::error::{Error, Result};
use crate::yett::YettCopula;

/// Piecewise-uniform distribution on the unit cube. Axis `j` has boundaries
/// `0 = c_0 < c_1 < ... < c_m = 1`; masses are row-major over the cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCopula {
    cuts: Vec<Vec<f64>>,
    mass: Vec<f64>,
}

impl GridCopula {
    pub fn from_yett(c: &YettCopula) -> Self {
        let cuts = c
            .degree()
            .as_slice()
            .iter()
            .map(|&k| (0..=k).map(|i| i as f64 / k as f64).collect())
            .collect();
        GridCopula { cuts, mass: c.masses().to_vec() }
    }

    pub fn dims(&self) -> usize {
        self.cuts.len()
    }

    pub fn cuts(&self, axis: usize) -> &[f64] {
        &self.cuts[axis]
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    fn shape(&self) -> Vec<usize> {
        self.cuts.iter().map(|c| c.len() - 1).collect()
    }

    fn strides(&self) -> Vec<usize> {
        let shape = self.shape();
        let mut s = vec![1; shape.len()];
        for j in (0..shape.len() - 1).rev() {
            s[j] = s[j + 1] * shape[j + 1];
        }
        s
    }

    /// Splits every cell crossing `cut` on `axis`, sharing mass in
    /// proportion to the two sub-cell lengths.
    pub fn divide(&self, axis: usize, cut: f64) -> Result<GridCopula> {
        if axis >= self.dims() {
            return Err(Error::InvalidCut(format!("axis {axis} out of range")));
        }
        if !(cut > 0.0 && cut < 1.0) {
            return Err(Error::InvalidCut(format!("cut {cut} not in (0,1)")));
        }
        let c = &self.cuts[axis];
        if c.iter().any(|&b| b == cut) {
            return Err(Error::InvalidCut(format!("cut {cut} is already a boundary")));
        }
        let s = c.partition_point(|&b| b < cut) - 1;
        let (lo, hi) = (c[s], c[s + 1]);
        let left = (cut - lo) / (hi - lo);

        let shape = self.shape();
        let mut new_shape = shape.clone();
        new_shape[axis] += 1;
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut mass = Vec::with_capacity(self.mass.len() + outer * inner);
        for o in 0..outer {
            for a in 0..shape[axis] {
                let base = (o * shape[axis] + a) * inner;
                let row = &self.mass[base..base + inner];
                if a == s {
                    mass.extend(row.iter().map(|m| m * left));
                    mass.extend(row.iter().map(|m| m * (1.0 - left)));
                } else {
                    mass.extend_from_slice(row);
                }
            }
        }
        let mut cuts = self.cuts.clone();
        cuts[axis].insert(s + 1, cut);
        Ok(GridCopula { cuts, mass })
    }

    /// Piecewise-constant density: cell mass over cell volume. Points on an
    /// interior boundary belong to the cell above it.
    pub fn density(&self, z: &[f64]) -> f64 {
        let strides = self.strides();
        let mut flat = 0;
        let mut vol = 1.0;
        for (j, c) in self.cuts.iter().enumerate() {
            let m = c.len() - 1;
            let i = (c.partition_point(|&b| b <= z[j]).max(1) - 1).min(m - 1);
            flat += i * strides[j];
            vol *= c[i + 1] - c[i];
        }
        self.mass[flat] / vol
    }

    pub fn marginal_mass(&self, axis: usize) -> Vec<f64> {
        let shape = self.shape();
        let strides = self.strides();
        let mut out = vec![0.0; shape[axis]];
        for (f, m) in self.mass.iter().enumerate() {
            out[(f / strides[axis]) % shape[axis]] += m;
        }
        out
    }
}

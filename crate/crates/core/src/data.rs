use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// An `n x d` table of finite observations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Option<Vec<String>>,
    dims: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(dims: usize, values: Vec<f64>, names: Option<Vec<String>>) -> Result<Self> {
        if dims < 2 {
            return Err(Error::InvalidData(format!("need at least two columns, got {dims}")));
        }
        if values.is_empty() || values.len() % dims != 0 {
            return Err(Error::InvalidData(format!("{} values do not fill rows of width {dims}", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value in row {}, column {}",
                i / dims + 1,
                i % dims + 1
            )));
        }
        if names.as_ref().is_some_and(|n| n.len() != dims) {
            return Err(Error::InvalidData("header length does not match column count".into()));
        }
        Ok(Dataset { names, dims, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dims = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != dims) {
            return Err(Error::InvalidData(format!("row {} has {} columns, expected {dims}", i + 1, rows[i].len())));
        }
        Self::new(dims, rows.concat(), None)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dims..(i + 1) * self.dims]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dims)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// The first `n` rows.
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset { names: self.names.clone(), dims: self.dims, values: self.values[..n * self.dims].to_vec() }
    }

    /// Rows at the given indices, in that order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let values = rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Dataset { names: self.names.clone(), dims: self.dims, values }
    }

    /// `n` rows drawn without replacement, kept in their original order.
    /// The whole table when `n >= len`.
    pub fn subsample(&self, n: usize, seed: u64) -> Dataset {
        if n >= self.len() {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, self.len(), n).into_vec();
        idx.sort_unstable();
        self.select(&idx)
    }
}

//! Priors on yett copulas of the form `exp(-alpha/2 * D(G, G0))`.

use crate::centering::{CenteringCopula, ProjectionOptions, Projector};
use crate::error::{Error, Result};
use crate::yett::{Degree, YettCopula};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceKind {
    /// Squared L2 distance between the piecewise-constant densities.
    L2,
    /// Conditional autoregressive quadratic form with smoothing `gamma`.
    Car { gamma: f64 },
    /// Intrinsic CAR (`gamma = 1`).
    Icar,
}

impl DistanceKind {
    fn gamma(&self) -> f64 {
        match self {
            DistanceKind::L2 => 0.0,
            DistanceKind::Car { gamma } => *gamma,
            DistanceKind::Icar => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub distance: DistanceKind,
    pub alpha: f64,
    pub centering: CenteringCopula,
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidPrior(format!("alpha must be positive, got {}", self.alpha)));
        }
        if let DistanceKind::Car { gamma } = self.distance {
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(Error::InvalidPrior(format!("CAR gamma must lie in (0, 1), got {gamma}")));
            }
        }
        Ok(())
    }
}

/// Symmetric 0/1 neighbour structure over cells, stored as sorted lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    /// Cells are neighbours when their indices differ by one in exactly one
    /// coordinate.
    pub fn facet(degree: &Degree) -> Self {
        let neighbors = (0..degree.cell_count())
            .map(|c| {
                let mut out = Vec::with_capacity(2 * degree.dims());
                for j in 0..degree.dims() {
                    let s = degree.strides()[j];
                    let x = degree.coord(c, j);
                    if x > 0 {
                        out.push(c - s);
                    }
                    if x + 1 < degree.k(j) {
                        out.push(c + s);
                    }
                }
                out.sort_unstable();
                out
            })
            .collect();
        Adjacency { neighbors }
    }

    pub fn from_neighbors(mut neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbors.len();
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        for (c, list) in neighbors.iter().enumerate() {
            for &b in list {
                if b == c {
                    return Err(Error::InvalidPrior(format!("cell {c} lists itself as a neighbour")));
                }
                if b >= n || neighbors[b].binary_search(&c).is_err() {
                    return Err(Error::InvalidPrior(format!("adjacency {c} -> {b} is not symmetric")));
                }
            }
        }
        Ok(Adjacency { neighbors })
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, c: usize) -> &[usize] {
        &self.neighbors[c]
    }

    pub fn are_neighbors(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }
}

/// Evaluates `D` as a quadratic form `v' Q v` in the cell-mass differences.
#[derive(Debug, Clone)]
pub struct Distance {
    kind: DistanceKind,
    cells: usize,
    adjacency: Option<Adjacency>,
}

impl Distance {
    pub fn new(kind: DistanceKind, degree: &Degree) -> Self {
        let adjacency = match kind {
            DistanceKind::L2 => None,
            _ => Some(Adjacency::facet(degree)),
        };
        Distance { kind, cells: degree.cell_count(), adjacency }
    }

    pub fn with_adjacency(kind: DistanceKind, adjacency: Adjacency) -> Self {
        Distance { kind, cells: adjacency.len(), adjacency: Some(adjacency) }
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    /// `(Q v)_c`.
    fn q_row(&self, v: &[f64], c: usize) -> f64 {
        match &self.adjacency {
            None => self.cells as f64 * v[c],
            Some(a) => {
                let nb = a.neighbors(c);
                nb.len() as f64 * v[c] - self.kind.gamma() * nb.iter().map(|&b| v[b]).sum::<f64>()
            }
        }
    }

    fn q_entry(&self, a: usize, b: usize) -> f64 {
        match &self.adjacency {
            None => {
                if a == b {
                    self.cells as f64
                } else {
                    0.0
                }
            }
            Some(adj) => {
                if a == b {
                    adj.neighbors(a).len() as f64
                } else if adj.are_neighbors(a, b) {
                    -self.kind.gamma()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn quadratic(&self, v: &[f64]) -> f64 {
        let q: f64 = (0..v.len()).map(|c| v[c] * self.q_row(v, c)).sum();
        q.max(0.0)
    }

    /// Change in `v' Q v` when `v[c] += dv` for each `(c, dv)`; cells must be
    /// distinct.
    pub fn delta(&self, v: &[f64], changes: &[(usize, f64)]) -> f64 {
        let mut total = 0.0;
        for (i, &(c, dc)) in changes.iter().enumerate() {
            total += 2.0 * dc * self.q_row(v, c) + dc * dc * self.q_entry(c, c);
            for &(b, db) in &changes[i + 1..] {
                total += 2.0 * dc * db * self.q_entry(c, b);
            }
        }
        total
    }

    pub fn between(&self, g: &YettCopula, g0: &YettCopula) -> Result<f64> {
        check_same_degree(g, g0)?;
        Ok(self.quadratic(&diff_vector(g, g0)))
    }
}

fn check_same_degree(g: &YettCopula, g0: &YettCopula) -> Result<()> {
    if g.degree() != g0.degree() {
        return Err(Error::DegreeMismatch {
            left: g.degree().as_slice().to_vec(),
            right: g0.degree().as_slice().to_vec(),
        });
    }
    Ok(())
}

/// Per-cell mass differences `G - G0`.
pub fn diff_vector(g: &YettCopula, g0: &YettCopula) -> Vec<f64> {
    g.masses().iter().zip(g0.masses()).map(|(a, b)| a - b).collect()
}

/// Integrated squared difference of the piecewise-constant densities.
pub fn distance_l2(g: &YettCopula, g0: &YettCopula) -> Result<f64> {
    Distance::new(DistanceKind::L2, g.degree()).between(g, g0)
}

pub fn distance_car(g: &YettCopula, g0: &YettCopula, kind: DistanceKind, adjacency: &Adjacency) -> Result<f64> {
    if adjacency.len() != g.masses().len() {
        return Err(Error::InvalidPrior(format!(
            "adjacency has {} cells, copula has {}",
            adjacency.len(),
            g.masses().len()
        )));
    }
    Distance::with_adjacency(kind, adjacency.clone()).between(g, g0)
}

/// A prior with its centering copula projected onto the grid.
#[derive(Debug, Clone)]
pub struct Prior {
    spec: PriorSpec,
    distance: Distance,
    projector: Projector,
    center: YettCopula,
}

impl Prior {
    pub fn new(spec: PriorSpec, degree: &Degree) -> Result<Self> {
        Self::with_options(spec, degree, ProjectionOptions::default())
    }

    pub fn with_options(spec: PriorSpec, degree: &Degree, options: ProjectionOptions) -> Result<Self> {
        spec.validate()?;
        let mut projector = Projector::new(degree, options);
        let center = projector.project(&spec.centering)?;
        Ok(Prior { distance: Distance::new(spec.distance, degree), spec, projector, center })
    }

    pub fn spec(&self) -> &PriorSpec {
        &self.spec
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    pub fn distance_fn(&self) -> &Distance {
        &self.distance
    }

    /// Projected centering copula, the prior mode.
    pub fn center(&self) -> &YettCopula {
        &self.center
    }

    pub fn distance(&self, g: &YettCopula) -> Result<f64> {
        self.distance.between(g, &self.center)
    }

    pub fn log_prior(&self, g: &YettCopula) -> Result<f64> {
        Ok(-0.5 * self.spec.alpha * self.distance(g)?)
    }

    /// Projection of another centering copula with the same settings.
    pub fn project(&mut self, centering: &CenteringCopula) -> Result<YettCopula> {
        self.projector.project(centering)
    }

    /// Replaces the centering copula and its cached projection.
    pub fn set_centering(&mut self, centering: CenteringCopula, projected: YettCopula) {
        self.spec.centering = centering;
        self.center = projected;
    }
}

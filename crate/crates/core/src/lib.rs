//! Bayesian nonparametric copula estimation with Bernstein polynomials of
//! yett-uniform copulas.

pub mod bernstein;
pub mod centering;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod marginals;
pub mod mcmc;
pub mod numeric;
pub mod prior;
pub mod proposals;
pub mod yett;

pub use bernstein::{BernsteinCopula, UnitPoint, UnitPoints};
pub use centering::{CenteringCopula, CorrelationMatrix};
pub use data::Dataset;
pub use error::{Error, Result};
pub use marginals::{Family, MarginalModel, MarginalSet};
pub use prior::{DistanceKind, Prior, PriorSpec};
pub use proposals::{HastingsForm, Proposal, ProposalKind};
pub use yett::{CellIndex, Degree, RectangleExchange, YettCopula};

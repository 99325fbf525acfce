//! Chain and fit diagnostics.

mod ess;
mod hellinger;
mod perfect;
mod posterior;
mod waic;

pub use ess::{autocorrelation, ess, Ess};
pub use hellinger::{hellinger, Quadrature};
pub use perfect::{
    factor_near_sqrt, largest_remainder, perfect_sample_gaussian, GaussianComponent, GaussianMixture, SimulationModel,
};
pub use posterior::{grid_points, posterior_mean_copula, posterior_mean_density, PosteriorMean};
pub use waic::{waic, Waic, WaicAccumulator};

//! Density-driven diffusion as the continuum limit of discrete random walks.
//!
//! Points sampled from a density define a Markov walk whose step length
//! shrinks where points are dense. In the limit the walk becomes a diffusion
//! with coefficient `D(x)` inversely tied to the local density. The crate
//! builds both views, integrates the continuous one, and compares them.

pub mod density;
pub mod error;
pub mod experiments;
pub mod export;
pub mod kernel;
pub mod path;
pub mod pgm;
pub mod solver;
pub mod walk;

pub use density::{
    beta_from_diffusion, diffusion_coefficient, DensityField, PiecewiseDensity1D,
    RasterDensity2D, WalkParams,
};
pub use error::{Error, Result};
pub use solver::{Boundary, Grid, Integrator, ScalarField, SolverConfig};
pub use walk::{PointSet, StateDistribution, TransitionMatrix};

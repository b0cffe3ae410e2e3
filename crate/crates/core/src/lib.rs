//! Solver and analysis toolkit for density-dependent age-structured
//! population models of Gurtin–MacCamy type.
//!
//! The state is an age density `n(a, t)` whose mortality `μ₀(a) + 𝓜(a, P(t))`
//! and fertility `β(a, Q(t))` depend on two weighted sizes `P = ∫p·n` and
//! `Q = ∫q·n`. Along characteristics the model reduces to a coupled system of
//! integral equations for the newborn rate `ρ(t) = n(0, t)`, `P(t)` and `Q(t)`.
//!
//! - [`model`]: model instances and sampled hypothesis checks
//! - [`io`]: JSON model files
//! - [`solver`]: time stepping on an aligned age-time grid
//! - [`analysis`]: `R₀`, weighted `R(P, Q)`, Malthusian parameter, equilibria
//! - [`stability`]: characteristic determinant and its complex roots
//! - [`bounds`]: a-priori bound on `ρ` and Allee extinction thresholds
//! - [`experiments`]: scenarios, sweeps and outcome classification
//! - [`export`]: CSV writers

pub mod analysis;
pub mod bounds;
pub mod error;
pub mod experiments;
pub mod export;
pub mod io;
pub mod model;
pub mod quadrature;
pub mod solver;
pub mod stability;

pub use error::{Error, Result};
pub use model::{AgeFunction, BaselineHazard, DensityMortality, Fertility, ModelSpec, ProbeGrid};
pub use solver::{simulate, GridSpec, Trajectory};

//! Explicit splitting scalar-auxiliary-variable (SSAV) integration of kinetic
//! Langevin dynamics with superlinearly growing potential gradients.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: potentials, parameters, energies, invariant densities
//! - [`sav`]: the auxiliary variable ρ and the per-step quantities Q, I^h
//! - [`noise`]: keyed Brownian noise with exact OU integrals and coupling
//! - [`integrators`]: the SSAV step, its implicit oracle, the EM baseline
//! - [`experiments`]: convergence, energy, moment and sampling studies
//! - [`config`]: JSON model configuration

pub mod config;
pub mod error;
pub mod experiments;
pub mod integrators;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod quadrature;
pub mod sav;

pub use error::{Result, SsavError};
pub use integrators::{
    em_step, ou_substep, run_trajectory, ssav_deterministic_substep, ssav_implicit_oracle, ssav_step, Method,
    TrajectoryRecord,
};
pub use model::{hamiltonian, modified_energy, AnalyticDensity, ModelParams, ModelSpec, Potential};
pub use noise::{NoisePlan, StepNoise};
pub use sav::{i_factor, q_vector, rho_init, AugmentedState, StepScratch};

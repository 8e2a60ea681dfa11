//! Scalar-auxiliary-variable algebra.
//!
//! The auxiliary variable ρ = √(κΦ(u) + C_H − α|u|²) turns the potential part of
//! the energy into a quadratic, so the modified energy
//! 𝓗 = |v|²/2 + α|u|² + ρ² can be conserved by a linearly-implicit update that
//! is solvable in closed form. Q and I^h are the two per-step quantities that
//! make the closed form possible.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsavError};
use crate::linalg::{dot, norm_sq};
use crate::model::ModelSpec;

/// Radicand below which `rho_init` logs a warning.
pub const RADICAND_WARN_LEVEL: f64 = 10.0;

/// The triple (v, u, ρ) evolved by the scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub rho: f64,
}

impl AugmentedState {
    pub fn new(v: Vec<f64>, u: Vec<f64>, rho: f64) -> Self {
        debug_assert_eq!(v.len(), u.len());
        Self { v, u, rho }
    }

    /// State with ρ initialized from u.
    pub fn initial(model: &ModelSpec, v: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        let rho = rho_init(model, &u)?;
        Ok(Self { v, u, rho })
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.v.iter().chain(&self.u).all(|x| x.is_finite())
    }

    /// |(v, u)|, the Euclidean norm of the phase-space point.
    pub fn phase_norm(&self) -> f64 {
        (norm_sq(&self.v) + norm_sq(&self.u)).sqrt()
    }
}

/// Per-step derived quantities Q_n and I_n^h.
#[derive(Debug, Clone, PartialEq)]
pub struct StepScratch {
    pub q: Vec<f64>,
    pub i_factor: f64,
    pub h: f64,
}

fn checked_radicand(model: &ModelSpec, u: &[f64]) -> Result<f64> {
    let r = model.sav_radicand(u);
    if r >= 1.0 {
        Ok(r)
    } else {
        Err(SsavError::AssumptionViolation {
            u: u.to_vec(),
            radicand: r,
            step: None,
        })
    }
}

/// ρ₀ = √(κΦ(u) + C_H − α|u|²); fails if the radicand is below 1.
pub fn rho_init(model: &ModelSpec, u: &[f64]) -> Result<f64> {
    let r = checked_radicand(model, u)?;
    if r < RADICAND_WARN_LEVEL {
        log::warn!("auxiliary-variable radicand {r} at u = {u:?} is close to the floor of 1");
    }
    Ok(r.sqrt())
}

/// Q(u) = (κ∇Φ(u) − 2αu) / (2√(κΦ(u) + C_H − α|u|²)).
pub fn q_vector(model: &ModelSpec, u: &[f64]) -> Result<Vec<f64>> {
    let mut q = vec![0.0; u.len()];
    q_vector_into(model, u, &mut q)?;
    Ok(q)
}

/// In-place form of [`q_vector`]; `out` receives Q.
pub fn q_vector_into(model: &ModelSpec, u: &[f64], out: &mut [f64]) -> Result<()> {
    let r = checked_radicand(model, u)?;
    model.potential().gradient(u, out);
    let kappa = model.kappa();
    let two_alpha = 2.0 * model.alpha();
    let inv = 0.5 / r.sqrt();
    for (o, x) in out.iter_mut().zip(u) {
        *o = (kappa * *o - two_alpha * x) * inv;
    }
    Ok(())
}

/// I^h = (ρ(2 + αh²) + ⟨q, v − αuh⟩h) / (2 + αh² + |q|²h²).
pub fn i_factor(model: &ModelSpec, state: &AugmentedState, q: &[f64], h: f64) -> f64 {
    let alpha = model.alpha();
    let a = 2.0 + alpha * h * h;
    let qv = dot(q, &state.v);
    let qu = dot(q, &state.u);
    (state.rho * a + (qv - alpha * h * qu) * h) / (a + norm_sq(q) * h * h)
}

/// Q and I^h for one step from `state`.
pub fn step_scratch(model: &ModelSpec, state: &AugmentedState, h: f64) -> Result<StepScratch> {
    let q = q_vector(model, &state.u)?;
    let i_factor = i_factor(model, state, &q, h);
    Ok(StepScratch { q, i_factor, h })
}

/// |√(κΦ(u) + C_H − α|u|²) − ρ|, the drift of the carried ρ from its definition.
pub fn rho_drift(model: &ModelSpec, state: &AugmentedState) -> f64 {
    (model.sav_radicand(&state.u).max(0.0).sqrt() - state.rho).abs()
}

//! Time-stepping kernels.
//!
//! One SSAV step is a deterministic substep, which conserves the modified
//! energy exactly and is solved in closed form, followed by the exact
//! Ornstein–Uhlenbeck flow dv = −γv dt + Γ dW applied to v alone. The
//! Euler–Maruyama step is the comparison baseline, and the Picard solver of
//! the implicit substep is an independent check of the closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsavError};
use crate::linalg::{dot, max_abs_diff, norm_sq};
use crate::model::{hamiltonian, modified_energy, ModelSpec};
use crate::noise::{NoiseSource, OuCoefficients, StepNoise};
use crate::sav::{q_vector, q_vector_into, AugmentedState};

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(SsavError::InvalidArgument(format!("stepsize must be positive and finite, got {h}")))
    }
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct Workspace {
    q: Vec<f64>,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        Self { q: vec![0.0; dim] }
    }
}

/// Closed-form deterministic substep, in place. Accepts any finite h, including
/// negative values; the energy identity is algebraic in h.
pub(crate) fn substep_in_place(model: &ModelSpec, state: &mut AugmentedState, h: f64, ws: &mut Workspace) -> Result<()> {
    q_vector_into(model, &state.u, &mut ws.q)?;
    let q = &ws.q;
    let alpha = model.alpha();
    let a = 2.0 + alpha * h * h;
    let qq = norm_sq(q);
    let denom = a + qq * h * h;
    let qv = dot(q, &state.v);
    let qu = dot(q, &state.u);
    let rho = state.rho;

    let rho_next = rho + (2.0 * qv - 2.0 * alpha * h * qu - 2.0 * qq * rho * h) * h / denom;
    let i_h = (rho * a + (qv - alpha * h * qu) * h) / denom;

    for ((v, u), qi) in state.v.iter_mut().zip(state.u.iter_mut()).zip(q) {
        let v_next = (2.0 * *v - 4.0 * qi * i_h * h - 4.0 * alpha * *u * h - alpha * *v * h * h) / a;
        *u += 0.5 * (v_next + *v) * h;
        *v = v_next;
    }
    state.rho = rho_next;
    Ok(())
}

/// The explicit solution (v△, u△, ρ△) of the energy-conserving substep.
pub fn ssav_deterministic_substep(model: &ModelSpec, state: &AugmentedState, h: f64) -> Result<AugmentedState> {
    check_step(h)?;
    let mut out = state.clone();
    substep_in_place(model, &mut out, h, &mut Workspace::new(model.dim()))?;
    Ok(out)
}

/// Fixed point of the implicit substep together with the iteration count.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub state: AugmentedState,
    pub iterations: usize,
}

pub const ORACLE_TOL: f64 = 1e-13;
pub const ORACLE_MAX_ITER: usize = 200;

/// Solves the implicit substep
///
/// ```text
/// v△ = v − α(u + u△)h − Q(ρ△ + ρ)h
/// u△ = u + (v△ + v)h/2
/// ρ△ = ρ + ⟨Q, v△ + v⟩h/2
/// ```
///
/// by plain Picard iteration from (v, u, ρ), stopping once successive iterates
/// differ by less than `tol` in max norm.
pub fn ssav_implicit_oracle(model: &ModelSpec, state: &AugmentedState, h: f64, tol: f64, max_iter: usize) -> Result<OracleSolution> {
    check_step(h)?;
    let q = q_vector(model, &state.u)?;
    let alpha = model.alpha();
    let (v0, u0, rho0) = (&state.v, &state.u, state.rho);
    let mut cur = state.clone();
    let mut next = state.clone();
    for it in 1..=max_iter {
        let rho_sum = cur.rho + rho0;
        for i in 0..q.len() {
            next.v[i] = v0[i] - alpha * (u0[i] + cur.u[i]) * h - q[i] * rho_sum * h;
            next.u[i] = u0[i] + 0.5 * (cur.v[i] + v0[i]) * h;
        }
        let qsum: f64 = q.iter().zip(cur.v.iter().zip(v0)).map(|(qi, (a, b))| qi * (a + b)).sum();
        next.rho = rho0 + 0.5 * qsum * h;

        let diff = max_abs_diff(&next.v, &cur.v)
            .max(max_abs_diff(&next.u, &cur.u))
            .max((next.rho - cur.rho).abs());
        std::mem::swap(&mut cur, &mut next);
        if !diff.is_finite() {
            break;
        }
        if diff < tol {
            return Ok(OracleSolution { state: cur, iterations: it });
        }
    }
    Err(SsavError::NoConvergence { max_iter })
}

/// v ↦ e^{−γh}v + Γ·J, where J is the raw OU integral over the step.
pub fn ou_substep(model: &ModelSpec, v_tri: &[f64], h: f64, noise: &StepNoise) -> Result<Vec<f64>> {
    check_step(h)?;
    let coeffs = OuCoefficients::new(model.gamma(), h);
    let mut v = v_tri.to_vec();
    ou_in_place(model, &coeffs, &mut v, noise);
    Ok(v)
}

#[inline]
fn ou_in_place(model: &ModelSpec, coeffs: &OuCoefficients, v: &mut [f64], noise: &StepNoise) {
    for x in v.iter_mut() {
        *x *= coeffs.decay;
    }
    model.noise().apply_add(&noise.ou_integral, 1.0, v);
}

/// One full SSAV step: deterministic substep then the OU flow on v.
pub fn ssav_step(model: &ModelSpec, state: &AugmentedState, h: f64, noise: &StepNoise) -> Result<AugmentedState> {
    let mut stepper = SsavStepper::new(model, h)?;
    let mut out = state.clone();
    stepper.step(&mut out, noise)?;
    Ok(out)
}

/// Euler–Maruyama on (v, u): v' = v + (−κ∇Φ(u) − γv)h + Γ·dW, u' = u + v·h.
/// Non-finite results are returned as-is.
pub fn em_step(model: &ModelSpec, v: &[f64], u: &[f64], h: f64, dw: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut v1 = v.to_vec();
    let mut u1 = u.to_vec();
    let mut grad = vec![0.0; v.len()];
    em_in_place(model, &mut v1, &mut u1, h, dw, &mut grad);
    (v1, u1)
}

#[inline]
fn em_in_place(model: &ModelSpec, v: &mut [f64], u: &mut [f64], h: f64, dw: &[f64], grad: &mut [f64]) {
    model.potential().gradient(u, grad);
    let (kappa, gamma) = (model.kappa(), model.gamma());
    for i in 0..v.len() {
        let vi = v[i];
        v[i] = vi + (-kappa * grad[i] - gamma * vi) * h;
        u[i] += vi * h;
    }
    model.noise().apply_add(dw, 1.0, v);
}

/// Repeated SSAV steps at a fixed stepsize, with OU coefficients cached.
#[derive(Debug, Clone)]
pub struct SsavStepper<'m> {
    model: &'m ModelSpec,
    h: f64,
    coeffs: OuCoefficients,
    ws: Workspace,
}

impl<'m> SsavStepper<'m> {
    pub fn new(model: &'m ModelSpec, h: f64) -> Result<Self> {
        check_step(h)?;
        Ok(Self {
            model,
            h,
            coeffs: OuCoefficients::new(model.gamma(), h),
            ws: Workspace::new(model.dim()),
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn step(&mut self, state: &mut AugmentedState, noise: &StepNoise) -> Result<()> {
        substep_in_place(self.model, state, self.h, &mut self.ws)?;
        ou_in_place(self.model, &self.coeffs, &mut state.v, noise);
        Ok(())
    }
}

/// Repeated Euler–Maruyama steps.
#[derive(Debug, Clone)]
pub struct EmStepper<'m> {
    model: &'m ModelSpec,
    h: f64,
    grad: Vec<f64>,
}

impl<'m> EmStepper<'m> {
    pub fn new(model: &'m ModelSpec, h: f64) -> Result<Self> {
        check_step(h)?;
        Ok(Self {
            model,
            h,
            grad: vec![0.0; model.dim()],
        })
    }

    /// Advances (v, u); returns false once the state is no longer finite.
    #[inline]
    pub fn step(&mut self, v: &mut [f64], u: &mut [f64], noise: &StepNoise) -> bool {
        em_in_place(self.model, v, u, self.h, &noise.wiener_increment, &mut self.grad);
        v.iter().chain(u.iter()).all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Ssav,
    Em,
}

impl std::str::FromStr for Method {
    type Err = SsavError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ssav" => Ok(Method::Ssav),
            "em" | "euler-maruyama" => Ok(Method::Em),
            other => Err(SsavError::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// Recorded states of one trajectory.
///
/// EM carries no auxiliary variable: its states store ρ = NaN and `energies`
/// holds the Hamiltonian H(v, u) instead of the modified energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<AugmentedState>,
    pub energies: Option<Vec<f64>>,
    /// First step index at which an EM state became non-finite.
    pub diverged_at: Option<usize>,
}

/// Iterates the chosen scheme for `n_steps`, recording at t = 0, every
/// `record_every` steps, and at the final step.
pub fn run_trajectory(
    model: &ModelSpec,
    init: &AugmentedState,
    h: f64,
    n_steps: usize,
    method: Method,
    noise: &mut dyn NoiseSource,
    record_every: usize,
) -> Result<TrajectoryRecord> {
    check_step(h)?;
    if n_steps == 0 || record_every == 0 {
        return Err(SsavError::InvalidArgument("n_steps and record_every must be positive".into()));
    }
    let m = model.dim();
    let mut buf = StepNoise::zeros(m);
    let mut state = init.clone();
    let mut rec = TrajectoryRecord {
        times: Vec::new(),
        states: Vec::new(),
        energies: Some(Vec::new()),
        diverged_at: None,
    };
    let energy = |s: &AugmentedState| match method {
        Method::Ssav => modified_energy(model, s),
        Method::Em => hamiltonian(model, &s.v, &s.u),
    };
    if method == Method::Em {
        state.rho = f64::NAN;
    }
    let push = |rec: &mut TrajectoryRecord, n: usize, s: &AugmentedState| {
        rec.times.push(n as f64 * h);
        if let Some(e) = rec.energies.as_mut() {
            e.push(energy(s));
        }
        rec.states.push(s.clone());
    };
    push(&mut rec, 0, &state);

    match method {
        Method::Ssav => {
            let mut stepper = SsavStepper::new(model, h)?;
            for n in 1..=n_steps {
                noise.fill(&mut buf);
                stepper.step(&mut state, &buf).map_err(|e| e.at_step(n - 1))?;
                if n % record_every == 0 || n == n_steps {
                    push(&mut rec, n, &state);
                }
            }
        }
        Method::Em => {
            let mut stepper = EmStepper::new(model, h)?;
            for n in 1..=n_steps {
                noise.fill(&mut buf);
                let ok = stepper.step(&mut state.v, &mut state.u, &buf);
                if !ok && rec.diverged_at.is_none() {
                    rec.diverged_at = Some(n);
                }
                if n % record_every == 0 || n == n_steps || (!ok && rec.diverged_at == Some(n)) {
                    push(&mut rec, n, &state);
                }
                if !ok {
                    break;
                }
            }
        }
    }
    Ok(rec)
}

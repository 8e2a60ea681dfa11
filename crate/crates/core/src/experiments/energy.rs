//! Energy diagnostics: the exact identity of the deterministic substep, agreement
//! with the implicit solve, the energy law, moment growth and the exponential
//! integrability bound.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use super::ensemble::{steps_for, Ensemble};
use super::{slope_fit, InitLaw};
use crate::error::{Result, SsavError};
use crate::integrators::{ssav_deterministic_substep, ssav_implicit_oracle, substep_in_place, Workspace};
use crate::linalg::max_abs_diff;
use crate::model::{modified_energy, unit_f64, ModelSpec};
use crate::sav::{rho_init, step_scratch, AugmentedState};

/// Random augmented states: v uniform in [−v_scale, v_scale]^m, u uniform in
/// [−u_scale, u_scale]^m, ρ = ρ(u)·(1 + ε) with ε uniform in [−rho_jitter, rho_jitter].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSampler {
    pub v_scale: f64,
    pub u_scale: f64,
    pub rho_jitter: f64,
}

impl Default for StateSampler {
    fn default() -> Self {
        Self {
            v_scale: 3.0,
            u_scale: 2.0,
            rho_jitter: 0.1,
        }
    }
}

impl StateSampler {
    pub fn draw(&self, model: &ModelSpec, rng: &mut ChaCha8Rng) -> Result<AugmentedState> {
        let m = model.dim();
        let mut sym = |s: f64| s * (2.0 * unit_f64(rng) - 1.0);
        let v: Vec<f64> = (0..m).map(|_| sym(self.v_scale)).collect();
        let u: Vec<f64> = (0..m).map(|_| sym(self.u_scale)).collect();
        let jitter = sym(self.rho_jitter);
        let rho = rho_init(model, &u)? * (1.0 + jitter);
        Ok(AugmentedState::new(v, u, rho))
    }
}

fn case_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0xE4E6_0000_1D3A_7177)
}

/// Largest relative change |𝓗(after) − 𝓗(before)|/𝓗(before) of the modified energy
/// across the deterministic substep, over `n_cases` random states and every h in
/// `h_set`. Negative h is accepted: the identity is algebraic in h.
pub fn energy_identity_suite(
    model: &ModelSpec,
    n_cases: usize,
    sampler: &StateSampler,
    h_set: &[f64],
    seed: u64,
) -> Result<f64> {
    if n_cases == 0 || h_set.iter().any(|h| *h == 0.0 || !h.is_finite()) {
        return Err(SsavError::InvalidArgument("need at least one case and nonzero finite steps".into()));
    }
    let mut rng = case_rng(seed);
    let mut ws = Workspace::new(model.dim());
    let mut worst = 0.0f64;
    for _ in 0..n_cases {
        let state = sampler.draw(model, &mut rng)?;
        let e0 = modified_energy(model, &state);
        for &h in h_set {
            let mut s = state.clone();
            substep_in_place(model, &mut s, h, &mut ws)?;
            let e1 = modified_energy(model, &s);
            worst = worst.max((e1 - e0).abs() / e0);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub cases: usize,
    /// Max-norm distance between the explicit substep and the iterated implicit solve.
    pub max_diff: f64,
    /// Largest |ρ_{n+1} + ρ_n − 2I| / |2I|.
    pub max_rho_identity: f64,
    pub max_iterations: usize,
}

/// Compares the explicit substep with the fixed-point solve of the implicit system
/// on random states and random h ∈ (0, h_max].
pub fn oracle_agreement_suite(
    model: &ModelSpec,
    n_cases: usize,
    sampler: &StateSampler,
    h_max: f64,
    tol: f64,
    seed: u64,
) -> Result<OracleReport> {
    if !(h_max > 0.0) {
        return Err(SsavError::InvalidArgument("h_max must be positive".into()));
    }
    let mut rng = case_rng(seed.wrapping_add(1));
    let mut report = OracleReport {
        cases: n_cases,
        max_diff: 0.0,
        max_rho_identity: 0.0,
        max_iterations: 0,
    };
    for _ in 0..n_cases {
        let state = sampler.draw(model, &mut rng)?;
        let h = h_max * (1.0 - unit_f64(&mut rng));
        let explicit = ssav_deterministic_substep(model, &state, h)?;
        let oracle = ssav_implicit_oracle(model, &state, h, tol, 200)?;
        let o = &oracle.state;
        let diff = max_abs_diff(&explicit.v, &o.v)
            .max(max_abs_diff(&explicit.u, &o.u))
            .max((explicit.rho - o.rho).abs());
        report.max_diff = report.max_diff.max(diff);
        report.max_iterations = report.max_iterations.max(oracle.iterations);
        let two_i = 2.0 * step_scratch(model, &state, h)?.i_factor;
        let rel = (explicit.rho + state.rho - two_i).abs() / two_i.abs();
        report.max_rho_identity = report.max_rho_identity.max(rel);
    }
    Ok(report)
}

/// One recorded time of a mean-versus-bound curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRow {
    pub t: f64,
    pub value: f64,
    pub bound: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub rows: Vec<EvolutionRow>,
    /// Times where the mean exceeds the bound by more than 4 standard errors.
    pub flagged: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
}

impl EvolutionResult {
    pub fn passes(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Relative slack for rounding when a curve sits exactly on its bound.
const ROUNDING_SLACK: f64 = 1e-10;

fn flag_rows(rows: &[EvolutionRow]) -> Vec<f64> {
    rows.iter()
        .filter(|r| !r.bound.is_nan() && r.value > r.bound * (1.0 + ROUNDING_SLACK) + 4.0 * r.stderr)
        .map(|r| r.t)
        .collect()
}

fn deterministic_start(model: &ModelSpec, init: &InitLaw) -> Result<f64> {
    if !init.is_deterministic() {
        return Err(SsavError::InvalidArgument("this study needs a deterministic initial state".into()));
    }
    Ok(modified_energy(model, &init.draw(model, None, 0, 0)?))
}

/// Empirical E[𝓗_n] against the linear bound 𝓗₀ + ‖Γ‖²t/2.
#[allow(clippy::too_many_arguments)]
pub fn energy_evolution_study(
    model: &ModelSpec,
    init: &InitLaw,
    h: f64,
    horizon: f64,
    n_paths: usize,
    seed: u64,
    record_every: usize,
) -> Result<EvolutionResult> {
    let e0 = deterministic_start(model, init)?;
    let g2 = model.noise().frobenius_norm().powi(2);
    let ens = Ensemble {
        model,
        density: None,
        init,
        h,
        n_steps: steps_for(horizon, h)?,
        record_every,
        n_paths,
        seed,
    };
    let stats = ens.stats(1, |_, s, out| out[0] = modified_energy(model, s))?;
    let rows: Vec<EvolutionRow> = stats
        .times
        .iter()
        .zip(&stats.acc)
        .map(|(&t, a)| EvolutionRow {
            t,
            value: a[0].mean(),
            bound: e0 + 0.5 * g2 * t,
            stderr: a[0].stderr(),
        })
        .collect();
    Ok(EvolutionResult {
        flagged: flag_rows(&rows),
        rows,
        n_paths,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentResult {
    pub p: u32,
    /// E[𝓗^p] per recorded time; `bound` is the energy law for p = 1 and NaN otherwise.
    pub rows: Vec<EvolutionRow>,
    /// Fitted exponent of E[𝓗^p] − 𝓗₀^p against t over [T/2, T].
    pub exponent: Option<f64>,
    pub exponent_stderr: Option<f64>,
    /// True when too few rows in [T/2, T] grow above 𝓗₀^p to fit: the moment did not grow.
    pub bounded: bool,
    pub flagged: Vec<f64>,
}

impl MomentResult {
    pub fn exponent_at_most(&self, limit: f64) -> bool {
        self.bounded || self.exponent.is_some_and(|e| e <= limit)
    }
}

/// E[𝓗^p] over time for each p in `p_list` (each in 1..=3), with a fitted growth exponent.
#[allow(clippy::too_many_arguments)]
pub fn moment_growth_study(
    model: &ModelSpec,
    init: &InitLaw,
    p_list: &[u32],
    horizon: f64,
    h: f64,
    n_paths: usize,
    seed: u64,
    record_every: usize,
) -> Result<Vec<MomentResult>> {
    if p_list.is_empty() || p_list.iter().any(|p| !(1..=3).contains(p)) {
        return Err(SsavError::InvalidArgument("moment orders must lie in 1..=3".into()));
    }
    let e0 = deterministic_start(model, init)?;
    let g2 = model.noise().frobenius_norm().powi(2);
    let ens = Ensemble {
        model,
        density: None,
        init,
        h,
        n_steps: steps_for(horizon, h)?,
        record_every,
        n_paths,
        seed,
    };
    let stats = ens.stats(p_list.len(), |_, s, out| {
        let e = modified_energy(model, s);
        for (o, &p) in out.iter_mut().zip(p_list) {
            *o = e.powi(p as i32);
        }
    })?;
    let results = p_list
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let rows: Vec<EvolutionRow> = stats
                .times
                .iter()
                .zip(&stats.acc)
                .map(|(&t, a)| EvolutionRow {
                    t,
                    value: a[j].mean(),
                    bound: if p == 1 { e0 + 0.5 * g2 * t } else { f64::NAN },
                    stderr: a[j].stderr(),
                })
                .collect();
            let base = e0.powi(p as i32);
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.t >= 0.5 * horizon && r.t > 0.0)
                .map(|r| (r.t, r.value - base))
                .collect();
            let fit = if pts.iter().filter(|(_, y)| *y > 0.0).count() >= 3 {
                slope_fit(&pts).ok()
            } else {
                None
            };
            MomentResult {
                p,
                flagged: flag_rows(&rows),
                rows,
                exponent: fit.map(|f| f.slope),
                exponent_stderr: fit.map(|f| f.stderr),
                bounded: fit.is_none(),
            }
        })
        .collect();
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpIntegrabilityResult {
    pub delta: f64,
    pub lambda: f64,
    /// Empirical E[exp(e^{−λt}δ𝓗)] against the constant analytic bound.
    pub rows: Vec<EvolutionRow>,
    pub overflow_paths: usize,
    pub flagged: Vec<f64>,
}

impl ExpIntegrabilityResult {
    /// `None` when overflow made the probe inconclusive.
    pub fn passes(&self) -> Option<bool> {
        (self.overflow_paths == 0).then_some(self.flagged.is_empty())
    }
}

/// exp(δ‖Γ‖²/2 · (T if λ = 0 else 1/λ)) · E[exp(δ𝓗₀)].
pub fn exp_integrability_bound(noise_sq: f64, delta: f64, lambda: f64, horizon: f64, initial_mean: f64) -> f64 {
    let span = if lambda == 0.0 { horizon } else { 1.0 / lambda };
    (0.5 * delta * noise_sq * span).exp() * initial_mean
}

/// Exponent e^{−λt}·δ·(𝓗₀ + ‖Γ‖²t/2) of the envelope implied by the energy law.
pub fn envelope_exponent(e0: f64, noise_sq: f64, delta: f64, lambda: f64, t: f64) -> f64 {
    (-lambda * t).exp() * delta * (e0 + 0.5 * noise_sq * t)
}

/// Sample mean of exp(e^{−λt_n}δ𝓗_n) at recorded times. Heavy-tailed; diagnostic only.
#[allow(clippy::too_many_arguments)]
pub fn exp_integrability_probe(
    model: &ModelSpec,
    init: &InitLaw,
    delta: f64,
    lambda: f64,
    horizon: f64,
    h: f64,
    n_paths: usize,
    seed: u64,
    record_every: usize,
) -> Result<ExpIntegrabilityResult> {
    let g2 = model.noise().frobenius_norm().powi(2);
    let min_lambda = (delta * g2 - 2.0 * model.gamma()).max(0.0);
    if !(delta > 0.0) || !(lambda >= min_lambda) {
        return Err(SsavError::InvalidArgument(format!(
            "need delta > 0 and lambda >= {min_lambda} (got delta = {delta}, lambda = {lambda})"
        )));
    }
    let ens = Ensemble {
        model,
        density: None,
        init,
        h,
        n_steps: steps_for(horizon, h)?,
        record_every,
        n_paths,
        seed,
    };
    let stats = ens.stats(1, |t, s, out| {
        out[0] = ((-lambda * t).exp() * delta * modified_energy(model, s)).exp();
    })?;
    let initial_mean = stats.acc[0][0].mean();
    let bound = exp_integrability_bound(g2, delta, lambda, horizon, initial_mean);
    let rows: Vec<EvolutionRow> = stats
        .times
        .iter()
        .zip(&stats.acc)
        .map(|(&t, a)| EvolutionRow {
            t,
            value: a[0].mean(),
            bound,
            stderr: a[0].stderr(),
        })
        .collect();
    if stats.overflow_paths > 0 {
        log::warn!("exponential integrability probe: {} paths overflowed", stats.overflow_paths);
    }
    Ok(ExpIntegrabilityResult {
        delta,
        lambda,
        flagged: flag_rows(&rows),
        rows,
        overflow_paths: stats.overflow_paths,
    })
}

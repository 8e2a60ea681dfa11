//! Benchmark harness: convergence orders, energy diagnostics, long-time weak
//! error, moment growth, exponential integrability, and sampling fidelity.
//!
//! Every study is a pure function of its configuration and seed. Paths run in
//! parallel, each with its own keyed noise, and per-path results are reduced in
//! path-index order so reruns are bitwise identical.

pub mod convergence;
pub mod density;
pub mod energy;
mod ensemble;
pub mod longtime;
pub mod output;
pub mod stats;

use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsavError};
use crate::model::{unit_f64, AnalyticDensity, ModelSpec};
use crate::sav::AugmentedState;

pub use convergence::{
    energy_error_study, energy_from, run_coupled, strong_error_study, strong_from, weak_error_study, weak_from,
    CoupledEndpoints, ErrorRow, StudyResult,
};
pub use density::{density_study, ks_critical_99, ks_statistic, rejection_sample_u, DensityResult, Histogram};
pub use energy::{
    energy_evolution_study, energy_identity_suite, envelope_exponent, exp_integrability_bound, exp_integrability_probe,
    moment_growth_study, oracle_agreement_suite, EvolutionResult, EvolutionRow, ExpIntegrabilityResult, MomentResult,
    OracleReport, StateSampler,
};
pub use longtime::{ground_truth, longtime_weak_study, LongtimeCurve, LongtimeResult};
pub use stats::MeanAcc;

/// Domain separator for initial-condition randomness, so it never collides with step noise.
const INIT_STREAM_SALT: u64 = 0x5EED_1A17_0000_0001;

/// How the initial state (v₀, u₀) of each path is chosen; ρ₀ always comes from u₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitLaw {
    Point { v: Vec<f64>, u: Vec<f64> },
    /// Exact draw from the invariant density (requires one with a normalizer, m ≤ 2).
    Stationary,
    /// Independent normals around a mean point.
    Gaussian { v: Vec<f64>, u: Vec<f64>, std: f64 },
}

impl InitLaw {
    /// v₀ = u₀ = (1, …, 1)/√m, so |v₀| = |u₀| = 1.
    pub fn unit_diagonal(dim: usize) -> Self {
        let x = vec![1.0 / (dim as f64).sqrt(); dim];
        InitLaw::Point { v: x.clone(), u: x }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, InitLaw::Point { .. })
    }

    pub fn draw(&self, model: &ModelSpec, density: Option<&AnalyticDensity>, seed: u64, path: u64) -> Result<AugmentedState> {
        let m = model.dim();
        match self {
            InitLaw::Point { v, u } => {
                if v.len() != m || u.len() != m {
                    return Err(SsavError::InvalidArgument(format!("initial point must have dimension {m}")));
                }
                AugmentedState::initial(model, v.clone(), u.clone())
            }
            InitLaw::Gaussian { v, u, std } => {
                let mut rng = init_rng(seed, path);
                let mut jitter = |x: &Vec<f64>| -> Vec<f64> { x.iter().map(|xi| xi + std * std_normal(&mut rng)).collect() };
                let v0 = jitter(v);
                let u0 = jitter(u);
                AugmentedState::initial(model, v0, u0)
            }
            InitLaw::Stationary => {
                let density = density.ok_or_else(|| {
                    SsavError::InvalidArgument("stationary initial law needs an invariant density".into())
                })?;
                let mut rng = init_rng(seed, path);
                let u0 = density::rejection_draw(density, &mut rng)?;
                let sd = density.kappa().sqrt();
                let v0 = (0..m).map(|_| sd * std_normal(&mut rng)).collect();
                AugmentedState::initial(model, v0, u0)
            }
        }
    }
}

pub(crate) fn init_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ INIT_STREAM_SALT);
    rng.set_stream(path);
    rng
}

pub(crate) fn std_normal(rng: &mut impl RngCore) -> f64 {
    let u1 = 1.0 - unit_f64(rng);
    let u2 = unit_f64(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

type PhaseFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// A named observable φ(x) of the phase-space point x = (v, u) ∈ ℝ^{2m}.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    map: Arc<PhaseFn>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").field("name", &self.name).finish()
    }
}

fn phase_norm(v: &[f64], u: &[f64]) -> f64 {
    v.iter().chain(u).map(|x| x * x).sum::<f64>().sqrt()
}

impl TestFunction {
    pub fn new(name: impl Into<String>, map: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            map: Arc::new(map),
        }
    }

    /// φ as a function of |x| only.
    pub fn radial(name: impl Into<String>, g: fn(f64) -> f64) -> Self {
        Self::new(name, move |v, u| g(phase_norm(v, u)))
    }

    pub fn eval(&self, v: &[f64], u: &[f64]) -> f64 {
        (self.map)(v, u)
    }

    pub fn eval_state(&self, s: &AugmentedState) -> f64 {
        self.eval(&s.v, &s.u)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), move |_, _| c)
    }

    /// 20 sin(1 + |x|), |x|³, e^{|x|}: the finite-horizon weak-order set.
    pub fn finite_time_set() -> Vec<Self> {
        vec![
            Self::radial("20sin(1+|x|)", |r| 20.0 * (1.0 + r).sin()),
            Self::radial("|x|^3", |r| r * r * r),
            Self::radial("exp(|x|)", f64::exp),
        ]
    }

    /// 2 sin(1 + |x|), 2|x|²: the long-time set.
    pub fn long_time_set() -> Vec<Self> {
        vec![
            Self::radial("2sin(1+|x|)", |r| 2.0 * (1.0 + r).sin()),
            Self::radial("2|x|^2", |r| 2.0 * r * r),
        ]
    }

    pub fn by_name(name: &str) -> Option<Self> {
        Self::finite_time_set()
            .into_iter()
            .chain(Self::long_time_set())
            .find(|f| f.name == name)
    }
}

/// Inputs of the finite-horizon convergence studies.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub model: ModelSpec,
    pub density: Option<AnalyticDensity>,
    pub horizon: f64,
    /// Coarse levels: h = T/2^k.
    pub k_range: Vec<u32>,
    /// Reference level, finer than every coarse level.
    pub k_ref: u32,
    pub n_paths: usize,
    pub seed: u64,
    pub init: InitLaw,
    pub test_functions: Vec<TestFunction>,
}

impl StudyConfig {
    /// T = 1, k = 6..=11, k_ref = 14, M = 1000, deterministic unit-diagonal start.
    pub fn benchmark(model: ModelSpec, density: Option<AnalyticDensity>) -> Self {
        let dim = model.dim();
        Self {
            model,
            density,
            horizon: 1.0,
            k_range: (6..=11).collect(),
            k_ref: 14,
            n_paths: 1000,
            seed: 0,
            init: InitLaw::unit_diagonal(dim),
            test_functions: TestFunction::finite_time_set(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_range.is_empty() {
            return Err(SsavError::InvalidArgument("k_range is empty".into()));
        }
        if self.k_range.iter().any(|&k| k >= self.k_ref) {
            return Err(SsavError::InvalidArgument(format!(
                "k_ref = {} must exceed every coarse level {:?}",
                self.k_ref, self.k_range
            )));
        }
        if self.k_ref > 30 {
            return Err(SsavError::InvalidArgument("k_ref above 30 is not supported".into()));
        }
        if self.n_paths < 2 {
            return Err(SsavError::InvalidArgument("at least two paths are needed".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SsavError::InvalidArgument("horizon must be positive".into()));
        }
        Ok(())
    }
}

/// Runs `f` for paths 0..n in parallel and returns results in path order.
pub(crate) fn map_paths<T: Send>(n: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n as u64).into_par_iter().map(f).collect()
}

/// Least-squares fit of log₂ error against log₂ h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub used: usize,
    pub excluded: usize,
}

/// Ordinary least squares on (log₂ h, log₂ error). Rows with a non-positive or
/// non-finite error are dropped with a warning; fewer than three usable rows is an error.
pub fn slope_fit(rows: &[(f64, f64)]) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(h, e)| *h > 0.0 && *e > 0.0 && e.is_finite() && h.is_finite())
        .map(|(h, e)| (h.log2(), e.log2()))
        .collect();
    let excluded = rows.len() - pts.len();
    if excluded > 0 {
        log::warn!("slope fit: excluded {excluded} rows with non-positive error");
    }
    if pts.len() < 3 {
        return Err(SsavError::Fit { usable: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit {
        slope,
        stderr,
        used: pts.len(),
        excluded,
    })
}

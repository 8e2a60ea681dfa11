//! Independent SSAV paths at one stepsize with per-time observables.

use super::stats::MeanAcc;
use super::{map_paths, InitLaw};
use crate::error::{Result, SsavError};
use crate::integrators::SsavStepper;
use crate::model::{AnalyticDensity, ModelSpec};
use crate::noise::{CoupledNoise, NoisePlan, NoiseSource, StepNoise};
use crate::sav::AugmentedState;

pub(crate) struct Ensemble<'a> {
    pub model: &'a ModelSpec,
    pub density: Option<&'a AnalyticDensity>,
    pub init: &'a InitLaw,
    pub h: f64,
    pub n_steps: usize,
    pub record_every: usize,
    pub n_paths: usize,
    pub seed: u64,
}

/// Per-time sample statistics of several observables.
pub(crate) struct EnsembleStats {
    pub times: Vec<f64>,
    /// `acc[r][j]`: observable j at record r, over paths where it was finite.
    pub acc: Vec<Vec<MeanAcc>>,
    /// Paths with at least one non-finite observable value.
    pub overflow_paths: usize,
}

/// Number of steps for horizon `t` at stepsize `h`, rejecting horizons that are not a whole number of steps.
pub(crate) fn steps_for(t: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && t > 0.0) {
        return Err(SsavError::InvalidArgument("horizon and stepsize must be positive".into()));
    }
    let n = (t / h).round();
    if (n * h - t).abs() > 1e-9 * t || n < 1.0 {
        return Err(SsavError::InvalidArgument(format!("horizon {t} is not a multiple of h = {h}")));
    }
    Ok(n as usize)
}

/// Record times: 0, every `record_every` steps, and the final step.
pub(crate) fn record_steps(n_steps: usize, record_every: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..=n_steps).step_by(record_every.max(1)).collect();
    if *out.last().unwrap() != n_steps {
        out.push(n_steps);
    }
    out
}

impl Ensemble<'_> {
    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_steps == 0 || self.record_every == 0 {
            return Err(SsavError::InvalidArgument("paths, steps and record interval must be positive".into()));
        }
        Ok(())
    }

    /// Runs one path, calling `visit` at every record step with the step index.
    pub fn run_path(&self, path: u64, mut visit: impl FnMut(usize, &AugmentedState)) -> Result<()> {
        let m = self.model.dim();
        let mut state = self.init.draw(self.model, self.density, self.seed, path)?;
        let plan = NoisePlan::uniform(self.seed, path, self.model.gamma(), m, self.h, self.n_steps as u64);
        let mut noise = CoupledNoise::direct(&plan);
        let mut buf = StepNoise::zeros(m);
        let mut stepper = SsavStepper::new(self.model, self.h)?;
        visit(0, &state);
        for n in 1..=self.n_steps {
            noise.fill(&mut buf);
            stepper.step(&mut state, &buf).map_err(|e| e.at_step(n - 1))?;
            if n % self.record_every == 0 || n == self.n_steps {
                visit(n, &state);
            }
        }
        Ok(())
    }

    /// Evaluates `observe` at every record step of every path and reduces in path order.
    pub fn stats(&self, n_obs: usize, observe: impl Fn(f64, &AugmentedState, &mut [f64]) + Sync) -> Result<EnsembleStats> {
        self.validate()?;
        let steps = record_steps(self.n_steps, self.record_every);
        let n_rec = steps.len();
        let per_path = map_paths(self.n_paths, |p| {
            let mut vals = vec![0.0; n_rec * n_obs];
            let mut r = 0;
            self.run_path(p, |n, s| {
                observe(n as f64 * self.h, s, &mut vals[r * n_obs..(r + 1) * n_obs]);
                r += 1;
            })?;
            Ok(vals)
        })?;
        let mut acc = vec![vec![MeanAcc::default(); n_obs]; n_rec];
        let mut overflow_paths = 0;
        for vals in &per_path {
            if vals.iter().any(|x| !x.is_finite()) {
                overflow_paths += 1;
            }
            for (r, row) in acc.iter_mut().enumerate() {
                for (j, a) in row.iter_mut().enumerate() {
                    let x = vals[r * n_obs + j];
                    if x.is_finite() {
                        a.push(x);
                    }
                }
            }
        }
        Ok(EnsembleStats {
            times: steps.iter().map(|&n| n as f64 * self.h).collect(),
            acc,
            overflow_paths,
        })
    }
}

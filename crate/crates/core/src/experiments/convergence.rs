//! Finite-horizon strong, weak and energy error against a fine reference run.
//!
//! Every coarse level and the reference see the same Brownian path: the fine
//! pairs of one path are streamed in chunks of one coarsest step and each level
//! composes its own step noise from them.

use serde::{Deserialize, Serialize};

use super::stats::{rms_with_stderr, MeanAcc};
use super::{map_paths, slope_fit, StudyConfig, TestFunction};
use crate::error::Result;
use crate::integrators::SsavStepper;
use crate::model::modified_energy;
use crate::noise::{NoisePlan, OuComposer, PairBlock, StepNoise};
use crate::sav::AugmentedState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub k: u32,
    pub h: f64,
    pub error: f64,
    pub stderr: f64,
}

/// Error table of one study, rows sorted by decreasing h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub name: String,
    pub rows: Vec<ErrorRow>,
    pub fitted_slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub n_paths: usize,
    /// Paths dropped because an observable overflowed.
    pub excluded_paths: usize,
    pub seed: u64,
    pub horizon: f64,
    pub k_ref: u32,
}

impl StudyResult {
    fn new(name: impl Into<String>, cfg: &StudyConfig, mut rows: Vec<ErrorRow>, n_paths: usize, excluded: usize) -> Self {
        rows.sort_by(|a, b| b.h.total_cmp(&a.h));
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.error)).collect();
        let fit = slope_fit(&pts).ok();
        Self {
            name: name.into(),
            rows,
            fitted_slope: fit.map(|f| f.slope),
            slope_stderr: fit.map(|f| f.stderr),
            n_paths,
            excluded_paths: excluded,
            seed: cfg.seed,
            horizon: cfg.horizon,
            k_ref: cfg.k_ref,
        }
    }
}

/// Endpoints X_N of every path at every level.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledEndpoints {
    /// Coarse levels in increasing order (decreasing h).
    pub levels: Vec<u32>,
    pub horizon: f64,
    /// `paths[p][i]` is the endpoint at `levels[i]`.
    pub paths: Vec<Vec<AugmentedState>>,
    /// `reference[p]` is the endpoint at the reference level.
    pub reference: Vec<AugmentedState>,
}

impl CoupledEndpoints {
    pub fn step(&self, level: usize) -> f64 {
        self.horizon / 2f64.powi(self.levels[level] as i32)
    }
}

struct Level<'m> {
    stepper: SsavStepper<'m>,
    composer: OuComposer,
    state: AugmentedState,
}

fn simulate_path(cfg: &StudyConfig, levels: &[u32], path: u64) -> Result<(Vec<AugmentedState>, AugmentedState)> {
    let model = &cfg.model;
    let m = model.dim();
    let fine = cfg.k_ref;
    let k_min = levels[0];
    let plan = NoisePlan::new(cfg.seed, path, model.gamma(), m, fine, cfg.horizon);
    let delta = plan.fine_step();
    let init = cfg.init.draw(model, cfg.density.as_ref(), cfg.seed, path)?;

    let mut runs = Vec::with_capacity(levels.len() + 1);
    for &k in levels.iter().chain(std::iter::once(&fine)) {
        let span = 1usize << (fine - k);
        runs.push(Level {
            stepper: SsavStepper::new(model, cfg.horizon / 2f64.powi(k as i32))?,
            composer: OuComposer::new(model.gamma(), delta, span),
            state: init.clone(),
        });
    }

    let chunk = 1usize << (fine - k_min);
    let mut block = PairBlock::new(m, chunk);
    let mut stream = plan.stream_from(0);
    let mut noise = StepNoise::zeros(m);
    for _ in 0..(1u64 << k_min) {
        stream.fill(&mut block);
        for run in runs.iter_mut() {
            let span = run.composer.span();
            for first in (0..chunk).step_by(span) {
                if span == 1 {
                    for c in 0..m {
                        noise.ou_integral[c] = block.j[first * m + c];
                    }
                } else {
                    run.composer.compose(&block, first, &mut noise.ou_integral);
                }
                run.stepper.step(&mut run.state, &noise)?;
            }
        }
    }
    let reference = runs.pop().expect("reference level").state;
    Ok((runs.into_iter().map(|r| r.state).collect(), reference))
}

/// Simulates every path at every coarse level and at the reference level on shared noise.
pub fn run_coupled(cfg: &StudyConfig) -> Result<CoupledEndpoints> {
    cfg.validate()?;
    let mut levels = cfg.k_range.clone();
    levels.sort_unstable();
    levels.dedup();
    let results = map_paths(cfg.n_paths, |p| simulate_path(cfg, &levels, p))?;
    let (paths, reference) = results.into_iter().unzip();
    Ok(CoupledEndpoints {
        levels,
        horizon: cfg.horizon,
        paths,
        reference,
    })
}

fn phase_distance(a: &AugmentedState, b: &AugmentedState) -> f64 {
    a.v.iter()
        .zip(&b.v)
        .chain(a.u.iter().zip(&b.u))
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// RMS over paths of |X_ref − X_k| in (v, u).
pub fn strong_from(cfg: &StudyConfig, ends: &CoupledEndpoints) -> StudyResult {
    let rows = (0..ends.levels.len())
        .map(|i| {
            let d: Vec<f64> = ends
                .paths
                .iter()
                .zip(&ends.reference)
                .map(|(p, r)| phase_distance(&p[i], r))
                .collect();
            let (error, stderr) = rms_with_stderr(&d);
            ErrorRow {
                k: ends.levels[i],
                h: ends.step(i),
                error,
                stderr,
            }
        })
        .collect();
    StudyResult::new("strong", cfg, rows, ends.reference.len(), 0)
}

/// RMS over paths of |𝓗(X_ref) − 𝓗(X_k)|.
pub fn energy_from(cfg: &StudyConfig, ends: &CoupledEndpoints) -> StudyResult {
    let model = &cfg.model;
    let e_ref: Vec<f64> = ends.reference.iter().map(|s| modified_energy(model, s)).collect();
    let rows = (0..ends.levels.len())
        .map(|i| {
            let d: Vec<f64> = ends
                .paths
                .iter()
                .zip(&e_ref)
                .map(|(p, er)| er - modified_energy(model, &p[i]))
                .collect();
            let (error, stderr) = rms_with_stderr(&d);
            ErrorRow {
                k: ends.levels[i],
                h: ends.step(i),
                error,
                stderr,
            }
        })
        .collect();
    StudyResult::new("energy", cfg, rows, ends.reference.len(), 0)
}

/// |E φ(X_ref) − E φ(X_k)| from paired differences; paths where φ overflows at any level are dropped.
pub fn weak_from(cfg: &StudyConfig, ends: &CoupledEndpoints, phi: &TestFunction) -> StudyResult {
    let n_levels = ends.levels.len();
    let mut diffs: Vec<MeanAcc> = vec![MeanAcc::default(); n_levels];
    let mut excluded = 0;
    for (p, r) in ends.paths.iter().zip(&ends.reference) {
        let fr = phi.eval_state(r);
        let fk: Vec<f64> = p.iter().map(|s| phi.eval_state(s)).collect();
        if !fr.is_finite() || fk.iter().any(|f| !f.is_finite()) {
            excluded += 1;
            continue;
        }
        for (acc, f) in diffs.iter_mut().zip(&fk) {
            acc.push(fr - f);
        }
    }
    if excluded > 0 {
        log::warn!("weak study {}: {excluded} paths overflowed and were excluded", phi.name);
    }
    let rows = diffs
        .iter()
        .enumerate()
        .map(|(i, acc)| ErrorRow {
            k: ends.levels[i],
            h: ends.step(i),
            error: acc.mean().abs(),
            stderr: acc.stderr(),
        })
        .collect();
    StudyResult::new(format!("weak:{}", phi.name), cfg, rows, ends.reference.len() - excluded, excluded)
}

pub fn strong_error_study(cfg: &StudyConfig) -> Result<StudyResult> {
    Ok(strong_from(cfg, &run_coupled(cfg)?))
}

/// One result per test function of the configuration.
pub fn weak_error_study(cfg: &StudyConfig) -> Result<Vec<StudyResult>> {
    let ends = run_coupled(cfg)?;
    Ok(cfg.test_functions.iter().map(|f| weak_from(cfg, &ends, f)).collect())
}

pub fn energy_error_study(cfg: &StudyConfig) -> Result<StudyResult> {
    Ok(energy_from(cfg, &run_coupled(cfg)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::run_trajectory;
    use crate::integrators::Method;
    use crate::model::presets;
    use crate::noise::CoupledNoise;

    fn small_cfg() -> StudyConfig {
        let (m, d) = presets::gaussian_mixture();
        let mut cfg = StudyConfig::benchmark(m, Some(d));
        cfg.k_range = vec![2, 3, 4];
        cfg.k_ref = 6;
        cfg.n_paths = 4;
        cfg.seed = 3;
        cfg
    }

    #[test]
    fn coupled_levels_match_standalone_trajectories() {
        let cfg = small_cfg();
        let ends = run_coupled(&cfg).unwrap();
        let init = cfg.init.draw(&cfg.model, None, cfg.seed, 2).unwrap();
        for (i, &k) in ends.levels.iter().enumerate() {
            let plan = NoisePlan::new(cfg.seed, 2, cfg.model.gamma(), 1, cfg.k_ref, 1.0);
            let mut noise = CoupledNoise::new(&plan, 1 << (cfg.k_ref - k));
            let n = 1usize << k;
            let rec = run_trajectory(&cfg.model, &init, 1.0 / n as f64, n, Method::Ssav, &mut noise, n).unwrap();
            assert_eq!(rec.states.last().unwrap(), &ends.paths[2][i], "level {k}");
        }
    }

    #[test]
    fn rows_sorted_by_decreasing_h() {
        let cfg = small_cfg();
        let res = strong_error_study(&cfg).unwrap();
        let ks: Vec<u32> = res.rows.iter().map(|r| r.k).collect();
        assert_eq!(ks, vec![2, 3, 4]);
        assert!(res.rows.iter().all(|r| r.error > 0.0));
    }

    #[test]
    fn weak_with_constant_function_is_zero() {
        let mut cfg = small_cfg();
        cfg.test_functions = vec![TestFunction::constant(3.0)];
        let res = weak_error_study(&cfg).unwrap();
        assert!(res[0].rows.iter().all(|r| r.error == 0.0));
        assert_eq!(res[0].fitted_slope, None);
    }

    #[test]
    fn study_is_reproducible() {
        let cfg = small_cfg();
        assert_eq!(energy_error_study(&cfg).unwrap(), energy_error_study(&cfg).unwrap());
    }
}

//! Endpoint samples at a large time, their histograms, and Kolmogorov–Smirnov
//! distances to the invariant marginals.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{init_rng, map_paths, InitLaw};
use super::ensemble::steps_for;
use crate::error::{Result, SsavError};
use crate::integrators::{EmStepper, Method, SsavStepper};
use crate::model::{unit_f64, AnalyticDensity, ModelSpec};
use crate::noise::{CoupledNoise, NoisePlan, NoiseSource, StepNoise};
use crate::sav::AugmentedState;

/// Draws after this many proposals count as a sampler failure.
const MAX_PROPOSALS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
    /// Reference marginal density at the bin centre (NaN when unavailable).
    pub reference_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub coord: usize,
    pub bins: Vec<HistogramBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityResult {
    pub method: Method,
    pub horizon: f64,
    pub h: f64,
    pub seed: u64,
    /// State at T of every path in path order; EM states carry ρ = NaN.
    pub samples: Vec<AugmentedState>,
    /// Paths whose state became NaN or infinite.
    pub nan_count: usize,
    pub histograms: Vec<Histogram>,
    /// KS distance of each u-coordinate to its reference marginal, when one exists.
    pub ks: Vec<Option<f64>>,
}

impl DensityResult {
    pub fn max_ks(&self) -> Option<f64> {
        self.ks.iter().flatten().copied().reduce(f64::max)
    }
}

/// Exact two-sided KS statistic sup |F_n − F| of `samples` against `cdf`. Sorts in place.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 99% critical value 1.63/√n of the one-sample KS statistic.
pub fn ks_critical_99(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// One exact draw of u from the position marginal by rejection from the support box.
pub(crate) fn rejection_draw(density: &AnalyticDensity, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let m = density.dim();
    if m > 2 {
        return Err(SsavError::InvalidArgument(format!("no rejection sampler for dimension {m}")));
    }
    let env = density.u_envelope();
    let (lo, hi) = density.support();
    let mut u = vec![0.0; m];
    for _ in 0..MAX_PROPOSALS {
        for x in u.iter_mut() {
            *x = lo + (hi - lo) * unit_f64(rng);
        }
        if unit_f64(rng) * env < density.marginal_u(&u) {
            return Ok(u);
        }
    }
    Err(SsavError::InvalidArgument("rejection sampler made no progress".into()))
}

/// `n` independent draws of u from the invariant position marginal.
pub fn rejection_sample_u(density: &AnalyticDensity, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = init_rng(seed, u64::MAX);
    (0..n).map(|_| rejection_draw(density, &mut rng)).collect()
}

#[allow(clippy::too_many_arguments)]
fn run_to_end(model: &ModelSpec, density: Option<&AnalyticDensity>, method: Method, init: &InitLaw, h: f64, n_steps: usize, seed: u64, path: u64) -> Result<AugmentedState> {
    let m = model.dim();
    let mut state = init.draw(model, density, seed, path)?;
    let plan = NoisePlan::uniform(seed, path, model.gamma(), m, h, n_steps as u64);
    let mut noise = CoupledNoise::direct(&plan);
    let mut buf = StepNoise::zeros(m);
    match method {
        Method::Ssav => {
            let mut stepper = SsavStepper::new(model, h)?;
            for n in 0..n_steps {
                noise.fill(&mut buf);
                stepper.step(&mut state, &buf).map_err(|e| e.at_step(n))?;
            }
        }
        Method::Em => {
            state.rho = f64::NAN;
            let mut stepper = EmStepper::new(model, h)?;
            for _ in 0..n_steps {
                noise.fill(&mut buf);
                if !stepper.step(&mut state.v, &mut state.u, &buf) {
                    break;
                }
            }
        }
    }
    Ok(state)
}

fn diverged(s: &AugmentedState) -> bool {
    !s.v.iter().chain(&s.u).all(|x| x.is_finite())
}

/// Histogram of one u-coordinate over `[lo, hi)` with the reference density at bin centres.
pub fn histogram(values: &[f64], coord: usize, lo: f64, hi: f64, bins: usize, reference: Option<&dyn Fn(f64) -> f64>) -> Histogram {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in values {
        if x >= lo && x < hi {
            counts[(((x - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let left = lo + i as f64 * width;
            let right = left + width;
            HistogramBin {
                bin_left: left,
                bin_right: right,
                count,
                reference_density: reference.map_or(f64::NAN, |p| p(0.5 * (left + right))),
            }
        })
        .collect();
    Histogram { coord, bins }
}

/// Runs `n_paths` independent paths to time T and compares their u-marginals with the reference.
#[allow(clippy::too_many_arguments)]
pub fn density_study(
    model: &ModelSpec,
    density: Option<&AnalyticDensity>,
    method: Method,
    init: &InitLaw,
    horizon: f64,
    h: f64,
    n_paths: usize,
    seed: u64,
    bins: usize,
) -> Result<DensityResult> {
    if n_paths == 0 || bins == 0 {
        return Err(SsavError::InvalidArgument("paths and bins must be positive".into()));
    }
    let n_steps = steps_for(horizon, h)?;
    let samples = map_paths(n_paths, |p| run_to_end(model, density, method, init, h, n_steps, seed, p))?;
    let nan_count = samples.iter().filter(|s| diverged(s)).count();
    if nan_count > 0 {
        log::info!("{nan_count} of {n_paths} paths diverged");
    }
    let finite: Vec<&AugmentedState> = samples.iter().filter(|s| !diverged(s)).collect();

    let m = model.dim();
    let mut histograms = Vec::with_capacity(m);
    let mut ks = Vec::with_capacity(m);
    for c in 0..m {
        let mut xs: Vec<f64> = finite.iter().map(|s| s.u[c]).collect();
        let reference = density.filter(|d| d.dim() <= 2 && d.normalizer_u().is_some());
        let (lo, hi) = match reference {
            Some(d) => d.support(),
            None => xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x))),
        };
        let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        match reference {
            Some(d) => {
                let p = d.u_coordinate_density(c)?;
                histograms.push(histogram(&xs, c, lo, hi, bins, Some(&p)));
                let cdf = d.u_coordinate_cdf(c)?;
                ks.push(Some(if xs.is_empty() { 1.0 } else { ks_statistic(&mut xs, |x| cdf.eval(x)) }));
            }
            None => {
                histograms.push(histogram(&xs, c, lo, hi, bins, None));
                ks.push(None);
            }
        }
    }
    Ok(DensityResult {
        method,
        horizon,
        h,
        seed,
        samples,
        nan_count,
        histograms,
        ks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn ks_of_uniform_grid() {
        let mut xs: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        let d = ks_statistic(&mut xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.05).abs() < 1e-12);
        let mut one = vec![0.0];
        assert_eq!(ks_statistic(&mut one, |x| x.clamp(0.0, 1.0)), 1.0);
    }

    #[test]
    fn critical_value() {
        assert!((ks_critical_99(5000) - 0.02305).abs() < 1e-4);
    }

    #[test]
    fn rejection_samples_match_their_reference() {
        let (_, d) = presets::gaussian_mixture();
        let cdf = d.u_coordinate_cdf(0).unwrap();
        let mut xs: Vec<f64> = rejection_sample_u(&d, 5000, 7).unwrap().into_iter().map(|u| u[0]).collect();
        let mean = xs.iter().sum::<f64>() / 5000.0;
        // E u = ι/3 − 2ι/3 = −1/3
        assert!((mean + 1.0 / 3.0).abs() < 0.05, "{mean}");
        assert!(ks_statistic(&mut xs, |x| cdf.eval(x)) <= ks_critical_99(5000));
    }

    #[test]
    fn histogram_counts_everything_in_range() {
        let xs = [0.0, 0.1, 0.5, 0.99, 1.0, -3.0];
        let hist = histogram(&xs, 0, 0.0, 1.0, 4, Some(&|_| 1.0));
        let counts: Vec<usize> = hist.bins.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![2, 0, 1, 1]);
        assert_eq!(hist.bins[3].bin_right, 1.0);
    }

    #[test]
    fn em_divergence_is_counted_not_raised() {
        let (m, d) = presets::gaussian_mixture();
        let init = InitLaw::unit_diagonal(1);
        // linear growth factor ≈ 1.118 per step: overflow after about 6400 steps
        let res = density_study(&m, Some(&d), Method::Em, &init, 2000.0, 0.25, 4, 0, 10).unwrap();
        assert_eq!(res.nan_count, 4);
        assert_eq!(res.ks, vec![Some(1.0)]);
        assert!(res.samples.iter().all(|s| s.rho.is_nan()));
        let short = density_study(&m, Some(&d), Method::Em, &init, 50.0, 0.25, 20, 0, 10).unwrap();
        assert!(short.max_ks().unwrap() > 0.2);
        let ssav = density_study(&m, Some(&d), Method::Ssav, &init, 50.0, 0.25, 20, 0, 10).unwrap();
        assert_eq!(ssav.nan_count, 0);
    }
}

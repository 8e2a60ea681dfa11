use std::path::Path;

use serde::Serialize;
use ssav::config::{LoadedModel, ModelConfig};
use ssav::experiments::output::{
    write_convergence_csv, write_histogram_csv, write_json, write_longtime_csv, write_samples_csv, write_series_csv,
    write_trajectory_csv,
};
use ssav::experiments::{
    density_study, energy_evolution_study, energy_from, energy_identity_suite, exp_integrability_probe,
    ks_critical_99, longtime_weak_study, moment_growth_study, oracle_agreement_suite, run_coupled, strong_from,
    weak_from, InitLaw, StateSampler, StudyConfig, StudyResult, TestFunction,
};
use ssav::model::{default_floor_probes, floor_check_raw, grad_check, random_probes};
use ssav::noise::{CoupledNoise, NoisePlan};
use ssav::{run_trajectory, AnalyticDensity, ModelSpec, SsavError};

use crate::manifest::{read_config, Failure, RunManifest, Verdict};
use crate::{CheckArgs, SampleArgs, SimulateArgs, StudyArgs, StudyKind};

/// Slopes are only judged with at least this many levels.
const MIN_VERDICT_LEVELS: usize = 5;
const STRONG_WINDOW: (f64, f64) = (0.85, 1.15);
const WEAK_WINDOW: (f64, f64) = (0.7, 1.3);
const GRAD_TOL: f64 = 1e-6;
const IDENTITY_TOL: f64 = 1e-10;
const ORACLE_TOL: f64 = 1e-10;
const RHO_IDENTITY_TOL: f64 = 1e-12;
const ORACLE_CASES: usize = 10_000;
/// Absolute slack on the long-time error at t_max.
const LONGTIME_ERROR: f64 = 0.02;
/// Extra room above p for the fitted moment growth exponent.
const MOMENT_SLACK: f64 = 0.3;

fn build(config: &ModelConfig) -> Result<LoadedModel, Failure> {
    config.build().map_err(|e| match e {
        SsavError::InvalidModel(s) | SsavError::Config(s) => Failure::Usage(s),
        other => other.into(),
    })
}

pub fn check(args: &CheckArgs, seed: u64) -> Result<Verdict, Failure> {
    let config = read_config(&args.config)?;
    let (potential, _) = config.potential().map_err(|e| Failure::Usage(e.to_string()))?;
    let floor = floor_check_raw(potential.as_ref(), &config.params(), &default_floor_probes(config.dim, seed))?;
    if !floor.ok {
        return Err(Failure::Assumption(SsavError::AssumptionViolation {
            u: floor.argmin,
            radicand: floor.min_value,
            step: None,
        }));
    }
    let model = build(&config)?.model;
    let mut manifest = RunManifest::start(Some(config.clone()), seed);

    let probes = random_probes(model.dim(), 1000, -3.0, 3.0, seed);
    let grad = grad_check(model.potential(), &probes, 1e-5)?;
    let h_set: Vec<f64> = (0..=10).map(|k| 2f64.powi(-k)).collect();
    let sampler = StateSampler::default();
    let identity = energy_identity_suite(&model, args.cases, &sampler, &h_set, seed)?;
    let oracle = oracle_agreement_suite(&model, ORACLE_CASES, &sampler, 1.0 / 16.0, 1e-13, seed)?;

    let rows = [
        ("gradient", grad, GRAD_TOL),
        ("sav_floor", floor.min_value, 1.0),
        ("energy_identity", identity, IDENTITY_TOL),
        ("explicit_vs_implicit", oracle.max_diff, ORACLE_TOL),
        ("rho_identity", oracle.max_rho_identity, RHO_IDENTITY_TOL),
    ];
    println!("{:<22} {:>14} {:>12}  verdict", "check", "value", "threshold");
    for (name, value, tol) in rows {
        // the floor is a lower bound, the rest are upper bounds
        let ok = if name == "sav_floor" { value >= tol } else { value <= tol };
        let v = manifest.verdict(name, Verdict::from_bool(ok));
        println!("{name:<22} {value:>14.3e} {tol:>12.1e}  {v}");
    }
    match &args.out {
        Some(dir) => manifest.finish(dir),
        None => manifest.finish_stdout(),
    }
}

fn slope_verdict(res: &StudyResult, window: (f64, f64)) -> Verdict {
    if res.rows.len() < MIN_VERDICT_LEVELS {
        return Verdict::Inconclusive;
    }
    match res.fitted_slope {
        Some(s) => Verdict::from_bool(s >= window.0 && s <= window.1),
        None => Verdict::Inconclusive,
    }
}

fn print_study(res: &StudyResult, v: Verdict) {
    println!("{:>4} {:>14} {:>14} {:>12}", "k", "h", "error", "stderr");
    for r in &res.rows {
        println!("{:>4} {:>14.6e} {:>14.6e} {:>12.3e}", r.k, r.h, r.error, r.stderr);
    }
    match (res.fitted_slope, res.slope_stderr) {
        (Some(s), Some(se)) => println!("{}: slope {s:.4} ± {se:.4}  {v}", res.name),
        _ => println!("{}: no slope  {v}", res.name),
    }
    if res.rows.len() < MIN_VERDICT_LEVELS {
        println!("note: fewer than {MIN_VERDICT_LEVELS} levels, slope reported without verdict");
    }
}

#[derive(Serialize)]
struct Sidecar<'a, T: Serialize> {
    result: &'a T,
    verdict: Verdict,
}

fn functions(names: &[String], default: Vec<TestFunction>) -> Result<Vec<TestFunction>, Failure> {
    if names.is_empty() {
        return Ok(default);
    }
    names
        .iter()
        .map(|n| TestFunction::by_name(n).ok_or_else(|| Failure::Usage(format!("unknown test function {n:?}"))))
        .collect()
}

fn steps_between(h: f64, every: Option<usize>, per_unit: f64) -> usize {
    every.unwrap_or_else(|| ((1.0 / per_unit) / h).round().max(1.0) as usize)
}

pub fn study(args: &StudyArgs, seed: u64) -> Result<Verdict, Failure> {
    let config = read_config(&args.config)?;
    let loaded = build(&config)?;
    let mut manifest = RunManifest::start(Some(config), seed);
    let model = &loaded.model;
    let out = &args.out;
    let init = InitLaw::unit_diagonal(model.dim());

    match args.kind {
        StudyKind::Strong | StudyKind::Energy | StudyKind::Weak => {
            let mut cfg = StudyConfig::benchmark(model.clone(), loaded.density.clone());
            cfg.seed = seed;
            cfg.horizon = args.horizon.unwrap_or(1.0);
            if let Some(r) = args.k_range {
                cfg.k_range = (r.0..=r.1).collect();
            }
            if let Some(k) = args.k_ref {
                cfg.k_ref = k;
            }
            let weak = args.kind == StudyKind::Weak;
            cfg.n_paths = args.paths.unwrap_or(if weak { 5000 } else { 1000 });
            cfg.test_functions = functions(&args.functions, TestFunction::finite_time_set())?;
            let ends = run_coupled(&cfg)?;
            let results: Vec<StudyResult> = match args.kind {
                StudyKind::Strong => vec![strong_from(&cfg, &ends)],
                StudyKind::Energy => vec![energy_from(&cfg, &ends)],
                _ => cfg.test_functions.iter().map(|f| weak_from(&cfg, &ends, f)).collect(),
            };
            let window = if weak { WEAK_WINDOW } else { STRONG_WINDOW };
            for (i, res) in results.iter().enumerate() {
                let stem = if weak { format!("weak_phi{}", i + 1) } else { res.name.clone() };
                let v = manifest.verdict(&res.name, slope_verdict(res, window));
                print_study(res, v);
                write_convergence_csv(&manifest.output(out.join(format!("{stem}.csv"))), res)?;
                write_json(&manifest.output(out.join(format!("{stem}.json"))), &Sidecar { result: res, verdict: v })?;
            }
        }
        StudyKind::EnergyEvolution => {
            let h = args.h.unwrap_or(1.0 / 64.0);
            let horizon = args.horizon.unwrap_or(10.0);
            let every = steps_between(h, args.record_every, 4.0);
            let res = energy_evolution_study(model, &init, h, horizon, args.paths.unwrap_or(5000), seed, every)?;
            let v = manifest.verdict("energy_law", Verdict::from_bool(res.passes()));
            let last = res.rows.last().expect("rows");
            println!(
                "E[H](T) = {:.6} ± {:.2e}, bound {:.6}, flagged times: {}  {v}",
                last.value,
                last.stderr,
                last.bound,
                res.flagged.len()
            );
            write_series_csv(&manifest.output(out.join("energy_evolution.csv")), &res.rows)?;
            write_json(&manifest.output(out.join("energy_evolution.json")), &Sidecar { result: &res, verdict: v })?;
        }
        StudyKind::Moments => {
            let h = args.h.unwrap_or(1.0 / 64.0);
            let horizon = args.horizon.unwrap_or(50.0);
            let p_list = if args.p.is_empty() { vec![1, 2] } else { args.p.clone() };
            let every = steps_between(h, args.record_every, 1.0);
            let res = moment_growth_study(model, &init, &p_list, horizon, h, args.paths.unwrap_or(2000), seed, every)?;
            for r in &res {
                let ok = r.exponent_at_most(r.p as f64 + MOMENT_SLACK) && r.flagged.is_empty();
                let v = manifest.verdict(format!("moment_p{}", r.p), Verdict::from_bool(ok));
                match r.exponent {
                    Some(e) => println!("p = {}: growth exponent {e:.3}  {v}", r.p),
                    None => println!("p = {}: no growth above the initial moment  {v}", r.p),
                }
                write_series_csv(&manifest.output(out.join(format!("moments_p{}.csv", r.p))), &r.rows)?;
            }
            write_json(&manifest.output(out.join("moments.json")), &res)?;
        }
        StudyKind::Expint => {
            let h = args.h.unwrap_or(1.0 / 64.0);
            let horizon = args.horizon.unwrap_or(5.0);
            let delta = args.delta.unwrap_or(1e-3);
            let lambda = args.lambda.unwrap_or(delta * model.noise().frobenius_norm().powi(2));
            let every = steps_between(h, args.record_every, 2.0);
            let res = exp_integrability_probe(model, &init, delta, lambda, horizon, h, args.paths.unwrap_or(10_000), seed, every)?;
            let v = match res.passes() {
                Some(ok) => Verdict::from_bool(ok),
                None => Verdict::Inconclusive,
            };
            let v = manifest.verdict("exp_integrability", v);
            let worst = res.rows.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
            println!(
                "max mean {worst:.6} vs bound {:.6}, overflow paths {}  {v}",
                res.rows[0].bound, res.overflow_paths
            );
            write_series_csv(&manifest.output(out.join("expint.csv")), &res.rows)?;
            write_json(&manifest.output(out.join("expint.json")), &Sidecar { result: &res, verdict: v })?;
        }
        StudyKind::Longtime => {
            let density = loaded
                .density
                .as_ref()
                .ok_or_else(|| Failure::Usage("long-time study needs a model with a known invariant density".into()))?;
            let h = args.h.unwrap_or(1.0 / 512.0);
            let t_max = args.horizon.unwrap_or(30.0);
            let every = steps_between(h, args.record_every, 16.0);
            let fs = functions(&args.functions, TestFunction::long_time_set())?;
            let res = longtime_weak_study(model, density, &init, h, t_max, args.paths.unwrap_or(5000), &fs, seed, every)?;
            for (i, c) in res.curves.iter().enumerate() {
                let end = c.at(t_max);
                let (head, head_se) = c.window(0.0, t_max / 15.0);
                let (tail, tail_se) = c.window(2.0 * t_max / 3.0, t_max);
                let ok = end.error <= LONGTIME_ERROR + 3.0 * end.stderr
                    && tail <= head + 3.0 * head_se.hypot(tail_se);
                let v = manifest.verdict(format!("longtime:{}", c.name), Verdict::from_bool(ok));
                println!(
                    "{}: truth {:.6}, error at T {:.4} ± {:.4}, head {head:.4}, tail {tail:.4}  {v}",
                    c.name, c.truth, end.error, end.stderr
                );
                write_longtime_csv(&manifest.output(out.join(format!("longtime_phi{}.csv", i + 1))), c)?;
            }
            write_json(&manifest.output(out.join("longtime.json")), &res)?;
        }
    }
    let verdict = manifest.overall();
    manifest.finish(out)?;
    Ok(verdict)
}

pub fn sample(args: &SampleArgs, seed: u64) -> Result<Verdict, Failure> {
    let config = read_config(&args.config)?;
    let loaded = build(&config)?;
    let mut manifest = RunManifest::start(Some(config), seed);
    let model = &loaded.model;
    let init = InitLaw::unit_diagonal(model.dim());
    let res = density_study(
        model,
        loaded.density.as_ref(),
        args.method,
        &init,
        args.horizon,
        args.h,
        args.paths,
        seed,
        args.bins,
    )?;
    let out = &args.out;
    write_samples_csv(&manifest.output(out.join("samples.csv")), &res.samples)?;
    for hist in &res.histograms {
        write_histogram_csv(&manifest.output(out.join(format!("histogram_u{}.csv", hist.coord))), hist)?;
    }
    println!("method {:?}, paths {}, diverged {}", args.method, args.paths, res.nan_count);
    if args.paths >= 2 {
        for (c, ks) in res.ks.iter().enumerate() {
            if let Some(ks) = ks {
                println!("KS(u_{c}) = {ks:.5} (99% critical value {:.5})", ks_critical_99(args.paths));
            }
        }
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        method: ssav::Method,
        horizon: f64,
        h: f64,
        paths: usize,
        nan_count: usize,
        ks: &'a [Option<f64>],
        ks_critical_99: f64,
    }
    let summary = Summary {
        method: args.method,
        horizon: args.horizon,
        h: args.h,
        paths: args.paths,
        nan_count: res.nan_count,
        ks: if args.paths >= 2 { &res.ks } else { &[] },
        ks_critical_99: ks_critical_99(args.paths),
    };
    write_json(&manifest.output(out.join("sample.json")), &summary)?;
    // divergence is data, not failure
    manifest.finish(out)
}

fn simulate_model(model: &ModelSpec, density: Option<&AnalyticDensity>, args: &SimulateArgs, seed: u64) -> Result<ssav::TrajectoryRecord, Failure> {
    let n = (args.horizon / args.h).round();
    if !(n >= 1.0) || (n * args.h - args.horizon).abs() > 1e-9 * args.horizon {
        return Err(Failure::Usage(format!("T = {} is not a multiple of h = {}", args.horizon, args.h)));
    }
    let init = InitLaw::unit_diagonal(model.dim()).draw(model, density, seed, 0)?;
    let plan = NoisePlan::uniform(seed, 0, model.gamma(), model.dim(), args.h, n as u64);
    let mut noise = CoupledNoise::direct(&plan);
    Ok(run_trajectory(model, &init, args.h, n as usize, args.method, &mut noise, args.record_every)?)
}

pub fn simulate(args: &SimulateArgs, seed: u64) -> Result<Verdict, Failure> {
    let config = read_config(&args.config)?;
    let loaded = build(&config)?;
    let mut manifest = RunManifest::start(Some(config), seed);
    let rec = simulate_model(&loaded.model, loaded.density.as_ref(), args, seed)?;
    let out: &Path = &args.out;
    write_trajectory_csv(&manifest.output(out.join("trajectory.csv")), &rec)?;
    let last = rec.states.last().expect("at least the initial state");
    println!("recorded {} states; final u = {:?}", rec.states.len(), last.u);
    if let Some(n) = rec.diverged_at {
        println!("diverged at step {n}");
    }
    manifest.finish(out)
}

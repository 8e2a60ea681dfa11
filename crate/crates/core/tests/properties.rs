use proptest::prelude::*;
use ssav::experiments::{ks_statistic, slope_fit, MeanAcc};
use ssav::integrators::{ORACLE_MAX_ITER, ORACLE_TOL};
use ssav::model::presets;
use ssav::noise::{CoupledNoise, NoisePlan, OuCoefficients};
use ssav::{
    hamiltonian, i_factor, modified_energy, ou_substep, q_vector, run_trajectory, ssav_deterministic_substep,
    ssav_implicit_oracle, AugmentedState, Method, ModelSpec, StepNoise,
};

fn models() -> Vec<ModelSpec> {
    vec![
        presets::gaussian_mixture().0,
        presets::double_well(1).0,
        presets::double_well(2).0,
        presets::bimodal().0,
    ]
}

/// A state of dimension `dim` whose ρ sits near its initial value.
fn state(model: &ModelSpec, v: &[f64], u: &[f64], jitter: f64) -> AugmentedState {
    let mut s = AugmentedState::initial(model, v.to_vec(), u.to_vec()).unwrap();
    s.rho += jitter;
    s
}

fn coords(n: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, n)
}

fn case() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>, f64)> {
    (0..4usize).prop_flat_map(|i| {
        let m = models()[i].dim();
        (Just(i), coords(m, 3.0), coords(m, 2.0), -0.1..0.1f64)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn substep_preserves_modified_energy((i, v, u, jitter) in case(), k in 0i32..=10) {
        let model = &models()[i];
        let h = 2f64.powi(-k);
        let s = state(model, &v, &u, jitter);
        let next = ssav_deterministic_substep(model, &s, h).unwrap();
        let (e0, e1) = (modified_energy(model, &s), modified_energy(model, &next));
        prop_assert!(((e1 - e0) / e0).abs() <= 1e-10, "{} -> {}", e0, e1);
    }

    #[test]
    fn rho_update_is_twice_the_factor((i, v, u, jitter) in case(), h in 1e-4..0.5f64) {
        let model = &models()[i];
        let s = state(model, &v, &u, jitter);
        let q = q_vector(model, &s.u).unwrap();
        let big_i = i_factor(model, &s, &q, h);
        let next = ssav_deterministic_substep(model, &s, h).unwrap();
        prop_assert!((next.rho + s.rho - 2.0 * big_i).abs() <= 1e-12 * (2.0 * big_i).abs());
    }

    #[test]
    fn explicit_substep_solves_the_implicit_system((i, v, u, jitter) in case(), h in 1e-4..0.0625f64) {
        let model = &models()[i];
        let s = state(model, &v, &u, jitter);
        let explicit = ssav_deterministic_substep(model, &s, h).unwrap();
        let implicit = ssav_implicit_oracle(model, &s, h, ORACLE_TOL, ORACLE_MAX_ITER).unwrap().state;
        let diff = explicit.v.iter().zip(&implicit.v)
            .chain(explicit.u.iter().zip(&implicit.u))
            .map(|(a, b)| (a - b).abs())
            .fold((explicit.rho - implicit.rho).abs(), f64::max);
        prop_assert!(diff <= 1e-10, "diff {}", diff);
    }

    #[test]
    fn fresh_state_energy_is_the_hamiltonian((i, v, u, _j) in case()) {
        let model = &models()[i];
        let s = state(model, &v, &u, 0.0);
        let want = hamiltonian(model, &v, &u);
        prop_assert!((modified_energy(model, &s) - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn ou_substep_is_decay_plus_scaled_integral(v in -5.0..5.0f64, j in -3.0..3.0f64, h in 1e-4..1.0f64) {
        let model = presets::gaussian_mixture().0;
        let noise = StepNoise { ou_integral: vec![j], wiener_increment: vec![0.0] };
        let out = ou_substep(&model, &[v], h, &noise).unwrap();
        let want = (-model.gamma() * h).exp() * v + 2.0 * j;
        prop_assert!((out[0] - want).abs() <= 1e-14 * (1.0 + want.abs()));
    }

    #[test]
    fn random_access_matches_streaming(seed in any::<u64>(), path in 0u64..1000, start in 0u64..64) {
        let plan = NoisePlan::new(seed, path, 1.0, 3, 8, 1.0);
        let mut stream = plan.stream_from(start);
        for interval in start..start + 4 {
            for c in 0..3 {
                prop_assert_eq!(stream.next_pair(), plan.fine_pair(interval, c));
            }
        }
    }

    #[test]
    fn ou_integrals_compose_over_adjacent_intervals(seed in any::<u64>(), a in 0u64..8, b in 1u64..8, c in 1u64..8) {
        let plan = NoisePlan::new(seed, 0, 0.7, 2, 5, 1.0);
        let d = plan.fine_step();
        let (ta, tb, tc) = (a as f64 * d, (a + b) as f64 * d, (a + b + c) as f64 * d);
        let whole = plan.compose_ou(ta, tc).unwrap();
        let left = plan.compose_ou(ta, tb).unwrap();
        let right = plan.compose_ou(tb, tc).unwrap();
        let decay = (-0.7 * (tc - tb)).exp();
        let w_whole = plan.compose_increment(ta, tc).unwrap();
        let w_left = plan.compose_increment(ta, tb).unwrap();
        let w_right = plan.compose_increment(tb, tc).unwrap();
        for k in 0..2 {
            let joined = decay * left[k] + right[k];
            prop_assert!((whole[k] - joined).abs() <= 1e-13 * (1.0 + whole[k].abs()));
            prop_assert!((w_whole[k] - w_left[k] - w_right[k]).abs() <= 1e-13 * (1.0 + w_whole[k].abs()));
        }
    }

    #[test]
    fn ou_variance_is_positive_and_below_the_step(gamma in 1e-6..10.0f64, h in 1e-8..10.0f64) {
        let c = OuCoefficients::new(gamma, h);
        prop_assert!(c.variance > 0.0 && c.variance <= h);
        prop_assert!(c.decay > 0.0 && c.decay < 1.0);
    }

    #[test]
    fn slope_fit_recovers_exact_power_laws(p in 0.2..3.0f64, scale in 1e-3..1e3f64, n in 3usize..9) {
        let rows: Vec<(f64, f64)> = (0..n).map(|k| {
            let h = 2f64.powi(-(k as i32) - 2);
            (h, scale * h.powf(p))
        }).collect();
        let fit = slope_fit(&rows).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-9);
        prop_assert_eq!(fit.used, n);
    }

    #[test]
    fn ks_statistic_is_a_distance(mut xs in prop::collection::vec(0.0..1.0f64, 1..200)) {
        let n = xs.len() as f64;
        let d = ks_statistic(&mut xs, |x| x.clamp(0.0, 1.0));
        prop_assert!(d >= 0.5 / n - 1e-15 && d <= 1.0);
    }

    #[test]
    fn welford_matches_two_pass(xs in prop::collection::vec(-1e3..1e3f64, 2..100)) {
        let acc = MeanAcc::from_iter(xs.iter().copied());
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        prop_assert!((acc.mean() - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
        prop_assert!((acc.variance() - var).abs() <= 1e-9 * (1.0 + var));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trajectories_are_reproducible(seed in any::<u64>(), path in 0u64..100) {
        let model = presets::double_well(2).0;
        let init = AugmentedState::initial(&model, vec![1.0, -1.0], vec![0.5, 0.5]).unwrap();
        let h = 1.0 / 64.0;
        let run = || {
            let plan = NoisePlan::uniform(seed, path, model.gamma(), 2, h, 128);
            run_trajectory(&model, &init, h, 128, Method::Ssav, &mut CoupledNoise::direct(&plan), 16).unwrap()
        };
        prop_assert_eq!(run(), run());
    }
}

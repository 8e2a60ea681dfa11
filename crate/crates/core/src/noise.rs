//! Seeded Brownian noise with exact Ornstein–Uhlenbeck integrals.
//!
//! Every fine interval i and coordinate c carries a raw pair (ΔW, J) where
//! ΔW = W(end_i) − W(start_i) and J = ∫ e^{−γ(end_i − s)} dW_s over the
//! interval. Per coordinate the pair is bivariate normal with covariance
//!
//! ```text
//! [ δ                 (1 − e^{−γδ})/γ     ]
//! [ (1 − e^{−γδ})/γ   (1 − e^{−2γδ})/(2γ) ]
//! ```
//!
//! The two underlying standard normals come from a ChaCha8 stream keyed by
//! (seed, path) and addressed by word position (interval, coordinate), so any
//! pair can be regenerated in isolation. ΔW uses only the first normal, which
//! keeps the Wiener path identical whether or not J is consumed. Coarse-step
//! noise is built from fine pairs, giving common random numbers across
//! stepsizes.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Result, SsavError};

/// u32 words consumed per (interval, coordinate): two u64 for one Box–Muller pair.
const WORDS_PER_PAIR: u128 = 4;

/// Raw (pre-Γ) noise for one step of the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct StepNoise {
    /// ∫ e^{−γ(t_{n+1}−s)} dW_s over the step, per coordinate.
    pub ou_integral: Vec<f64>,
    /// W(t_{n+1}) − W(t_n).
    pub wiener_increment: Vec<f64>,
}

impl StepNoise {
    pub fn zeros(dim: usize) -> Self {
        Self {
            ou_integral: vec![0.0; dim],
            wiener_increment: vec![0.0; dim],
        }
    }
}

/// e^{−γh} and the conditional variance (1 − e^{−2γh})/(2γ) of the OU substep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuCoefficients {
    pub decay: f64,
    pub variance: f64,
}

impl OuCoefficients {
    pub fn new(gamma: f64, h: f64) -> Self {
        Self {
            decay: (-gamma * h).exp(),
            variance: -(-2.0 * gamma * h).exp_m1() / (2.0 * gamma),
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Cholesky factor of the per-coordinate (ΔW, J) covariance over one fine interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLaw {
    pub delta: f64,
    pub gamma: f64,
    /// √δ
    sd_w: f64,
    /// Cov(ΔW, J)/√δ
    j_on_w: f64,
    /// √Var(J | ΔW)
    j_resid: f64,
    /// e^{−γδ}
    pub decay: f64,
}

impl PairLaw {
    pub fn new(gamma: f64, delta: f64) -> Self {
        let x = gamma * delta;
        let cov = delta * phi1(x);
        Self {
            delta,
            gamma,
            sd_w: delta.sqrt(),
            j_on_w: cov / delta.sqrt(),
            j_resid: (delta * residual_ratio(x)).max(0.0).sqrt(),
            decay: (-x).exp(),
        }
    }

    /// Var(ΔW), Cov(ΔW, J), Var(J).
    pub fn covariance(&self) -> (f64, f64, f64) {
        let x = self.gamma * self.delta;
        (
            self.delta,
            self.delta * phi1(x),
            self.delta * (-(-2.0 * x).exp_m1()) / (2.0 * x),
        )
    }

    #[inline]
    fn pair(&self, z_w: f64, z_r: f64) -> (f64, f64) {
        (self.sd_w * z_w, self.j_on_w * z_w + self.j_resid * z_r)
    }
}

/// (1 − e^{−x})/x, with the x → 0 limit handled.
fn phi1(x: f64) -> f64 {
    if x.abs() < 1e-300 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// Var(J | ΔW)/δ as a function of x = γδ:
/// (1 − e^{−2x})/(2x) − ((1 − e^{−x})/x)², which cancels badly for small x.
fn residual_ratio(x: f64) -> f64 {
    if x < 0.1 {
        const C: [f64; 8] = [
            1.0 / 12.0,
            -1.0 / 12.0,
            17.0 / 360.0,
            -7.0 / 360.0,
            43.0 / 6720.0,
            -107.0 / 60480.0,
            769.0 / 1_814_400.0,
            -163.0 / 1_814_400.0,
        ];
        let mut acc = 0.0;
        for c in C.iter().rev() {
            acc = acc * x + c;
        }
        acc * x * x
    } else {
        let a = -(-2.0 * x).exp_m1() / (2.0 * x);
        let b = phi1(x);
        a - b * b
    }
}

#[inline]
fn box_muller(a: u64, b: u64) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((a >> 11) + 1) as f64 * SCALE; // (0, 1]
    let u2 = (b >> 11) as f64 * SCALE; // [0, 1)
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

/// Fine-level noise for one path: the key plus the exact pair law.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePlan {
    pub seed: u64,
    pub path_index: u64,
    pub dim: usize,
    pub fine_level: u32,
    pub horizon: f64,
    n_fine: u64,
    law: PairLaw,
}

/// Noise plan with 2^L fine intervals over [0, T]. Pairs are generated on demand.
pub fn sample_fine_pairs(seed: u64, path_index: u64, gamma: f64, dim: usize, fine_level: u32, horizon: f64) -> NoisePlan {
    NoisePlan::new(seed, path_index, gamma, dim, fine_level, horizon)
}

/// Raw pair for one fine interval and coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinePair {
    pub dw: f64,
    pub j: f64,
}

impl NoisePlan {
    pub fn new(seed: u64, path_index: u64, gamma: f64, dim: usize, fine_level: u32, horizon: f64) -> Self {
        assert!(gamma > 0.0, "gamma must be positive");
        assert!(fine_level < 63, "fine level too deep");
        let n_fine = 1u64 << fine_level;
        Self::with_intervals(seed, path_index, gamma, dim, horizon / n_fine as f64, n_fine, fine_level)
    }

    /// Plan with `n` intervals of width `delta` (not necessarily a power of two); used for
    /// sampling runs that draw noise directly at the working stepsize.
    pub fn uniform(seed: u64, path_index: u64, gamma: f64, dim: usize, delta: f64, n: u64) -> Self {
        Self::with_intervals(seed, path_index, gamma, dim, delta, n, 0)
    }

    fn with_intervals(seed: u64, path_index: u64, gamma: f64, dim: usize, delta: f64, n: u64, level: u32) -> Self {
        Self {
            seed,
            path_index,
            dim,
            fine_level: level,
            horizon: delta * n as f64,
            n_fine: n,
            law: PairLaw::new(gamma, delta),
        }
    }

    pub fn fine_step(&self) -> f64 {
        self.law.delta
    }

    pub fn n_fine(&self) -> u64 {
        self.n_fine
    }

    pub fn gamma(&self) -> f64 {
        self.law.gamma
    }

    pub fn law(&self) -> &PairLaw {
        &self.law
    }

    fn rng_at(&self, interval: u64, coord: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.path_index);
        rng.set_word_pos((interval as u128 * self.dim as u128 + coord as u128) * WORDS_PER_PAIR);
        rng
    }

    /// Random access to one pair.
    pub fn fine_pair(&self, interval: u64, coord: usize) -> FinePair {
        let mut rng = self.rng_at(interval, coord);
        let (zw, zr) = box_muller(rng.next_u64(), rng.next_u64());
        let (dw, j) = self.law.pair(zw, zr);
        FinePair { dw, j }
    }

    /// Sequential reader starting at `interval`.
    pub fn stream_from(&self, interval: u64) -> PairStream {
        PairStream {
            rng: self.rng_at(interval, 0),
            law: self.law,
            dim: self.dim,
        }
    }

    fn interval_index(&self, t: f64) -> Result<u64> {
        let x = t / self.law.delta;
        let r = x.round();
        if !(x.is_finite() && (x - r).abs() <= 1e-9 * x.abs().max(1.0) && r >= 0.0 && r <= self.n_fine as f64) {
            return Err(SsavError::Alignment { start: t, end: t });
        }
        Ok(r as u64)
    }

    fn aligned(&self, t_a: f64, t_c: f64) -> Result<(u64, u64)> {
        let misaligned = || SsavError::Alignment { start: t_a, end: t_c };
        let a = self.interval_index(t_a).map_err(|_| misaligned())?;
        let c = self.interval_index(t_c).map_err(|_| misaligned())?;
        if a >= c {
            return Err(misaligned());
        }
        Ok((a, c))
    }

    fn block(&self, a: u64, c: u64) -> PairBlock {
        let mut block = PairBlock::new(self.dim, (c - a) as usize);
        self.stream_from(a).fill(&mut block);
        block
    }

    /// Raw ∫_{t_a}^{t_c} e^{−γ(t_c − s)} dW_s = Σ_i e^{−γ(t_c − end_i)} J_i; multiply by Γ to use.
    pub fn compose_ou(&self, t_a: f64, t_c: f64) -> Result<Vec<f64>> {
        let (a, c) = self.aligned(t_a, t_c)?;
        let block = self.block(a, c);
        let composer = OuComposer::new(self.law.gamma, self.law.delta, block.len());
        let mut out = vec![0.0; self.dim];
        composer.compose(&block, 0, &mut out);
        Ok(out)
    }

    /// W(t_c) − W(t_a) as the sum of the fine increments.
    pub fn compose_increment(&self, t_a: f64, t_c: f64) -> Result<Vec<f64>> {
        let (a, c) = self.aligned(t_a, t_c)?;
        let block = self.block(a, c);
        let mut out = vec![0.0; self.dim];
        sum_increments(&block, 0, block.len(), &mut out);
        Ok(out)
    }
}

/// Sequential pair generator; advancing it is equivalent to random access in order.
#[derive(Debug, Clone)]
pub struct PairStream {
    rng: ChaCha8Rng,
    law: PairLaw,
    dim: usize,
}

impl PairStream {
    #[inline]
    pub fn next_pair(&mut self) -> FinePair {
        let (zw, zr) = box_muller(self.rng.next_u64(), self.rng.next_u64());
        let (dw, j) = self.law.pair(zw, zr);
        FinePair { dw, j }
    }

    /// Overwrites `block` with the next `block.len()` intervals.
    pub fn fill(&mut self, block: &mut PairBlock) {
        for k in 0..block.len() * self.dim {
            let p = self.next_pair();
            block.dw[k] = p.dw;
            block.j[k] = p.j;
        }
    }
}

/// Interval-major buffer of fine pairs: entry (i, c) lives at i·m + c.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBlock {
    dim: usize,
    pub dw: Vec<f64>,
    pub j: Vec<f64>,
}

impl PairBlock {
    pub fn new(dim: usize, intervals: usize) -> Self {
        Self {
            dim,
            dw: vec![0.0; dim * intervals],
            j: vec![0.0; dim * intervals],
        }
    }

    pub fn len(&self) -> usize {
        self.dw.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.dw.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

/// Precomputed weights e^{−γδ(K−1−j)} for composing K fine OU integrals.
#[derive(Debug, Clone)]
pub struct OuComposer {
    weights: Vec<f64>,
}

impl OuComposer {
    pub fn new(gamma: f64, delta: f64, k: usize) -> Self {
        let weights = (0..k)
            .map(|j| (-gamma * delta * (k - 1 - j) as f64).exp())
            .collect();
        Self { weights }
    }

    pub fn span(&self) -> usize {
        self.weights.len()
    }

    /// Composes intervals `first .. first + span` of `block`, summing in increasing time.
    pub fn compose(&self, block: &PairBlock, first: usize, out: &mut [f64]) {
        let m = block.dim;
        for (c, o) in out.iter_mut().enumerate() {
            let mut acc = Compensated::default();
            for (j, w) in self.weights.iter().enumerate() {
                acc.add(w * block.j[(first + j) * m + c]);
            }
            *o = acc.value();
        }
    }
}

/// Σ ΔW over intervals `first .. first + count` of `block`, compensated.
pub fn sum_increments(block: &PairBlock, first: usize, count: usize, out: &mut [f64]) {
    let m = block.dim;
    for (c, o) in out.iter_mut().enumerate() {
        let mut acc = Compensated::default();
        for j in first..first + count {
            acc.add(block.dw[j * m + c]);
        }
        *o = acc.value();
    }
}

/// Sequential supplier of per-step noise for a trajectory.
pub trait NoiseSource {
    fn fill(&mut self, noise: &mut StepNoise);
}

/// No forcing at all; turns a trajectory into the deterministic damped flow.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn fill(&mut self, noise: &mut StepNoise) {
        noise.ou_integral.fill(0.0);
        noise.wiener_increment.fill(0.0);
    }
}

/// Step noise at stepsize `ratio · δ` composed from a plan's fine pairs.
#[derive(Debug, Clone)]
pub struct CoupledNoise {
    stream: PairStream,
    block: PairBlock,
    composer: OuComposer,
}

impl CoupledNoise {
    /// `ratio` fine intervals per step, starting at fine interval 0.
    pub fn new(plan: &NoisePlan, ratio: usize) -> Self {
        assert!(ratio >= 1);
        Self {
            stream: plan.stream_from(0),
            block: PairBlock::new(plan.dim, ratio),
            composer: OuComposer::new(plan.gamma(), plan.fine_step(), ratio),
        }
    }

    /// Noise drawn directly at the working stepsize (one fine interval per step).
    pub fn direct(plan: &NoisePlan) -> Self {
        Self::new(plan, 1)
    }
}

impl NoiseSource for CoupledNoise {
    fn fill(&mut self, noise: &mut StepNoise) {
        self.stream.fill(&mut self.block);
        self.composer.compose(&self.block, 0, &mut noise.ou_integral);
        let k = self.block.len();
        sum_increments(&self.block, 0, k, &mut noise.wiener_increment);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn residual_variance_matches_high_precision_values() {
        // mpmath, 40 digits
        for (x, want) in [
            (1e-6, 8.333_325_000_004_721_5e-14),
            (1e-3, 8.325_004_720_278_418e-8),
            (0.05, 1.982_058_277_822_758e-4),
            (0.1, 7.545_340_038_194_726e-4),
            (1.0, 3.275_595_748_796_560_5e-2),
            (5.0, 6.053_267_976_976_009e-2),
        ] {
            let got = residual_ratio(x);
            assert!((got / want - 1.0).abs() < 1e-11, "x = {x}: {got} vs {want}");
        }
    }

    #[test]
    fn ou_coefficients_small_step() {
        let c = OuCoefficients::new(1.0, 1e-10);
        assert!((c.variance / 1e-10 - 1.0).abs() < 1e-9);
        let c = OuCoefficients::new(1.0, 2f64.ln());
        assert!((c.decay - 0.5).abs() < 1e-15);
        assert!((c.variance - 0.375).abs() < 1e-15);
    }

    #[test]
    fn random_access_matches_stream() {
        let plan = NoisePlan::new(7, 3, 1.0, 3, 6, 1.0);
        let mut s = plan.stream_from(5);
        for i in 5..12 {
            for c in 0..3 {
                assert_eq!(s.next_pair(), plan.fine_pair(i, c));
            }
        }
    }

    #[test]
    fn identical_keys_reproduce_bitwise() {
        let a = NoisePlan::new(42, 9, 0.5, 2, 10, 2.0);
        let b = NoisePlan::new(42, 9, 0.5, 2, 10, 2.0);
        assert_eq!(a, b);
        assert_eq!(a.compose_ou(0.0, 2.0).unwrap(), b.compose_ou(0.0, 2.0).unwrap());
        let other_path = NoisePlan::new(42, 10, 0.5, 2, 10, 2.0);
        assert_ne!(a.fine_pair(0, 0), other_path.fine_pair(0, 0));
    }

    #[test]
    fn increment_does_not_depend_on_gamma() {
        let a = NoisePlan::new(1, 0, 0.5, 1, 4, 1.0);
        let b = NoisePlan::new(1, 0, 7.0, 1, 4, 1.0);
        for i in 0..16 {
            assert_eq!(a.fine_pair(i, 0).dw, b.fine_pair(i, 0).dw);
        }
    }

    #[test]
    fn pair_covariance_small_damping_limit() {
        let law = PairLaw::new(1e-9, 0.01);
        let (vw, cov, vj) = law.covariance();
        assert!((cov - vw).abs() < 1e-12 && (vj - vw).abs() < 1e-12);
    }

    #[test]
    fn single_interval_composition_is_identity() {
        let plan = NoisePlan::new(3, 1, 1.3, 2, 5, 1.0);
        let d = plan.fine_step();
        let ou = plan.compose_ou(4.0 * d, 5.0 * d).unwrap();
        let inc = plan.compose_increment(4.0 * d, 5.0 * d).unwrap();
        for c in 0..2 {
            assert_eq!(ou[c], plan.fine_pair(4, c).j);
            assert_eq!(inc[c], plan.fine_pair(4, c).dw);
        }
    }

    #[test]
    fn semigroup_split_agrees_to_rounding() {
        let gamma = 0.8;
        let plan = NoisePlan::new(11, 2, gamma, 2, 8, 1.0);
        let d = plan.fine_step();
        for (a, b, c) in [(0u64, 100u64, 256u64), (17, 18, 64), (3, 131, 200)] {
            let (ta, tb, tc) = (a as f64 * d, b as f64 * d, c as f64 * d);
            let whole = plan.compose_ou(ta, tc).unwrap();
            let left = plan.compose_ou(ta, tb).unwrap();
            let right = plan.compose_ou(tb, tc).unwrap();
            let w = (-gamma * (tc - tb)).exp();
            for k in 0..2 {
                let split = w * left[k] + right[k];
                assert!((whole[k] - split).abs() <= 1e-14 * (1.0 + whole[k].abs()), "{whole:?} vs {split}");
            }
            let inc = plan.compose_increment(ta, tc).unwrap();
            let l = plan.compose_increment(ta, tb).unwrap();
            let r = plan.compose_increment(tb, tc).unwrap();
            for k in 0..2 {
                assert!((inc[k] - l[k] - r[k]).abs() <= 1e-14 * (1.0 + inc[k].abs()));
            }
        }
    }

    #[test]
    fn near_zero_damping_reduces_to_increment_sums() {
        let plan = NoisePlan::new(5, 0, 1e-12, 1, 6, 1.0);
        let ou = plan.compose_ou(0.0, 0.5).unwrap();
        let inc = plan.compose_increment(0.0, 0.5).unwrap();
        assert!((ou[0] - inc[0]).abs() < 1e-10);
    }

    #[test]
    fn misaligned_interval_is_rejected() {
        let plan = NoisePlan::new(0, 0, 1.0, 1, 4, 1.0);
        assert!(matches!(plan.compose_ou(0.01, 0.5), Err(SsavError::Alignment { .. })));
        assert!(matches!(plan.compose_increment(0.5, 0.25), Err(SsavError::Alignment { .. })));
        assert!(plan.compose_ou(0.0, 2.0).is_err());
    }

    #[test]
    fn fine_pair_moments_match_exact_law() {
        let gamma = 2.0;
        let plan = NoisePlan::new(2024, 0, gamma, 1, 20, 1.0 / 8.0 * (1u64 << 20) as f64);
        let law = plan.law();
        assert!((law.delta - 0.125).abs() < 1e-15);
        let (vw_exact, cov_exact, vj_exact) = law.covariance();
        let n = 1_000_000u64;
        let mut s = plan.stream_from(0);
        let mut w = Vec::with_capacity(n as usize);
        let mut j = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let p = s.next_pair();
            w.push(p.dw);
            j.push(p.j);
        }
        let (mw, vw) = mean_var(&w);
        let (mj, vj) = mean_var(&j);
        let nf = n as f64;
        let cov = w.iter().zip(&j).map(|(a, b)| (a - mw) * (b - mj)).sum::<f64>() / (nf - 1.0);
        // Gaussian: SE(var) = var·√(2/(n−1)); SE(cov) = √((σ_w²σ_j² + c²)/n)
        assert!((vw - vw_exact).abs() <= 4.0 * vw_exact * (2.0 / nf).sqrt());
        assert!((vj - vj_exact).abs() <= 4.0 * vj_exact * (2.0 / nf).sqrt());
        let se_cov = ((vw_exact * vj_exact + cov_exact * cov_exact) / nf).sqrt();
        assert!((cov - cov_exact).abs() <= 4.0 * se_cov, "{cov} vs {cov_exact}");
        assert!(mw.abs() <= 4.0 * (vw_exact / nf).sqrt());
    }

    #[test]
    fn two_interval_composition_variance() {
        let gamma = 1.5;
        let delta = 0.2;
        let law = PairLaw::new(gamma, delta);
        let (_, _, vj) = law.covariance();
        // e^{−2γδ}·Var(J) + Var(J) = (1 − e^{−4γδ})/(2γ)
        let analytic = (-2.0 * gamma * delta).exp() * vj + vj;
        let target = -(-4.0 * gamma * delta).exp_m1() / (2.0 * gamma);
        assert!((analytic - target).abs() < 1e-15);

        let n = 1_000_000u64;
        let plan = NoisePlan::uniform(99, 0, gamma, 1, delta, 2 * n);
        let composer = OuComposer::new(gamma, delta, 2);
        let mut block = PairBlock::new(1, 2);
        let mut stream = plan.stream_from(0);
        let mut xs = Vec::with_capacity(n as usize);
        let mut out = [0.0];
        for _ in 0..n {
            stream.fill(&mut block);
            composer.compose(&block, 0, &mut out);
            xs.push(out[0]);
        }
        let (_, var) = mean_var(&xs);
        assert!((var - target).abs() <= 4.0 * target * (2.0 / n as f64).sqrt(), "{var} vs {target}");
    }

    #[test]
    fn coupled_noise_matches_compositions() {
        let plan = NoisePlan::new(4, 1, 0.9, 2, 6, 1.0);
        let mut src = CoupledNoise::new(&plan, 8);
        let mut n = StepNoise::zeros(2);
        let h = 8.0 * plan.fine_step();
        for step in 0..8 {
            src.fill(&mut n);
            let t0 = step as f64 * h;
            assert_eq!(n.ou_integral, plan.compose_ou(t0, t0 + h).unwrap());
            assert_eq!(n.wiener_increment, plan.compose_increment(t0, t0 + h).unwrap());
        }
    }

    #[test]
    fn whole_horizon_increment_has_variance_t() {
        let n = 1_000_000usize;
        let horizon = 2.0;
        let xs: Vec<f64> = (0..n as u64)
            .map(|p| NoisePlan::new(8, p, 1.0, 1, 3, horizon).compose_increment(0.0, horizon).unwrap()[0])
            .collect();
        let (_, var) = mean_var(&xs);
        assert!((var - horizon).abs() <= 4.0 * horizon * (2.0 / n as f64).sqrt());
    }
}

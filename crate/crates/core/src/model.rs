//! Problem data for kinetic Langevin dynamics
//!
//! ```text
//! dv = −κ∇Φ(u) dt − γ v dt + Γ dW,    du = v dt
//! ```
//!
//! together with the two constants α and C_H that define the scalar auxiliary
//! variable. Potentials are value/gradient pairs; the three builtin examples
//! also come with their invariant densities, which are valid when
//! Γ = √(2κγ)·I.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Result, SsavError};
use crate::linalg::{norm_sq, NoiseMatrix};
use crate::quadrature::{adaptive_gauss_kronrod, GaussLegendre, TabulatedCdf};
use crate::sav::AugmentedState;

/// A potential Φ: ℝ^m → ℝ with its analytic gradient.
pub trait Potential: Send + Sync + fmt::Debug {
    fn label(&self) -> &str;
    fn dim(&self) -> usize;
    fn value(&self, u: &[f64]) -> f64;
    /// Writes ∇Φ(u) into `out`.
    fn gradient(&self, u: &[f64], out: &mut [f64]);

    fn gradient_vec(&self, u: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; u.len()];
        self.gradient(u, &mut g);
        g
    }
}

/// One-dimensional two-component Gaussian mixture with weights 1/3 at ι and 2/3 at −ι.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMixture {
    pub iota: f64,
    pub sigma: f64,
}

impl Potential for GaussianMixture {
    fn label(&self) -> &str {
        "gaussian_mixture"
    }

    fn dim(&self) -> usize {
        1
    }

    fn value(&self, u: &[f64]) -> f64 {
        let x = u[0];
        let s2 = self.sigma * self.sigma;
        let z = 2.0 * x * self.iota / s2;
        // log(1/3 + 2/3·e^{−z}) without overflow for either sign of z
        let log_mix = if z >= 0.0 {
            (1.0f64 / 3.0).ln() + (2.0 * (-z).exp()).ln_1p()
        } else {
            -z + (2.0f64 / 3.0).ln() + (0.5 * z.exp()).ln_1p()
        };
        (x - self.iota).powi(2) / (2.0 * s2) - log_mix
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        let x = u[0];
        let s2 = self.sigma * self.sigma;
        let z = 2.0 * self.iota * x / s2;
        out[0] = (x - self.iota) / s2 + 4.0 * self.iota / s2 / (z.exp() + 2.0);
    }
}

/// Φ(u) = |u|⁴/4 − |u|²/2 on ℝ^m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleWell {
    pub dim: usize,
}

impl Potential for DoubleWell {
    fn label(&self) -> &str {
        "double_well"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, u: &[f64]) -> f64 {
        let r2 = norm_sq(u);
        0.25 * r2 * r2 - 0.5 * r2
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        let r2 = norm_sq(u);
        for (o, x) in out.iter_mut().zip(u) {
            *o = (r2 - 1.0) * x;
        }
    }
}

/// Φ(u₁,u₂) = (u₁²u₂² + u₁² + u₂² − 8(u₁+u₂))/2, a two-mode density symmetric in its arguments.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Bimodal;

impl Potential for Bimodal {
    fn label(&self) -> &str {
        "bimodal"
    }

    fn dim(&self) -> usize {
        2
    }

    fn value(&self, u: &[f64]) -> f64 {
        let (a, b) = (u[0], u[1]);
        0.5 * (a * a * b * b + a * a + b * b - 8.0 * (a + b))
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        let (a, b) = (u[0], u[1]);
        out[0] = a * b * b + a - 4.0;
        out[1] = a * a * b + b - 4.0;
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A potential assembled from user-supplied closures.
#[derive(Clone)]
pub struct FnPotential {
    label: String,
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Arc<GradFn>,
}

impl FnPotential {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }
}

impl fmt::Debug for FnPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPotential")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl Potential for FnPotential {
    fn label(&self) -> &str {
        &self.label
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, u: &[f64]) -> f64 {
        (self.value)(u)
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        (self.gradient)(u, out)
    }
}

#[derive(Debug, Clone)]
enum DensityKind {
    GaussianMixture(GaussianMixture),
    /// exp(−Φ(u)) with an optional quadrature normalizer.
    Boltzmann {
        potential: Arc<dyn Potential>,
        normalizer: Option<f64>,
    },
}

/// Invariant density μ∞(v, u) = μ⁽¹⁾(v)·μ⁽²⁾(u) ∝ exp(−|v|²/(2κ))·exp(−Φ(u)).
#[derive(Debug, Clone)]
pub struct AnalyticDensity {
    dim: usize,
    kappa: f64,
    kind: DensityKind,
    /// Box (per axis) outside of which the u-marginal carries negligible mass.
    support: (f64, f64),
    /// Upper bound of the unnormalized u-marginal on the support box, for rejection sampling.
    envelope: OnceLock<f64>,
}

impl AnalyticDensity {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// Normal N(0, κI) density of the momentum.
    pub fn marginal_v(&self, v: &[f64]) -> f64 {
        let m = v.len() as f64;
        (2.0 * PI * self.kappa).powf(-0.5 * m) * (-norm_sq(v) / (2.0 * self.kappa)).exp()
    }

    /// Position marginal, possibly unnormalized; divide by [`normalizer_u`](Self::normalizer_u).
    pub fn marginal_u(&self, u: &[f64]) -> f64 {
        match &self.kind {
            DensityKind::GaussianMixture(gm) => {
                let x = u[0];
                let s2 = gm.sigma * gm.sigma;
                let a = (-(x - gm.iota).powi(2) / (2.0 * s2)).exp();
                let b = (-(x + gm.iota).powi(2) / (2.0 * s2)).exp();
                (a / 3.0 + 2.0 * b / 3.0) / (2.0 * PI * s2).sqrt()
            }
            DensityKind::Boltzmann { potential, .. } => (-potential.value(u)).exp(),
        }
    }

    /// 1 when `marginal_u` is already normalized, `None` when no normalizer is available.
    pub fn normalizer_u(&self) -> Option<f64> {
        match &self.kind {
            DensityKind::GaussianMixture(_) => Some(1.0),
            DensityKind::Boltzmann { normalizer, .. } => *normalizer,
        }
    }

    pub fn normalized_u(&self, u: &[f64]) -> Option<f64> {
        self.normalizer_u().map(|z| self.marginal_u(u) / z)
    }

    /// Density of coordinate `coord` of u, integrating out the other coordinate when m = 2.
    pub fn u_coordinate_density(&self, coord: usize) -> Result<impl Fn(f64) -> f64 + '_> {
        if coord >= self.dim || self.dim > 2 {
            return Err(SsavError::InvalidArgument(format!(
                "coordinate marginal {coord} unavailable for dimension {}",
                self.dim
            )));
        }
        let z = self
            .normalizer_u()
            .ok_or_else(|| SsavError::InvalidArgument("density has no normalizer".into()))?;
        let rule = GaussLegendre::on_interval(400, self.support.0, self.support.1);
        let dim = self.dim;
        Ok(move |x: f64| {
            if dim == 1 {
                self.marginal_u(&[x]) / z
            } else {
                let mut p = [0.0; 2];
                p[coord] = x;
                rule.integrate(|y| {
                    p[1 - coord] = y;
                    self.marginal_u(&p)
                }) / z
            }
        })
    }

    /// Reference CDF for one coordinate of u, by cumulative quadrature.
    pub fn u_coordinate_cdf(&self, coord: usize) -> Result<TabulatedCdf> {
        let p = self.u_coordinate_density(coord)?;
        let cells = if self.dim == 1 { 20_000 } else { 4_000 };
        let (cdf, mass) = TabulatedCdf::from_density(p, self.support.0, self.support.1, cells);
        if (mass - 1.0).abs() > 1e-6 {
            return Err(SsavError::Quadrature(format!(
                "coordinate marginal integrates to {mass}, expected 1"
            )));
        }
        Ok(cdf)
    }

    /// 1.1 × the largest unnormalized u-marginal value on a lattice over the support box.
    pub fn u_envelope(&self) -> f64 {
        *self.envelope.get_or_init(|| {
            let (lo, hi) = self.support;
            let n = if self.dim == 1 { 4001 } else { 401 };
            let at = |i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let mut best = 0.0f64;
            match self.dim {
                1 => (0..n).for_each(|i| best = best.max(self.marginal_u(&[at(i)]))),
                2 => (0..n).for_each(|i| (0..n).for_each(|j| best = best.max(self.marginal_u(&[at(i), at(j)])))),
                _ => best = f64::INFINITY,
            }
            1.1 * best
        })
    }

    /// Reference CDF for one coordinate of v (a centred normal with variance κ).
    pub fn v_coordinate_cdf(&self) -> TabulatedCdf {
        let k = self.kappa;
        let w = 12.0 * k.sqrt();
        let (cdf, _) = TabulatedCdf::from_density(
            |x| (-x * x / (2.0 * k)).exp() / (2.0 * PI * k).sqrt(),
            -w,
            w,
            20_000,
        );
        cdf
    }
}

/// Gaussian-mixture potential and its invariant density for inverse mass `kappa`.
pub fn builtin_gaussian_mixture(iota: f64, sigma: f64, kappa: f64) -> Result<(GaussianMixture, AnalyticDensity)> {
    if !(sigma > 0.0) || !iota.is_finite() {
        return Err(SsavError::InvalidModel(format!(
            "gaussian mixture needs finite iota and sigma > 0 (iota = {iota}, sigma = {sigma})"
        )));
    }
    let gm = GaussianMixture { iota, sigma };
    let reach = iota.abs() + 14.0 * sigma;
    let density = AnalyticDensity {
        dim: 1,
        kappa,
        kind: DensityKind::GaussianMixture(gm),
        support: (-reach, reach),
        envelope: OnceLock::new(),
    };
    Ok((gm, density))
}

/// Double-well potential; the density carries a quadrature normalizer only for dim ≤ 2.
pub fn builtin_double_well(dim: usize, kappa: f64) -> Result<(DoubleWell, AnalyticDensity)> {
    if dim == 0 {
        return Err(SsavError::InvalidModel("double well needs dim >= 1".into()));
    }
    let dw = DoubleWell { dim };
    let radial = |r: f64| (-(0.25 * r.powi(4) - 0.5 * r * r)).exp();
    let normalizer = match dim {
        1 => Some(adaptive_gauss_kronrod(radial, -12.0, 12.0, 1e-13)?),
        2 => Some(2.0 * PI * adaptive_gauss_kronrod(|r| r * radial(r), 0.0, 12.0, 1e-13)?),
        _ => None,
    };
    let density = AnalyticDensity {
        dim,
        kappa,
        kind: DensityKind::Boltzmann {
            potential: Arc::new(dw),
            normalizer,
        },
        support: (-6.0, 6.0),
        envelope: OnceLock::new(),
    };
    Ok((dw, density))
}

/// Box and node count for the bimodal normalizer.
pub const BIMODAL_BOX: (f64, f64) = (-4.0, 12.0);
pub const BIMODAL_NODES: usize = 400;

/// Bimodal potential with a density normalized by tensor Gauss–Legendre quadrature.
pub fn builtin_bimodal(kappa: f64) -> (Bimodal, AnalyticDensity) {
    let rule = GaussLegendre::on_interval(BIMODAL_NODES, BIMODAL_BOX.0, BIMODAL_BOX.1);
    let mut z = 0.0;
    for (&x, &wx) in rule.nodes.iter().zip(&rule.weights) {
        let inner = rule.integrate(|y| (-Bimodal.value(&[x, y])).exp());
        z += wx * inner;
    }
    let density = AnalyticDensity {
        dim: 2,
        kappa,
        kind: DensityKind::Boltzmann {
            potential: Arc::new(Bimodal),
            normalizer: Some(z),
        },
        support: BIMODAL_BOX,
        envelope: OnceLock::new(),
    };
    (Bimodal, density)
}

/// Scalar parameters of the dynamics and of the auxiliary variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub kappa: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub c_h: f64,
}

impl ModelParams {
    /// α = 1 and C_H = 1000, as used for every benchmark example.
    pub fn benchmark(kappa: f64, gamma: f64) -> Self {
        Self {
            kappa,
            gamma,
            alpha: 1.0,
            c_h: 1000.0,
        }
    }
}

/// Full problem definition. Immutable once built.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    dim: usize,
    params: ModelParams,
    noise: NoiseMatrix,
    potential: Arc<dyn Potential>,
}

impl ModelSpec {
    pub fn new(potential: Arc<dyn Potential>, params: ModelParams, noise: NoiseMatrix) -> Result<Self> {
        let dim = potential.dim();
        let positive = [
            ("kappa", params.kappa),
            ("gamma", params.gamma),
            ("alpha", params.alpha),
            ("c_h", params.c_h),
        ];
        for (name, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(SsavError::InvalidModel(format!("{name} must be positive and finite, got {x}")));
            }
        }
        if dim == 0 {
            return Err(SsavError::InvalidModel("dimension must be positive".into()));
        }
        if noise.dim() != dim {
            return Err(SsavError::InvalidModel(format!(
                "noise matrix is {0}x{0} but the potential has dimension {dim}",
                noise.dim()
            )));
        }
        Ok(Self {
            dim,
            params,
            noise,
            potential,
        })
    }

    /// Same potential and noise with new scalar parameters.
    pub fn with_params(&self, params: ModelParams) -> Result<Self> {
        Self::new(self.potential.clone(), params, self.noise.clone())
    }

    pub fn with_noise(&self, noise: NoiseMatrix) -> Result<Self> {
        Self::new(self.potential.clone(), self.params, noise)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn kappa(&self) -> f64 {
        self.params.kappa
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn c_h(&self) -> f64 {
        self.params.c_h
    }

    pub fn noise(&self) -> &NoiseMatrix {
        &self.noise
    }

    pub fn potential(&self) -> &dyn Potential {
        self.potential.as_ref()
    }

    pub fn potential_arc(&self) -> Arc<dyn Potential> {
        self.potential.clone()
    }

    /// κΦ(u) + C_H − α|u|², the square of the auxiliary variable at u.
    #[inline]
    pub fn sav_radicand(&self, u: &[f64]) -> f64 {
        self.params.kappa * self.potential.value(u) + self.params.c_h - self.params.alpha * norm_sq(u)
    }

    /// True when Γ = √(2κγ)·I, the case in which the builtin densities are invariant.
    pub fn has_canonical_noise(&self) -> bool {
        let c = (2.0 * self.params.kappa * self.params.gamma).sqrt();
        let m = self.dim;
        (0..m).all(|i| {
            (0..m).all(|j| {
                let want = if i == j { c } else { 0.0 };
                (self.noise.entry(i, j) - want).abs() <= 1e-12 * c.max(1.0)
            })
        })
    }
}

/// Total energy H(v, u) = |v|²/2 + κΦ(u) + C_H.
pub fn hamiltonian(model: &ModelSpec, v: &[f64], u: &[f64]) -> f64 {
    0.5 * norm_sq(v) + model.kappa() * model.potential().value(u) + model.c_h()
}

/// Modified energy 𝓗(v, u, ρ) = |v|²/2 + α|u|² + ρ².
pub fn modified_energy(model: &ModelSpec, state: &AugmentedState) -> f64 {
    0.5 * norm_sq(&state.v) + model.alpha() * norm_sq(&state.u) + state.rho * state.rho
}

/// Largest relative mismatch between central differences and the analytic gradient,
/// |fd − g| / (1 + |g|), over all probe points and coordinates.
pub fn grad_check(potential: &dyn Potential, points: &[Vec<f64>], eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1e-3) {
        return Err(SsavError::InvalidArgument(format!("eps must lie in (0, 1e-3], got {eps}")));
    }
    let mut worst = 0.0f64;
    let mut grad = vec![0.0; potential.dim()];
    for p in points {
        if !potential.value(p).is_finite() {
            return Err(SsavError::NonFinite { point: p.clone() });
        }
        potential.gradient(p, &mut grad);
        let mut probe = p.clone();
        for i in 0..p.len() {
            probe[i] = p[i] + eps;
            let fp = potential.value(&probe);
            probe[i] = p[i] - eps;
            let fm = potential.value(&probe);
            probe[i] = p[i];
            if !(fp.is_finite() && fm.is_finite()) {
                return Err(SsavError::NonFinite { point: p.clone() });
            }
            let fd = (fp - fm) / (2.0 * eps);
            worst = worst.max((fd - grad[i]).abs() / (1.0 + grad[i].abs()));
        }
    }
    Ok(worst)
}

/// Outcome of probing the auxiliary-variable floor κΦ + C_H − α|x|² ≥ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorCheck {
    pub ok: bool,
    pub min_value: f64,
    pub argmin: Vec<f64>,
}

pub fn sav_floor_check(model: &ModelSpec, probe_points: &[Vec<f64>]) -> Result<FloorCheck> {
    floor_check_raw(model.potential(), &model.params(), probe_points)
}

/// Floor probe from raw parameters, usable before a [`ModelSpec`] can be built
/// (for instance when C_H ≤ 0 would be rejected by the constructor).
pub fn floor_check_raw(potential: &dyn Potential, params: &ModelParams, probe_points: &[Vec<f64>]) -> Result<FloorCheck> {
    if probe_points.is_empty() {
        return Err(SsavError::InvalidArgument("sav_floor_check needs at least one probe".into()));
    }
    let mut min_value = f64::INFINITY;
    let mut argmin = probe_points[0].clone();
    for p in probe_points {
        let r = params.kappa * potential.value(p) + params.c_h - params.alpha * norm_sq(p);
        // NaN counts as a violation
        if !(r >= min_value) {
            min_value = r;
            argmin = p.clone();
        }
    }
    if min_value >= 1.0 && min_value < 10.0 {
        log::warn!("auxiliary-variable radicand is only {min_value} at {argmin:?}; C_H is close to the floor");
    }
    Ok(FloorCheck {
        ok: min_value >= 1.0,
        min_value,
        argmin,
    })
}

/// Default floor probes: a 201-point lattice per axis on [−10, 10] for m ≤ 2,
/// otherwise 10⁴ seeded uniform draws from [−10, 10]^m.
pub fn default_floor_probes(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..201).map(|i| -10.0 + 0.1 * i as f64).collect();
    match dim {
        1 => axis.iter().map(|&x| vec![x]).collect(),
        2 => axis
            .iter()
            .flat_map(|&x| axis.iter().map(move |&y| vec![x, y]))
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..10_000)
                .map(|_| (0..dim).map(|_| -10.0 + 20.0 * unit_f64(&mut rng)).collect())
                .collect()
        }
    }
}

/// Uniform draw in [0, 1) with 53 random bits.
#[inline]
pub(crate) fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform random probes in [lo, hi]^dim, seeded.
pub fn random_probes(dim: usize, n: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| lo + (hi - lo) * unit_f64(&mut rng)).collect())
        .collect()
}

/// The three benchmark configurations with α = 1, C_H = 1000.
pub mod presets {
    use super::*;

    /// m = 1, κ = 2, γ = 1, Γ = 2, ι = 1, σ = 1/2.
    pub fn gaussian_mixture() -> (ModelSpec, AnalyticDensity) {
        let (gm, density) = builtin_gaussian_mixture(1.0, 0.5, 2.0).expect("valid preset");
        let model = ModelSpec::new(
            Arc::new(gm),
            ModelParams::benchmark(2.0, 1.0),
            NoiseMatrix::scaled_identity(1, 2.0),
        )
        .expect("valid preset");
        (model, density)
    }

    /// κ = 1, γ = 1, Γ = √2·I.
    pub fn double_well(dim: usize) -> (ModelSpec, AnalyticDensity) {
        let (dw, density) = builtin_double_well(dim, 1.0).expect("valid preset");
        let model = ModelSpec::new(
            Arc::new(dw),
            ModelParams::benchmark(1.0, 1.0),
            NoiseMatrix::scaled_identity(dim, 2f64.sqrt()),
        )
        .expect("valid preset");
        (model, density)
    }

    /// κ = 0.1, γ = 0.05, Γ = 0.1.
    pub fn bimodal() -> (ModelSpec, AnalyticDensity) {
        let (b, density) = builtin_bimodal(0.1);
        let model = ModelSpec::new(
            Arc::new(b),
            ModelParams::benchmark(0.1, 0.05),
            NoiseMatrix::scaled_identity(2, 0.1),
        )
        .expect("valid preset");
        (model, density)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gaussian_mixture_gradient_at_origin() {
        let (gm, _) = builtin_gaussian_mixture(1.0, 0.5, 2.0).unwrap();
        // (0−1)/0.25 + (4/0.25)/(1+2) = −4 + 16/3
        assert!(close(gm.gradient_vec(&[0.0])[0], 4.0 / 3.0, 1e-14));
    }

    #[test]
    fn gaussian_mixture_with_zero_shift_is_a_single_gaussian() {
        let (gm, _) = builtin_gaussian_mixture(0.0, 0.7, 1.0).unwrap();
        assert_eq!(gm.gradient_vec(&[0.0])[0], 0.0);
        for x in [-2.0, 0.3, 5.0] {
            assert!(close(gm.value(&[x]), x * x / (2.0 * 0.49), 1e-13));
        }
    }

    #[test]
    fn gaussian_mixture_density_value() {
        let (_, d) = builtin_gaussian_mixture(1.0, 0.5, 2.0).unwrap();
        // (1/√(2π·0.25))·(1/3 + (2/3)e^{−8}), evaluated in high precision
        assert!(close(d.normalized_u(&[1.0]).unwrap(), 0.266_139_960_568_641_6, 1e-14));
        assert_eq!(d.normalizer_u(), Some(1.0));
    }

    #[test]
    fn gaussian_mixture_is_stable_far_out() {
        let gm = GaussianMixture { iota: 1.0, sigma: 0.5 };
        for x in [-1e3, -60.0, 60.0, 1e3] {
            assert!(gm.value(&[x]).is_finite());
            assert!(gm.gradient_vec(&[x])[0].is_finite());
        }
    }

    #[test]
    fn gaussian_mixture_density_matches_boltzmann_form() {
        let (gm, d) = builtin_gaussian_mixture(1.0, 0.5, 2.0).unwrap();
        let z = (2.0 * PI * 0.25f64).sqrt();
        for x in [-1.5, -0.2, 0.0, 0.8, 2.0] {
            let boltz = (-gm.value(&[x])).exp() / z;
            assert!(close(boltz, d.marginal_u(&[x]), 1e-14));
        }
    }

    #[test]
    fn double_well_values() {
        let dw = DoubleWell { dim: 3 };
        assert_eq!(dw.value(&[0.0; 3]), 0.0);
        assert_eq!(dw.gradient_vec(&[0.0; 3]), vec![0.0; 3]);
        let dw1 = DoubleWell { dim: 1 };
        assert_eq!(dw1.value(&[1.0]), -0.25);
        assert_eq!(dw1.gradient_vec(&[1.0]), vec![0.0]);
        let dw2 = DoubleWell { dim: 2 };
        assert_eq!(dw2.gradient_vec(&[1.0, 1.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn bimodal_values_and_symmetry() {
        assert_eq!(Bimodal.value(&[0.0, 0.0]), 0.0);
        assert_eq!(Bimodal.gradient_vec(&[0.0, 0.0]), vec![-4.0, -4.0]);
        assert_eq!(Bimodal.gradient_vec(&[2.0, 2.0]), vec![6.0, 6.0]);
        let g = Bimodal.gradient_vec(&[0.3, -1.7]);
        let h = Bimodal.gradient_vec(&[-1.7, 0.3]);
        assert_eq!((g[0], g[1]), (h[1], h[0]));
    }

    #[test]
    fn grad_check_on_builtins() {
        let (gm, _) = builtin_gaussian_mixture(1.0, 0.5, 2.0).unwrap();
        for (pot, dim) in [
            (Arc::new(gm) as Arc<dyn Potential>, 1),
            (Arc::new(DoubleWell { dim: 1 }), 1),
            (Arc::new(DoubleWell { dim: 2 }), 2),
            (Arc::new(DoubleWell { dim: 20 }), 20),
            (Arc::new(Bimodal), 2),
        ] {
            let pts = random_probes(dim, 100, -3.0, 3.0, 11);
            let err = grad_check(pot.as_ref(), &pts, 1e-5).unwrap();
            assert!(err <= 1e-6, "{}: {err}", pot.label());
        }
    }

    #[test]
    fn grad_check_is_exact_for_affine_potentials() {
        let c = [0.5, -2.0, 3.0];
        let lin = FnPotential::new(
            "linear",
            3,
            move |u| u.iter().zip(&c).map(|(a, b)| a * b).sum(),
            move |_, g| g.copy_from_slice(&c),
        );
        // dyadic probes and step keep every operation exact
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i % 7) as f64 / 8.0 - 0.5, (i % 5) as f64 / 4.0, -(i as f64) / 16.0])
            .collect();
        assert!(grad_check(&lin, &pts, 2f64.powi(-10)).unwrap() <= 1e-12);
    }

    #[test]
    fn grad_check_reports_non_finite_probe() {
        let bad = FnPotential::new("log", 1, |u| u[0].ln(), |u, g| g[0] = 1.0 / u[0]);
        match grad_check(&bad, &[vec![1.0], vec![-1.0]], 1e-5) {
            Err(SsavError::NonFinite { point }) => assert_eq!(point, vec![-1.0]),
            other => panic!("expected NonFinite, got {other:?}"),
        }
        assert!(grad_check(&bad, &[vec![1.0]], 1e-2).is_err());
    }

    #[test]
    fn floor_check_double_well() {
        let (model, _) = presets::double_well(1);
        // x⁴/4 − 3x²/2 + 1000 has its minimum 1000 − 9/4 at x² = 3
        let probes: Vec<Vec<f64>> = (0..=1000).map(|i| vec![-5.0 + 0.01 * i as f64]).collect();
        let fc = sav_floor_check(&model, &probes).unwrap();
        assert!(fc.ok);
        assert!(close(fc.min_value, 1000.0 - 2.25, 1e-3));
        assert!(close(fc.argmin[0].abs(), 3f64.sqrt(), 0.01));

        let fc0 = sav_floor_check(&model, &[vec![0.0]]).unwrap();
        assert_eq!((fc0.ok, fc0.min_value), (true, 1000.0));
    }

    #[test]
    fn floor_check_detects_small_offset() {
        let (model, _) = presets::double_well(1);
        let tiny = model
            .with_params(ModelParams {
                c_h: 1e-9,
                ..model.params()
            })
            .unwrap();
        let fc = sav_floor_check(&tiny, &[vec![1.0]]).unwrap();
        assert!(!fc.ok);
        assert!(close(fc.min_value, -1.25, 1e-8));
        assert!(sav_floor_check(&tiny, &[]).is_err());
    }

    #[test]
    fn floor_check_holds_for_benchmark_settings() {
        for (model, _) in [presets::gaussian_mixture(), presets::double_well(1), presets::double_well(2), presets::bimodal()] {
            let probes = default_floor_probes(model.dim(), 0);
            assert!(sav_floor_check(&model, &probes).unwrap().ok, "{}", model.potential().label());
        }
        let (m20, _) = presets::double_well(20);
        assert!(sav_floor_check(&m20, &default_floor_probes(20, 0)).unwrap().ok);
    }

    #[test]
    fn hamiltonian_examples() {
        let (dw, _) = presets::double_well(2);
        assert_eq!(hamiltonian(&dw, &[0.0, 0.0], &[0.0, 0.0]), 1000.0);
        assert_eq!(hamiltonian(&dw, &[1.0, 1.0], &[0.0, 0.0]), 1001.0);
        let (gm, _) = presets::gaussian_mixture();
        // 1000 + 2·(−log(1/3 + (2/3)e^{−8}))
        assert!(close(hamiltonian(&gm, &[0.0], &[1.0]), 1000.0 + 2.0 * 1.097_941_588_382_034_5, 1e-11));
    }

    #[test]
    fn modified_energy_examples() {
        let (dw, _) = presets::double_well(2);
        let s = AugmentedState::new(vec![0.0, 0.0], vec![0.0, 0.0], 1000f64.sqrt());
        assert!(close(modified_energy(&dw, &s), 1000.0, 1e-12));
        let s = AugmentedState::new(vec![1.0, 1.0], vec![1.0, 0.0], 2.0);
        assert_eq!(modified_energy(&dw, &s), 6.0);
    }

    #[test]
    fn model_rejects_bad_parameters() {
        let noise = NoiseMatrix::scaled_identity(1, 1.0);
        let pot: Arc<dyn Potential> = Arc::new(DoubleWell { dim: 1 });
        let mut p = ModelParams::benchmark(1.0, 1.0);
        p.gamma = 0.0;
        assert!(ModelSpec::new(pot.clone(), p, noise.clone()).is_err());
        assert!(ModelSpec::new(pot, ModelParams::benchmark(1.0, 1.0), NoiseMatrix::scaled_identity(2, 1.0)).is_err());
    }

    #[test]
    fn canonical_noise_detection() {
        assert!(presets::gaussian_mixture().0.has_canonical_noise());
        assert!(presets::double_well(2).0.has_canonical_noise());
        assert!(presets::bimodal().0.has_canonical_noise());
        let off = presets::double_well(1).0.with_noise(NoiseMatrix::scaled_identity(1, 1.0)).unwrap();
        assert!(!off.has_canonical_noise());
    }

    #[test]
    fn densities_integrate_to_one() {
        let (_, gm) = builtin_gaussian_mixture(1.0, 0.5, 2.0).unwrap();
        let mass = adaptive_gauss_kronrod(|x| gm.marginal_u(&[x]), -10.0, 10.0, 1e-12).unwrap();
        assert!(close(mass, 1.0, 1e-8));

        let (_, dw) = builtin_double_well(1, 1.0).unwrap();
        // scipy.integrate.quad over ℝ
        assert!(close(dw.normalizer_u().unwrap() / 3.905_137_169_860_202, 1.0, 1e-8));
        let raw = adaptive_gauss_kronrod(|x| dw.marginal_u(&[x]), -10.0, 10.0, 1e-12).unwrap();
        assert!(close(raw / dw.normalizer_u().unwrap(), 1.0, 1e-8));

        let (_, dw20) = builtin_double_well(20, 1.0).unwrap();
        assert!(dw20.normalizer_u().is_none());
    }

    #[test]
    fn two_dimensional_normalizers() {
        let (_, dw2) = builtin_double_well(2, 1.0).unwrap();
        let rule = GaussLegendre::on_interval(200, -6.0, 6.0);
        let mut z = 0.0;
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            z += w * rule.integrate(|y| dw2.marginal_u(&[x, y]));
        }
        assert!(close(z / dw2.normalizer_u().unwrap(), 1.0, 1e-8));

        let (_, bi) = builtin_bimodal(0.1);
        // scipy dblquad over [−15, 25]²
        assert!(close(bi.normalizer_u().unwrap() / 20_216.335_877_358_186, 1.0, 1e-8));
    }

    #[test]
    fn coordinate_cdfs_are_monotone_and_symmetric() {
        let (_, bi) = builtin_bimodal(0.1);
        let c0 = bi.u_coordinate_cdf(0).unwrap();
        let c1 = bi.u_coordinate_cdf(1).unwrap();
        let mut prev = 0.0;
        for i in 0..=160 {
            let x = -4.0 + 0.1 * i as f64;
            let a = c0.eval(x);
            assert!(a >= prev);
            assert!(close(a, c1.eval(x), 1e-12));
            prev = a;
        }
        let (_, gm) = builtin_gaussian_mixture(1.0, 0.5, 2.0).unwrap();
        let c = gm.u_coordinate_cdf(0).unwrap();
        // (2/3)·N(2) + (1/3)·N(−2) with N the standard normal CDF
        assert!(close(c.eval(0.0), 0.659_083_289_350_606_9, 1e-6));
        let v = gm.v_coordinate_cdf();
        assert!(close(v.eval(0.0), 0.5, 1e-9));
    }
}

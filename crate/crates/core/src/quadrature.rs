//! One-dimensional quadrature: Gauss–Legendre rules and adaptive Gauss–Kronrod (G7/K15).

use crate::error::{Result, SsavError};

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// A Gauss–Legendre rule mapped onto [a, b].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn on_interval(n: usize, a: f64, b: f64) -> Self {
        let (x, w) = gauss_legendre(n);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        Self {
            nodes: x.iter().map(|xi| mid + half * xi).collect(),
            weights: w.iter().map(|wi| half * wi).collect(),
        }
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(mid - dx) + f(mid + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Adaptive G7/K15 quadrature of `f` over [a, b] to an absolute tolerance.
///
/// The interval with the largest error estimate is bisected until the summed
/// estimate drops below `abs_tol` or 4000 subintervals are in play.
pub fn adaptive_gauss_kronrod(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(SsavError::Quadrature(format!("bad interval [{a}, {b}]")));
    }
    let mut pieces = vec![{
        let (v, e) = kronrod15(&mut f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..4000 {
        let total_err: f64 = pieces.iter().map(|p| p.3).sum();
        if total_err <= abs_tol {
            break;
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let m = 0.5 * (lo + hi);
        let (v1, e1) = kronrod15(&mut f, lo, m);
        let (v2, e2) = kronrod15(&mut f, m, hi);
        pieces.push((lo, m, v1, e1));
        pieces.push((m, hi, v2, e2));
    }
    let total_err: f64 = pieces.iter().map(|p| p.3).sum();
    let value: f64 = pieces.iter().map(|p| p.2).sum();
    if !value.is_finite() {
        return Err(SsavError::Quadrature(format!("non-finite integral over [{a}, {b}]")));
    }
    if total_err > abs_tol {
        return Err(SsavError::Quadrature(format!(
            "error estimate {total_err:e} above tolerance {abs_tol:e} over [{a}, {b}]"
        )));
    }
    Ok(value)
}

/// Piecewise-linear CDF tabulated on a uniform grid by cumulative Gauss–Legendre quadrature.
#[derive(Debug, Clone)]
pub struct TabulatedCdf {
    lo: f64,
    step: f64,
    cumulative: Vec<f64>,
}

impl TabulatedCdf {
    /// Tabulates ∫_lo^x p over `cells` uniform cells, then normalizes so the last value is 1.
    /// Returns the CDF and the un-normalized total mass.
    pub fn from_density(mut p: impl FnMut(f64) -> f64, lo: f64, hi: f64, cells: usize) -> (Self, f64) {
        let step = (hi - lo) / cells as f64;
        let rule = GaussLegendre::on_interval(8, 0.0, step);
        let mut cumulative = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for c in 0..cells {
            let left = lo + c as f64 * step;
            acc += rule.integrate(|x| p(left + x));
            cumulative.push(acc);
        }
        let mass = acc;
        for v in &mut cumulative {
            *v /= mass;
        }
        (Self { lo, step, cumulative }, mass)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.step;
        if pos.is_nan() {
            return f64::NAN;
        }
        if pos <= 0.0 {
            return 0.0;
        }
        let last = self.cumulative.len() - 1;
        if pos >= last as f64 {
            return 1.0;
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        self.cumulative[i] + frac * (self.cumulative[i + 1] - self.cumulative[i])
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.lo + self.step * (self.cumulative.len() - 1) as f64)
    }
}

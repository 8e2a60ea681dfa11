//! Weak error against the invariant measure as a function of time.

use serde::{Deserialize, Serialize};

use super::ensemble::{steps_for, Ensemble};
use super::{InitLaw, TestFunction};
use crate::error::{Result, SsavError};
use crate::model::{AnalyticDensity, ModelSpec};
use crate::quadrature::adaptive_gauss_kronrod;

/// Integration box per axis for the ground truth.
const TRUTH_BOX: (f64, f64) = (-12.0, 12.0);
const TRUTH_TOL: f64 = 1e-11;

/// ∫ φ dμ∞ for m = 1 by nested adaptive Gauss–Kronrod over the (v, u) plane.
pub fn ground_truth(density: &AnalyticDensity, phi: &TestFunction) -> Result<f64> {
    if density.dim() != 1 {
        return Err(SsavError::InvalidArgument("quadrature ground truth needs m = 1".into()));
    }
    let z = density
        .normalizer_u()
        .ok_or_else(|| SsavError::Quadrature("density has no normalizer".into()))?;
    let (a, b) = TRUTH_BOX;
    let mut inner_err = None;
    let outer = adaptive_gauss_kronrod(
        |v| {
            let pv = density.marginal_v(&[v]);
            match adaptive_gauss_kronrod(|u| phi.eval(&[v], &[u]) * density.marginal_u(&[u]), a, b, TRUTH_TOL) {
                Ok(x) => pv * x,
                Err(e) => {
                    inner_err.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        a,
        b,
        TRUTH_TOL,
    );
    if let Some(e) = inner_err {
        return Err(e);
    }
    let value = outer? / z;
    if !value.is_finite() {
        return Err(SsavError::Quadrature(format!("ground truth for {} is not finite", phi.name)));
    }
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongtimeRow {
    pub t: f64,
    pub mean: f64,
    pub error: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongtimeCurve {
    pub name: String,
    pub truth: f64,
    pub rows: Vec<LongtimeRow>,
}

impl LongtimeCurve {
    /// Row at the recorded time closest to `t`.
    pub fn at(&self, t: f64) -> &LongtimeRow {
        self.rows
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("curve has rows")
    }

    /// Mean error over recorded times in [lo, hi] and the mean of their standard errors.
    pub fn window(&self, lo: f64, hi: f64) -> (f64, f64) {
        let sel: Vec<&LongtimeRow> = self.rows.iter().filter(|r| r.t >= lo && r.t <= hi).collect();
        let n = sel.len() as f64;
        (
            sel.iter().map(|r| r.error).sum::<f64>() / n,
            sel.iter().map(|r| r.stderr).sum::<f64>() / n,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongtimeResult {
    pub h: f64,
    pub t_max: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub curves: Vec<LongtimeCurve>,
}

/// |mean φ(Y_t) − ∫φ dμ∞| at every recorded t ∈ [0, t_max].
#[allow(clippy::too_many_arguments)]
pub fn longtime_weak_study(
    model: &ModelSpec,
    density: &AnalyticDensity,
    init: &InitLaw,
    h: f64,
    t_max: f64,
    n_paths: usize,
    test_functions: &[TestFunction],
    seed: u64,
    record_every: usize,
) -> Result<LongtimeResult> {
    if model.dim() != 1 {
        return Err(SsavError::InvalidArgument("long-time study needs m = 1".into()));
    }
    let truths = test_functions
        .iter()
        .map(|f| ground_truth(density, f))
        .collect::<Result<Vec<f64>>>()?;
    let ens = Ensemble {
        model,
        density: Some(density),
        init,
        h,
        n_steps: steps_for(t_max, h)?,
        record_every,
        n_paths,
        seed,
    };
    let stats = ens.stats(test_functions.len(), |_, s, out| {
        for (o, f) in out.iter_mut().zip(test_functions) {
            *o = f.eval_state(s);
        }
    })?;
    let curves = test_functions
        .iter()
        .zip(&truths)
        .enumerate()
        .map(|(j, (f, &truth))| LongtimeCurve {
            name: f.name.clone(),
            truth,
            rows: stats
                .times
                .iter()
                .zip(&stats.acc)
                .map(|(&t, a)| LongtimeRow {
                    t,
                    mean: a[j].mean(),
                    error: (a[j].mean() - truth).abs(),
                    stderr: a[j].stderr(),
                })
                .collect(),
        })
        .collect();
    Ok(LongtimeResult {
        h,
        t_max,
        n_paths,
        seed,
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn ground_truth_of_second_moment() {
        // ∫ 2(v² + u²) dμ∞ = 2(κ + E u²)
        let (_, d) = presets::gaussian_mixture();
        let truth = ground_truth(&d, &TestFunction::by_name("2|x|^2").unwrap()).unwrap();
        // GM: κ = 2, E u² = σ² + ι² = 1.25
        assert!((truth - 2.0 * (2.0 + 1.25)).abs() < 1e-8, "{truth}");
        let (_, dw) = presets::double_well(1);
        let one = ground_truth(&dw, &TestFunction::constant(1.0)).unwrap();
        assert!((one - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stationary_start_has_small_initial_error() {
        let (m, d) = presets::double_well(1);
        let f = TestFunction::by_name("2|x|^2").unwrap();
        let res = longtime_weak_study(&m, &d, &InitLaw::Stationary, 1.0 / 64.0, 1.0, 2000, &[f], 4, 16).unwrap();
        let c = &res.curves[0];
        assert!(c.rows[0].error <= 3.0 * c.rows[0].stderr, "{:?}", c.rows[0]);
        assert_eq!(c.rows.len(), 5);
    }
}

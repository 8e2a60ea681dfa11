use serde::{Deserialize, Serialize};

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanAcc {
    pub n: usize,
    mean: f64,
    m2: f64,
}

impl MeanAcc {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn from_iter(xs: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = Self::default();
        for x in xs {
            acc.push(x);
        }
        acc
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Root-mean-square of `xs` and its delta-method standard error.
pub fn rms_with_stderr(xs: &[f64]) -> (f64, f64) {
    let sq = MeanAcc::from_iter(xs.iter().map(|x| x * x));
    let rms = sq.mean().sqrt();
    let se = if rms > 0.0 { sq.stderr() / (2.0 * rms) } else { 0.0 };
    (rms, se)
}

//! Weak error, Gaussian and empirical W2, and log-log slope fits.

use std::fmt;

use crate::algorithm::Algorithm;
use crate::rng::CompensatedSum;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("negative variance {0}")]
    NegativeVariance(f64),
    #[error("log-log fit needs positive values, got ({h}, {err})")]
    NonPositive { h: f64, err: f64 },
    #[error("all step sizes are equal; slope undefined")]
    DegenerateAbscissa,
    #[error("test function reads {support} coordinates but samples have {dim}")]
    SupportTooLarge { support: usize, dim: usize },
}

/// Test functions `phi` for the weak error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestFn {
    /// `x_1^2`.
    FirstCoordSquared,
    /// `sum_{i <= k} x_i^2`.
    LeadingSquares(usize),
}

impl TestFn {
    /// Number of leading coordinates read.
    pub fn support(self) -> usize {
        match self {
            TestFn::FirstCoordSquared => 1,
            TestFn::LeadingSquares(k) => k,
        }
    }

    #[inline]
    pub fn eval(self, x: &[f64]) -> f64 {
        x[..self.support()].iter().map(|v| v * v).sum()
    }

    pub fn parse(s: &str) -> Option<TestFn> {
        match s {
            "x1_sq" => Some(TestFn::FirstCoordSquared),
            _ => s
                .strip_prefix("sum_sq_")
                .and_then(|k| k.parse().ok())
                .filter(|&k| k >= 1)
                .map(TestFn::LeadingSquares),
        }
    }
}

impl fmt::Display for TestFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFn::FirstCoordSquared => f.write_str("x1_sq"),
            TestFn::LeadingSquares(k) => write!(f, "sum_sq_{k}"),
        }
    }
}

/// Sample mean of `phi`, its distance to the exact value, and the standard
/// error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakError {
    pub estimate: f64,
    pub weak_error: f64,
    pub mc_stderr: f64,
}

impl WeakError {
    /// From `n`, `sum phi` and `sum phi^2`.
    pub fn from_sums(n: usize, sum: f64, sum_sq: f64, exact: f64) -> Result<Self, MetricError> {
        if n < 2 {
            return Err(MetricError::TooFewSamples { needed: 2, got: n });
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        Ok(Self {
            estimate: mean,
            weak_error: (mean - exact).abs(),
            mc_stderr: (var / nf).sqrt(),
        })
    }

    pub fn from_values(values: &[f64], exact: f64) -> Result<Self, MetricError> {
        if values.len() < 2 {
            return Err(MetricError::TooFewSamples {
                needed: 2,
                got: values.len(),
            });
        }
        let nf = values.len() as f64;
        let mean = values.iter().copied().collect::<CompensatedSum>().value() / nf;
        let ss = values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .collect::<CompensatedSum>()
            .value();
        Ok(Self {
            estimate: mean,
            weak_error: (mean - exact).abs(),
            mc_stderr: (ss / (nf - 1.0) / nf).sqrt(),
        })
    }
}

/// `|N^{-1} sum_i phi(x_i) - exact|` with the standard error of the mean.
pub fn weak_error<S: AsRef<[f64]>>(
    samples: &[S],
    phi: TestFn,
    exact: f64,
) -> Result<WeakError, MetricError> {
    let mut values = Vec::with_capacity(samples.len());
    for s in samples {
        let s = s.as_ref();
        if s.len() < phi.support() {
            return Err(MetricError::SupportTooLarge {
                support: phi.support(),
                dim: s.len(),
            });
        }
        values.push(phi.eval(s));
    }
    WeakError::from_values(&values, exact)
}

/// One row of an error-versus-step-size study.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub algorithm: Algorithm,
    pub h: f64,
    pub tau: Option<usize>,
    pub n: usize,
    pub m: u64,
    pub weak_error: f64,
    pub cost: u64,
    pub mc_stderr: f64,
}

/// Closed-form W2 between `N(mean1, diag(var1))` and `N(mean2, diag(var2))`.
pub fn w2_gaussian_diag(
    mean1: &[f64],
    var1: &[f64],
    mean2: &[f64],
    var2: &[f64],
) -> Result<f64, MetricError> {
    let d = mean1.len();
    for len in [var1.len(), mean2.len(), var2.len()] {
        if len != d {
            return Err(MetricError::LengthMismatch(d, len));
        }
    }
    if let Some(&v) = var1.iter().chain(var2).find(|v| !(**v >= 0.0)) {
        return Err(MetricError::NegativeVariance(v));
    }
    let mut acc = CompensatedSum::default();
    for i in 0..d {
        let dm = mean1[i] - mean2[i];
        let ds = var1[i].sqrt() - var2[i].sqrt();
        acc.add(dm * dm + ds * ds);
    }
    Ok(acc.value().max(0.0).sqrt())
}

/// Order-statistics W2 estimator for two equally sized 1D samples.
pub fn w2_empirical_1d(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.is_empty() {
        return Err(MetricError::TooFewSamples { needed: 1, got: 0 });
    }
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let ss = sa
        .iter()
        .zip(&sb)
        .map(|(x, y)| (x - y) * (x - y))
        .collect::<CompensatedSum>()
        .value();
    Ok((ss / a.len() as f64).sqrt())
}

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<f64, MetricError> {
    if points.len() < 3 {
        return Err(MetricError::TooFewSamples {
            needed: 3,
            got: points.len(),
        });
    }
    if let Some(&(h, err)) = points.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0)) {
        return Err(MetricError::NonPositive { h, err });
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(MetricError::DegenerateAbscissa);
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Plateau of the weak error.
///
/// `trace` holds `(m, mean of phi over the ensemble)` at increasing `m`. The
/// window is the last 20% of records restricted to `m h >= 10 / mu`; the
/// ensemble means in the window are averaged before comparing with `exact`.
/// Returns `None` when the window is empty.
pub fn saturation_error(trace: &[(u64, f64)], h: f64, mu: f64, exact: f64) -> Option<f64> {
    let start = trace.len() - trace.len().div_ceil(5);
    let window: Vec<f64> = trace[start..]
        .iter()
        .filter(|(m, _)| *m as f64 * h >= 10.0 / mu)
        .map(|(_, v)| *v)
        .collect();
    if window.is_empty() {
        return None;
    }
    let avg = window.iter().copied().collect::<CompensatedSum>().value() / window.len() as f64;
    Some((avg - exact).abs())
}

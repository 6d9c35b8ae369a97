//! Potential oracles `f` with per-coordinate partial derivatives.
//!
//! A [`Potential`] wraps any [`SmoothPotential`] together with its curvature
//! metadata and an evaluation counter measured in partial-derivative units:
//! one partial call costs 1, a full gradient costs `d`. The counter charges
//! oracle calls, not floating-point work; the mixture target's partial touches
//! every coordinate through `sum(x)` yet still costs 1.
//!
//! Chains count through a private [`Oracle`] handle and merge into the shared
//! atomic total when the handle is dropped, so concurrent chains never contend
//! on the counter inside their inner loop and the final total is exact.

mod gaussian;
mod glm;
mod mixture;
mod moments;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub use gaussian::{make_isotropic_gaussian, IsotropicGaussian};
pub use glm::{
    glm_gaussian_posterior, make_glm_posterior, synth_glm_data, GlmDataset, GlmPosterior,
    NoiseModel,
};
pub use mixture::{make_double_gaussian, DoubleGaussian};
pub use moments::analytic_moment;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PotentialError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset is inconsistent: {0}")]
    InconsistentDataset(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("curvature metadata violates L >= mu (mu = {mu}, L = {lip_grad})")]
    InconsistentCurvature { mu: f64, lip_grad: f64 },
    #[error("no closed form for {0}; use a long-run reference chain")]
    NoClosedForm(String),
}

/// The extension point for user-defined targets.
///
/// `partial` must agree with the central finite difference of `value`, and
/// `gradient` must equal the stacked partials bit-for-bit.
pub trait SmoothPotential: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn partial(&self, x: &[f64], i: usize) -> f64;

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (i, g) in out.iter_mut().enumerate() {
            *g = self.partial(x, i);
        }
    }

    /// True when `partial(x, i)` depends on `x[i]` alone.
    fn is_separable(&self) -> bool {
        false
    }

    /// `partial(x, i)` evaluated from `x[i]` alone. Only called when
    /// [`SmoothPotential::is_separable`] returns true, and must then return
    /// exactly what `partial` would.
    fn coordinate_partial(&self, _i: usize, _xi: f64) -> f64 {
        unreachable!("coordinate_partial called on a non-separable potential")
    }
}

/// Strong convexity and smoothness constants. All optional: targets that do
/// not satisfy the assumptions leave them unset.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Curvature {
    pub mu: Option<f64>,
    pub lip_grad: Option<f64>,
    pub lip_hess: Option<f64>,
}

impl Curvature {
    pub fn new(
        mu: Option<f64>,
        lip_grad: Option<f64>,
        lip_hess: Option<f64>,
    ) -> Result<Self, PotentialError> {
        for (name, v) in [("mu", mu), ("lip_grad", lip_grad)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(PotentialError::InvalidParameter(format!(
                        "{name} must be positive and finite, got {v}"
                    )));
                }
            }
        }
        if let Some(h) = lip_hess {
            if !(h >= 0.0 && h.is_finite()) {
                return Err(PotentialError::InvalidParameter(format!(
                    "lip_hess must be nonnegative, got {h}"
                )));
            }
        }
        if let (Some(mu), Some(lip_grad)) = (mu, lip_grad) {
            if lip_grad < mu {
                return Err(PotentialError::InconsistentCurvature { mu, lip_grad });
            }
        }
        Ok(Self {
            mu,
            lip_grad,
            lip_hess,
        })
    }

    /// `L / mu` when both are known.
    pub fn condition_number(&self) -> Option<f64> {
        Some(self.lip_grad? / self.mu?)
    }
}

pub struct Potential {
    inner: Arc<dyn SmoothPotential>,
    curvature: Curvature,
    label: String,
    evals: AtomicU64,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("label", &self.label)
            .field("dim", &self.dim())
            .field("curvature", &self.curvature)
            .field("evals", &self.evals())
            .finish()
    }
}

impl Potential {
    pub fn new(
        inner: Arc<dyn SmoothPotential>,
        curvature: Curvature,
        label: impl Into<String>,
    ) -> Result<Self, PotentialError> {
        if inner.dim() == 0 {
            return Err(PotentialError::ZeroDimension);
        }
        Ok(Self {
            inner,
            curvature,
            label: label.into(),
            evals: AtomicU64::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_separable(&self) -> bool {
        self.inner.is_separable()
    }

    pub fn inner(&self) -> &dyn SmoothPotential {
        self.inner.as_ref()
    }

    /// Total partial-derivative units charged so far.
    pub fn evals(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn check_point(&self, x: &[f64]) -> Result<(), PotentialError> {
        if x.len() != self.dim() {
            return Err(PotentialError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Uncounted.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x)
    }

    pub fn partial(&self, x: &[f64], i: usize) -> f64 {
        self.evals.fetch_add(1, Ordering::Relaxed);
        self.inner.partial(x, i)
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.evals.fetch_add(self.dim() as u64, Ordering::Relaxed);
        self.inner.gradient(x, out)
    }

    pub fn oracle(&self) -> Oracle<'_> {
        Oracle {
            potential: self,
            calls: 0,
        }
    }
}

/// A single-owner counting handle. Calls are merged into the potential's
/// total when the handle drops.
pub struct Oracle<'a> {
    potential: &'a Potential,
    calls: u64,
}

impl<'a> Oracle<'a> {
    pub fn potential(&self) -> &'a Potential {
        self.potential
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    #[inline]
    pub fn partial(&mut self, x: &[f64], i: usize) -> f64 {
        self.calls += 1;
        self.potential.inner.partial(x, i)
    }

    #[inline]
    pub fn coordinate_partial(&mut self, i: usize, xi: f64) -> f64 {
        self.calls += 1;
        self.potential.inner.coordinate_partial(i, xi)
    }

    pub fn gradient(&mut self, x: &[f64], out: &mut [f64]) {
        self.calls += self.potential.dim() as u64;
        self.potential.inner.gradient(x, out)
    }

    /// Charges `units` without evaluating anything. Used by projected runs
    /// that skip partials of untracked coordinates but must bill them.
    pub fn charge(&mut self, units: u64) {
        self.calls += units;
    }
}

impl Drop for Oracle<'_> {
    fn drop(&mut self) {
        self.potential.evals.fetch_add(self.calls, Ordering::Relaxed);
    }
}

/// Serializable description of a target, as used by the experiment harness.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// `N(center * 1, I_d)`.
    Gaussian { d: usize, center: f64 },
    /// Equal-weight mixture of `N(+offset * 1, I)` and `N(-offset * 1, I)`.
    DoubleGaussian { d: usize, offset: f64 },
    /// Posterior of a linear model with a standard-normal prior and synthetic
    /// data regenerated from `data_seed`.
    Glm {
        d: usize,
        count: usize,
        noise: NoiseModel,
        x_true: f64,
        data_seed: u64,
    },
}

impl TargetSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TargetSpec::Gaussian { .. } => "gaussian",
            TargetSpec::DoubleGaussian { .. } => "double_gaussian",
            TargetSpec::Glm { .. } => "glm",
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            TargetSpec::Gaussian { d, .. }
            | TargetSpec::DoubleGaussian { d, .. }
            | TargetSpec::Glm { d, .. } => d,
        }
    }

    pub fn with_dim(&self, d: usize) -> TargetSpec {
        let mut out = self.clone();
        match &mut out {
            TargetSpec::Gaussian { d: dd, .. }
            | TargetSpec::DoubleGaussian { d: dd, .. }
            | TargetSpec::Glm { d: dd, .. } => *dd = d,
        }
        out
    }

    pub fn dataset(&self) -> Option<Result<GlmDataset, PotentialError>> {
        match *self {
            TargetSpec::Glm {
                d,
                count,
                noise,
                x_true,
                data_seed,
            } => Some(synth_glm_data(d, count, &vec![x_true; d], noise, data_seed)),
            _ => None,
        }
    }

    pub fn build(&self) -> Result<Potential, PotentialError> {
        match *self {
            TargetSpec::Gaussian { d, center } => make_isotropic_gaussian(d, &vec![center; d]),
            TargetSpec::DoubleGaussian { d, offset } => make_double_gaussian(d, offset),
            TargetSpec::Glm { .. } => make_glm_posterior(self.dataset().expect("glm")?),
        }
    }
}

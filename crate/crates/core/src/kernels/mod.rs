//! Overdamped Euler-Maruyama and exact underdamped Gaussian transitions, plus
//! single-chain and ensemble drivers.
//!
//! The underdamped kernel integrates
//!
//! ```text
//! dX = V dt
//! dV = -2 V dt - gamma F dt + sqrt(4 gamma) dB
//! ```
//!
//! over one step with `F` frozen. Friction is fixed at 2.

mod chain;
mod ensemble;

pub use chain::{run_chain, run_chain_projected, ChainOutcome, ProjectedOutcome};
pub use ensemble::{run_ensemble, run_ensemble_summary, Ensemble, EnsembleSummary, Projection, Record};

use crate::algorithm::{Algorithm, FluxKind};
use crate::estimators::{EstimatorError, SelectionDistribution};
use crate::potentials::Potential;
use crate::rng::MAX_STEPS;

const TAYLOR_SWITCH: f64 = 1e-3;
const DET_TOLERANCE: f64 = -1e-15;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("chain {chain} diverged at step {step}")]
    Diverged { chain: u64, step: u64 },
    #[error("step produced a non-finite state")]
    NonFinite,
    #[error("noise covariance has negative determinant {det} at h = {h}, gamma = {gamma}")]
    NegativeDeterminant { h: f64, gamma: f64, det: f64 },
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("{algorithm} needs gamma: the target has no Lipschitz constant to default to 1/L")]
    MissingGamma { algorithm: Algorithm },
    #[error("projected runs need a separable potential")]
    NotSeparable,
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Mean and covariance scalars of the one-step underdamped transition.
///
/// ```text
/// x' = x + a_xv v + a_xf F + noise_x
/// v' =     a_vv v + a_vf F + noise_v
/// Cov(noise_x, noise_v) = [[s_xx, s_xv], [s_xv, s_vv]]   (per coordinate)
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCoeffs {
    pub h: f64,
    pub gamma: f64,
    pub a_xv: f64,
    pub a_xf: f64,
    pub a_vv: f64,
    pub a_vf: f64,
    pub s_xx: f64,
    pub s_xv: f64,
    pub s_vv: f64,
}

/// `h - (1 - e^{-2h}) / 2`.
fn drift_gap(h: f64, a: f64) -> f64 {
    if h < TAYLOR_SWITCH {
        // (1/2) sum_{k>=2} (-2h)^k / k!
        let t = 2.0 * h;
        0.5 * t * t * (0.5 - t / 6.0 + t * t / 24.0 - t.powi(3) / 120.0 + t.powi(4) / 720.0
            - t.powi(5) / 5040.0)
    } else {
        h - 0.5 * a
    }
}

/// `h - 3/4 - e^{-4h}/4 + e^{-2h}` (per unit gamma).
fn position_variance(h: f64, a: f64) -> f64 {
    if h < TAYLOR_SWITCH {
        // sum_{k>=3} ((-2)^k - (-4)^k / 4) h^k / k!
        let h3 = h * h * h;
        h3 * (4.0 / 3.0
            + h * (-2.0 + h * (28.0 / 15.0 + h * (-4.0 / 3.0 + h * (3968.0 / 5040.0)))))
    } else {
        drift_gap(h, a) - 0.25 * a * a
    }
}

/// Coefficients for step `h >= 0` and forcing scale `gamma >= 0`.
pub fn underdamped_coeffs(h: f64, gamma: f64) -> KernelCoeffs {
    assert!(h >= 0.0 && h.is_finite(), "step size must be nonnegative, got {h}");
    assert!(gamma >= 0.0 && gamma.is_finite(), "gamma must be nonnegative, got {gamma}");
    let a = -(-2.0 * h).exp_m1();
    KernelCoeffs {
        h,
        gamma,
        a_xv: 0.5 * a,
        a_xf: -0.5 * gamma * drift_gap(h, a),
        a_vv: (-2.0 * h).exp(),
        a_vf: -0.5 * gamma * a,
        s_xx: gamma * position_variance(h, a),
        s_xv: 0.5 * gamma * a * a,
        s_vv: -gamma * (-4.0 * h).exp_m1(),
    }
}

impl KernelCoeffs {
    pub fn det(&self) -> f64 {
        self.s_xx * self.s_vv - self.s_xv * self.s_xv
    }

    /// Lower-triangular square root of the noise covariance.
    pub fn noise_factor(&self) -> Result<NoiseFactor, KernelError> {
        let det = self.det();
        if det < DET_TOLERANCE {
            return Err(KernelError::NegativeDeterminant {
                h: self.h,
                gamma: self.gamma,
                det,
            });
        }
        if self.s_xx <= 0.0 {
            return Ok(NoiseFactor {
                l11: 0.0,
                l21: 0.0,
                l22: self.s_vv.max(0.0).sqrt(),
            });
        }
        let l11 = self.s_xx.sqrt();
        let l21 = self.s_xv / l11;
        Ok(NoiseFactor {
            l11,
            l21,
            l22: (det.max(0.0) / self.s_xx).sqrt(),
        })
    }
}

/// `[[l11, 0], [l21, l22]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFactor {
    pub l11: f64,
    pub l21: f64,
    pub l22: f64,
}

#[inline(always)]
pub(crate) fn underdamped_coord(
    c: &KernelCoeffs,
    l: &NoiseFactor,
    x: f64,
    v: f64,
    f: f64,
    z: (f64, f64),
) -> (f64, f64) {
    (
        x + c.a_xv * v + c.a_xf * f + l.l11 * z.0,
        c.a_vv * v + c.a_vf * f + l.l21 * z.0 + l.l22 * z.1,
    )
}

#[inline(always)]
pub(crate) fn overdamped_coord(x: f64, f: f64, h: f64, sqrt_2h: f64, z: f64) -> f64 {
    x - f * h + sqrt_2h * z
}

fn check_len(expected: usize, got: usize) -> Result<(), KernelError> {
    if expected != got {
        return Err(KernelError::InvalidConfig(format!(
            "length mismatch: expected {expected}, got {got}"
        )));
    }
    Ok(())
}

/// `x' = x - F h + sqrt(2h) noise`, in place.
pub fn overdamped_step(x: &mut [f64], f: &[f64], h: f64, noise: &[f64]) -> Result<(), KernelError> {
    check_len(x.len(), f.len())?;
    check_len(x.len(), noise.len())?;
    let s = (2.0 * h).sqrt();
    for ((xi, fi), zi) in x.iter_mut().zip(f).zip(noise) {
        *xi = overdamped_coord(*xi, *fi, h, s, *zi);
    }
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(KernelError::NonFinite)
    }
}

/// One underdamped transition, in place. `noise` holds `2d` standard normals
/// laid out as `(z_x[0], z_v[0], z_x[1], z_v[1], ...)`.
pub fn underdamped_step(
    x: &mut [f64],
    v: &mut [f64],
    f: &[f64],
    coeffs: &KernelCoeffs,
    noise: &[f64],
) -> Result<(), KernelError> {
    check_len(x.len(), v.len())?;
    check_len(x.len(), f.len())?;
    check_len(2 * x.len(), noise.len())?;
    let l = coeffs.noise_factor()?;
    for i in 0..x.len() {
        let (xn, vn) = underdamped_coord(coeffs, &l, x[i], v[i], f[i], (noise[2 * i], noise[2 * i + 1]));
        x[i] = xn;
        v[i] = vn;
    }
    if x.iter().chain(v.iter()).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(KernelError::NonFinite)
    }
}

/// Position (and velocity) of one chain after `step` transitions.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainState {
    Overdamped { x: Vec<f64>, step: u64 },
    Underdamped { x: Vec<f64>, v: Vec<f64>, step: u64 },
}

impl ChainState {
    pub fn x(&self) -> &[f64] {
        match self {
            ChainState::Overdamped { x, .. } | ChainState::Underdamped { x, .. } => x,
        }
    }

    pub fn v(&self) -> Option<&[f64]> {
        match self {
            ChainState::Underdamped { v, .. } => Some(v),
            ChainState::Overdamped { .. } => None,
        }
    }

    pub fn step(&self) -> u64 {
        match self {
            ChainState::Overdamped { step, .. } | ChainState::Underdamped { step, .. } => *step,
        }
    }
}

/// Product-Gaussian initial law: `x_i ~ N(x_mean, x_std^2)`,
/// `v_i ~ N(v_mean, v_std^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSpec {
    pub x_mean: f64,
    pub x_std: f64,
    pub v_mean: f64,
    pub v_std: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            x_mean: 0.0,
            x_std: 1.0,
            v_mean: 0.0,
            v_std: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub h: f64,
    /// Defaults to `1 / L`.
    pub gamma: Option<f64>,
    /// Defaults to `d`.
    pub tau: Option<usize>,
    /// Number of transitions `M`.
    pub steps: u64,
    /// Ensemble size `N`.
    pub chains: usize,
    pub seed: u64,
    pub init: InitSpec,
    /// `None` selects uniformly.
    pub selection: Option<Vec<f64>>,
    /// Record `phi` every this many steps (plus step 0 and the final step).
    pub record_stride: Option<u64>,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, h: f64, steps: u64) -> Self {
        Self {
            algorithm,
            h,
            gamma: None,
            tau: None,
            steps,
            chains: 1,
            seed: 0,
            init: InitSpec::default(),
            selection: None,
            record_stride: None,
        }
    }
}

/// A [`RunConfig`] checked against a potential, with defaults filled.
#[derive(Debug, Clone)]
pub(crate) struct Resolved {
    pub algorithm: Algorithm,
    pub d: usize,
    pub h: f64,
    pub sqrt_2h: f64,
    pub tau: usize,
    pub steps: u64,
    pub seed: u64,
    pub init: InitSpec,
    pub selection: SelectionDistribution,
    pub coeffs: Option<(KernelCoeffs, NoiseFactor)>,
    pub stride: u64,
}

impl Resolved {
    pub fn new(cfg: &RunConfig, p: &Potential) -> Result<Self, KernelError> {
        let d = p.dim();
        if !(cfg.h > 0.0 && cfg.h.is_finite()) {
            return Err(KernelError::InvalidConfig(format!("h must be positive, got {}", cfg.h)));
        }
        if cfg.chains == 0 {
            return Err(KernelError::InvalidConfig("need at least one chain".into()));
        }
        if cfg.steps > MAX_STEPS {
            return Err(KernelError::InvalidConfig(format!(
                "at most {MAX_STEPS} steps per chain"
            )));
        }
        let tau = cfg.tau.unwrap_or(d);
        if tau == 0 {
            return Err(EstimatorError::InvalidTau.into());
        }
        let selection = match &cfg.selection {
            None => SelectionDistribution::uniform(d),
            Some(probs) => {
                if probs.len() != d {
                    return Err(EstimatorError::DimensionMismatch {
                        expected: d,
                        got: probs.len(),
                    }
                    .into());
                }
                SelectionDistribution::new(probs.clone())?
            }
        };
        let coeffs = if cfg.algorithm.is_underdamped() {
            let gamma = match cfg.gamma {
                Some(g) => g,
                None => 1.0
                    / p.curvature().lip_grad.ok_or(KernelError::MissingGamma {
                        algorithm: cfg.algorithm,
                    })?,
            };
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(KernelError::InvalidConfig(format!(
                    "gamma must be positive, got {gamma}"
                )));
            }
            let c = underdamped_coeffs(cfg.h, gamma);
            Some((c, c.noise_factor()?))
        } else {
            None
        };
        let stride = match cfg.record_stride {
            Some(0) => return Err(KernelError::InvalidConfig("record stride must be positive".into())),
            Some(s) => s,
            None => (cfg.steps / 200).max(1),
        };
        Ok(Self {
            algorithm: cfg.algorithm,
            d,
            h: cfg.h,
            sqrt_2h: (2.0 * cfg.h).sqrt(),
            tau,
            steps: cfg.steps,
            seed: cfg.seed,
            init: cfg.init,
            selection,
            coeffs,
            stride,
        })
    }

    pub fn flux(&self) -> FluxKind {
        self.algorithm.flux()
    }

    /// Whether `phi` is recorded after transition `m` (i.e. at step `m`).
    #[inline]
    pub fn records(&self, m: u64) -> bool {
        m % self.stride == 0 || m == self.steps
    }

    /// Step indices at which records are taken.
    pub fn record_steps(&self) -> Vec<u64> {
        (0..=self.steps).filter(|&m| self.records(m)).collect()
    }
}

#[cfg(test)]
mod tests;

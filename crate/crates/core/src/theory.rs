//! Step-size conditions, W2 upper bounds, the RCD-U-LMC lower bound and
//! iteration/cost scalings for all eight samplers.
//!
//! Every bound is transcribed with its explicit constants. Underdamped
//! bounds assume `gamma = 1/L`.

use crate::algorithm::Algorithm;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TheoryError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{0} needs the Hessian Lipschitz constant H")]
    MissingHessian(Algorithm),
    #[error("{0} needs the epoch length tau")]
    MissingTau(Algorithm),
    #[error("bound not applicable: {0}")]
    NotApplicable(String),
}

/// Constants entering the step-size conditions and bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub mu: f64,
    pub lip_grad: f64,
    pub lip_hess: Option<f64>,
    pub d: usize,
    pub tau: Option<usize>,
    /// Initial W2 distance.
    pub w0: f64,
    /// `None` means `1/L`.
    pub gamma: Option<f64>,
}

impl BoundParams {
    pub fn new(mu: f64, lip_grad: f64, d: usize) -> Self {
        Self {
            mu,
            lip_grad,
            lip_hess: None,
            d,
            tau: None,
            w0: 0.0,
            gamma: None,
        }
    }

    pub fn with_hess(mut self, h: f64) -> Self {
        self.lip_hess = Some(h);
        self
    }

    pub fn with_tau(mut self, tau: usize) -> Self {
        self.tau = Some(tau);
        self
    }

    pub fn with_w0(mut self, w0: f64) -> Self {
        self.w0 = w0;
        self
    }

    pub fn kappa(&self) -> f64 {
        self.lip_grad / self.mu
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        let bad = |m: String| Err(TheoryError::InvalidParams(m));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.lip_grad >= self.mu && self.lip_grad.is_finite()) {
            return bad(format!("need L >= mu, got L = {}, mu = {}", self.lip_grad, self.mu));
        }
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if !(self.w0 >= 0.0 && self.w0.is_finite()) {
            return bad(format!("W0 must be nonnegative, got {}", self.w0));
        }
        if let Some(h) = self.lip_hess {
            if !(h >= 0.0 && h.is_finite()) {
                return bad(format!("H must be nonnegative, got {h}"));
            }
        }
        if self.tau == Some(0) {
            return bad("tau must be at least 1".into());
        }
        Ok(())
    }

    fn hess(&self, alg: Algorithm) -> Result<f64, TheoryError> {
        self.lip_hess.ok_or(TheoryError::MissingHessian(alg))
    }

    fn tau(&self, alg: Algorithm) -> Result<f64, TheoryError> {
        self.tau.map(|t| t as f64).ok_or(TheoryError::MissingTau(alg))
    }
}

/// Largest admissible step size. `strict` caps exclude the endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCap {
    pub value: f64,
    pub strict: bool,
}

impl StepCap {
    pub fn admits(&self, h: f64) -> bool {
        h > 0.0 && if self.strict { h < self.value } else { h <= self.value }
    }
}

pub fn stepsize_cap(alg: Algorithm, p: &BoundParams) -> Result<StepCap, TheoryError> {
    p.validate()?;
    let (mu, l, k, d) = (p.mu, p.lip_grad, p.kappa(), p.d as f64);
    let (value, strict) = match alg {
        Algorithm::Olmc => (2.0 / (mu + l), true),
        Algorithm::Ulmc => (1.0 / (8.0 * k * k * mu), false),
        Algorithm::RcdO => {
            let hh = p.hess(alg)?;
            let a = 1.0 / (9.0 * k * k * mu * d);
            let b = 2.0 / (hh * hh / (k * mu * mu) + k * k * mu / d);
            (a.min(b), true)
        }
        Algorithm::RcdU => (1.0 / (880.0 * d * k), true),
        Algorithm::SvrgO => {
            p.hess(alg)?;
            let tau = p.tau(alg)?;
            let a = 1.0 / (400.0 * d * k * k * mu);
            let b = 1.0 / (10.0 * tau * mu.max(1.0));
            (a.min(b), true)
        }
        Algorithm::RcadO => {
            p.hess(alg)?;
            (1.0 / (3.0 * (1.0 + 9.0 * d) * k * k * mu), true)
        }
        Algorithm::SvrgU => {
            let tau = p.tau(alg)?;
            ((1.0 / (1648.0 * k * d)).min(1.0 / (40.0 * tau)), false)
        }
        Algorithm::RcadU => (1.0 / (1648.0 * k * d), false),
    };
    Ok(StepCap { value, strict })
}

/// Decay factor and remainder of the bound `decay * W0 + remainder`.
fn bound_parts(alg: Algorithm, m: f64, h: f64, p: &BoundParams) -> Result<(f64, f64), TheoryError> {
    let (mu, k, d) = (p.mu, p.kappa(), p.d as f64);
    let sqrt2 = std::f64::consts::SQRT_2;
    Ok(match alg {
        Algorithm::Olmc => {
            let hh = p.hess(alg)?;
            (
                (-mu * m * h).exp(),
                hh * h * d / (2.0 * mu) + 3.0 * k.powf(1.5) * mu.sqrt() * h * d.sqrt(),
            )
        }
        Algorithm::Ulmc => (sqrt2 * (-0.375 * m * h / k).exp(), h * (k * d).sqrt()),
        Algorithm::RcdO => {
            p.hess(alg)?;
            ((-mu * m * h / 4.0).exp(), 6.0 * d * (k * h).sqrt())
        }
        Algorithm::RcdU => {
            let c = 100.0 * (k / mu).sqrt();
            (4.0 * (-h * m / (8.0 * k)).exp(), c * d * h.sqrt())
        }
        Algorithm::SvrgO => {
            let hh = p.hess(alg)?;
            let tau = p.tau(alg)?;
            let c1 = 30.0 * k.powf(1.5) * mu;
            let c2 = 50.0 * k * mu.sqrt()
                + 5.0 * (k.powi(3) * mu / d + 2.0 * hh * hh / (mu * mu)).sqrt();
            (
                (-mu * h * m / 32.0).exp(),
                h.powf(1.5) * tau * d * c1 + h * tau.sqrt() * d * c2,
            )
        }
        Algorithm::RcadO => {
            let hh = p.hess(alg)?;
            let c1 = 77.0 * k * k * mu;
            let c2 = hh * hh / (mu * mu) + k.powi(3) * mu / d;
            (
                sqrt2 * (-mu * h * m / 4.0).exp(),
                2.0 * h * (d.powi(3) * c1 + d * d * c2).sqrt(),
            )
        }
        Algorithm::SvrgU => {
            let tau = p.tau(alg)?;
            let c1 = 200.0 * (k / mu).sqrt();
            let c2 = 240.0 / mu.sqrt();
            (
                4.0 * (-h * m / (32.0 * k)).exp(),
                h * d.sqrt() * c1 + h.powf(1.5) * tau * d * c2,
            )
        }
        Algorithm::RcadU => {
            let c1 = 200.0 * (k / mu).sqrt();
            let c2 = 200.0 / mu.sqrt();
            (
                4.0 * sqrt2 * (-h * m / (8.0 * k)).exp(),
                h * d.sqrt() * c1 + h.powf(1.5) * d * d * c2,
            )
        }
    })
}

fn check_applicable(alg: Algorithm, h: f64, p: &BoundParams) -> Result<(), TheoryError> {
    let cap = stepsize_cap(alg, p)?;
    if !cap.admits(h) {
        return Err(TheoryError::NotApplicable(format!(
            "h = {h} violates the {alg} step-size condition h {} {}",
            if cap.strict { "<" } else { "<=" },
            cap.value
        )));
    }
    if alg.is_underdamped() {
        if let Some(g) = p.gamma {
            let want = 1.0 / p.lip_grad;
            if (g - want).abs() > 1e-12 * want {
                return Err(TheoryError::NotApplicable(format!(
                    "{alg} bound assumes gamma = 1/L = {want}, got {g}"
                )));
            }
        }
    }
    Ok(())
}

/// Upper bound on `W2(law of x^m, target)`.
pub fn w2_bound(alg: Algorithm, m: u64, h: f64, p: &BoundParams) -> Result<f64, TheoryError> {
    check_applicable(alg, h, p)?;
    let (decay, rem) = bound_parts(alg, m as f64, h, p)?;
    Ok(decay * p.w0 + rem)
}

/// The `m -> infinity` limit of [`w2_bound`].
pub fn w2_remainder(alg: Algorithm, h: f64, p: &BoundParams) -> Result<f64, TheoryError> {
    check_applicable(alg, h, p)?;
    Ok(bound_parts(alg, f64::INFINITY, h, p)?.1)
}

/// Lower bound on W2 for RCD-U-LMC (`gamma = 1`) started from
/// `x ~ N(1/8 * 1, I)`, `v ~ N(0, I)` on the standard Gaussian. Requires
/// `d > 1872` and `h < 1 / (1440^2 d)`.
pub fn counterexample_lower_bound(d: usize, h: f64, m: u64) -> Result<f64, TheoryError> {
    let df = d as f64;
    if d <= 1872 {
        return Err(TheoryError::NotApplicable(format!("needs d > 1872, got {d}")));
    }
    let h_max = 1.0 / (1440.0 * 1440.0 * df);
    if !(h > 0.0 && h < h_max) {
        return Err(TheoryError::NotApplicable(format!(
            "needs 0 < h < 1/(1440^2 d) = {h_max:e}, got {h:e}"
        )));
    }
    Ok((-2.0 * m as f64 * h).exp() * df.sqrt() / 1024.0 + df.powf(1.5) * h / 2304.0)
}

/// `(iterations, cost)` to reach accuracy `eps`, up to constants and log
/// factors.
pub fn iteration_cost_estimate(alg: Algorithm, d: usize, eps: f64) -> Result<(f64, f64), TheoryError> {
    if d == 0 {
        return Err(TheoryError::InvalidParams("d must be at least 1".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(TheoryError::InvalidParams(format!("eps must lie in (0, 1), got {eps}")));
    }
    let d = d as f64;
    Ok(match alg {
        Algorithm::Olmc => (d / eps, d * d / eps),
        Algorithm::Ulmc => (d.sqrt() / eps, d.powf(1.5) / eps),
        Algorithm::RcdO | Algorithm::RcdU => {
            let n = d * d / (eps * eps);
            (n, n)
        }
        Algorithm::SvrgO | Algorithm::RcadO => {
            let n = d.powf(1.5) / eps;
            (n, n)
        }
        Algorithm::SvrgU | Algorithm::RcadU => {
            let n = (d.powf(4.0 / 3.0) / eps.powf(2.0 / 3.0)).max(d.sqrt() / eps);
            (n, n)
        }
    })
}

/// Human-readable scaling of [`iteration_cost_estimate`].
pub fn scaling_label(alg: Algorithm) -> (&'static str, &'static str) {
    match alg {
        Algorithm::Olmc => ("d/eps", "d^2/eps"),
        Algorithm::Ulmc => ("d^(1/2)/eps", "d^(3/2)/eps"),
        Algorithm::RcdO | Algorithm::RcdU => ("d^2/eps^2", "d^2/eps^2"),
        Algorithm::SvrgO | Algorithm::RcadO => ("d^(3/2)/eps", "d^(3/2)/eps"),
        Algorithm::SvrgU | Algorithm::RcadU => (
            "max{d^(4/3)/eps^(2/3), d^(1/2)/eps}",
            "max{d^(4/3)/eps^(2/3), d^(1/2)/eps}",
        ),
    }
}

/// Exact W2 between full-gradient OLMC iterates on `N(0, I_d)` started
/// from `N(x0_mean * 1, I_d)`, and the target, at steps `0..=m_max`.
///
/// Each coordinate follows `x' = (1 - h) x + sqrt(2h) xi`, so the law stays
/// Gaussian with mean `(1-h)^m x0_mean` and variance
/// `v' = (1-h)^2 v + 2h`.
pub fn olmc_gaussian_w2_trajectory(d: usize, h: f64, x0_mean: f64, m_max: u64) -> Vec<f64> {
    let mut mean = x0_mean;
    let mut var = 1.0f64;
    let mut out = Vec::with_capacity(m_max as usize + 1);
    for _ in 0..=m_max {
        let sd = var.sqrt();
        out.push((d as f64 * (mean * mean + (sd - 1.0) * (sd - 1.0))).sqrt());
        mean *= 1.0 - h;
        var = (1.0 - h) * (1.0 - h) * var + 2.0 * h;
    }
    out
}

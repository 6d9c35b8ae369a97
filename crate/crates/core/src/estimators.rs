//! Gradient fluxes `F^m` and their persistent state.
//!
//! Coordinate indices are zero-based. Every flux is dense (length `d`) and
//! reports the partial-derivative units it charged.

use crate::algorithm::FluxKind;
use crate::potentials::{Oracle, Potential};
use crate::rng::ChainStreams;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimatorError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coordinate {r} out of range for dimension {d}")]
    IndexOutOfRange { r: usize, d: usize },
    #[error("RCAD table used before initialization")]
    UninitializedTable,
    #[error("invalid selection distribution: {0}")]
    InvalidSelection(String),
    #[error("SVRG epoch length must be at least 1")]
    InvalidTau,
}

/// Coordinate selection probabilities `phi_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionDistribution {
    probs: Vec<f64>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
    uniform: bool,
}

impl SelectionDistribution {
    pub fn uniform(d: usize) -> Self {
        assert!(d >= 1, "dimension must be at least 1");
        let p = 1.0 / d as f64;
        Self {
            probs: vec![p; d],
            // Exactly d, not 1 / (1 / d).
            weights: vec![d as f64; d],
            cdf: Vec::new(),
            uniform: true,
        }
    }

    pub fn new(probs: Vec<f64>) -> Result<Self, EstimatorError> {
        if probs.is_empty() {
            return Err(EstimatorError::InvalidSelection("empty".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p > 0.0 && p.is_finite()))
        {
            return Err(EstimatorError::InvalidSelection(format!(
                "phi[{i}] = {p} is not positive"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(EstimatorError::InvalidSelection(format!(
                "probabilities sum to {total}"
            )));
        }
        let weights = probs.iter().map(|p| 1.0 / p).collect();
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self {
            probs,
            weights,
            cdf,
            uniform: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// `1 / phi_i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// The coordinate drawn at `step`.
    #[inline]
    pub fn sample(&self, streams: &ChainStreams, step: u32) -> usize {
        if self.uniform {
            streams.selection_index(step, self.probs.len())
        } else {
            let u = streams.selection_uniform(step);
            self.cdf
                .partition_point(|&c| c <= u)
                .min(self.probs.len() - 1)
        }
    }
}

/// A gradient surrogate and the units charged to produce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Flux {
    pub value: Vec<f64>,
    pub charged: u64,
}

/// SVRG anchor pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrgState {
    pub anchor: Vec<f64>,
    pub anchor_grad: Vec<f64>,
    pub tau: usize,
}

impl SvrgState {
    pub fn new(d: usize, tau: usize) -> Result<Self, EstimatorError> {
        if tau == 0 {
            return Err(EstimatorError::InvalidTau);
        }
        Ok(Self {
            anchor: vec![0.0; d],
            anchor_grad: vec![0.0; d],
            tau,
        })
    }

    pub fn is_epoch_start(&self, m: u64) -> bool {
        m % self.tau as u64 == 0
    }

    /// Writes the flux for step `m` into `out`. Epoch-boundary steps move the
    /// anchor to `x` and ignore `r`.
    pub fn flux_into(
        &mut self,
        oracle: &mut Oracle<'_>,
        x: &[f64],
        m: u64,
        r: usize,
        sel: &SelectionDistribution,
        out: &mut [f64],
    ) -> u64 {
        if self.is_epoch_start(m) {
            self.anchor.copy_from_slice(x);
            oracle.gradient(x, &mut self.anchor_grad);
            out.copy_from_slice(&self.anchor_grad);
            oracle.dim() as u64
        } else {
            out.copy_from_slice(&self.anchor_grad);
            let new = oracle.partial(x, r);
            out[r] = self.anchor_grad[r] + sel.weight(r) * (new - self.anchor_grad[r]);
            1
        }
    }
}

/// RCAD running table of most recent partials.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RcadState {
    pub table: Option<Vec<f64>>,
}

impl RcadState {
    /// `g = grad f(x0)`. Charges `d`.
    pub fn initialize(&mut self, oracle: &mut Oracle<'_>, x0: &[f64]) -> u64 {
        let mut g = vec![0.0; x0.len()];
        oracle.gradient(x0, &mut g);
        self.table = Some(g);
        x0.len() as u64
    }

    pub fn flux_into(
        &mut self,
        oracle: &mut Oracle<'_>,
        x: &[f64],
        r: usize,
        sel: &SelectionDistribution,
        out: &mut [f64],
    ) -> Result<u64, EstimatorError> {
        let table = self
            .table
            .as_mut()
            .ok_or(EstimatorError::UninitializedTable)?;
        let new = oracle.partial(x, r);
        out.copy_from_slice(table);
        out[r] = table[r] + sel.weight(r) * (new - table[r]);
        table[r] = new;
        Ok(1)
    }
}

/// Per-chain estimator memory.
#[derive(Debug, Clone, PartialEq)]
pub enum FluxState {
    Full,
    Rcd,
    Svrg(SvrgState),
    Rcad(RcadState),
}

impl FluxState {
    pub fn new(kind: FluxKind, d: usize, tau: usize) -> Result<Self, EstimatorError> {
        Ok(match kind {
            FluxKind::Full => FluxState::Full,
            FluxKind::Rcd => FluxState::Rcd,
            FluxKind::Svrg => FluxState::Svrg(SvrgState::new(d, tau)?),
            FluxKind::Rcad => FluxState::Rcad(RcadState::default()),
        })
    }

    /// One-off work before the first step; returns the units charged.
    pub fn initialize(&mut self, oracle: &mut Oracle<'_>, x0: &[f64]) -> u64 {
        match self {
            FluxState::Rcad(s) => s.initialize(oracle, x0),
            _ => 0,
        }
    }

    /// True when step `m` consumes the selected coordinate.
    pub fn uses_coordinate(&self, m: u64) -> bool {
        match self {
            FluxState::Full => false,
            FluxState::Svrg(s) => !s.is_epoch_start(m),
            _ => true,
        }
    }

    /// Writes `F^m` into `out` and returns the units charged.
    #[inline]
    pub fn flux_into(
        &mut self,
        oracle: &mut Oracle<'_>,
        x: &[f64],
        m: u64,
        r: usize,
        sel: &SelectionDistribution,
        out: &mut [f64],
    ) -> Result<u64, EstimatorError> {
        match self {
            FluxState::Full => {
                oracle.gradient(x, out);
                Ok(oracle.dim() as u64)
            }
            FluxState::Rcd => {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[r] = sel.weight(r) * oracle.partial(x, r);
                Ok(1)
            }
            FluxState::Svrg(s) => Ok(s.flux_into(oracle, x, m, r, sel, out)),
            FluxState::Rcad(s) => s.flux_into(oracle, x, r, sel, out),
        }
    }
}

fn check_dim(p: &Potential, len: usize) -> Result<(), EstimatorError> {
    if len != p.dim() {
        return Err(EstimatorError::DimensionMismatch {
            expected: p.dim(),
            got: len,
        });
    }
    Ok(())
}

fn check_index(p: &Potential, r: usize) -> Result<(), EstimatorError> {
    if r >= p.dim() {
        return Err(EstimatorError::IndexOutOfRange { r, d: p.dim() });
    }
    Ok(())
}

/// `F = grad f(x)`, charged `d`.
pub fn full_flux(p: &Potential, x: &[f64]) -> Result<Flux, EstimatorError> {
    check_dim(p, x.len())?;
    let mut value = vec![0.0; x.len()];
    let charged = FluxState::Full.flux_into(
        &mut p.oracle(),
        x,
        0,
        0,
        &SelectionDistribution::uniform(x.len()),
        &mut value,
    )?;
    Ok(Flux { value, charged })
}

/// `F = (1 / phi_r) d_r f(x) e_r`, charged 1.
pub fn rcd_flux(
    p: &Potential,
    x: &[f64],
    r: usize,
    sel: &SelectionDistribution,
) -> Result<Flux, EstimatorError> {
    check_dim(p, x.len())?;
    check_dim(p, sel.dim())?;
    check_index(p, r)?;
    let mut value = vec![0.0; x.len()];
    let charged = FluxState::Rcd.flux_into(&mut p.oracle(), x, 0, r, sel, &mut value)?;
    Ok(Flux { value, charged })
}

/// SVRG flux at step `m`.
pub fn svrg_flux(
    state: &mut SvrgState,
    p: &Potential,
    x: &[f64],
    m: u64,
    r: usize,
    sel: &SelectionDistribution,
) -> Result<Flux, EstimatorError> {
    check_dim(p, x.len())?;
    check_dim(p, state.anchor.len())?;
    check_dim(p, sel.dim())?;
    check_index(p, r)?;
    let mut value = vec![0.0; x.len()];
    let charged = state.flux_into(&mut p.oracle(), x, m, r, sel, &mut value);
    Ok(Flux { value, charged })
}

/// RCAD flux; updates `table[r]`.
pub fn rcad_flux(
    state: &mut RcadState,
    p: &Potential,
    x: &[f64],
    r: usize,
    sel: &SelectionDistribution,
) -> Result<Flux, EstimatorError> {
    check_dim(p, x.len())?;
    check_dim(p, sel.dim())?;
    check_index(p, r)?;
    if let Some(t) = &state.table {
        check_dim(p, t.len())?;
    }
    let mut value = vec![0.0; x.len()];
    let charged = state.flux_into(&mut p.oracle(), x, r, sel, &mut value)?;
    Ok(Flux { value, charged })
}

/// `E_r |F - grad f|^2 = sum_i (1 / phi_i - 1) (d_i f)^2` for the RCD flux.
/// Uncounted.
pub fn rcd_variance_exact(
    p: &Potential,
    x: &[f64],
    sel: &SelectionDistribution,
) -> Result<f64, EstimatorError> {
    check_dim(p, x.len())?;
    check_dim(p, sel.dim())?;
    let mut g = vec![0.0; x.len()];
    p.inner().gradient(x, &mut g);
    Ok(g
        .iter()
        .enumerate()
        .map(|(i, gi)| (sel.weight(i) - 1.0) * gi * gi)
        .sum())
}

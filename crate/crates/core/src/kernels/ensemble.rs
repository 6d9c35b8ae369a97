use rayon::prelude::*;

use super::chain::{simulate_full, simulate_projected};
use super::{ChainState, KernelError, Resolved, RunConfig};
use crate::metrics::{MetricError, TestFn, WeakError};
use crate::potentials::Potential;
use crate::rng::CompensatedSum;

/// Chains per work item. Fixed so that reductions do not depend on the
/// number of workers.
const CHUNK: usize = 1024;

/// Which coordinates an ensemble run simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Full,
    /// Only the leading `k` coordinates (separable potentials only).
    Tracked(usize),
    /// Track the test function's support when the potential is separable
    /// and the support is smaller than `d`; otherwise run in full.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub states: Vec<ChainState>,
    pub cost: u64,
}

fn chunks(n: usize) -> impl IndexedParallelIterator<Item = std::ops::Range<usize>> {
    (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(move |c| c * CHUNK..((c + 1) * CHUNK).min(n))
}

fn first_error<T>(results: Vec<Result<T, KernelError>>) -> Result<Vec<T>, KernelError> {
    results.into_iter().collect()
}

/// Runs `cfg.chains` independent chains and keeps their final states.
pub fn run_ensemble(cfg: &RunConfig, p: &Potential) -> Result<Ensemble, KernelError> {
    let res = Resolved::new(cfg, p)?;
    let parts = first_error(
        chunks(cfg.chains)
            .map(|range| {
                let mut states = Vec::with_capacity(range.len());
                let mut cost = 0;
                for chain in range {
                    let (s, c) = simulate_full(&res, p, chain as u64, &mut |_, _| {})?;
                    states.push(s);
                    cost += c;
                }
                Ok((states, cost))
            })
            .collect(),
    )?;
    let mut states = Vec::with_capacity(cfg.chains);
    let mut cost = 0;
    for (s, c) in parts {
        states.extend(s);
        cost += c;
    }
    Ok(Ensemble { states, cost })
}

/// Ensemble sums of `phi` at one record step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub m: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub chains: usize,
    pub steps: u64,
    pub cost: u64,
    pub phi: TestFn,
    pub projected: bool,
    pub records: Vec<Record>,
}

impl EnsembleSummary {
    pub fn final_record(&self) -> &Record {
        self.records.last().expect("step 0 is always recorded")
    }

    /// Weak error of the final ensemble.
    pub fn weak_error(&self, exact: f64) -> Result<WeakError, MetricError> {
        let r = self.final_record();
        WeakError::from_sums(self.chains, r.sum, r.sum_sq, exact)
    }

    /// `(m, ensemble mean of phi)` at every record step.
    pub fn mean_trace(&self) -> Vec<(u64, f64)> {
        let n = self.chains as f64;
        self.records.iter().map(|r| (r.m, r.sum / n)).collect()
    }
}

/// Runs the ensemble and keeps only per-record sums of `phi`.
///
/// Sums are compensated within each chunk of chains and merged in chunk
/// order, so the result is bit-identical for any number of workers.
/// Divergence reports the lowest diverged chain index.
pub fn run_ensemble_summary(
    cfg: &RunConfig,
    p: &Potential,
    phi: TestFn,
    projection: Projection,
) -> Result<EnsembleSummary, KernelError> {
    let res = Resolved::new(cfg, p)?;
    if phi.support() > res.d {
        return Err(KernelError::InvalidConfig(format!(
            "{phi} reads {} coordinates but d = {}",
            phi.support(),
            res.d
        )));
    }
    let tracked = match projection {
        Projection::Full => None,
        Projection::Tracked(k) => {
            if k < phi.support() {
                return Err(KernelError::InvalidConfig(format!(
                    "{phi} reads {} coordinates but only {k} are tracked",
                    phi.support()
                )));
            }
            Some(k)
        }
        Projection::Auto => (p.is_separable() && phi.support() < res.d).then_some(phi.support()),
    };
    let steps = res.record_steps();
    let nrec = steps.len();
    let parts = first_error(
        chunks(cfg.chains)
            .map(|range| {
                let mut sums = vec![(CompensatedSum::default(), CompensatedSum::default()); nrec];
                let mut cost = 0;
                for chain in range {
                    let mut observe = |k: usize, x: &[f64]| {
                        let v = phi.eval(x);
                        sums[k].0.add(v);
                        sums[k].1.add(v * v);
                    };
                    cost += match tracked {
                        None => simulate_full(&res, p, chain as u64, &mut observe)?.1,
                        Some(k) => simulate_projected(&res, p, chain as u64, k, &mut observe)?.cost,
                    };
                }
                Ok((sums, cost))
            })
            .collect(),
    )?;
    let mut total = vec![(CompensatedSum::default(), CompensatedSum::default()); nrec];
    let mut cost = 0;
    for (sums, c) in parts {
        for (t, s) in total.iter_mut().zip(&sums) {
            t.0.merge(&s.0);
            t.1.merge(&s.1);
        }
        cost += c;
    }
    Ok(EnsembleSummary {
        chains: cfg.chains,
        steps: cfg.steps,
        cost,
        phi,
        projected: tracked.is_some(),
        records: steps
            .iter()
            .zip(&total)
            .map(|(&m, (s, q))| Record {
                m,
                sum: s.value(),
                sum_sq: q.value(),
            })
            .collect(),
    })
}

use super::{overdamped_coord, underdamped_coord, ChainState, KernelError, Resolved, RunConfig};
use crate::algorithm::FluxKind;
use crate::estimators::FluxState;
use crate::metrics::TestFn;
use crate::potentials::Potential;
use crate::rng::{ChainStreams, INIT_V_STEP, INIT_X_STEP};

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    pub state: ChainState,
    /// Partial-derivative units charged, including any initialization.
    pub cost: u64,
    /// `(m, phi(x^m))` at the recorded steps; empty without a test function.
    pub trace: Vec<(u64, f64)>,
}

/// Runs chain `chain` of the ensemble described by `cfg`.
pub fn run_chain(
    cfg: &RunConfig,
    p: &Potential,
    chain: u64,
    phi: Option<TestFn>,
) -> Result<ChainOutcome, KernelError> {
    let res = Resolved::new(cfg, p)?;
    let mut trace = Vec::new();
    let record_steps = res.record_steps();
    let (state, cost) = simulate_full(&res, p, chain, &mut |k, x| {
        if let Some(phi) = phi {
            trace.push((record_steps[k], phi.eval(x)));
        }
    })?;
    Ok(ChainOutcome { state, cost, trace })
}

fn init_coords(streams: &ChainStreams, step: u32, mean: f64, std: f64, out: &mut [f64]) {
    streams.fill_packed_normals(step, out);
    for v in out.iter_mut() {
        *v = mean + std * *v;
    }
}

/// Full-dimensional simulation. `observe(k, x)` is called at the `k`-th
/// record step.
pub(crate) fn simulate_full(
    res: &Resolved,
    p: &Potential,
    chain: u64,
    observe: &mut dyn FnMut(usize, &[f64]),
) -> Result<(ChainState, u64), KernelError> {
    let d = res.d;
    let streams = ChainStreams::new(res.seed, chain);
    let mut x = vec![0.0; d];
    init_coords(&streams, INIT_X_STEP, res.init.x_mean, res.init.x_std, &mut x);
    let mut v = Vec::new();
    if res.coeffs.is_some() {
        v.resize(d, 0.0);
        init_coords(&streams, INIT_V_STEP, res.init.v_mean, res.init.v_std, &mut v);
    }
    let mut oracle = p.oracle();
    let mut flux = FluxState::new(res.flux(), d, res.tau)?;
    let mut cost = flux.initialize(&mut oracle, &x);
    let mut f = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut rec = 0;
    if res.records(0) {
        observe(rec, &x);
        rec += 1;
    }
    for m in 0..res.steps {
        let step = m as u32;
        let r = if flux.uses_coordinate(m) {
            res.selection.sample(&streams, step)
        } else {
            0
        };
        cost += flux.flux_into(&mut oracle, &x, m, r, &res.selection, &mut f)?;
        let finite = match &res.coeffs {
            None => {
                streams.fill_packed_normals(step, &mut z);
                let mut ok = true;
                for i in 0..d {
                    x[i] = overdamped_coord(x[i], f[i], res.h, res.sqrt_2h, z[i]);
                    ok &= x[i].is_finite();
                }
                ok
            }
            Some((c, l)) => {
                let mut ok = true;
                for i in 0..d {
                    let (xn, vn) =
                        underdamped_coord(c, l, x[i], v[i], f[i], streams.normal_pair(step, i as u32));
                    x[i] = xn;
                    v[i] = vn;
                    ok &= xn.is_finite() & vn.is_finite();
                }
                ok
            }
        };
        if !finite {
            return Err(KernelError::Diverged { chain, step: m + 1 });
        }
        if res.records(m + 1) {
            observe(rec, &x);
            rec += 1;
        }
    }
    let state = if res.coeffs.is_some() {
        ChainState::Underdamped { x, v, step: res.steps }
    } else {
        ChainState::Overdamped { x, step: res.steps }
    };
    Ok((state, cost))
}

/// The leading coordinates of a chain simulated without its other
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedOutcome {
    pub x: Vec<f64>,
    pub v: Option<Vec<f64>>,
    pub step: u64,
    pub cost: u64,
    pub trace: Vec<(u64, f64)>,
}

/// Runs chain `chain` tracking only coordinates `0..tracked`.
///
/// Needs a separable potential. The coordinate draw still ranges over all
/// `d` coordinates and every step is billed as in a full run, so the tracked
/// coordinates and the cost are bit-identical to [`run_chain`]. Divergence
/// is only detected on tracked coordinates.
pub fn run_chain_projected(
    cfg: &RunConfig,
    p: &Potential,
    chain: u64,
    tracked: usize,
    phi: Option<TestFn>,
) -> Result<ProjectedOutcome, KernelError> {
    let res = Resolved::new(cfg, p)?;
    let mut trace = Vec::new();
    let record_steps = res.record_steps();
    let out = simulate_projected(&res, p, chain, tracked, &mut |k, x| {
        if let Some(phi) = phi {
            trace.push((record_steps[k], phi.eval(x)));
        }
    })?;
    Ok(ProjectedOutcome { trace, ..out })
}

pub(crate) fn simulate_projected(
    res: &Resolved,
    p: &Potential,
    chain: u64,
    tracked: usize,
    observe: &mut dyn FnMut(usize, &[f64]),
) -> Result<ProjectedOutcome, KernelError> {
    if !p.is_separable() {
        return Err(KernelError::NotSeparable);
    }
    let d = res.d;
    let k = tracked;
    if k == 0 || k > d {
        return Err(KernelError::InvalidConfig(format!(
            "tracked coordinates must be in 1..={d}, got {k}"
        )));
    }
    let inner = p.inner();
    let sel = &res.selection;
    let dd = d as u64;
    let streams = ChainStreams::new(res.seed, chain);
    let mut x: Vec<f64> = (0..k)
        .map(|i| res.init.x_mean + res.init.x_std * streams.packed_normal(INIT_X_STEP, i))
        .collect();
    let mut v: Vec<f64> = if res.coeffs.is_some() {
        (0..k)
            .map(|i| res.init.v_mean + res.init.v_std * streams.packed_normal(INIT_V_STEP, i))
            .collect()
    } else {
        Vec::new()
    };
    let kind = res.flux();
    let svrg_tau = res.tau as u64;
    let mut oracle = p.oracle();
    // SVRG anchor gradient or RCAD table, tracked part only.
    let mut memory = vec![0.0; k];
    let mut cost = 0;
    if kind == FluxKind::Rcad {
        for i in 0..k {
            memory[i] = inner.coordinate_partial(i, x[i]);
        }
        cost += dd;
    }
    let mut f = vec![0.0; k];
    let mut rec = 0;
    if res.records(0) {
        observe(rec, &x);
        rec += 1;
    }
    for m in 0..res.steps {
        let step = m as u32;
        let units = match kind {
            FluxKind::Full => {
                for i in 0..k {
                    f[i] = inner.coordinate_partial(i, x[i]);
                }
                dd
            }
            FluxKind::Rcd => {
                let r = sel.sample(&streams, step);
                f.iter_mut().for_each(|v| *v = 0.0);
                if r < k {
                    f[r] = sel.weight(r) * inner.coordinate_partial(r, x[r]);
                }
                1
            }
            FluxKind::Svrg if m % svrg_tau == 0 => {
                for i in 0..k {
                    memory[i] = inner.coordinate_partial(i, x[i]);
                }
                f.copy_from_slice(&memory);
                dd
            }
            FluxKind::Svrg => {
                let r = sel.sample(&streams, step);
                f.copy_from_slice(&memory);
                if r < k {
                    let new = inner.coordinate_partial(r, x[r]);
                    f[r] = memory[r] + sel.weight(r) * (new - memory[r]);
                }
                1
            }
            FluxKind::Rcad => {
                let r = sel.sample(&streams, step);
                f.copy_from_slice(&memory);
                if r < k {
                    let new = inner.coordinate_partial(r, x[r]);
                    f[r] = memory[r] + sel.weight(r) * (new - memory[r]);
                    memory[r] = new;
                }
                1
            }
        };
        cost += units;
        let finite = match &res.coeffs {
            None => {
                let mut ok = true;
                for i in 0..k {
                    let z = streams.packed_normal(step, i);
                    x[i] = overdamped_coord(x[i], f[i], res.h, res.sqrt_2h, z);
                    ok &= x[i].is_finite();
                }
                ok
            }
            Some((c, l)) => {
                let mut ok = true;
                for i in 0..k {
                    let (xn, vn) =
                        underdamped_coord(c, l, x[i], v[i], f[i], streams.normal_pair(step, i as u32));
                    x[i] = xn;
                    v[i] = vn;
                    ok &= xn.is_finite() & vn.is_finite();
                }
                ok
            }
        };
        if !finite {
            return Err(KernelError::Diverged { chain, step: m + 1 });
        }
        if res.records(m + 1) {
            observe(rec, &x);
            rec += 1;
        }
    }
    oracle.charge(cost);
    Ok(ProjectedOutcome {
        x,
        v: res.coeffs.is_some().then_some(v),
        step: res.steps,
        cost,
        trace: Vec::new(),
    })
}

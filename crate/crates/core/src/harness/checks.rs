//! The acceptance criteria as runnable checks.

use std::fmt;
use std::time::{Duration, Instant};

use super::config::{ExperimentSpec, Preset, Scale};
use super::experiment::{run_experiment, RunRecord, RunStatus};
use super::presets::preset_spec;
use super::with_workers;
use crate::algorithm::Algorithm;
use crate::estimators::{
    rcad_flux, rcd_flux, rcd_variance_exact, svrg_flux, RcadState, SelectionDistribution, SvrgState,
};
use crate::kernels::{run_chain, run_ensemble, underdamped_coeffs, underdamped_step, RunConfig};
use crate::metrics::{fit_loglog_slope, TestFn};
use crate::potentials::{NoiseModel, Potential, TargetSpec};
use crate::rng::{ChainStreams, CompensatedSum, AUX_DOMAIN};
use crate::theory::{
    counterexample_lower_bound, olmc_gaussian_w2_trajectory, stepsize_cap, w2_bound, BoundParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Unit,
    Moments,
    Slopes,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Suite> {
        match s {
            "unit" => Some(Suite::Unit),
            "moments" => Some(Suite::Moments),
            "slopes" => Some(Suite::Slopes),
            "all" => Some(Suite::All),
            _ => None,
        }
    }

    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::Unit => &[1, 2, 6, 7, 9],
            Suite::Moments => &[3, 4],
            Suite::Slopes => &[5, 8],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9],
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Option<Duration>,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} criterion {}: {} [{:.2} s",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64()
        )?;
        if let Some(l) = self.limit {
            write!(f, " / limit {} s", l.as_secs())?;
        }
        write!(f, "] {}", self.detail)
    }
}

type Outcome = Result<(bool, String), String>;

fn info(id: u8) -> (&'static str, Option<u64>) {
    match id {
        1 => ("estimator unbiasedness", Some(1)),
        2 => ("RCD variance identity", Some(1)),
        3 => ("underdamped kernel moments", Some(30)),
        4 => ("AR(1) stationary variance", Some(30)),
        5 => ("saturation-error slopes", Some(600)),
        6 => ("cost accounting", None),
        7 => ("OLMC bound dominance", Some(5)),
        8 => ("lower-bound arithmetic and dimension trend", Some(300)),
        9 => ("determinism across worker counts", None),
        _ => ("unknown criterion", None),
    }
}

pub fn run_check(id: u8) -> CheckResult {
    let (name, limit) = info(id);
    let limit = limit.map(Duration::from_secs);
    let start = Instant::now();
    let outcome = match id {
        1 => unbiasedness(),
        2 => variance_identity(),
        3 => kernel_moments(),
        4 => ar1_variance(),
        5 => slopes(),
        6 => costs(),
        7 => bound_dominance(),
        8 => counterexample(),
        9 => determinism(),
        _ => Err(format!("no criterion {id}")),
    };
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(l) = limit {
        if elapsed >= l {
            passed = false;
            detail.push_str(" (over the time limit)");
        }
    }
    CheckResult {
        id,
        name,
        passed,
        detail,
        elapsed,
        limit,
    }
}

pub fn run_suite(suite: Suite) -> Vec<CheckResult> {
    suite.criteria().iter().map(|&id| run_check(id)).collect()
}

fn err(e: impl fmt::Display) -> String {
    e.to_string()
}

/// Auxiliary random streams for drawing test states.
fn aux(tag: u64) -> ChainStreams {
    ChainStreams::new(AUX_DOMAIN + 1000 + tag, 0)
}

fn normals(s: &ChainStreams, step: u32, d: usize, scale: f64) -> Vec<f64> {
    let mut v = vec![0.0; d];
    s.fill_packed_normals(step, &mut v);
    v.iter_mut().for_each(|x| *x *= scale);
    v
}

fn random_selection(s: &ChainStreams, step: u32, d: usize) -> Result<SelectionDistribution, String> {
    let raw: Vec<f64> = (0..d)
        .map(|i| 0.1 + s.uniform_pair(step, 1 + i as u32).0)
        .collect();
    let total: f64 = raw.iter().sum();
    SelectionDistribution::new(raw.iter().map(|v| v / total).collect()).map_err(err)
}

fn unit_targets() -> Result<Vec<(String, Potential)>, String> {
    let specs = [
        TargetSpec::Gaussian { d: 10, center: 0.3 },
        TargetSpec::Glm {
            d: 10,
            count: 20,
            noise: NoiseModel::Gaussian,
            x_true: 1.0,
            data_seed: 3,
        },
        TargetSpec::Glm {
            d: 10,
            count: 20,
            noise: NoiseModel::CosinePerturbed,
            x_true: 1.0,
            data_seed: 3,
        },
    ];
    specs
        .iter()
        .map(|t| Ok((super::target_label(t), t.build().map_err(err)?)))
        .collect()
}

fn gradient(p: &Potential, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    p.inner().gradient(x, &mut g);
    g
}

/// Max componentwise distance between `sum_r prob_r F(r)` and `target`.
fn weighted_error(
    sel: &SelectionDistribution,
    target: &[f64],
    mut flux: impl FnMut(usize) -> Result<Vec<f64>, String>,
) -> Result<f64, String> {
    let d = target.len();
    let mut acc = vec![CompensatedSum::default(); d];
    for r in 0..d {
        let f = flux(r)?;
        for i in 0..d {
            acc[i].add(sel.prob(r) * f[i]);
        }
    }
    Ok(acc
        .iter()
        .zip(target)
        .map(|(a, g)| (a.value() - g).abs())
        .fold(0.0, f64::max))
}

fn unbiasedness() -> Outcome {
    let mut worst: f64 = 0.0;
    for (t, (_, p)) in unit_targets()?.iter().enumerate() {
        let d = p.dim();
        let s = aux(t as u64);
        for k in 0..50u32 {
            let x = normals(&s, 3 * k, d, 1.5);
            let y = normals(&s, 3 * k + 1, d, 1.5);
            let g = gradient(p, &x);
            let uniform = SelectionDistribution::uniform(d);
            let skewed = random_selection(&s, 3 * k + 2, d)?;
            for sel in [&uniform, &skewed] {
                worst = worst.max(weighted_error(sel, &g, |r| {
                    rcd_flux(p, &x, r, sel).map(|f| f.value).map_err(err)
                })?);
                let mut svrg = SvrgState::new(d, d).map_err(err)?;
                svrg_flux(&mut svrg, p, &y, 0, 0, sel).map_err(err)?;
                worst = worst.max(weighted_error(sel, &g, |r| {
                    let mut st = svrg.clone();
                    svrg_flux(&mut st, p, &x, 1, r, sel).map(|f| f.value).map_err(err)
                })?);
                let rcad = RcadState {
                    table: Some(gradient(p, &y)),
                };
                worst = worst.max(weighted_error(sel, &g, |r| {
                    let mut st = rcad.clone();
                    rcad_flux(&mut st, p, &x, r, sel).map(|f| f.value).map_err(err)
                })?);
            }
        }
    }
    Ok((worst <= 1e-12, format!("max |E_r F - grad f| = {worst:.2e} (tol 1e-12)")))
}

fn variance_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for (t, (_, p)) in unit_targets()?.iter().enumerate() {
        let d = p.dim();
        let s = aux(10 + t as u64);
        for k in 0..50u32 {
            let x = normals(&s, 2 * k, d, 1.5);
            let g = gradient(p, &x);
            let uniform = SelectionDistribution::uniform(d);
            let skewed = random_selection(&s, 2 * k + 1, d)?;
            let norm2: f64 = g.iter().map(|v| v * v).sum();
            let skew_formula: f64 = (0..d)
                .map(|i| (1.0 / skewed.prob(i) - 1.0) * g[i] * g[i])
                .sum();
            for (sel, formula) in [(&uniform, (d as f64 - 1.0) * norm2), (&skewed, skew_formula)] {
                let mut exhaustive = CompensatedSum::default();
                for r in 0..d {
                    let f = rcd_flux(p, &x, r, sel).map_err(err)?.value;
                    let sq: f64 = f.iter().zip(&g).map(|(a, b)| (a - b) * (a - b)).sum();
                    exhaustive.add(sel.prob(r) * sq);
                }
                let library = rcd_variance_exact(p, &x, sel).map_err(err)?;
                for v in [exhaustive.value(), library] {
                    worst = worst.max((v - formula).abs() / formula);
                }
            }
        }
    }
    Ok((worst <= 1e-10, format!("max relative error {worst:.2e} (tol 1e-10)")))
}

fn kernel_moments() -> Outcome {
    const N: usize = 1_000_000;
    let (x0, v0, f0) = (0.3, -0.7, 1.2);
    let mut notes = Vec::new();
    let mut ok = true;
    let mut worst_z: f64 = 0.0;
    for (gi, gamma) in [0.5, 1.0].into_iter().enumerate() {
        for (hi, h) in [0.05, 0.1, 0.5].into_iter().enumerate() {
            let c = underdamped_coeffs(h, gamma);
            let streams = ChainStreams::new(AUX_DOMAIN + 2000 + (gi * 3 + hi) as u64, 0);
            let mut xs = Vec::with_capacity(N);
            let mut vs = Vec::with_capacity(N);
            for k in 0..N {
                let (z1, z2) = streams.normal_pair(k as u32, 0);
                let mut x = [x0];
                let mut v = [v0];
                underdamped_step(&mut x, &mut v, &[f0], &c, &[z1, z2]).map_err(err)?;
                xs.push(x[0]);
                vs.push(v[0]);
            }
            let n = N as f64;
            let mean = |a: &[f64]| a.iter().copied().collect::<CompensatedSum>().value() / n;
            let (mx, mv) = (mean(&xs), mean(&vs));
            let cov = |a: &[f64], ma: f64, b: &[f64], mb: f64| {
                a.iter()
                    .zip(b)
                    .map(|(p, q)| (p - ma) * (q - mb))
                    .collect::<CompensatedSum>()
                    .value()
                    / (n - 1.0)
            };
            let (sxx, sxv, svv) = (cov(&xs, mx, &xs, mx), cov(&xs, mx, &vs, mv), cov(&vs, mv, &vs, mv));
            let want_x = x0 + c.a_xv * v0 + c.a_xf * f0;
            let want_v = c.a_vv * v0 + c.a_vf * f0;
            let z = [
                (mx - want_x) / (c.s_xx / n).sqrt(),
                (mv - want_v) / (c.s_vv / n).sqrt(),
                (sxx - c.s_xx) / (c.s_xx * (2.0 / (n - 1.0)).sqrt()),
                (svv - c.s_vv) / (c.s_vv * (2.0 / (n - 1.0)).sqrt()),
                (sxv - c.s_xv) / ((c.s_xx * c.s_vv + c.s_xv * c.s_xv) / (n - 1.0)).sqrt(),
            ];
            let zmax = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            worst_z = worst_z.max(zmax);
            if zmax > 4.0 {
                ok = false;
                notes.push(format!("h={h} gamma={gamma}: z = {z:.2?}"));
            }
        }
    }
    let mut min_det = f64::INFINITY;
    for gamma in [0.1, 1.0, 10.0] {
        for k in 0..=20 {
            let det = underdamped_coeffs(2f64.powi(-k), gamma).det();
            min_det = min_det.min(det);
        }
    }
    if min_det < 0.0 {
        ok = false;
        notes.push(format!("negative determinant {min_det:e}"));
    }
    let h = 1e-3;
    let c = underdamped_coeffs(h, 1.0);
    let ratios = [
        (c.s_xx / h.powi(3), 4.0 / 3.0),
        (c.s_xv / (h * h), 2.0),
        (c.s_vv / h, 4.0),
    ];
    let worst_ratio = ratios
        .iter()
        .map(|(r, l)| (r / l - 1.0).abs())
        .fold(0.0, f64::max);
    if worst_ratio > 0.01 {
        ok = false;
        notes.push(format!("small-h ratios {ratios:?}"));
    }
    Ok((
        ok,
        format!(
            "max |z| = {worst_z:.2} over 6 (h, gamma) pairs, min det = {min_det:.2e}, small-h ratio deviation {worst_ratio:.2e} {}",
            notes.join("; ")
        ),
    ))
}

fn ar1_variance() -> Outcome {
    let (d, n, h) = (10usize, 100_000usize, 0.1);
    let p = TargetSpec::Gaussian { d, center: 0.0 }.build().map_err(err)?;
    let cfg = RunConfig {
        chains: n,
        seed: 4,
        ..RunConfig::new(Algorithm::Olmc, h, 400)
    };
    let ens = run_ensemble(&cfg, &p).map_err(err)?;
    let want = 1.0 / (1.0 - h / 2.0);
    let se = want * (2.0 / (n as f64 - 1.0)).sqrt();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        let vals: Vec<f64> = ens.states.iter().map(|s| s.x()[i]).collect();
        let mean = vals.iter().copied().collect::<CompensatedSum>().value() / n as f64;
        let var = vals
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .collect::<CompensatedSum>()
            .value()
            / (n as f64 - 1.0);
        worst = worst.max((var - want).abs() / se);
    }
    Ok((
        worst <= 4.0,
        format!("max |var - 1/(1-h/2)| = {worst:.2} SE over {d} coordinates"),
    ))
}

/// Log-log slope of the saturation error over the non-diverged runs of one
/// algorithm.
fn saturation_slope(records: &[RunRecord], alg: Algorithm) -> Result<f64, String> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.row.algorithm == alg.name() && r.row.status == RunStatus::Ok)
        .filter_map(|r| r.saturation_error.map(|s| (r.row.h, s)))
        .filter(|(_, s)| s.is_finite() && *s > 0.0)
        .collect();
    fit_loglog_slope(&pts).map_err(|e| format!("{alg}: {e} ({} usable points)", pts.len()))
}

fn slopes() -> Outcome {
    let spec = preset_spec(Preset::Example1, Scale::Desk).map_err(err)?;
    let records = run_experiment(&spec).map_err(err)?;
    let diverged = records
        .iter()
        .filter(|r| r.row.status == RunStatus::Diverged)
        .count();
    let targets: [(Algorithm, f64, f64); 6] = [
        (Algorithm::RcdO, 0.6, 1.4),
        (Algorithm::SvrgO, 1.5, 2.5),
        (Algorithm::RcadO, 1.5, 2.5),
        (Algorithm::RcdU, 0.6, 1.4),
        (Algorithm::SvrgU, 1.8, f64::INFINITY),
        (Algorithm::RcadU, 1.8, f64::INFINITY),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (alg, lo, hi) in targets {
        match saturation_slope(&records, alg) {
            Ok(s) => {
                let good = s >= lo && s <= hi;
                ok &= good;
                parts.push(format!("{alg} {s:.2}{}", if good { "" } else { "(x)" }));
            }
            Err(e) => {
                ok = false;
                parts.push(e);
            }
        }
    }
    Ok((ok, format!("slopes: {}; diverged runs: {diverged}", parts.join(", "))))
}

fn costs() -> Outcome {
    let p = TargetSpec::Gaussian { d: 10, center: 0.0 }
        .build()
        .map_err(err)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for alg in Algorithm::ALL {
        let cfg = RunConfig {
            tau: Some(10),
            ..RunConfig::new(alg, 0.01, 1000)
        };
        let cost = run_chain(&cfg, &p, 0, None).map_err(err)?.cost;
        let want = match alg {
            Algorithm::Olmc | Algorithm::Ulmc => 10_000,
            Algorithm::RcdO | Algorithm::RcdU => 1000,
            Algorithm::SvrgO | Algorithm::SvrgU => 1900,
            Algorithm::RcadO | Algorithm::RcadU => 1010,
        };
        ok &= cost == want;
        parts.push(format!("{alg} {cost}/{want}"));
    }
    Ok((ok, parts.join(", ")))
}

fn bound_dominance() -> Outcome {
    let mut min_gap = f64::INFINITY;
    for d in [2usize, 10, 50] {
        let p = BoundParams::new(1.0, 1.0, d)
            .with_hess(0.0)
            .with_w0(0.5 * (d as f64).sqrt());
        let h = stepsize_cap(Algorithm::Olmc, &p).map_err(err)?.value / 2.0;
        let traj = olmc_gaussian_w2_trajectory(d, h, 0.5, 10_000);
        if (traj[0] - p.w0).abs() > 1e-12 {
            return Ok((false, format!("d={d}: W2 at m=0 is {} not {}", traj[0], p.w0)));
        }
        for (m, w) in traj.iter().enumerate() {
            let b = w2_bound(Algorithm::Olmc, m as u64, h, &p).map_err(err)?;
            min_gap = min_gap.min(b - w);
        }
    }
    Ok((min_gap >= 0.0, format!("min(bound - exact W2) = {min_gap:.3e}")))
}

/// Saturation errors of the counterexample family at each dimension.
pub fn counterexample_trend(dims: &[usize], chains: usize) -> Result<Vec<f64>, String> {
    let base = preset_spec(Preset::Counterexample, Scale::Desk).map_err(err)?;
    dims.iter()
        .map(|&d| {
            let spec = ExperimentSpec {
                target: base.target.with_dim(d),
                chains,
                ..base.clone()
            };
            let rec = run_experiment(&spec).map_err(err)?;
            rec[0]
                .saturation_error
                .ok_or_else(|| format!("d={d} diverged"))
        })
        .collect()
}

fn counterexample() -> Outcome {
    let hand = [
        (2000usize, 1e-10, 0u64, 0.043_673_206_567_605_23),
        (2000, 1e-10, 1_000_000, 0.043_664_472_800_473_95),
        (2000, 1e-10, 1_000_000_000_000, 3.882_062_460_937_135e-9),
        (5000, 1e-11, 1_000_000_000, 0.067_686_049_269_408_99),
    ];
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (d, h, m, want) in hand {
        let got = counterexample_lower_bound(d, h, m).map_err(err)?;
        worst = worst.max((got - want).abs() / want);
    }
    ok &= worst < 1e-12;
    let rejects = counterexample_lower_bound(1872, 1e-12, 0).is_err()
        && counterexample_lower_bound(2000, 1e-9, 0).is_err();
    ok &= rejects;
    let dims = [20usize, 40, 80];
    let sat = counterexample_trend(&dims, 20_000)?;
    let increasing = sat.windows(2).all(|w| w[0] < w[1]);
    ok &= increasing;
    Ok((
        ok,
        format!(
            "hand values rel err {worst:.1e}, hypotheses enforced: {rejects}; RCD_U saturation at d = {dims:?}: {sat:.4?}"
        ),
    ))
}

fn determinism() -> Outcome {
    let mut a = preset_spec(Preset::Example1, Scale::Desk).map_err(err)?;
    a.target = a.target.with_dim(20);
    a.chains = 2500;
    a.algorithms = vec![Algorithm::RcdO, Algorithm::SvrgU, Algorithm::RcadO, Algorithm::Ulmc];
    a.h_list = vec![0.04];
    a.steps = Some(200);
    a.tau = Some(20);
    let b = ExperimentSpec {
        preset: Preset::Custom,
        target: TargetSpec::Glm {
            d: 5,
            count: 10,
            noise: NoiseModel::Gaussian,
            x_true: 1.0,
            data_seed: 2,
        },
        algorithms: vec![Algorithm::RcadU, Algorithm::SvrgO],
        h_list: vec![0.01],
        steps: Some(100),
        chains: 2100,
        test_fn: TestFn::LeadingSquares(2),
        tau: Some(5),
        gamma: Some(0.05),
        ..a.clone()
    };
    let run = |workers: usize| -> Result<Vec<(u64, Option<u64>)>, String> {
        let mut out = Vec::new();
        for spec in [&a, &b] {
            let recs = with_workers(Some(workers), || run_experiment(spec))
                .map_err(err)?
                .map_err(err)?;
            out.extend(
                recs.iter()
                    .map(|r| (r.row.cost_partials, r.row.weak_error.map(f64::to_bits))),
            );
        }
        Ok(out)
    };
    let one = run(1)?;
    let three = run(3)?;
    Ok((
        one == three,
        format!("{} runs compared between 1 and 3 workers", one.len()),
    ))
}

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentSpec, Preset, Scale};
use super::presets::preset_spec;
use super::reference::reference_moment;
use super::HarnessError;
use crate::algorithm::FluxKind;
use crate::kernels::{run_ensemble_summary, KernelError, Projection};
use crate::metrics::saturation_error;
use crate::potentials::{analytic_moment, PotentialError, TargetSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// Presets run until `m h >= HORIZON / mu`.
pub const HORIZON: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Diverged,
}

/// One CSV row: a single ensemble run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub schema: u32,
    pub preset: String,
    pub algorithm: String,
    pub target: String,
    pub d: usize,
    pub h: f64,
    pub tau: Option<usize>,
    pub gamma: Option<f64>,
    #[serde(rename = "M")]
    pub m: u64,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub phi: String,
    pub weak_error: Option<f64>,
    pub mc_stderr: Option<f64>,
    /// Zero on diverged rows.
    pub cost_partials: u64,
    pub status: RunStatus,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub row: Row,
    /// Plateau of the weak error, or the final weak error when the run is
    /// too short to have a plateau window. `None` for diverged runs.
    pub saturation_error: Option<f64>,
    /// `(m, ensemble mean of phi)` at the record steps.
    pub trace: Vec<(u64, f64)>,
}

pub fn horizon_steps(h: f64, mu: f64) -> u64 {
    (HORIZON / (mu * h)).ceil() as u64
}

pub fn target_label(t: &TargetSpec) -> String {
    match t {
        TargetSpec::Glm { noise, .. } => format!("glm_{}", noise.name()),
        _ => t.kind().to_string(),
    }
}

/// `E_pi[phi]`, from a closed form or else from the cached long-run
/// reference chain.
pub fn exact_value(spec: &ExperimentSpec) -> Result<f64, HarnessError> {
    match analytic_moment(&spec.target, spec.test_fn) {
        Ok(v) => Ok(v),
        Err(PotentialError::NoClosedForm(_)) => reference_moment(&spec.target, spec.test_fn, None),
        Err(e) => Err(e.into()),
    }
}

/// One ensemble run per (algorithm, h). Chains run in parallel; diverged
/// runs become rows with `status = diverged`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<RunRecord>, HarnessError> {
    let p = spec.target.build()?;
    let mu = p.curvature().mu.unwrap_or(1.0);
    let exact = exact_value(spec)?;
    let d = spec.target.dim();
    let mut out = Vec::with_capacity(spec.algorithms.len() * spec.h_list.len());
    for &alg in &spec.algorithms {
        for &h in &spec.h_list {
            let steps = spec.steps.unwrap_or_else(|| horizon_steps(h, mu));
            let cfg = spec.run_config(alg, h, steps);
            let start = Instant::now();
            let result = run_ensemble_summary(&cfg, &p, spec.test_fn, Projection::Auto);
            let wall_ms = start.elapsed().as_millis() as u64;
            let mut row = Row {
                schema: SCHEMA_VERSION,
                preset: spec.preset.name().into(),
                algorithm: alg.name().into(),
                target: target_label(&spec.target),
                d,
                h,
                tau: (alg.flux() == FluxKind::Svrg).then(|| spec.tau.unwrap_or(d)),
                gamma: if alg.is_underdamped() { spec.gamma } else { None },
                m: steps,
                n: spec.chains,
                seed: spec.seed,
                phi: spec.test_fn.to_string(),
                weak_error: None,
                mc_stderr: None,
                cost_partials: 0,
                status: RunStatus::Diverged,
                wall_ms,
            };
            match result {
                Ok(summary) => {
                    let we = summary.weak_error(exact)?;
                    let trace = summary.mean_trace();
                    row.weak_error = Some(we.weak_error);
                    row.mc_stderr = Some(we.mc_stderr);
                    row.cost_partials = summary.cost;
                    row.status = RunStatus::Ok;
                    out.push(RunRecord {
                        saturation_error: Some(
                            saturation_error(&trace, h, mu, exact).unwrap_or(we.weak_error),
                        ),
                        row,
                        trace,
                    });
                }
                Err(KernelError::Diverged { .. }) => out.push(RunRecord {
                    row,
                    saturation_error: None,
                    trace: Vec::new(),
                }),
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(out)
}

/// Runs a named preset.
pub fn sweep(preset: Preset, scale: Scale) -> Result<Vec<RunRecord>, HarnessError> {
    run_experiment(&preset_spec(preset, scale)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithm::Algorithm;
    use crate::harness::parse_config;
    use crate::metrics::WeakError;
    use crate::rng::ChainStreams;

    fn small() -> ExperimentSpec {
        parse_config(
            r#"
preset = "example1"
algorithm = ["RCD_O", "SVRG_U", "OLMC"]
h_list = [0.04, 0.02]
N = 1500
[target]
d = 8
"#,
        )
        .unwrap()
    }

    #[test]
    fn one_row_per_algorithm_and_step() {
        let recs = run_experiment(&small()).unwrap();
        assert_eq!(recs.len(), 6);
        let r = &recs[2].row;
        assert_eq!((r.algorithm.as_str(), r.h), ("SVRG_U", 0.04));
        assert_eq!(r.m, 500);
        assert_eq!(r.tau, Some(8));
        assert_eq!(r.gamma, Some(1.0));
        assert_eq!(recs[0].row.tau, None);
        assert_eq!(recs[0].row.gamma, None);
        assert_eq!(recs[0].row.cost_partials, 1500 * 500);
        assert_eq!(recs[5].row.cost_partials, 1500 * 1000 * 8);
        for r in &recs {
            assert_eq!(r.row.status, RunStatus::Ok);
            assert!(r.saturation_error.is_some());
        }
    }

    #[test]
    fn zero_steps_measure_the_initial_bias() {
        let mut spec = small();
        spec.steps = Some(0);
        spec.algorithms = vec![Algorithm::RcdO];
        spec.h_list = vec![0.1];
        let rec = &run_experiment(&spec).unwrap()[0];
        assert_eq!(rec.row.cost_partials, 0);
        // Independent recomputation of the initial x_1 draws.
        let values: Vec<f64> = (0..spec.chains as u64)
            .map(|c| {
                let x = 0.5 + ChainStreams::new(spec.seed, c).packed_normal(crate::rng::INIT_X_STEP, 0);
                x * x
            })
            .collect();
        let want = WeakError::from_values(&values, 1.0).unwrap();
        assert!((rec.row.weak_error.unwrap() - want.weak_error).abs() < 1e-12);
        // E[(0.5 + Z)^2] - 1 = 0.25.
        assert!((want.weak_error - 0.25).abs() < 4.0 * want.mc_stderr);
    }

    #[test]
    fn divergence_becomes_a_row() {
        let mut spec = small();
        spec.algorithms = vec![Algorithm::RcdO];
        spec.h_list = vec![30.0];
        spec.steps = Some(2000);
        let recs = run_experiment(&spec).unwrap();
        assert_eq!(recs[0].row.status, RunStatus::Diverged);
        assert_eq!(recs[0].row.weak_error, None);
        assert_eq!(recs[0].saturation_error, None);
    }

    #[test]
    fn horizon_rule() {
        assert_eq!(horizon_steps(0.02, 1.0), 1000);
        assert_eq!(horizon_steps(0.32, 1.0), 63);
        assert_eq!(horizon_steps(0.1, 2.0), 100);
    }
}

use std::fmt::Write;

use crate::algorithm::Algorithm;
use crate::theory::{
    iteration_cost_estimate, scaling_label, stepsize_cap, w2_bound, w2_remainder, BoundParams,
    StepCap, TheoryError,
};

/// Steps at which bound curves are tabulated.
pub const CURVE_STEPS: [u64; 6] = [0, 10, 100, 1_000, 10_000, 100_000];

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRow {
    pub algorithm: Algorithm,
    pub cap: Result<StepCap, TheoryError>,
    /// `(m, bound)` at `h = cap / 2`.
    pub curve: Result<Vec<(u64, f64)>, TheoryError>,
    pub remainder: Result<f64, TheoryError>,
    pub iterations: Result<f64, TheoryError>,
    pub cost: Result<f64, TheoryError>,
    pub iteration_scaling: &'static str,
    pub cost_scaling: &'static str,
}

/// Step-size caps, bound curves at half the cap, and the iteration and cost
/// scalings for every sampler.
pub fn bounds_table(params: &BoundParams, eps: f64) -> Vec<BoundsRow> {
    Algorithm::ALL
        .into_iter()
        .map(|alg| {
            let cap = stepsize_cap(alg, params);
            let h = cap.as_ref().map(|c| c.value / 2.0).map_err(Clone::clone);
            let curve = h.clone().and_then(|h| {
                CURVE_STEPS
                    .iter()
                    .map(|&m| w2_bound(alg, m, h, params).map(|b| (m, b)))
                    .collect()
            });
            let remainder = h.and_then(|h| w2_remainder(alg, h, params));
            let est = iteration_cost_estimate(alg, params.d, eps);
            let (iteration_scaling, cost_scaling) = scaling_label(alg);
            BoundsRow {
                algorithm: alg,
                cap,
                curve,
                remainder,
                iterations: est.clone().map(|e| e.0),
                cost: est.map(|e| e.1),
                iteration_scaling,
                cost_scaling,
            }
        })
        .collect()
}

fn cell<T>(r: &Result<T, TheoryError>, f: impl Fn(&T) -> String) -> String {
    match r {
        Ok(v) => f(v),
        Err(TheoryError::MissingHessian(_)) => "needs H".into(),
        Err(TheoryError::MissingTau(_)) => "needs tau".into(),
        Err(_) => "n/a".into(),
    }
}

/// Plain-text rendering of [`bounds_table`].
pub fn format_bounds_table(rows: &[BoundsRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:>14} {:>12} {:>12} {:>12}  {:<36} {}",
        "alg", "h cap", "W2 limit", "iterations", "cost", "iteration scaling", "cost scaling"
    );
    for r in rows {
        let cap = cell(&r.cap, |c| {
            format!("{}{:.4e}", if c.strict { "<" } else { "<=" }, c.value)
        });
        let _ = writeln!(
            out,
            "{:<8} {:>14} {:>12} {:>12} {:>12}  {:<36} {}",
            r.algorithm.name(),
            cap,
            cell(&r.remainder, |v| format!("{v:.4e}")),
            cell(&r.iterations, |v| format!("{v:.3e}")),
            cell(&r.cost, |v| format!("{v:.3e}")),
            r.iteration_scaling,
            r.cost_scaling
        );
    }
    let _ = writeln!(out, "\nW2 bound at h = cap/2:");
    let _ = write!(out, "{:<8}", "m");
    for m in CURVE_STEPS {
        let _ = write!(out, " {m:>11}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{:<8}", r.algorithm.name());
        match &r.curve {
            Ok(c) => {
                for (_, b) in c {
                    let _ = write!(out, " {b:>11.4e}");
                }
            }
            Err(e) => {
                let _ = write!(out, " {}", cell::<()>(&Err(e.clone()), |_| String::new()));
            }
        }
        out.push('\n');
    }
    out
}

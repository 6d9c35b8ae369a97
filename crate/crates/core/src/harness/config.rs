use std::fmt;
use std::path::PathBuf;

use toml::{Table, Value};

use super::presets::preset_raw;
use crate::algorithm::{Algorithm, FluxKind};
use crate::estimators::SelectionDistribution;
use crate::kernels::{InitSpec, RunConfig};
use crate::metrics::TestFn;
use crate::potentials::{NoiseModel, PotentialError, TargetSpec};
use crate::rng::MAX_STEPS;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("invalid config: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Example1,
    Example2,
    Example3Gaussian,
    Example3Cosine,
    Counterexample,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Example1,
        Preset::Example2,
        Preset::Example3Gaussian,
        Preset::Example3Cosine,
        Preset::Counterexample,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Example1 => "example1",
            Preset::Example2 => "example2",
            Preset::Example3Gaussian => "example3_gaussian",
            Preset::Example3Cosine => "example3_cosine",
            Preset::Counterexample => "counterexample",
            Preset::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == s)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        }
    }

    pub fn parse(s: &str) -> Option<Scale> {
        match s {
            "desk" => Some(Scale::Desk),
            "paper" => Some(Scale::Paper),
            _ => None,
        }
    }
}

/// A validated experiment: one ensemble run per (algorithm, h) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub preset: Preset,
    pub target: TargetSpec,
    pub algorithms: Vec<Algorithm>,
    pub h_list: Vec<f64>,
    pub gamma: Option<f64>,
    pub tau: Option<usize>,
    /// `None` runs each step size until `m h >= 20 / mu`.
    pub steps: Option<u64>,
    pub chains: usize,
    pub seed: u64,
    pub init: InitSpec,
    pub test_fn: TestFn,
    /// Coordinate selection probabilities; `None` is uniform.
    pub selection: Option<Vec<f64>>,
    pub record_stride: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Sets `gamma = 1/L` when `L` is known and `tau = d` when an SVRG
    /// variant is present.
    pub fn fill_defaults(&mut self) -> Result<(), PotentialError> {
        if self.gamma.is_none() {
            if let Some(l) = self.target.build()?.curvature().lip_grad {
                self.gamma = Some(1.0 / l);
            }
        }
        if self.tau.is_none() && self.algorithms.iter().any(|a| a.flux() == FluxKind::Svrg) {
            self.tau = Some(self.target.dim());
        }
        Ok(())
    }

    pub fn run_config(&self, algorithm: Algorithm, h: f64, steps: u64) -> RunConfig {
        RunConfig {
            algorithm,
            h,
            gamma: self.gamma,
            tau: self.tau,
            steps,
            chains: self.chains,
            seed: self.seed,
            init: self.init,
            selection: self.selection.clone(),
            record_stride: self.record_stride,
        }
    }
}

const TOP_KEYS: &[&str] = &[
    "preset",
    "algorithm",
    "target",
    "h",
    "h_list",
    "gamma",
    "tau",
    "M",
    "N",
    "seed",
    "phi",
    "test_fn",
    "init",
    "record_stride",
    "out",
];
const TARGET_KEYS: &[&str] = &["kind", "d", "params"];
const INIT_KEYS: &[&str] = &["x_mean", "x_std", "v_mean", "v_std"];

fn describe(v: &Value) -> String {
    format!("{} `{v}`", v.type_str())
}

fn check_unknown(t: &Table, allowed: &[&str], ctx: &str, errs: &mut Vec<String>) {
    for k in t.keys() {
        if !allowed.contains(&k.as_str()) {
            errs.push(format!("unknown key `{ctx}{k}`"));
        }
    }
}

fn get_f64(t: &Table, key: &str, ctx: &str, errs: &mut Vec<String>) -> Option<f64> {
    match t.get(key)? {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        v => {
            errs.push(format!("{ctx}{key}: expected a number, got {}", describe(v)));
            None
        }
    }
}

fn get_u64(t: &Table, key: &str, ctx: &str, errs: &mut Vec<String>) -> Option<u64> {
    match t.get(key)? {
        Value::Integer(i) if *i >= 0 => Some(*i as u64),
        Value::String(s) if s.parse::<u64>().is_ok() => s.parse().ok(),
        v => {
            errs.push(format!(
                "{ctx}{key}: expected a nonnegative integer, got {}",
                describe(v)
            ));
            None
        }
    }
}

fn get_usize(t: &Table, key: &str, ctx: &str, errs: &mut Vec<String>) -> Option<usize> {
    get_u64(t, key, ctx, errs).and_then(|v| match usize::try_from(v) {
        Ok(v) => Some(v),
        Err(_) => {
            errs.push(format!("{ctx}{key}: {v} is too large"));
            None
        }
    })
}

fn get_str<'a>(t: &'a Table, key: &str, ctx: &str, errs: &mut Vec<String>) -> Option<&'a str> {
    match t.get(key)? {
        Value::String(s) => Some(s),
        v => {
            errs.push(format!("{ctx}{key}: expected a string, got {}", describe(v)));
            None
        }
    }
}

fn get_f64_list(t: &Table, key: &str, errs: &mut Vec<String>) -> Option<Vec<f64>> {
    match t.get(key)? {
        Value::Array(a) => {
            let mut out = Vec::with_capacity(a.len());
            for (i, v) in a.iter().enumerate() {
                match v {
                    Value::Float(f) => out.push(*f),
                    Value::Integer(n) => out.push(*n as f64),
                    v => errs.push(format!("{key}[{i}]: expected a number, got {}", describe(v))),
                }
            }
            Some(out)
        }
        v => {
            errs.push(format!("{key}: expected an array of numbers, got {}", describe(v)));
            None
        }
    }
}

fn parse_target(
    value: Option<&Value>,
    base: Option<&TargetSpec>,
    errs: &mut Vec<String>,
    missing: &mut Vec<&'static str>,
) -> Option<TargetSpec> {
    let t = match value {
        None => {
            if base.is_none() {
                missing.push("target");
            }
            return base.cloned();
        }
        Some(Value::Table(t)) => t,
        Some(v) => {
            errs.push(format!("target: expected a table, got {}", describe(v)));
            return None;
        }
    };
    check_unknown(t, TARGET_KEYS, "target.", errs);
    let kind = match get_str(t, "kind", "target.", errs) {
        Some(k) => k.to_string(),
        None => match base {
            Some(b) if !t.contains_key("kind") => b.kind().to_string(),
            _ => {
                if !t.contains_key("kind") {
                    missing.push("target.kind");
                }
                return None;
            }
        },
    };
    let d = get_usize(t, "d", "target.", errs).or_else(|| {
        if !t.contains_key("d") {
            match base {
                Some(b) => return Some(b.dim()),
                None => missing.push("target.d"),
            }
        }
        None
    });
    if d == Some(0) {
        errs.push("target.d must be at least 1".into());
    }
    let empty = Table::new();
    let params = match t.get("params") {
        None => &empty,
        Some(Value::Table(p)) => p,
        Some(v) => {
            errs.push(format!("target.params: expected a table, got {}", describe(v)));
            &empty
        }
    };
    let base = base.filter(|b| b.kind() == kind);
    let ctx = "target.params.";
    let spec = match kind.as_str() {
        "gaussian" => {
            check_unknown(params, &["center"], ctx, errs);
            let center = get_f64(params, "center", ctx, errs).unwrap_or(match base {
                Some(TargetSpec::Gaussian { center, .. }) => *center,
                _ => 0.0,
            });
            TargetSpec::Gaussian { d: d?, center }
        }
        "double_gaussian" => {
            check_unknown(params, &["offset"], ctx, errs);
            let offset = get_f64(params, "offset", ctx, errs).unwrap_or(match base {
                Some(TargetSpec::DoubleGaussian { offset, .. }) => *offset,
                _ => 2.0,
            });
            if !(offset > 0.0 && offset.is_finite()) {
                errs.push(format!("{ctx}offset must be positive, got {offset}"));
            }
            TargetSpec::DoubleGaussian { d: d?, offset }
        }
        "glm" => {
            check_unknown(params, &["count", "noise", "x_true", "data_seed"], ctx, errs);
            let (c0, n0, x0, s0) = match base {
                Some(TargetSpec::Glm {
                    count,
                    noise,
                    x_true,
                    data_seed,
                    ..
                }) => (*count, *noise, *x_true, *data_seed),
                _ => (100, NoiseModel::Gaussian, 1.0, 0),
            };
            let count = get_usize(params, "count", ctx, errs).unwrap_or(c0);
            if count == 0 {
                errs.push(format!("{ctx}count must be at least 1"));
            }
            let noise = match get_str(params, "noise", ctx, errs) {
                None => n0,
                Some(s) => NoiseModel::parse(s).unwrap_or_else(|| {
                    errs.push(format!("{ctx}noise: unknown noise model `{s}`"));
                    n0
                }),
            };
            let x_true = get_f64(params, "x_true", ctx, errs).unwrap_or(x0);
            let data_seed = get_u64(params, "data_seed", ctx, errs).unwrap_or(s0);
            TargetSpec::Glm {
                d: d?,
                count,
                noise,
                x_true,
                data_seed,
            }
        }
        other => {
            errs.push(format!("target.kind: unknown kind `{other}`"));
            return None;
        }
    };
    Some(spec)
}

fn parse_algorithms(v: &Value, errs: &mut Vec<String>) -> Option<Vec<Algorithm>> {
    let one = |s: &Value, errs: &mut Vec<String>| match s {
        Value::String(s) => match s.parse::<Algorithm>() {
            Ok(a) => Some(a),
            Err(e) => {
                errs.push(format!("algorithm: {e}"));
                None
            }
        },
        v => {
            errs.push(format!("algorithm: expected a string, got {}", describe(v)));
            None
        }
    };
    match v {
        Value::Array(a) if a.is_empty() => {
            errs.push("algorithm: empty list".into());
            None
        }
        Value::Array(a) => a.iter().map(|s| one(s, errs)).collect(),
        v => one(v, errs).map(|a| vec![a]),
    }
}

fn parse_init(v: Option<&Value>, base: InitSpec, errs: &mut Vec<String>) -> InitSpec {
    let t = match v {
        None => return base,
        Some(Value::Table(t)) => t,
        Some(v) => {
            errs.push(format!("init: expected a table, got {}", describe(v)));
            return base;
        }
    };
    check_unknown(t, INIT_KEYS, "init.", errs);
    let init = InitSpec {
        x_mean: get_f64(t, "x_mean", "init.", errs).unwrap_or(base.x_mean),
        x_std: get_f64(t, "x_std", "init.", errs).unwrap_or(base.x_std),
        v_mean: get_f64(t, "v_mean", "init.", errs).unwrap_or(base.v_mean),
        v_std: get_f64(t, "v_std", "init.", errs).unwrap_or(base.v_std),
    };
    for (name, v) in [("x_std", init.x_std), ("v_std", init.v_std)] {
        if !(v >= 0.0 && v.is_finite()) {
            errs.push(format!("init.{name} must be nonnegative, got {v}"));
        }
    }
    for (name, v) in [("x_mean", init.x_mean), ("v_mean", init.v_mean)] {
        if !v.is_finite() {
            errs.push(format!("init.{name} must be finite"));
        }
    }
    init
}

/// Parses a TOML experiment description. Unknown keys are rejected and all
/// problems are reported together. Keys absent from a preset config fall
/// back to the preset's desk-scale values.
pub fn parse_config(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string().trim().to_string()))?;
    let mut errs = Vec::new();
    let mut missing = Vec::new();
    check_unknown(&table, TOP_KEYS, "", &mut errs);

    let preset = match get_str(&table, "preset", "", &mut errs) {
        None => Preset::Custom,
        Some(s) => Preset::parse(s).unwrap_or_else(|| {
            errs.push(format!("preset: unknown preset `{s}`"));
            Preset::Custom
        }),
    };
    let base = (preset != Preset::Custom).then(|| preset_raw(preset, Scale::Desk));

    let target = parse_target(table.get("target"), base.as_ref().map(|b| &b.target), &mut errs, &mut missing);

    let algorithms = match table.get("algorithm") {
        Some(v) => parse_algorithms(v, &mut errs),
        None => {
            if base.is_none() {
                missing.push("algorithm");
            }
            base.as_ref().map(|b| b.algorithms.clone())
        }
    };

    let h_list = match (table.get("h"), table.contains_key("h_list")) {
        (Some(_), true) => {
            errs.push("give either h or h_list, not both".into());
            None
        }
        (Some(_), false) => get_f64(&table, "h", "", &mut errs).map(|h| vec![h]),
        (None, true) => get_f64_list(&table, "h_list", &mut errs),
        (None, false) => {
            if base.is_none() {
                missing.push("h or h_list");
            }
            base.as_ref().map(|b| b.h_list.clone())
        }
    };
    if let Some(hs) = &h_list {
        if hs.is_empty() {
            errs.push("h_list: empty list".into());
        }
        for h in hs {
            if !(*h > 0.0 && h.is_finite()) {
                errs.push(format!("h must be positive, got {h}"));
            }
        }
    }

    let gamma = get_f64(&table, "gamma", "", &mut errs).or(base.as_ref().and_then(|b| b.gamma));
    if let Some(g) = gamma {
        if !(g > 0.0 && g.is_finite()) {
            errs.push(format!("gamma must be positive, got {g}"));
        }
    }
    let tau = get_usize(&table, "tau", "", &mut errs).or(base.as_ref().and_then(|b| b.tau));
    if tau == Some(0) {
        errs.push("tau must be at least 1".into());
    }
    let steps = get_u64(&table, "M", "", &mut errs).or(base.as_ref().and_then(|b| b.steps));
    if let Some(m) = steps {
        if m > MAX_STEPS {
            errs.push(format!("M must be at most {MAX_STEPS}, got {m}"));
        }
    }
    let chains = match get_usize(&table, "N", "", &mut errs) {
        Some(n) => Some(n),
        None if table.contains_key("N") => None,
        None => {
            if base.is_none() {
                missing.push("N");
            }
            base.as_ref().map(|b| b.chains)
        }
    };
    if let Some(n) = chains {
        if n < 2 {
            errs.push(format!("N must be at least 2, got {n}"));
        }
    }
    let seed = get_u64(&table, "seed", "", &mut errs)
        .or(base.as_ref().map(|b| b.seed))
        .unwrap_or(0);
    let selection = match table.get("phi") {
        Some(_) => get_f64_list(&table, "phi", &mut errs),
        None => base.as_ref().and_then(|b| b.selection.clone()),
    };
    if let Some(probs) = &selection {
        if let Some(t) = &target {
            if probs.len() != t.dim() {
                errs.push(format!("phi has {} entries but d = {}", probs.len(), t.dim()));
            } else if let Err(e) = SelectionDistribution::new(probs.clone()) {
                errs.push(format!("phi: {e}"));
            }
        }
    }
    let test_fn = match get_str(&table, "test_fn", "", &mut errs) {
        Some(s) => TestFn::parse(s).or_else(|| {
            errs.push(format!("test_fn: unknown test function `{s}`"));
            None
        }),
        None if table.contains_key("test_fn") => None,
        None => Some(base.as_ref().map_or(TestFn::FirstCoordSquared, |b| b.test_fn)),
    };
    if let (Some(f), Some(t)) = (test_fn, &target) {
        if f.support() > t.dim() {
            errs.push(format!("test_fn {f} reads {} coordinates but d = {}", f.support(), t.dim()));
        }
    }
    let init = parse_init(
        table.get("init"),
        base.as_ref().map_or_else(InitSpec::default, |b| b.init),
        &mut errs,
    );
    let record_stride =
        get_u64(&table, "record_stride", "", &mut errs).or(base.as_ref().and_then(|b| b.record_stride));
    if record_stride == Some(0) {
        errs.push("record_stride must be at least 1".into());
    }
    let out = get_str(&table, "out", "", &mut errs)
        .map(PathBuf::from)
        .or(base.as_ref().and_then(|b| b.out.clone()));

    if !missing.is_empty() {
        errs.insert(0, format!("missing required keys: {}", missing.join(", ")));
    }
    if !errs.is_empty() {
        return Err(ConfigError::Invalid(errs));
    }
    let mut spec = ExperimentSpec {
        preset,
        target: target.expect("reported above"),
        algorithms: algorithms.expect("reported above"),
        h_list: h_list.expect("reported above"),
        gamma,
        tau,
        steps,
        chains: chains.expect("reported above"),
        seed,
        init,
        test_fn: test_fn.expect("reported above"),
        selection,
        record_stride,
        out,
    };
    spec.fill_defaults()
        .map_err(|e| ConfigError::Invalid(vec![format!("target: {e}")]))?;
    Ok(spec)
}

fn int(v: u64) -> Value {
    match i64::try_from(v) {
        Ok(i) => Value::Integer(i),
        Err(_) => Value::String(v.to_string()),
    }
}

/// Serializes a spec so that [`parse_config`] reads it back unchanged.
pub fn to_toml(spec: &ExperimentSpec) -> String {
    let mut t = Table::new();
    t.insert("preset".into(), Value::String(spec.preset.name().into()));
    let mut target = Table::new();
    let mut params = Table::new();
    target.insert("kind".into(), Value::String(spec.target.kind().into()));
    target.insert("d".into(), int(spec.target.dim() as u64));
    match &spec.target {
        TargetSpec::Gaussian { center, .. } => {
            params.insert("center".into(), Value::Float(*center));
        }
        TargetSpec::DoubleGaussian { offset, .. } => {
            params.insert("offset".into(), Value::Float(*offset));
        }
        TargetSpec::Glm {
            count,
            noise,
            x_true,
            data_seed,
            ..
        } => {
            params.insert("count".into(), int(*count as u64));
            params.insert("noise".into(), Value::String(noise.name().into()));
            params.insert("x_true".into(), Value::Float(*x_true));
            params.insert("data_seed".into(), int(*data_seed));
        }
    }
    target.insert("params".into(), Value::Table(params));
    t.insert("target".into(), Value::Table(target));
    let algs: Vec<Value> = spec
        .algorithms
        .iter()
        .map(|a| Value::String(a.name().into()))
        .collect();
    t.insert(
        "algorithm".into(),
        if algs.len() == 1 {
            algs[0].clone()
        } else {
            Value::Array(algs)
        },
    );
    if spec.h_list.len() == 1 {
        t.insert("h".into(), Value::Float(spec.h_list[0]));
    } else {
        t.insert(
            "h_list".into(),
            Value::Array(spec.h_list.iter().map(|h| Value::Float(*h)).collect()),
        );
    }
    if let Some(g) = spec.gamma {
        t.insert("gamma".into(), Value::Float(g));
    }
    if let Some(tau) = spec.tau {
        t.insert("tau".into(), int(tau as u64));
    }
    if let Some(m) = spec.steps {
        t.insert("M".into(), int(m));
    }
    t.insert("N".into(), int(spec.chains as u64));
    t.insert("seed".into(), int(spec.seed));
    if let Some(p) = &spec.selection {
        t.insert(
            "phi".into(),
            Value::Array(p.iter().map(|v| Value::Float(*v)).collect()),
        );
    }
    t.insert("test_fn".into(), Value::String(spec.test_fn.to_string()));
    let mut init = Table::new();
    init.insert("x_mean".into(), Value::Float(spec.init.x_mean));
    init.insert("x_std".into(), Value::Float(spec.init.x_std));
    init.insert("v_mean".into(), Value::Float(spec.init.v_mean));
    init.insert("v_std".into(), Value::Float(spec.init.v_std));
    t.insert("init".into(), Value::Table(init));
    if let Some(s) = spec.record_stride {
        t.insert("record_stride".into(), int(s));
    }
    if let Some(out) = &spec.out {
        t.insert("out".into(), Value::String(out.display().to_string()));
    }
    toml::to_string(&t).expect("plain tables serialize")
}

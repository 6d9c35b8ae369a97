//! Reference values of `E_pi[phi]` for targets without a closed form.
//!
//! The reference is a long full-gradient ULMC ensemble with `gamma = 1/L`,
//! time-averaged after a burn-in. It carries the sampler's own
//! discretization bias, so it is only suitable for comparing estimators
//! against each other.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::algorithm::Algorithm;
use crate::kernels::{run_ensemble_summary, InitSpec, Projection, RunConfig};
use crate::metrics::TestFn;
use crate::potentials::TargetSpec;
use crate::rng::AUX_DOMAIN;

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "RCD_LMC_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSettings {
    pub chains: usize,
    /// Step size in units where the scaled force `gamma grad f` has
    /// Lipschitz constant 1.
    pub h: f64,
    /// Burn-in, in multiples of the condition number.
    pub burn_in: f64,
    /// Averaging window, in multiples of the condition number.
    pub window: f64,
    pub seed: u64,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        Self {
            chains: 32,
            h: 0.05,
            burn_in: 10.0,
            window: 20.0,
            seed: AUX_DOMAIN + 17,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    settings: ReferenceSettings,
    value: f64,
}

pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rcd-lmc-cache"))
}

fn cache_key(target: &TargetSpec, phi: TestFn) -> String {
    let t = match target {
        TargetSpec::Gaussian { d, center } => format!("gaussian-d{d}-c{center}"),
        TargetSpec::DoubleGaussian { d, offset } => format!("double_gaussian-d{d}-o{offset}"),
        TargetSpec::Glm {
            d,
            count,
            noise,
            x_true,
            data_seed,
        } => format!("glm_{}-d{d}-n{count}-x{x_true}-seed{data_seed}", noise.name()),
    };
    format!("{t}-{phi}")
}

/// Reference `E_pi[phi]` with default settings, cached under `cache` (or
/// [`cache_dir`]).
pub fn reference_moment(
    target: &TargetSpec,
    phi: TestFn,
    cache: Option<&Path>,
) -> Result<f64, HarnessError> {
    let dir = cache.map_or_else(cache_dir, Path::to_path_buf);
    reference_moment_with(target, phi, &ReferenceSettings::default(), &dir)
}

pub fn reference_moment_with(
    target: &TargetSpec,
    phi: TestFn,
    settings: &ReferenceSettings,
    cache: &Path,
) -> Result<f64, HarnessError> {
    let key = cache_key(target, phi);
    let path = cache.join(format!("{key}.json"));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(entry) = serde_json::from_str::<CacheEntry>(&text) {
            if entry.key == key && entry.settings == *settings {
                return Ok(entry.value);
            }
        }
    }
    let value = compute(target, phi, settings)?;
    fs::create_dir_all(cache).map_err(|e| HarnessError::io(cache, e))?;
    let entry = CacheEntry {
        key,
        settings: *settings,
        value,
    };
    let text = serde_json::to_string_pretty(&entry).map_err(|e| HarnessError::Cache {
        path: path.clone(),
        message: e.to_string(),
    })?;
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(value)
}

fn compute(target: &TargetSpec, phi: TestFn, s: &ReferenceSettings) -> Result<f64, HarnessError> {
    let p = target.build()?;
    let c = p.curvature();
    let l = c.lip_grad.unwrap_or(1.0);
    let kappa = c.condition_number().unwrap_or(1.0);
    let burn = s.burn_in * kappa;
    let steps = ((burn + s.window * kappa) / s.h).ceil() as u64;
    let x_mean = match target {
        TargetSpec::Glm { x_true, .. } => *x_true,
        TargetSpec::Gaussian { center, .. } => *center,
        TargetSpec::DoubleGaussian { .. } => 0.0,
    };
    let cfg = RunConfig {
        gamma: Some(1.0 / l),
        chains: s.chains,
        seed: s.seed,
        init: InitSpec {
            x_mean,
            ..InitSpec::default()
        },
        record_stride: Some((steps / 400).max(1)),
        ..RunConfig::new(Algorithm::Ulmc, s.h, steps)
    };
    let summary = run_ensemble_summary(&cfg, &p, phi, Projection::Auto)?;
    let window: Vec<f64> = summary
        .mean_trace()
        .into_iter()
        .filter(|(m, _)| *m as f64 * s.h >= burn)
        .map(|(_, v)| v)
        .collect();
    Ok(window.iter().sum::<f64>() / window.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{analytic_moment, NoiseModel};

    fn small(noise: NoiseModel) -> TargetSpec {
        TargetSpec::Glm {
            d: 3,
            count: 6,
            noise,
            x_true: 1.0,
            data_seed: 4,
        }
    }

    fn quick() -> ReferenceSettings {
        ReferenceSettings {
            chains: 64,
            h: 0.02,
            ..ReferenceSettings::default()
        }
    }

    #[test]
    fn reference_matches_closed_form_on_gaussian_noise() {
        let dir = tempfile::tempdir().unwrap();
        let t = small(NoiseModel::Gaussian);
        let phi = TestFn::LeadingSquares(3);
        let got = reference_moment_with(&t, phi, &quick(), dir.path()).unwrap();
        let want = analytic_moment(&t, phi).unwrap();
        assert!((got - want).abs() < 0.02 * want, "{got} vs {want}");
    }

    #[test]
    fn cache_is_reused_and_keyed() {
        let dir = tempfile::tempdir().unwrap();
        let t = small(NoiseModel::CosinePerturbed);
        let phi = TestFn::FirstCoordSquared;
        let s = ReferenceSettings {
            chains: 4,
            window: 2.0,
            burn_in: 1.0,
            ..quick()
        };
        let a = reference_moment_with(&t, phi, &s, dir.path()).unwrap();
        let path = dir.path().join(format!("{}.json", cache_key(&t, phi)));
        let mut entry: CacheEntry = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(entry.value, a);
        entry.value = 123.0;
        fs::write(&path, serde_json::to_string(&entry).unwrap()).unwrap();
        assert_eq!(reference_moment_with(&t, phi, &s, dir.path()).unwrap(), 123.0);
        let other = ReferenceSettings { chains: 5, ..s };
        assert_ne!(reference_moment_with(&t, phi, &other, dir.path()).unwrap(), 123.0);
        let t2 = TargetSpec::Glm {
            d: 3,
            count: 6,
            noise: NoiseModel::CosinePerturbed,
            x_true: 1.0,
            data_seed: 5,
        };
        assert_ne!(cache_key(&t, phi), cache_key(&t2, phi));
    }
}

use super::config::{ConfigError, ExperimentSpec, Preset, Scale};
use super::HarnessError;
use crate::algorithm::Algorithm;
use crate::kernels::InitSpec;
use crate::metrics::TestFn;
use crate::potentials::{NoiseModel, TargetSpec};

const DYADIC_H: [f64; 5] = [0.32, 0.16, 0.08, 0.04, 0.02];
const GLM_H: [f64; 3] = [1.6e-4, 8e-5, 4e-5];

fn base(target: TargetSpec, chains: usize, h_list: &[f64], test_fn: TestFn) -> ExperimentSpec {
    ExperimentSpec {
        preset: Preset::Custom,
        target,
        algorithms: Algorithm::COORDINATE.to_vec(),
        h_list: h_list.to_vec(),
        gamma: None,
        tau: None,
        steps: None,
        chains,
        seed: 1,
        init: InitSpec::default(),
        test_fn,
        selection: None,
        record_stride: None,
        out: None,
    }
}

/// Preset values before `gamma`/`tau` defaults are filled.
pub(crate) fn preset_raw(preset: Preset, scale: Scale) -> ExperimentSpec {
    let desk = scale == Scale::Desk;
    let mut s = match preset {
        Preset::Example1 | Preset::Custom => {
            let (d, n) = if desk { (50, 200_000) } else { (1000, 500_000) };
            let mut s = base(
                TargetSpec::Gaussian { d, center: 0.0 },
                n,
                &DYADIC_H,
                TestFn::FirstCoordSquared,
            );
            s.init.x_mean = 0.5;
            s.init.v_mean = 0.5;
            s
        }
        Preset::Example2 => {
            let (d, n) = if desk { (50, 200_000) } else { (1000, 1_000_000) };
            let mut s = base(
                TargetSpec::DoubleGaussian { d, offset: 2.0 },
                n,
                &DYADIC_H,
                TestFn::FirstCoordSquared,
            );
            s.gamma = Some(1.0);
            s
        }
        Preset::Example3Gaussian | Preset::Example3Cosine => {
            let noise = if preset == Preset::Example3Gaussian {
                NoiseModel::Gaussian
            } else {
                NoiseModel::CosinePerturbed
            };
            base(
                TargetSpec::Glm {
                    d: 100,
                    count: 100,
                    noise,
                    x_true: 1.0,
                    data_seed: 0,
                },
                if desk { 500 } else { 1_000_000 },
                &GLM_H,
                TestFn::LeadingSquares(10),
            )
        }
        Preset::Counterexample => {
            let (d, n) = if desk { (80, 30_000) } else { (2000, 100_000) };
            let mut s = base(
                TargetSpec::Gaussian { d, center: 0.0 },
                n,
                &[1e-3],
                TestFn::FirstCoordSquared,
            );
            s.algorithms = vec![Algorithm::RcdU];
            s.gamma = Some(1.0);
            s.init.x_mean = 0.125;
            s
        }
    };
    s.preset = preset;
    s
}

/// The experiment behind a named preset, with defaults filled.
pub fn preset_spec(preset: Preset, scale: Scale) -> Result<ExperimentSpec, HarnessError> {
    if preset == Preset::Custom {
        return Err(ConfigError::Invalid(vec![
            "the custom preset needs a config file with a full target spec".into(),
        ])
        .into());
    }
    let mut s = preset_raw(preset, scale);
    s.fill_defaults()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_desk_values() {
        let s = preset_spec(Preset::Example1, Scale::Desk).unwrap();
        assert_eq!(s.target, TargetSpec::Gaussian { d: 50, center: 0.0 });
        assert_eq!(s.chains, 200_000);
        assert_eq!(s.h_list, vec![0.32, 0.16, 0.08, 0.04, 0.02]);
        assert_eq!(s.algorithms.len(), 6);
        assert_eq!((s.init.x_mean, s.init.v_mean), (0.5, 0.5));
        assert_eq!(s.gamma, Some(1.0));
        assert_eq!(s.tau, Some(50));
        let p = preset_spec(Preset::Example1, Scale::Paper).unwrap();
        assert_eq!((p.target.dim(), p.chains), (1000, 500_000));
    }

    #[test]
    fn example3_regenerates_its_dataset() {
        let s = preset_spec(Preset::Example3Gaussian, Scale::Desk).unwrap();
        let TargetSpec::Glm { d, count, x_true, .. } = s.target else {
            panic!()
        };
        assert_eq!((d, count, x_true), (100, 100, 1.0));
        assert_eq!(s.test_fn, TestFn::LeadingSquares(10));
        let a = s.target.dataset().unwrap().unwrap();
        let b = s.target.dataset().unwrap().unwrap();
        assert_eq!(a, b);
        let l = s.target.build().unwrap().curvature().lip_grad.unwrap();
        assert_eq!(s.gamma, Some(1.0 / l));
    }

    #[test]
    fn example2_and_counterexample_fix_gamma() {
        assert_eq!(preset_spec(Preset::Example2, Scale::Desk).unwrap().gamma, Some(1.0));
        let c = preset_spec(Preset::Counterexample, Scale::Desk).unwrap();
        assert_eq!(c.gamma, Some(1.0));
        assert_eq!(c.algorithms, vec![Algorithm::RcdU]);
        assert_eq!(c.init.x_mean, 0.125);
        assert_eq!(c.init.v_mean, 0.0);
    }

    #[test]
    fn custom_is_not_a_preset() {
        assert!(preset_spec(Preset::Custom, Scale::Desk).is_err());
    }
}

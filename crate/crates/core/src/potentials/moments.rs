use super::{glm_gaussian_posterior, PotentialError, TargetSpec};
use crate::metrics::TestFn;

/// Exact `E_pi[phi]` where one is available.
pub fn analytic_moment(target: &TargetSpec, phi: TestFn) -> Result<f64, PotentialError> {
    let k = phi.support();
    if k > target.dim() {
        return Err(PotentialError::DimensionMismatch {
            expected: target.dim(),
            got: k,
        });
    }
    match target {
        TargetSpec::Gaussian { center, .. } => Ok(k as f64 * (1.0 + center * center)),
        TargetSpec::DoubleGaussian { offset, .. } => Ok(k as f64 * (1.0 + offset * offset)),
        TargetSpec::Glm { .. } => {
            let data = target.dataset().expect("glm")?;
            let (mean, cov) = glm_gaussian_posterior(&data)?;
            Ok((0..k).map(|i| cov[(i, i)] + mean[i] * mean[i]).sum())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::NoiseModel;

    #[test]
    fn gaussian_and_mixture_moments() {
        let g = TargetSpec::Gaussian { d: 50, center: 0.0 };
        assert_eq!(analytic_moment(&g, TestFn::FirstCoordSquared).unwrap(), 1.0);
        let g = TargetSpec::Gaussian { d: 50, center: 0.5 };
        assert_eq!(analytic_moment(&g, TestFn::LeadingSquares(10)).unwrap(), 12.5);
        let m = TargetSpec::DoubleGaussian { d: 5, offset: 2.0 };
        assert_eq!(analytic_moment(&m, TestFn::FirstCoordSquared).unwrap(), 5.0);
    }

    #[test]
    fn support_larger_than_dimension_is_rejected() {
        let g = TargetSpec::Gaussian { d: 3, center: 0.0 };
        assert!(analytic_moment(&g, TestFn::LeadingSquares(4)).is_err());
    }

    #[test]
    fn cosine_glm_has_no_closed_form() {
        let t = TargetSpec::Glm {
            d: 4,
            count: 5,
            noise: NoiseModel::CosinePerturbed,
            x_true: 1.0,
            data_seed: 0,
        };
        assert!(matches!(
            analytic_moment(&t, TestFn::FirstCoordSquared),
            Err(PotentialError::NoClosedForm(_))
        ));
    }
}

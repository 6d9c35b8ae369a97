use std::sync::Arc;

use super::{Curvature, Potential, PotentialError, SmoothPotential};

/// `f(x) = |x - center|^2 / 2`.
#[derive(Debug, Clone)]
pub struct IsotropicGaussian {
    center: Vec<f64>,
}

impl IsotropicGaussian {
    pub fn center(&self) -> &[f64] {
        &self.center
    }
}

impl SmoothPotential for IsotropicGaussian {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(&self.center)
            .map(|(xi, ci)| (xi - ci) * (xi - ci))
            .sum::<f64>()
    }

    #[inline]
    fn partial(&self, x: &[f64], i: usize) -> f64 {
        x[i] - self.center[i]
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for ((g, xi), ci) in out.iter_mut().zip(x).zip(&self.center) {
            *g = xi - ci;
        }
    }

    fn is_separable(&self) -> bool {
        true
    }

    #[inline]
    fn coordinate_partial(&self, i: usize, xi: f64) -> f64 {
        xi - self.center[i]
    }
}

pub fn make_isotropic_gaussian(d: usize, center: &[f64]) -> Result<Potential, PotentialError> {
    if d == 0 {
        return Err(PotentialError::ZeroDimension);
    }
    if center.len() != d {
        return Err(PotentialError::DimensionMismatch {
            expected: d,
            got: center.len(),
        });
    }
    let inner = IsotropicGaussian {
        center: center.to_vec(),
    };
    Potential::new(
        Arc::new(inner),
        Curvature::new(Some(1.0), Some(1.0), Some(0.0))?,
        format!("gaussian(d={d})"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::testutil::central_difference;

    #[test]
    fn quadratic_identity() {
        let p = make_isotropic_gaussian(2, &[0.0, 0.0]).unwrap();
        let x = [3.0, 4.0];
        assert_eq!(p.value(&x), 12.5);
        let mut g = [0.0; 2];
        p.gradient(&x, &mut g);
        assert_eq!(g, [3.0, 4.0]);
    }

    #[test]
    fn minimum_at_center() {
        let c = [0.5, -1.0, 2.0];
        let p = make_isotropic_gaussian(3, &c).unwrap();
        assert_eq!(p.value(&c), 0.0);
        let mut g = [1.0; 3];
        p.gradient(&c, &mut g);
        assert_eq!(g, [0.0; 3]);
    }

    #[test]
    fn example_one_target_metadata() {
        let p = make_isotropic_gaussian(1000, &vec![0.0; 1000]).unwrap();
        assert_eq!(p.dim(), 1000);
        let c = p.curvature();
        assert_eq!((c.mu, c.lip_grad, c.lip_hess), (Some(1.0), Some(1.0), Some(0.0)));
    }

    #[test]
    fn rejects_zero_dimension() {
        assert_eq!(
            make_isotropic_gaussian(0, &[]).unwrap_err(),
            PotentialError::ZeroDimension
        );
    }

    #[test]
    fn partials_match_finite_differences_and_coordinate_path() {
        let c = [0.3, -0.2, 1.1, 0.0];
        let p = make_isotropic_gaussian(4, &c).unwrap();
        let x = [1.5, -2.0, 0.25, 3.0];
        for i in 0..4 {
            let fd = central_difference(|y| p.value(y), &x, i, 1e-5);
            let pi = p.inner().partial(&x, i);
            assert!((pi - fd).abs() <= 1e-6 * (1.0 + pi.abs()));
            assert_eq!(pi, p.inner().coordinate_partial(i, x[i]));
        }
    }
}

use std::sync::Arc;

use super::{Curvature, Potential, PotentialError, SmoothPotential};

/// Equal-weight sum of two unit Gaussians centred at `+offset * 1` and
/// `-offset * 1`:
///
/// ```text
/// f(x) = -log[exp(-|x - o1|^2 / 2) + exp(-|x + o1|^2 / 2)]
///      = (|x|^2 + d o^2) / 2 - log(2 cosh(o s)),   s = sum_j x_j
/// ∂_i f = x_i - o tanh(o s)
/// ```
///
/// The value drops the constant `log 2`. Not strongly convex, so no
/// curvature metadata is attached.
#[derive(Debug, Clone)]
pub struct DoubleGaussian {
    d: usize,
    offset: f64,
}

impl DoubleGaussian {
    pub fn offset(&self) -> f64 {
        self.offset
    }

    #[inline]
    fn coupling(&self, x: &[f64]) -> f64 {
        let s: f64 = x.iter().sum();
        self.offset * (self.offset * s).tanh()
    }
}

impl SmoothPotential for DoubleGaussian {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, x: &[f64]) -> f64 {
        let sq: f64 = x.iter().map(|v| v * v).sum();
        let s: f64 = x.iter().sum();
        let t = (self.offset * s).abs();
        // log(2 cosh t) - log 2 = t + log1p(exp(-2t)) - log 2
        let log_cosh = t + (-2.0 * t).exp().ln_1p() - std::f64::consts::LN_2;
        0.5 * (sq + self.d as f64 * self.offset * self.offset) - log_cosh
    }

    #[inline]
    fn partial(&self, x: &[f64], i: usize) -> f64 {
        x[i] - self.coupling(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let c = self.coupling(x);
        for (g, xi) in out.iter_mut().zip(x) {
            *g = xi - c;
        }
    }
}

pub fn make_double_gaussian(d: usize, offset: f64) -> Result<Potential, PotentialError> {
    if d == 0 {
        return Err(PotentialError::ZeroDimension);
    }
    if !(offset > 0.0 && offset.is_finite()) {
        return Err(PotentialError::InvalidParameter(format!(
            "offset must be positive, got {offset}"
        )));
    }
    Potential::new(
        Arc::new(DoubleGaussian { d, offset }),
        Curvature::default(),
        format!("double_gaussian(d={d}, offset={offset})"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::testutil::central_difference;

    #[test]
    fn gradient_vanishes_at_origin() {
        let p = make_double_gaussian(5, 2.0).unwrap();
        let mut g = [1.0; 5];
        p.gradient(&[0.0; 5], &mut g);
        assert_eq!(g, [0.0; 5]);
    }

    #[test]
    fn small_point_matches_tanh_formula_and_finite_difference() {
        let p = make_double_gaussian(3, 2.0).unwrap();
        let x = [0.1, 0.1, 0.1];
        let expected = 0.1 - 2.0 * 0.6f64.tanh();
        let got = p.inner().partial(&x, 0);
        assert!((got - expected).abs() < 1e-15);
        let fd = central_difference(|y| p.value(y), &x, 0, 1e-5);
        assert!((got - fd).abs() < 1e-8, "{got} vs {fd}");
    }

    #[test]
    fn far_field_limit() {
        // sum(x) = 20: partial -> x_i - offset.
        let p = make_double_gaussian(4, 2.0).unwrap();
        let x = [5.0, 5.0, 5.0, 5.0];
        let got = p.inner().partial(&x, 2);
        assert!((got - 3.0).abs() < 1e-15);
        let fd = central_difference(|y| p.value(y), &x, 2, 1e-5);
        assert!((got - fd).abs() < 1e-8);
    }

    #[test]
    fn value_is_stable_for_large_sums() {
        let p = make_double_gaussian(2, 2.0).unwrap();
        assert!(p.value(&[400.0, 400.0]).is_finite());
        assert!(p.value(&[-400.0, -400.0]).is_finite());
    }

    #[test]
    fn no_curvature_metadata() {
        let p = make_double_gaussian(2, 2.0).unwrap();
        assert_eq!(p.curvature(), Curvature::default());
        assert!(make_double_gaussian(2, 0.0).is_err());
    }
}

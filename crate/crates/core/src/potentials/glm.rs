use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{Curvature, Potential, PotentialError, SmoothPotential};
use crate::rng::{ChainStreams, AUX_DOMAIN};

const FEATURE_STREAM: u64 = AUX_DOMAIN + 1;
const NOISE_STREAM: u64 = AUX_DOMAIN + 2;
const MAX_REJECTION_ATTEMPTS: u32 = 1 << 20;

/// Observation noise density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// `p(eta) ∝ exp(-eta^2 / 2)`.
    Gaussian,
    /// `p(eta) ∝ exp(-(eta^2 + cos eta) / 2)`.
    CosinePerturbed,
}

impl NoiseModel {
    pub fn name(self) -> &'static str {
        match self {
            NoiseModel::Gaussian => "gaussian",
            NoiseModel::CosinePerturbed => "cosine",
        }
    }

    pub fn parse(s: &str) -> Option<NoiseModel> {
        match s {
            "gaussian" => Some(NoiseModel::Gaussian),
            "cosine" | "cosine_perturbed" => Some(NoiseModel::CosinePerturbed),
            _ => None,
        }
    }

    /// Per-datum negative log-likelihood `g(eta)`.
    pub fn g(self, eta: f64) -> f64 {
        match self {
            NoiseModel::Gaussian => 0.5 * eta * eta,
            NoiseModel::CosinePerturbed => 0.5 * (eta * eta + eta.cos()),
        }
    }

    #[inline]
    pub fn g_prime(self, eta: f64) -> f64 {
        match self {
            NoiseModel::Gaussian => eta,
            NoiseModel::CosinePerturbed => eta - 0.5 * eta.sin(),
        }
    }

    pub fn g_second(self, eta: f64) -> f64 {
        match self {
            NoiseModel::Gaussian => 1.0,
            NoiseModel::CosinePerturbed => 1.0 - 0.5 * eta.cos(),
        }
    }

    /// Draws noise sample `index` from `streams`.
    ///
    /// The cosine model uses rejection against a standard-normal envelope:
    /// the density ratio `exp(-cos(eta) / 2)` is bounded by `e^{1/2}`, so a
    /// proposal is accepted with probability `exp(-(cos(eta) + 1) / 2)`.
    pub fn sample(self, streams: &ChainStreams, index: u32) -> f64 {
        match self {
            NoiseModel::Gaussian => streams.normal_pair(index, 0).0,
            NoiseModel::CosinePerturbed => {
                for attempt in 0..MAX_REJECTION_ATTEMPTS {
                    let eta = streams.normal_pair(index, 2 * attempt).0;
                    let u = streams.uniform_pair(index, 2 * attempt + 2).0;
                    if u < (-(eta.cos() + 1.0) / 2.0).exp() {
                        return eta;
                    }
                }
                unreachable!("acceptance probability is at least exp(-1)")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmDataset {
    pub features: Vec<Vec<f64>>,
    pub responses: Vec<f64>,
    pub noise: NoiseModel,
}

impl GlmDataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        responses: Vec<f64>,
        noise: NoiseModel,
    ) -> Result<Self, PotentialError> {
        let ds = Self {
            features,
            responses,
            noise,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), PotentialError> {
        if self.features.len() != self.responses.len() {
            return Err(PotentialError::InconsistentDataset(format!(
                "{} feature vectors but {} responses",
                self.features.len(),
                self.responses.len()
            )));
        }
        let Some(first) = self.features.first() else {
            return Ok(());
        };
        let d = first.len();
        if d == 0 {
            return Err(PotentialError::ZeroDimension);
        }
        if let Some((k, a)) = self.features.iter().enumerate().find(|(_, a)| a.len() != d) {
            return Err(PotentialError::InconsistentDataset(format!(
                "feature {k} has dimension {} (expected {d})",
                a.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.features.first().map(Vec::len)
    }
}

/// `b_i = x_true · a_i + eta_i` with `a_i ~ N(0, I_d)` i.i.d.
pub fn synth_glm_data(
    d: usize,
    count: usize,
    x_true: &[f64],
    noise: NoiseModel,
    seed: u64,
) -> Result<GlmDataset, PotentialError> {
    synth_with_noise_scale(d, count, x_true, noise, seed, 1.0)
}

fn synth_with_noise_scale(
    d: usize,
    count: usize,
    x_true: &[f64],
    noise: NoiseModel,
    seed: u64,
    noise_scale: f64,
) -> Result<GlmDataset, PotentialError> {
    if d == 0 {
        return Err(PotentialError::ZeroDimension);
    }
    if count == 0 {
        return Err(PotentialError::EmptyDataset);
    }
    if x_true.len() != d {
        return Err(PotentialError::DimensionMismatch {
            expected: d,
            got: x_true.len(),
        });
    }
    let feature_streams = ChainStreams::new(seed, FEATURE_STREAM);
    let noise_streams = ChainStreams::new(seed, NOISE_STREAM);
    let mut features = Vec::with_capacity(count);
    let mut responses = Vec::with_capacity(count);
    for i in 0..count {
        let mut a = vec![0.0; d];
        feature_streams.fill_packed_normals(i as u32, &mut a);
        let eta = noise.sample(&noise_streams, i as u32);
        responses.push(dot(&a, x_true) + noise_scale * eta);
        features.push(a);
    }
    GlmDataset::new(features, responses, noise)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// `f(x) = |x|^2 / 2 + sum_i g(b_i - x · a_i)`.
#[derive(Debug, Clone)]
pub struct GlmPosterior {
    d: usize,
    features: Vec<f64>,
    responses: Vec<f64>,
    noise: NoiseModel,
}

impl GlmPosterior {
    fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    fn residual_slope(&self, x: &[f64], i: usize) -> f64 {
        self.noise.g_prime(self.responses[i] - dot(self.row(i), x))
    }

    /// Largest eigenvalue of `sum_i a_i a_i^T` by power iteration.
    fn gram_lambda_max(&self) -> f64 {
        let d = self.d;
        let mut v = vec![1.0 / (d as f64).sqrt(); d];
        let mut w = vec![0.0; d];
        let mut lambda = 0.0;
        for _ in 0..100_000 {
            w.iter_mut().for_each(|e| *e = 0.0);
            for i in 0..self.responses.len() {
                let a = self.row(i);
                let s = dot(a, &v);
                for (wj, aj) in w.iter_mut().zip(a) {
                    *wj += s * aj;
                }
            }
            let norm = w.iter().map(|e| e * e).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let next = norm;
            for (vj, wj) in v.iter_mut().zip(&w) {
                *vj = wj / norm;
            }
            if (next - lambda).abs() <= 1e-8 * next {
                return next;
            }
            lambda = next;
        }
        lambda
    }
}

impl SmoothPotential for GlmPosterior {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, x: &[f64]) -> f64 {
        let prior = 0.5 * dot(x, x);
        let lik: f64 = (0..self.responses.len())
            .map(|i| self.noise.g(self.responses[i] - dot(self.row(i), x)))
            .sum();
        prior + lik
    }

    fn partial(&self, x: &[f64], j: usize) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.responses.len() {
            acc += self.residual_slope(x, i) * self.features[i * self.d + j];
        }
        x[j] - acc
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let slopes: Vec<f64> = (0..self.responses.len())
            .map(|i| self.residual_slope(x, i))
            .collect();
        for (j, g) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, s) in slopes.iter().enumerate() {
                acc += s * self.features[i * self.d + j];
            }
            *g = x[j] - acc;
        }
    }
}

pub fn make_glm_posterior(data: GlmDataset) -> Result<Potential, PotentialError> {
    data.validate()?;
    if data.is_empty() {
        return Err(PotentialError::EmptyDataset);
    }
    let d = data.dim().expect("nonempty");
    let post = GlmPosterior {
        d,
        features: data.features.iter().flatten().copied().collect(),
        responses: data.responses.clone(),
        noise: data.noise,
    };
    let lambda = post.gram_lambda_max();
    let curvature = match data.noise {
        NoiseModel::Gaussian => Curvature::new(Some(1.0), Some(1.0 + lambda), Some(0.0))?,
        NoiseModel::CosinePerturbed => {
            // g'' ∈ [1/2, 3/2] and |g'''| <= 1/2.
            let lip_hess = 0.5
                * data
                    .features
                    .iter()
                    .map(|a| dot(a, a).powf(1.5))
                    .sum::<f64>();
            Curvature::new(Some(1.0), Some(1.0 + 1.5 * lambda), Some(lip_hess))?
        }
    };
    Potential::new(
        Arc::new(post),
        curvature,
        format!("glm(d={d}, count={}, noise={})", data.len(), data.noise.name()),
    )
}

/// Exact posterior `N(mean, cov)` for Gaussian noise:
/// `cov = (I + A^T A)^{-1}`, `mean = cov A^T b`.
pub fn glm_gaussian_posterior(
    data: &GlmDataset,
) -> Result<(DVector<f64>, DMatrix<f64>), PotentialError> {
    data.validate()?;
    if data.noise != NoiseModel::Gaussian {
        return Err(PotentialError::NoClosedForm(
            "GLM posterior with non-Gaussian noise".into(),
        ));
    }
    let d = data.dim().ok_or(PotentialError::EmptyDataset)?;
    let a = DMatrix::from_fn(data.len(), d, |i, j| data.features[i][j]);
    let b = DVector::from_column_slice(&data.responses);
    let precision = DMatrix::identity(d, d) + a.transpose() * &a;
    let chol = precision
        .cholesky()
        .ok_or_else(|| PotentialError::InvalidParameter("precision not SPD".into()))?;
    let cov = chol.inverse();
    let mean = &cov * (a.transpose() * b);
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::testutil::central_difference;
    use nalgebra::SymmetricEigen;

    fn small(noise: NoiseModel) -> Potential {
        let ds = synth_glm_data(6, 15, &[1.0; 6], noise, 11).unwrap();
        make_glm_posterior(ds).unwrap()
    }

    #[test]
    fn empty_sum_limit_is_prior() {
        // One datum with a = 0 contributes nothing.
        let ds = GlmDataset::new(vec![vec![0.0; 3]], vec![0.7], NoiseModel::Gaussian).unwrap();
        let p = make_glm_posterior(ds).unwrap();
        let x = [0.3, -1.0, 2.0];
        let mut g = [0.0; 3];
        p.gradient(&x, &mut g);
        assert_eq!(g, x);
    }

    #[test]
    fn single_datum_at_origin_has_zero_gradient() {
        let ds =
            GlmDataset::new(vec![vec![1.0, 0.0, 0.0]], vec![0.0], NoiseModel::Gaussian).unwrap();
        let p = make_glm_posterior(ds).unwrap();
        let mut g = [1.0; 3];
        p.gradient(&[0.0; 3], &mut g);
        assert_eq!(g, [0.0; 3]);
    }

    #[test]
    fn cosine_noise_derivatives() {
        let m = NoiseModel::CosinePerturbed;
        assert_eq!(m.g_prime(0.0), 0.0);
        for k in -40..=40 {
            let eta = 0.25 * f64::from(k);
            let fd1 = (m.g(eta + 1e-5) - m.g(eta - 1e-5)) / 2e-5;
            assert!((fd1 - m.g_prime(eta)).abs() < 1e-8);
            let fd2 = (m.g_prime(eta + 1e-5) - m.g_prime(eta - 1e-5)) / 2e-5;
            assert!((fd2 - m.g_second(eta)).abs() < 1e-8);
            assert!((0.5..=1.5).contains(&m.g_second(eta)));
            assert!((m.g_prime(eta) - (2.0 * eta - eta.sin()) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn partials_match_finite_differences() {
        for noise in [NoiseModel::Gaussian, NoiseModel::CosinePerturbed] {
            let p = small(noise);
            let x = [0.2, -0.4, 1.0, 0.9, 1.3, -0.1];
            for i in 0..6 {
                let fd = central_difference(|y| p.value(y), &x, i, 1e-5);
                let pi = p.inner().partial(&x, i);
                assert!((pi - fd).abs() <= 1e-6 * (1.0 + pi.abs()), "{noise:?} {i}");
            }
        }
    }

    #[test]
    fn cosine_sampler_matches_quadrature() {
        // Trapezoid rule for E[cos eta] and E[eta^2] under the unnormalized density.
        let (mut z, mut c, mut s2) = (0.0, 0.0, 0.0);
        let n = 40_000;
        let dx = 24.0 / n as f64;
        for k in 0..=n {
            let eta = -12.0 + dx * k as f64;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 } * (-(eta * eta + eta.cos()) / 2.0).exp();
            z += w;
            c += w * eta.cos();
            s2 += w * eta * eta;
        }
        let (want_cos, want_sq) = (c / z, s2 / z);
        let streams = ChainStreams::new(crate::rng::AUX_DOMAIN + 77, 0);
        let draws: Vec<f64> = (0..1_000_000u32)
            .map(|i| NoiseModel::CosinePerturbed.sample(&streams, i))
            .collect();
        for (f, want) in [
            (&(|e: f64| e.cos()) as &dyn Fn(f64) -> f64, want_cos),
            (&|e: f64| e * e, want_sq),
        ] {
            let vals: Vec<f64> = draws.iter().map(|&e| f(e)).collect();
            let nf = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / nf;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
            assert!((mean - want).abs() < 4.0 * (var / nf).sqrt(), "{mean} vs {want}");
        }
    }

    proptest::proptest! {
        #[test]
        fn partials_match_finite_differences_at_random_points(
            x in proptest::collection::vec(-3.0f64..3.0, 6),
            cosine in proptest::bool::ANY,
        ) {
            let noise = if cosine { NoiseModel::CosinePerturbed } else { NoiseModel::Gaussian };
            let p = small(noise);
            for i in 0..6 {
                let fd = central_difference(|y| p.value(y), &x, i, 1e-5);
                let pi = p.inner().partial(&x, i);
                proptest::prop_assert!((pi - fd).abs() <= 1e-6 * (1.0 + pi.abs()));
            }
        }
    }

    #[test]
    fn gradient_equals_stacked_partials_bitwise() {
        let p = small(NoiseModel::CosinePerturbed);
        let x = [0.2, -0.4, 1.0, 0.9, 1.3, -0.1];
        let mut g = [0.0; 6];
        p.inner().gradient(&x, &mut g);
        for (i, gi) in g.iter().enumerate() {
            assert_eq!(gi.to_bits(), p.inner().partial(&x, i).to_bits());
        }
    }

    #[test]
    fn lipschitz_constant_matches_eigensolver() {
        let ds = synth_glm_data(8, 30, &[1.0; 8], NoiseModel::Gaussian, 3).unwrap();
        let a = DMatrix::from_fn(30, 8, |i, j| ds.features[i][j]);
        let gram = a.transpose() * &a;
        let lmax = SymmetricEigen::new(gram).eigenvalues.max();
        let p = make_glm_posterior(ds).unwrap();
        let l = p.curvature().lip_grad.unwrap();
        assert!(((l - 1.0) - lmax).abs() <= 1e-6 * lmax, "{l} vs {lmax}");
        assert_eq!(p.curvature().mu, Some(1.0));
    }

    #[test]
    fn zero_noise_gives_exact_linear_responses() {
        let x_true = [1.0, -2.0, 0.5];
        let ds = synth_with_noise_scale(3, 20, &x_true, NoiseModel::Gaussian, 9, 0.0).unwrap();
        for (a, b) in ds.features.iter().zip(&ds.responses) {
            assert_eq!(*b, dot(a, &x_true));
        }
    }

    #[test]
    fn synthesis_is_reproducible_and_validated() {
        let a = synth_glm_data(4, 5, &[1.0; 4], NoiseModel::CosinePerturbed, 1).unwrap();
        let b = synth_glm_data(4, 5, &[1.0; 4], NoiseModel::CosinePerturbed, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            synth_glm_data(4, 0, &[1.0; 4], NoiseModel::Gaussian, 1).unwrap_err(),
            PotentialError::EmptyDataset
        );
        assert!(GlmDataset::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0.0, 0.0], NoiseModel::Gaussian).is_err());
    }

    #[test]
    fn hessian_of_gaussian_glm_is_at_least_identity() {
        let p = small(NoiseModel::Gaussian);
        let d = p.dim();
        for probe in 0..5 {
            let x: Vec<f64> = (0..d).map(|j| ((probe * 7 + j) as f64).sin()).collect();
            let h = DMatrix::from_fn(d, d, |i, j| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += 1e-5;
                xm[j] -= 1e-5;
                (p.inner().partial(&xp, i) - p.inner().partial(&xm, i)) / 2e-5
            });
            let sym = (&h + h.transpose()) * 0.5;
            let lmin = SymmetricEigen::new(sym).eigenvalues.min();
            assert!(lmin >= 1.0 - 1e-6, "{lmin}");
        }
    }

    #[test]
    fn closed_form_posterior_mean_is_a_stationary_point() {
        let ds = synth_glm_data(5, 12, &[1.0; 5], NoiseModel::Gaussian, 2).unwrap();
        let (mean, _) = glm_gaussian_posterior(&ds).unwrap();
        let p = make_glm_posterior(ds).unwrap();
        let mut g = [0.0; 5];
        p.gradient(mean.as_slice(), &mut g);
        assert!(g.iter().all(|v| v.abs() < 1e-10), "{g:?}");
    }
}

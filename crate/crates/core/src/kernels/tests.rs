use super::*;
use crate::metrics::TestFn;
use crate::potentials::{make_double_gaussian, make_isotropic_gaussian};
use crate::rng::ChainStreams;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

// (h, s_xx, s_xv, s_vv, a_xf) at gamma = 1, evaluated with 50-digit
// arithmetic from the closed forms.
const FROZEN: [(f64, f64, f64, f64, f64); 8] = [
    (1e-6, 1.3333313333351999987e-18, 1.9999960000046666627e-12, 3.999992000010666656e-6, -4.9999966666683333327e-13),
    (1e-4, 1.3331333519986667454e-12, 1.9996000466626669422e-8, 0.00039992001066560008533, -4.9996666833326666889e-9),
    (9.99e-4, 1.3273471760354074463e-9, 1.9920186320546788534e-6, 0.003988026616083077143, -4.9866833160168741708e-7),
    (1.001e-3, 1.3353311973367890755e-9, 1.9999946693400824845e-6, 0.0039959946799978503229, -5.0066633293368901566e-7),
    (0.01, 1.3135186744998610114e-6, 0.00019604626940630249879, 0.039210560847676790561, -0.000049668326688825555204),
    (0.1, 0.0011507415690720334838, 0.016429269939837791702, 0.32967995396436069926, -0.0046826882694954646675),
    (0.5, 0.084045620362289148622, 0.19978820044686402435, 0.86466471676338730811, -0.091969860292860580399),
    (2.0, 1.2682317732317585523, 0.48185209242521707563, 0.99966453737209748816, -0.75457890972218354507),
];

#[test]
fn coefficients_match_extended_precision() {
    for (h, sxx, sxv, svv, axf) in FROZEN {
        let c = underdamped_coeffs(h, 1.0);
        assert!(rel(c.s_xx, sxx) < 1e-9, "s_xx at {h}: {} vs {sxx}", c.s_xx);
        assert!(rel(c.s_xv, sxv) < 1e-13, "s_xv at {h}");
        assert!(rel(c.s_vv, svv) < 1e-13, "s_vv at {h}");
        assert!(rel(c.a_xf, axf) < 1e-11, "a_xf at {h}: {} vs {axf}", c.a_xf);
        // a_vf = -(1 - e^{-2h}) / 2 and s_xv = (1 - e^{-2h})^2 / 2.
        assert!(rel(c.a_vf, -0.5 * (2.0 * sxv).sqrt()) < 1e-13, "a_vf at {h}");
    }
}

#[test]
fn zero_step_limits() {
    let c = underdamped_coeffs(0.0, 1.0);
    assert_eq!(
        (c.a_xv, c.a_xf, c.a_vv, c.a_vf, c.s_xx, c.s_xv, c.s_vv),
        (0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0)
    );
    let l = c.noise_factor().unwrap();
    assert_eq!((l.l11, l.l21, l.l22), (0.0, 0.0, 0.0));
}

#[test]
fn velocity_variance_at_one_tenth() {
    let c = underdamped_coeffs(0.1, 1.0);
    assert!(rel(c.s_vv, 1.0 - (-0.4f64).exp()) < 1e-14);
}

#[test]
fn small_step_asymptotics() {
    for (h, tol) in [(1e-3, 1e-2), (1e-6, 1e-5)] {
        for gamma in [0.5, 1.0, 3.0] {
            let c = underdamped_coeffs(h, gamma);
            assert!(rel(c.s_xx / (gamma * h.powi(3)), 4.0 / 3.0) < tol);
            assert!(rel(c.s_xv / (gamma * h * h), 2.0) < tol);
            assert!(rel(c.s_vv / (gamma * h), 4.0) < tol);
        }
    }
}

#[test]
fn taylor_switch_is_continuous() {
    let below = underdamped_coeffs(TAYLOR_SWITCH * (1.0 - 1e-12), 1.0);
    let above = underdamped_coeffs(TAYLOR_SWITCH, 1.0);
    assert!(rel(below.s_xx, above.s_xx) < 1e-9);
    assert!(rel(below.a_xf, above.a_xf) < 1e-11);
}

#[test]
fn covariance_is_psd_on_grid() {
    for k in 0..=20 {
        let h = 2f64.powi(-k);
        for gamma in [0.1, 1.0, 10.0] {
            let c = underdamped_coeffs(h, gamma);
            assert!(c.s_xx >= 0.0 && c.s_vv >= 0.0);
            assert!(c.det() >= DET_TOLERANCE, "det {} at h {h} gamma {gamma}", c.det());
            c.noise_factor().unwrap();
        }
    }
}

/// Integrates the mean and covariance ODEs of the frozen-force OU system
/// with classical RK4.
fn ou_moments_rk4(h: f64, gamma: f64, x: f64, v: f64, f: f64) -> ([f64; 2], [f64; 3]) {
    type S = [f64; 5]; // mx, mv, cxx, cxv, cvv
    let rhs = |s: &S| -> S {
        [
            s[1],
            -2.0 * s[1] - gamma * f,
            2.0 * s[3],
            s[4] - 2.0 * s[3],
            -4.0 * s[4] + 4.0 * gamma,
        ]
    };
    let n = 20_000;
    let dt = h / n as f64;
    let mut s: S = [x, v, 0.0, 0.0, 0.0];
    let add = |a: &S, b: &S, t: f64| -> S {
        let mut o = *a;
        for i in 0..5 {
            o[i] += t * b[i];
        }
        o
    };
    for _ in 0..n {
        let k1 = rhs(&s);
        let k2 = rhs(&add(&s, &k1, dt / 2.0));
        let k3 = rhs(&add(&s, &k2, dt / 2.0));
        let k4 = rhs(&add(&s, &k3, dt));
        for i in 0..5 {
            s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    ([s[0], s[1]], [s[2], s[3], s[4]])
}

#[test]
fn coefficients_match_numerical_integration() {
    let (x, v, f) = (0.7, -0.3, 1.2);
    let (mean, cov) = ou_moments_rk4(0.5, 1.0, x, v, f);
    let c = underdamped_coeffs(0.5, 1.0);
    assert!((x + c.a_xv * v + c.a_xf * f - mean[0]).abs() < 1e-8);
    assert!((c.a_vv * v + c.a_vf * f - mean[1]).abs() < 1e-8);
    assert!((c.s_xx - cov[0]).abs() < 1e-8);
    assert!((c.s_xv - cov[1]).abs() < 1e-8);
    assert!((c.s_vv - cov[2]).abs() < 1e-8);
}

#[test]
fn zero_gamma_is_noise_free() {
    let c = underdamped_coeffs(0.3, 0.0);
    let mut x = [1.0];
    let mut v = [2.0];
    underdamped_step(&mut x, &mut v, &[5.0], &c, &[0.4, -1.3]).unwrap();
    assert_eq!(v[0], (-0.6f64).exp() * 2.0);
    assert_eq!(x[0], 1.0 + c.a_xv * 2.0);
}

#[test]
fn underdamped_rest_state_stays_put() {
    let c = underdamped_coeffs(0.2, 1.0);
    let mut x = [0.5, -1.0];
    let mut v = [0.0, 0.0];
    underdamped_step(&mut x, &mut v, &[0.0, 0.0], &c, &[0.0; 4]).unwrap();
    assert_eq!(x, [0.5, -1.0]);
    assert_eq!(v, [0.0, 0.0]);
}

#[test]
fn overdamped_examples() {
    let mut x = [2.0, -4.0];
    let f = x;
    overdamped_step(&mut x, &f, 0.1, &[0.0, 0.0]).unwrap();
    assert_eq!(x, [(1.0 - 0.1) * 2.0, (1.0 - 0.1) * -4.0]);
    let mut x = [2.0, -4.0];
    overdamped_step(&mut x, &f, 0.0, &[1.0, 1.0]).unwrap();
    assert_eq!(x, [2.0, -4.0]);
    let mut x = [1.0, 0.0];
    overdamped_step(&mut x, &[1.0, 0.0], 0.25, &[1.0, 1.0]).unwrap();
    assert!((x[0] - (0.75 + 0.5f64.sqrt())).abs() < 1e-15);
    assert!((x[1] - 0.5f64.sqrt()).abs() < 1e-15);
    let mut x = [f64::MAX];
    assert_eq!(
        overdamped_step(&mut x, &[-f64::MAX], 10.0, &[0.0]),
        Err(KernelError::NonFinite)
    );
}

#[test]
fn one_step_moments_small_sample() {
    let c = underdamped_coeffs(0.1, 1.0);
    let s = ChainStreams::new(17, 0);
    let n = 200_000u32;
    let (x0, v0, f) = (0.3, -0.6, 0.9);
    let (mut sx, mut sv, mut sxx, mut sxv, mut svv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        let (a, b) = s.normal_pair(k, 0);
        let mut x = [x0];
        let mut v = [v0];
        underdamped_step(&mut x, &mut v, &[f], &c, &[a, b]).unwrap();
        sx += x[0];
        sv += v[0];
        sxx += x[0] * x[0];
        sxv += x[0] * v[0];
        svv += v[0] * v[0];
    }
    let nf = f64::from(n);
    let (mx, mv) = (sx / nf, sv / nf);
    let ex = x0 + c.a_xv * v0 + c.a_xf * f;
    let ev = c.a_vv * v0 + c.a_vf * f;
    assert!((mx - ex).abs() < 4.0 * (c.s_xx / nf).sqrt());
    assert!((mv - ev).abs() < 4.0 * (c.s_vv / nf).sqrt());
    let cxx = sxx / nf - mx * mx;
    let cvv = svv / nf - mv * mv;
    let cxv = sxv / nf - mx * mv;
    assert!((cxx - c.s_xx).abs() < 4.0 * c.s_xx * (2.0 / nf).sqrt());
    assert!((cvv - c.s_vv).abs() < 4.0 * c.s_vv * (2.0 / nf).sqrt());
    let se_xv = ((c.s_xx * c.s_vv + c.s_xv * c.s_xv) / nf).sqrt();
    assert!((cxv - c.s_xv).abs() < 4.0 * se_xv);
}

fn gauss(d: usize) -> Potential {
    make_isotropic_gaussian(d, &vec![0.0; d]).unwrap()
}

#[test]
fn zero_steps_return_initial_state() {
    let p = gauss(4);
    let mut cfg = RunConfig::new(Algorithm::Olmc, 0.1, 0);
    cfg.seed = 5;
    let out = run_chain(&cfg, &p, 3, Some(TestFn::FirstCoordSquared)).unwrap();
    assert_eq!(out.cost, 0);
    let s = ChainStreams::new(5, 3);
    let mut x0 = vec![0.0; 4];
    s.fill_packed_normals(crate::rng::INIT_X_STEP, &mut x0);
    assert_eq!(out.state.x(), &x0[..]);
    assert_eq!(out.trace, vec![(0, x0[0] * x0[0])]);
}

#[test]
fn chain_costs() {
    let p = gauss(10);
    let cfg = RunConfig::new(Algorithm::RcdO, 0.01, 1000);
    assert_eq!(run_chain(&cfg, &p, 0, None).unwrap().cost, 1000);
    let mut cfg = RunConfig::new(Algorithm::SvrgO, 0.01, 100);
    cfg.tau = Some(10);
    assert_eq!(run_chain(&cfg, &p, 0, None).unwrap().cost, 190);
    let cfg = RunConfig::new(Algorithm::RcadU, 0.01, 100);
    assert_eq!(run_chain(&cfg, &p, 0, None).unwrap().cost, 110);
    let before = p.evals();
    let cfg = RunConfig::new(Algorithm::Ulmc, 0.01, 7);
    assert_eq!(run_chain(&cfg, &p, 0, None).unwrap().cost, 70);
    assert_eq!(p.evals() - before, 70);
}

#[test]
fn svrg_default_epoch_is_dimension() {
    let p = gauss(10);
    let cfg = RunConfig::new(Algorithm::SvrgO, 0.01, 100);
    assert_eq!(run_chain(&cfg, &p, 0, None).unwrap().cost, 190);
}

#[test]
fn projected_runs_match_full_runs_bitwise() {
    let p = make_isotropic_gaussian(7, &[0.1, -0.2, 0.3, 0.0, 0.5, 1.0, 2.0]).unwrap();
    for alg in Algorithm::ALL {
        let mut cfg = RunConfig::new(alg, 0.05, 60);
        cfg.seed = 11;
        cfg.tau = Some(4);
        cfg.gamma = Some(0.8);
        cfg.record_stride = Some(7);
        cfg.init = InitSpec {
            x_mean: 0.5,
            x_std: 1.0,
            v_mean: 0.25,
            v_std: 1.0,
        };
        for sel in [None, Some(vec![0.1, 0.2, 0.05, 0.15, 0.2, 0.1, 0.2])] {
            cfg.selection = sel;
            let full = run_chain(&cfg, &p, 2, Some(TestFn::LeadingSquares(2))).unwrap();
            let proj = run_chain_projected(&cfg, &p, 2, 3, Some(TestFn::LeadingSquares(2))).unwrap();
            assert_eq!(&full.state.x()[..3], &proj.x[..], "{alg}");
            if let Some(v) = full.state.v() {
                assert_eq!(&v[..3], &proj.v.as_ref().unwrap()[..], "{alg}");
            }
            assert_eq!(full.cost, proj.cost, "{alg}");
            assert_eq!(full.trace, proj.trace, "{alg}");
        }
    }
}

#[test]
fn projection_needs_separability() {
    let p = make_double_gaussian(4, 2.0).unwrap();
    let mut cfg = RunConfig::new(Algorithm::RcdO, 0.01, 5);
    cfg.gamma = Some(1.0);
    assert_eq!(
        run_chain_projected(&cfg, &p, 0, 1, None).unwrap_err(),
        KernelError::NotSeparable
    );
}

#[test]
fn gamma_defaults_to_inverse_lipschitz() {
    let p = make_double_gaussian(4, 2.0).unwrap();
    let cfg = RunConfig::new(Algorithm::RcdU, 0.01, 5);
    assert!(matches!(
        run_chain(&cfg, &p, 0, None),
        Err(KernelError::MissingGamma { .. })
    ));
    let g = gauss(3);
    let a = run_chain(&cfg, &g, 0, None).unwrap();
    let mut explicit = cfg.clone();
    explicit.gamma = Some(1.0);
    assert_eq!(a, run_chain(&explicit, &g, 0, None).unwrap());
}

#[test]
fn config_validation() {
    let p = gauss(3);
    let mut cfg = RunConfig::new(Algorithm::Olmc, 0.0, 5);
    assert!(run_chain(&cfg, &p, 0, None).is_err());
    cfg.h = 0.1;
    cfg.selection = Some(vec![0.5, 0.5]);
    assert!(run_chain(&cfg, &p, 0, None).is_err());
    cfg.selection = None;
    cfg.chains = 0;
    assert!(run_ensemble(&cfg, &p).is_err());
}

#[test]
fn single_chain_ensemble_matches_run_chain() {
    let p = gauss(5);
    let mut cfg = RunConfig::new(Algorithm::RcadU, 0.05, 40);
    cfg.seed = 9;
    let e = run_ensemble(&cfg, &p).unwrap();
    let c = run_chain(&cfg, &p, 0, None).unwrap();
    assert_eq!(e.states, vec![c.state]);
    assert_eq!(e.cost, c.cost);
}

#[test]
fn ensembles_are_deterministic_across_worker_counts() {
    let p = gauss(6);
    let mut cfg = RunConfig::new(Algorithm::SvrgU, 0.05, 30);
    cfg.chains = 2500;
    cfg.seed = 4;
    let run = |workers: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .unwrap()
            .install(|| {
                (
                    run_ensemble(&cfg, &p).unwrap(),
                    run_ensemble_summary(&cfg, &p, TestFn::FirstCoordSquared, Projection::Full)
                        .unwrap(),
                )
            })
    };
    let (e1, s1) = run(1);
    let (e3, s3) = run(3);
    assert_eq!(e1, e3);
    assert_eq!(s1, s3);
    assert_eq!(s1.cost, e1.cost);
}

#[test]
fn summary_projection_agrees_with_full() {
    let p = gauss(6);
    let mut cfg = RunConfig::new(Algorithm::RcdO, 0.05, 30);
    cfg.chains = 1500;
    let full = run_ensemble_summary(&cfg, &p, TestFn::FirstCoordSquared, Projection::Full).unwrap();
    let auto = run_ensemble_summary(&cfg, &p, TestFn::FirstCoordSquared, Projection::Auto).unwrap();
    assert!(auto.projected && !full.projected);
    assert_eq!(full.records, auto.records);
    assert_eq!(full.cost, auto.cost);
    assert_eq!(full.cost, 1500 * 30);
}

#[test]
fn divergence_reports_lowest_chain() {
    let p = gauss(3);
    let mut cfg = RunConfig::new(Algorithm::Olmc, 5.0, 2000);
    cfg.chains = 3000;
    match run_ensemble(&cfg, &p) {
        Err(KernelError::Diverged { chain, step }) => {
            assert_eq!(chain, 0);
            assert!(step > 0 && step < 2000);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn record_steps_include_start_and_end() {
    let p = gauss(2);
    let mut cfg = RunConfig::new(Algorithm::Olmc, 0.1, 10);
    cfg.record_stride = Some(4);
    let res = Resolved::new(&cfg, &p).unwrap();
    assert_eq!(res.record_steps(), vec![0, 4, 8, 10]);
}


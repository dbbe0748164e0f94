use interflow_core::analysis::{mode_weight_of, orth_variance, trajectory_speciation};
use interflow_core::integrator::{ObservableRecord, Trajectory};
use interflow_core::limits::{limit_rhs, potential_drift, potential_landscape, LimitKind, LimitParams};
use interflow_core::oracle::cw_enumerate;
use interflow_core::velocity::{cw_denoiser, gm_factors, gm_velocity};
use interflow_core::*;
use proptest::prelude::*;

fn dilation() -> impl Strategy<Value = TimeDilation> {
    prop_oneof![
        Just(TimeDilation::Uniform),
        (1usize..1_000_000, 0.01f64..0.99).prop_map(|(d, frac)| TimeDilation::DilatedVp {
            kappa: frac * (d as f64).sqrt(),
            dim: d
        }),
        (1usize..1_000_000, 0.01f64..0.99).prop_map(|(d, frac)| TimeDilation::DilatedVe {
            kappa: frac * (d as f64).sqrt(),
            dim: d
        }),
    ]
}

fn form() -> impl Strategy<Value = AlphaForm> {
    prop_oneof![Just(AlphaForm::Linear), Just(AlphaForm::Circular)]
}

proptest! {
    #[test]
    fn dilation_is_monotone_with_exact_ends(dil in dilation()) {
        prop_assert_eq!(dil.eval(0.0).unwrap().0, 0.0);
        prop_assert!((dil.eval(1.0).unwrap().0 - 1.0).abs() <= 1e-12);
        let mut prev = 0.0;
        for k in 0..=10_000 {
            let (tau, tau_dot) = dil.eval(k as f64 / 10_000.0).unwrap();
            prop_assert!(tau >= prev);
            prop_assert!(tau_dot >= 0.0);
            prev = tau;
        }
    }

    #[test]
    fn dilation_derivative_matches_difference(dil in dilation(), t in 0.001f64..0.999) {
        prop_assume!((t - 0.5).abs() > 1e-3);
        let eps = 1e-6;
        let fd = (dil.eval(t + eps).unwrap().0 - dil.eval(t - eps).unwrap().0) / (2.0 * eps);
        let (_, tau_dot) = dil.eval(t).unwrap();
        prop_assert!((fd - tau_dot).abs() < 1e-4);
    }

    #[test]
    fn coefficient_signs(dil in dilation(), f in form(), t in 0.0f64..0.999, s2 in 0.0f64..4.0) {
        let k = eval_coeffs(&InterpolantSpec::new(f, NoiseScale::Vp), &dil, t, 4).unwrap();
        prop_assert!(k.alpha_dot <= 0.0 && k.beta_dot >= 0.0);
        if k.tau < 1.0 {
            prop_assert!(k.gm_denominator(s2) > 0.0);
        }
    }

    #[test]
    fn uniform_linear_is_identity(t in 0.0f64..1.0) {
        let k = eval_coeffs(&InterpolantSpec::linear_vp(), &TimeDilation::Uniform, t, 3).unwrap();
        prop_assert_eq!(k.alpha, 1.0 - t);
        prop_assert_eq!(k.beta, t);
    }

    #[test]
    fn bias_inverts_logistic(p in 0.001f64..0.999, m in 0.01f64..1.0) {
        let h = bias_from_weight(p, m).unwrap();
        let back = (m * h).exp() / ((m * h).exp() + (-m * h).exp());
        prop_assert!((back - p).abs() < 1e-12);
    }

    #[test]
    fn gm_sign_equivariance(
        p in 0.01f64..0.99, s2 in 0.0f64..2.0, tau in 0.0f64..0.99, f in form(),
        x in prop::collection::vec(-5.0f64..5.0, 5),
    ) {
        let g = GaussianMixture::new(p, s2, 5).unwrap();
        let gneg = GaussianMixture { h: -g.h, ..g };
        let k = InterpolantCoeffs::at_tau(f, tau, 1.0, 1.0).unwrap();
        let xn: Vec<f64> = x.iter().map(|v| -v).collect();
        let mut v = [0.0; 5];
        let mut vn = [0.0; 5];
        gm_velocity(&g, &k, &x, &mut v).unwrap();
        gm_velocity(&gneg, &k, &xn, &mut vn).unwrap();
        for i in 0..5 {
            prop_assert_eq!(v[i], -vn[i]);
        }
    }

    #[test]
    fn gm_orthogonal_part_is_linear(
        p in 0.01f64..0.99, s2 in 0.01f64..2.0, tau in 0.0f64..0.99, c in 1.0f64..30.0,
        x in prop::collection::vec(-5.0f64..5.0, 6),
    ) {
        let g = GaussianMixture::new(p, s2, 6).unwrap();
        let k = InterpolantCoeffs::at_tau(AlphaForm::Linear, tau, 1.0, c).unwrap();
        let mut v = [0.0; 6];
        gm_velocity(&g, &k, &x, &mut v).unwrap();
        let mx = x.iter().sum::<f64>() / 6.0;
        let mv = v.iter().sum::<f64>() / 6.0;
        let a = gm_factors(&g, &k).unwrap().linear;
        for i in 0..6 {
            let lhs = v[i] - mv;
            let rhs = a * (x[i] - mx);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn cw_denoiser_is_bounded(
        p in 0.0f64..1.0, beta in 1.01f64..8.0, tau in 0.0f64..0.999, ve in any::<bool>(),
        x in prop::collection::vec(-1e3f64..1e3, 1..40),
    ) {
        prop_assume!(p > 0.0 && p < 1.0);
        let d = x.len();
        let cw = CurieWeiss::new(p, beta, d).unwrap();
        let c = if ve { (d as f64).sqrt() } else { 1.0 };
        let k = InterpolantCoeffs::at_tau(AlphaForm::Linear, tau, 1.0, c).unwrap();
        let mut e = vec![0.0; d];
        cw_denoiser(&cw, &k, &x, &mut e).unwrap();
        prop_assert!(e.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn cw_denoiser_equals_enumeration(
        di in 0usize..4, p in 0.05f64..0.95, beta in 1.1f64..4.0, tau in 0.02f64..0.98,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let d = [2usize, 4, 8, 12][di];
        let cw = CurieWeiss::new(p, beta, d).unwrap();
        let k = InterpolantCoeffs::at_tau(AlphaForm::Linear, tau, 1.0, 1.0).unwrap();
        let mut rng = interflow_core::rng::stream(seed, 0);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let exact = cw_enumerate(&cw, &k, &x).unwrap();
        let mut e = vec![0.0; d];
        cw_denoiser(&cw, &k, &x, &mut e).unwrap();
        for (a, b) in e.iter().zip(&exact.value) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn mode_weight_ignores_scale(m in prop::collection::vec(-2.0f64..2.0, 1..50), s in 0.001f64..1e3) {
        let scaled: Vec<f64> = m.iter().map(|v| v * s).collect();
        prop_assert_eq!(mode_weight_of(&m).p_hat, mode_weight_of(&scaled).p_hat);
    }

    #[test]
    fn speciation_grows_with_threshold(
        path in prop::collection::vec(-1.0f64..1.0, 3..40), a in 0.0f64..0.5, b in 0.0f64..0.5,
    ) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let n = path.len();
        let tr = Trajectory {
            index: 0,
            records: path.iter().enumerate().map(|(k, &m)| ObservableRecord {
                step: k, t: k as f64 / (n - 1) as f64, tau: k as f64 / (n - 1) as f64,
                magnetization: m, mu: m, sigma_perp2: 0.0, coords: vec![],
            }).collect(),
            final_state: None,
        };
        match (trajectory_speciation(&tr, lo), trajectory_speciation(&tr, hi)) {
            (Some(l), Some(h)) => prop_assert!(l.t <= h.t),
            (None, Some(_)) => prop_assert!(false, "a weaker threshold cannot unsettle"),
            _ => {}
        }
    }

    #[test]
    fn orth_variance_ignores_order(seed in 0u64..1000, rot in 0usize..5) {
        let cfg = SimulationConfig {
            model: GaussianMixture::new(0.8, 0.25, 6).unwrap().into(),
            interpolant: InterpolantSpec::linear_vp(),
            dilation: TimeDilation::Uniform,
            steps: 10, n_traj: 5, seed, record_coords: 0, record_stride: 5, keep_final_state: false,
        };
        let b = simulate_batch(&cfg).unwrap();
        let mut shuffled = b.clone();
        shuffled.trajectories.rotate_left(rot);
        for t in [0.0, 0.5, 1.0] {
            let (u, v) = (orth_variance(&b, t).unwrap(), orth_variance(&shuffled, t).unwrap());
            prop_assert!((u - v).abs() <= 1e-15 * u.abs());
        }
    }

    #[test]
    fn fixed_point_is_increasing(b1 in 1.001f64..10.0, db in 0.001f64..5.0) {
        prop_assert!(cw_fixed_point(b1 + db).unwrap() > cw_fixed_point(b1).unwrap());
    }

    #[test]
    fn potential_is_even_without_bias(tau in 0.01f64..0.99, mu in -5.0f64..5.0, d in 1usize..10_000) {
        let g = GaussianMixture::new(0.5, 0.25, d).unwrap();
        let k = InterpolantCoeffs::at_tau(AlphaForm::Linear, tau, 1.0, 1.0).unwrap();
        let a = potential_landscape(&g, &k, mu).unwrap();
        let b = potential_landscape(&g, &k, -mu).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        prop_assert!((potential_drift(&g, &k, mu).unwrap() + potential_drift(&g, &k, -mu).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn phase2_magnetization_keeps_sign(s2 in 0.01f64..4.0, m0 in -1.0f64..1.0) {
        prop_assume!(m0 != 0.0);
        let q = LimitParams::gm(&GaussianMixture::new(0.8, s2, 1).unwrap(), 3.0);
        for kind in [LimitKind::VpDilatedPhase2M, LimitKind::VpCircularPhase2M] {
            let tr = interflow_core::limits::integrate_limit(kind, &q, m0, 0.5, 1.0, 0.01).unwrap();
            prop_assert!(tr.values.iter().all(|v| v.signum() == m0.signum()));
        }
        prop_assert!(limit_rhs(LimitKind::VpDilatedPhase2M, 0.75, m0, &q).unwrap().is_finite());
    }
}

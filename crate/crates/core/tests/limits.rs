use interflow_core::limits::*;
use interflow_core::math::normal_cdf;
use interflow_core::rng::stream;
use interflow_core::*;

fn ensemble(kind: LimitKind, q: &LimitParams, n: usize, t0: f64, t1: f64, dt: f64, seed: u64) -> Vec<LimitTrajectory> {
    (0..n)
        .map(|j| {
            let mut rng = stream(seed, j as u64);
            let y0 = initial_sample(kind, q, &mut rng);
            integrate_limit(kind, q, y0, t0, t1, dt).unwrap()
        })
        .collect()
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn dilated_vp_phase1_terminal_mean() {
    let g = GaussianMixture::new(0.8, 0.25, 1).unwrap();
    let q = LimitParams::gm(&g, 3.0);
    let ens = ensemble(LimitKind::VpDilatedPhase1Mu, &q, 10_000, 0.0, 0.5, 0.001, 1);
    let ends: Vec<f64> = ens.iter().map(|e| e.terminal()).collect();
    let (m, se) = mean_se(&ends);
    assert!((m - 0.6 * 3.0).abs() < 4.0 * se, "{m} +- {se}");
}

#[test]
fn dilated_vp_phase1_sign_fraction_bound() {
    let g = GaussianMixture::new(0.8, 0.25, 1).unwrap();
    let kappa = 3.0;
    let q = LimitParams::gm(&g, kappa);
    let n = 10_000;
    let ens = ensemble(LimitKind::VpDilatedPhase1Mu, &q, n, 0.0, 0.5, 0.001, 2);
    let p_k = ens.iter().filter(|e| e.terminal() > 0.0).count() as f64 / n as f64;
    let se = (p_k * (1.0 - p_k) / n as f64).sqrt();
    let bound = 2.0 * (1.0 - normal_cdf(kappa - g.h.abs() / kappa)) + 4.0 * se;
    assert!((p_k - 0.8).abs() <= bound, "{p_k} vs bound {bound}");
}

#[test]
fn dilated_ve_phase1_sign_fraction() {
    let g = GaussianMixture::new(0.8, 0.25, 1).unwrap();
    let q = LimitParams::gm(&g, 3.0);
    let n = 4000;
    let ens = ensemble(LimitKind::VeDilatedPhase1M, &q, n, 0.0, 0.5, 0.001, 3);
    let frac = ens.iter().filter(|e| e.terminal() > 0.0).count() as f64 / n as f64;
    let se = (0.16f64 / n as f64).sqrt();
    assert!((frac - 0.8).abs() < 4.0 * se, "{frac}");
    for e in &ens {
        assert!((e.terminal().abs() - 1.0).abs() < 0.05);
    }
}

#[test]
fn cw_ve_phase2_coordinates_cluster() {
    let cw = CurieWeiss::new(0.8, 2.0, 1).unwrap();
    let q = LimitParams::cw(&cw, 3.0).with_mode(1.0);
    let n = 10_000;
    let ens = ensemble(LimitKind::CwVePhase2Coord, &q, n, 0.5, 1.0, 0.001, 4);
    let mut plus = 0;
    for e in &ens {
        let y = e.terminal();
        assert!((y.abs() - 1.0).abs() < 0.05, "{y}");
        plus += (y > 0.0) as usize;
    }
    let frac = plus as f64 / n as f64;
    let target = (1.0 + cw.m) / 2.0;
    let se = (target * (1.0 - target) / n as f64).sqrt();
    assert!((frac - target).abs() < 4.0 * se, "{frac} vs {target}");
}

#[test]
fn cw_vp_phase2_coordinates_cluster() {
    let cw = CurieWeiss::new(0.8, 2.0, 1).unwrap();
    let q = LimitParams::cw(&cw, 3.0).with_mode(-1.0);
    let n = 10_000;
    let ens = ensemble(LimitKind::CwVpPhase2Coord, &q, n, 0.5, 1.0, 0.001, 5);
    let frac = ens.iter().filter(|e| e.terminal() > 0.0).count() as f64 / n as f64;
    let target = (1.0 - cw.m) / 2.0;
    let se = (target * (1.0 - target) / n as f64).sqrt();
    assert!((frac - target).abs() < 4.0 * se, "{frac} vs {target}");
}

#[test]
fn conservation_identity() {
    let m = cw_fixed_point(2.0).unwrap();
    for (i, t) in [0.55, 0.75, 0.95].into_iter().enumerate() {
        let lambda = 1.0 / (3.0 * (2.0 - 2.0 * t));
        let (mean, se) = cw_conservation_mc(2.0, m, lambda, 1_000_000, &mut stream(6, i as u64));
        assert!((mean - m).abs() < 4.0 * se, "t = {t}: {mean} vs {m}");
    }
}

#[test]
fn potential_gradient_is_the_drift() {
    let g = GaussianMixture::new(0.8, 0.25, 10_000).unwrap();
    let eps = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..10 {
        let tau = 0.05 + 0.09 * i as f64;
        let k = InterpolantCoeffs::at_tau(AlphaForm::Linear, tau, 1.0, 1.0).unwrap();
        for j in 0..10 {
            let mu = -2.05 + 0.45 * j as f64;
            let fd = -(potential_landscape(&g, &k, mu + eps).unwrap() - potential_landscape(&g, &k, mu - eps).unwrap())
                / (2.0 * eps);
            let drift = potential_drift(&g, &k, mu).unwrap();
            worst = worst.max((fd - drift).abs() / drift.abs());
        }
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn saturated_potential_is_a_double_well() {
    let g = GaussianMixture::new(0.5, 0.25, 1_000_000).unwrap();
    let k = InterpolantCoeffs::at_tau(AlphaForm::Linear, 0.2, 1.0, 1.0).unwrap();
    let f = interflow_core::velocity::gm_factors(&g, &k).unwrap();
    let slope = f.tilt * (g.dim as f64).sqrt();
    for mu in [0.5, 1.0, 2.0] {
        let d = potential_drift(&g, &k, mu).unwrap();
        assert!((d - (f.linear * mu + slope)).abs() < 1e-9 * slope);
        assert!((potential_drift(&g, &k, -mu).unwrap() + d).abs() < 1e-9 * slope);
    }
    let v0 = potential_landscape(&g, &k, 0.0).unwrap();
    assert!(potential_landscape(&g, &k, 0.5).unwrap() < v0);
    assert!(potential_landscape(&g, &k, -0.5).unwrap() < v0);
}

#[test]
fn ve_limit_integrates_to_point_masses() {
    let g = GaussianMixture::new(0.8, 0.0, 1).unwrap();
    let q = LimitParams::gm(&g, 0.0);
    let n = 4000;
    let ens = ensemble(LimitKind::VeMagnetization, &q, n, 0.0, 1.0, 0.001, 7);
    let frac = ens.iter().filter(|e| e.terminal() > 0.0).count() as f64 / n as f64;
    assert!((frac - 0.8).abs() < 4.0 * (0.16f64 / n as f64).sqrt(), "{frac}");
    assert!(ens.iter().all(|e| (e.terminal().abs() - 1.0).abs() < 1e-6));
}

//! Target distributions and their derived scalars.

use alloc::format;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math::{ln, sqrt, tanh};

/// Bias `h` with `e^{mh} / (e^{mh} + e^{-mh}) = p`, i.e. `ln(p/(1-p)) / (2m)`.
pub fn bias_from_weight(p: f64, m: f64) -> Result<f64> {
    if p == 0.0 || p == 1.0 {
        return Err(Error::InfiniteBias(p));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("p", p, "(0, 1)"));
    }
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::domain("m", m, "(0, inf)"));
    }
    Ok(ln(p / (1.0 - p)) / (2.0 * m))
}

/// Logistic weight `e^{mh} / (e^{mh} + e^{-mh})`.
pub fn weight_from_bias(h: f64, m: f64) -> f64 {
    1.0 / (1.0 + crate::math::exp(-2.0 * m * h))
}

/// Positive root of `m = tanh(beta m)` by 64 bisection steps.
pub fn cw_fixed_point(beta_temp: f64) -> Result<f64> {
    if !(beta_temp > 1.0) || !beta_temp.is_finite() {
        return Err(Error::NoPositiveRoot(beta_temp));
    }
    let f = |m: f64| m - tanh(beta_temp * m);
    // f < 0 just above 0 because beta > 1; f(1) = 1 - tanh(beta) > 0
    let mut lo = f64::MIN_POSITIVE;
    let mut hi = 1.0;
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `p N(r, s2 I) + (1 - p) N(-r, s2 I)` with `r = (1, ..., 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianMixture {
    pub p: f64,
    pub sigma2: f64,
    pub dim: usize,
    /// `+-inf` when `p` is 0 or 1.
    pub h: f64,
}

impl GaussianMixture {
    /// `p` may be 0 or 1 (single mode, infinite bias); `sigma2 = 0` gives
    /// point masses at `+-r`.
    pub fn new(p: f64, sigma2: f64, dim: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain("p", p, "[0, 1]"));
        }
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::domain("sigma2", sigma2, "[0, inf)"));
        }
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        let h = if p == 1.0 {
            f64::INFINITY
        } else if p == 0.0 {
            f64::NEG_INFINITY
        } else {
            bias_from_weight(p, 1.0)?
        };
        Ok(Self { p, sigma2, dim, h })
    }

    pub fn sigma(&self) -> f64 {
        sqrt(self.sigma2)
    }
}

/// Curie-Weiss spins: `eta = +m` w.p. `p`, `-m` otherwise; given `eta` each
/// spin is `+1` with probability `(1 + tanh(beta eta)) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurieWeiss {
    pub p: f64,
    pub beta_temp: f64,
    pub m: f64,
    pub dim: usize,
    pub h: f64,
}

impl CurieWeiss {
    pub fn new(p: f64, beta_temp: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        let m = cw_fixed_point(beta_temp)?;
        if !(m < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "beta_temp = {beta_temp} freezes the magnetization at 1 in double precision"
            )));
        }
        let h = bias_from_weight(p, m)?;
        Ok(Self {
            p,
            beta_temp,
            m,
            dim,
            h,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum TargetModel {
    GaussianMixture(GaussianMixture),
    CurieWeiss(CurieWeiss),
}

impl TargetModel {
    pub fn dim(&self) -> usize {
        match self {
            TargetModel::GaussianMixture(g) => g.dim,
            TargetModel::CurieWeiss(c) => c.dim,
        }
    }

    pub fn p(&self) -> f64 {
        match self {
            TargetModel::GaussianMixture(g) => g.p,
            TargetModel::CurieWeiss(c) => c.p,
        }
    }

    /// Draws one data vector into `out` (length `dim`). Returns the mode
    /// sign (+1 or -1).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> f64 {
        match self {
            TargetModel::GaussianMixture(g) => {
                let s = if rng.random::<f64>() < g.p { 1.0 } else { -1.0 };
                let sigma = g.sigma();
                for v in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = s + sigma * z;
                }
                s
            }
            TargetModel::CurieWeiss(c) => {
                let s = if rng.random::<f64>() < c.p { 1.0 } else { -1.0 };
                let up = 0.5 * (1.0 + c.m * s);
                for v in out.iter_mut() {
                    *v = if rng.random::<f64>() < up { 1.0 } else { -1.0 };
                }
                s
            }
        }
    }
}

impl From<GaussianMixture> for TargetModel {
    fn from(g: GaussianMixture) -> Self {
        TargetModel::GaussianMixture(g)
    }
}

impl From<CurieWeiss> for TargetModel {
    fn from(c: CurieWeiss) -> Self {
        TargetModel::CurieWeiss(c)
    }
}

/// Draws one data vector of length `model.dim()`.
pub fn sample_target<R: Rng + ?Sized>(model: &TargetModel, rng: &mut R) -> alloc::vec::Vec<f64> {
    let mut out = alloc::vec![0.0; model.dim()];
    model.sample_into(rng, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn symmetric_weight_has_zero_bias() {
        assert_eq!(bias_from_weight(0.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn bias_for_p_08() {
        let h = bias_from_weight(0.8, 1.0).unwrap();
        assert!((h - 0.5 * 4.0f64.ln()).abs() < 1e-15);
        assert!((h - 0.693147).abs() < 1e-6);
        assert!((weight_from_bias(h, 1.0) - 0.8).abs() < 1e-12);

        let h = bias_from_weight(0.8, 0.9575).unwrap();
        assert!((h - 0.723918).abs() < 1e-5);
        assert!((weight_from_bias(h, 0.9575) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn bias_rejects_degenerate_weights() {
        assert_eq!(bias_from_weight(0.0, 1.0), Err(Error::InfiniteBias(0.0)));
        assert_eq!(bias_from_weight(1.0, 1.0), Err(Error::InfiniteBias(1.0)));
        assert!(bias_from_weight(0.5, 0.0).is_err());
        assert!(bias_from_weight(1.5, 1.0).is_err());
    }

    #[test]
    fn bias_round_trips_on_grid() {
        for k in 1..100 {
            let p = k as f64 / 100.0;
            for &m in &[1.0, 0.9575, 0.1] {
                let h = bias_from_weight(p, m).unwrap();
                assert!((weight_from_bias(h, m) - p).abs() < 1e-12, "p = {p} m = {m}");
            }
        }
    }

    #[test]
    fn fixed_points() {
        // reference values from an independent bisection on m - tanh(beta m)
        let m2 = cw_fixed_point(2.0).unwrap();
        assert!((m2 - 0.957504).abs() < 1e-6);
        assert!((m2 - (2.0 * m2).tanh()).abs() < 1e-12);
        let m5 = cw_fixed_point(5.0).unwrap();
        assert!((m5 - 0.999909).abs() < 1e-6);
        let b = 1.0001;
        let mc = cw_fixed_point(b).unwrap();
        assert!((mc - 0.0173).abs() < 1e-4);
        let asym = (3.0 * (b - 1.0) / (b * b * b)).sqrt();
        assert!((mc / asym - 1.0).abs() < 0.05);
        assert!((mc - (b * mc).tanh()).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_requires_ordered_phase() {
        assert_eq!(cw_fixed_point(1.0), Err(Error::NoPositiveRoot(1.0)));
        assert_eq!(cw_fixed_point(0.5), Err(Error::NoPositiveRoot(0.5)));
        assert!(cw_fixed_point(f64::NAN).is_err());
    }

    #[test]
    fn fixed_point_increases_with_beta() {
        let mut prev = 0.0;
        for k in 1..60 {
            let m = cw_fixed_point(1.0 + k as f64 * 0.1).unwrap();
            assert!(m > prev);
            prev = m;
        }
    }

    #[test]
    fn cw_model_invariants() {
        let cw = CurieWeiss::new(0.8, 2.0, 10).unwrap();
        assert!((cw.m - (cw.beta_temp * cw.m).tanh()).abs() < 1e-12);
        assert!((weight_from_bias(cw.h, cw.m) - 0.8).abs() < 1e-12);
        assert!(CurieWeiss::new(0.8, 1.0, 10).is_err());
        assert!(CurieWeiss::new(1.0, 2.0, 10).is_err());
    }

    #[test]
    fn degenerate_mixture_samples_are_the_modes() {
        let gm: TargetModel = GaussianMixture::new(0.5, 0.0, 5).unwrap().into();
        let mut rng = stream(1, 0);
        let mut seen = [false; 2];
        for _ in 0..100 {
            let a = sample_target(&gm, &mut rng);
            let s = a[0];
            assert!(s == 1.0 || s == -1.0);
            assert!(a.iter().all(|&v| v == s));
            seen[(s > 0.0) as usize] = true;
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn cw_spin_mean_in_plus_mode() {
        // p = 1 pins eta = +m
        let cw = CurieWeiss {
            p: 1.0,
            beta_temp: 2.0,
            m: cw_fixed_point(2.0).unwrap(),
            dim: 100_000,
            h: f64::INFINITY,
        };
        let a = sample_target(&cw.into(), &mut stream(3, 0));
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!((mean - cw.m).abs() < 3.0 / (a.len() as f64).sqrt());
    }

    #[test]
    fn single_mode_magnetization() {
        let d = 10;
        let n = 10_000;
        let gm: TargetModel = GaussianMixture::new(1.0, 0.25, d).unwrap().into();
        let mut rng = stream(5, 0);
        let mut acc = 0.0;
        for _ in 0..n {
            acc += sample_target(&gm, &mut rng).iter().sum::<f64>() / d as f64;
        }
        let mean = acc / n as f64;
        assert!((mean - 1.0).abs() < 3.0 * 0.5 / ((n * d) as f64).sqrt());
    }

    #[test]
    fn mixture_moments() {
        let d = 20;
        let n = 20_000;
        let gm: TargetModel = GaussianMixture::new(0.8, 0.25, d).unwrap().into();
        let mut rng = stream(9, 1);
        let mut mags = alloc::vec::Vec::with_capacity(n);
        let mut perp = 0.0;
        for _ in 0..n {
            let a = sample_target(&gm, &mut rng);
            let m = a.iter().sum::<f64>() / d as f64;
            perp += a.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (d - 1) as f64;
            mags.push(m);
        }
        let mean = mags.iter().sum::<f64>() / n as f64;
        let var = mags.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 0.6).abs() < 4.0 * (var / n as f64).sqrt());
        let perp = perp / n as f64;
        // se of the pooled variance estimate: s2 sqrt(2 / (n (d-1)))
        let se = 0.25 * (2.0 / (n * (d - 1)) as f64).sqrt();
        assert!((perp - 0.25).abs() < 4.0 * se, "{perp}");
    }
}

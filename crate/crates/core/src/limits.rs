//! Reduced scalar ODEs describing the `d -> infinity` behaviour of the
//! magnetization and of single coordinates, plus closed-form predictions for
//! the orthogonal spread, the mean-field potential and the speciation
//! balance point.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math::{ln, log_cosh, ols_slope, sgn, sqrt, tanh, tanh_clamped};
use crate::models::{CurieWeiss, GaussianMixture};
use crate::schedules::{AlphaForm, InterpolantCoeffs, InterpolantSpec, TimeDilation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LimitKind {
    /// Non-dilated linear VE magnetization on `[0, 1)`.
    VeMagnetization,
    /// Dilated VP, `mu = r.x / sqrt(d)` on `[0, 1/2]`.
    VpDilatedPhase1Mu,
    /// Dilated VP, magnetization on `[1/2, 1]`.
    VpDilatedPhase2M,
    /// Dilated VE, magnetization on `[0, 1/2)`.
    VeDilatedPhase1M,
    /// Curie-Weiss dilated VE, magnetization on `[0, 1/2)`.
    CwVePhase1M,
    /// Curie-Weiss dilated VE, one coordinate on `[1/2, 1)`.
    CwVePhase2Coord,
    /// Curie-Weiss dilated VP, `mu` on `[0, 1/2]`.
    CwVpPhase1Mu,
    /// Curie-Weiss dilated VP, one coordinate on `[1/2, 1)`.
    CwVpPhase2Coord,
    /// Dilated VP with `alpha = sqrt(1 - tau^2)`, magnetization on `[1/2, 1]`.
    VpCircularPhase2M,
}

impl LimitKind {
    pub const ALL: [LimitKind; 9] = [
        LimitKind::VeMagnetization,
        LimitKind::VpDilatedPhase1Mu,
        LimitKind::VpDilatedPhase2M,
        LimitKind::VeDilatedPhase1M,
        LimitKind::CwVePhase1M,
        LimitKind::CwVePhase2Coord,
        LimitKind::CwVpPhase1Mu,
        LimitKind::CwVpPhase2Coord,
        LimitKind::VpCircularPhase2M,
    ];

    /// `(start, end, end_is_open)`.
    pub fn interval(self) -> (f64, f64, bool) {
        use LimitKind::*;
        match self {
            VeMagnetization => (0.0, 1.0, true),
            VpDilatedPhase1Mu | CwVpPhase1Mu => (0.0, 0.5, false),
            VeDilatedPhase1M | CwVePhase1M => (0.0, 0.5, true),
            VpDilatedPhase2M | VpCircularPhase2M => (0.5, 1.0, false),
            CwVePhase2Coord | CwVpPhase2Coord => (0.5, 1.0, true),
        }
    }

    pub fn name(self) -> &'static str {
        use LimitKind::*;
        match self {
            VeMagnetization => "ve-magnetization",
            VpDilatedPhase1Mu => "vp-dilated-phase1-mu",
            VpDilatedPhase2M => "vp-dilated-phase2-m",
            VeDilatedPhase1M => "ve-dilated-phase1-m",
            CwVePhase1M => "cw-ve-phase1-m",
            CwVePhase2Coord => "cw-ve-phase2-coord",
            CwVpPhase1Mu => "cw-vp-phase1-mu",
            CwVpPhase2Coord => "cw-vp-phase2-coord",
            VpCircularPhase2M => "vp-circular-phase2-m",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let lower = name.to_ascii_lowercase();
        Self::ALL.into_iter().find(|k| k.name() == lower)
    }

    pub fn is_curie_weiss(self) -> bool {
        matches!(
            self,
            LimitKind::CwVePhase1M
                | LimitKind::CwVePhase2Coord
                | LimitKind::CwVpPhase1Mu
                | LimitKind::CwVpPhase2Coord
        )
    }
}

/// Parameters shared by the reduced equations. Unused fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LimitParams {
    pub p: f64,
    pub h: f64,
    pub sigma2: f64,
    pub kappa: f64,
    /// Curie-Weiss magnetization (1 for the mixture).
    pub m: f64,
    pub beta_temp: f64,
    /// Committed mode for coordinate equations, and the sign used by the
    /// phase-2 magnetization equations when `M = 0`.
    pub mode_sign: f64,
}

impl LimitParams {
    pub fn gm(model: &GaussianMixture, kappa: f64) -> Self {
        Self {
            p: model.p,
            h: model.h,
            sigma2: model.sigma2,
            kappa,
            m: 1.0,
            beta_temp: 0.0,
            mode_sign: 1.0,
        }
    }

    pub fn cw(model: &CurieWeiss, kappa: f64) -> Self {
        Self {
            p: model.p,
            h: model.h,
            sigma2: 0.0,
            kappa,
            m: model.m,
            beta_temp: model.beta_temp,
            mode_sign: 1.0,
        }
    }

    pub fn with_mode(mut self, sign: f64) -> Self {
        self.mode_sign = sign;
        self
    }
}

fn sign_or(y: f64, fallback: f64) -> f64 {
    let s = sgn(y);
    if s == 0.0 {
        sgn(fallback)
    } else {
        s
    }
}

/// Right-hand side of the reduced equation `kind` at `(t, y)`.
pub fn limit_rhs(kind: LimitKind, t: f64, y: f64, q: &LimitParams) -> Result<f64> {
    use LimitKind::*;
    let (a, b, open) = kind.interval();
    if !(t >= a && (t < b || (!open && t <= b))) {
        return Err(Error::domain("t", t, "the equation's interval"));
    }
    let v = match kind {
        VeMagnetization => {
            let u = 1.0 - t;
            -y / u + tanh(q.h + t * y / (u * u)) / u
        }
        VpDilatedPhase1Mu => 2.0 * q.kappa * tanh(q.h + 2.0 * q.kappa * t * y),
        VpDilatedPhase2M => {
            let u = 1.0 - t;
            let w = t - 0.5;
            let den = u * u + q.sigma2 * w * w;
            (-u + q.sigma2 * w) / den * y + u * sign_or(y, q.mode_sign) / den
        }
        VeDilatedPhase1M => {
            let u = 1.0 - 2.0 * t;
            (-y + tanh(q.h + 2.0 * t * y / (u * u))) / (0.5 - t)
        }
        CwVePhase1M => {
            let u = 1.0 - 2.0 * t;
            (-y + q.m * tanh(q.m * q.h + 2.0 * t * q.m * y / (u * u))) / (0.5 - t)
        }
        CwVePhase2Coord => {
            let u = q.kappa * (2.0 - 2.0 * t);
            (-y + tanh_clamped(q.beta_temp * q.m * q.mode_sign + y / (u * u))) / (1.0 - t)
        }
        CwVpPhase1Mu => {
            2.0 * q.kappa * q.m * tanh(q.m * q.h + 2.0 * q.kappa * q.m * t * y)
        }
        CwVpPhase2Coord => {
            let u = 2.0 - 2.0 * t;
            let s = (2.0 * t - 1.0) * y / (u * u);
            (-y + tanh_clamped(q.beta_temp * q.m * q.mode_sign + s)) / (1.0 - t)
        }
        VpCircularPhase2M => {
            let w = 2.0 * t - 1.0;
            let den = 1.0 + (q.sigma2 - 1.0) * w * w;
            2.0 * (q.sigma2 - 1.0) * w / den * y + 2.0 * sign_or(y, q.mode_sign) / den
        }
    };
    Ok(v)
}

/// Euler solution of a reduced equation on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LimitTrajectory {
    pub kind: LimitKind,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl LimitTrajectory {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("a limit trajectory holds its initial value")
    }
}

/// Euler-integrates `kind` from `initial` at `t0` to `t1` on the grid
/// `{j / K}` with `K = 1 / delta_t`; both ends must lie on the grid. The
/// right-hand side is only evaluated at left endpoints, so `t1` may be the
/// open end of the interval.
pub fn integrate_limit(
    kind: LimitKind,
    params: &LimitParams,
    initial: f64,
    t0: f64,
    t1: f64,
    delta_t: f64,
) -> Result<LimitTrajectory> {
    let (a, b, _) = kind.interval();
    if !(t0 >= a && t1 <= b && t0 < t1) {
        return Err(Error::InvalidConfig(alloc::format!(
            "[{t0}, {t1}] is not inside the interval [{a}, {b}] of {}",
            kind.name()
        )));
    }
    let k_total = crate::integrator::SimulationConfig::steps_for(delta_t)?;
    let kf = k_total as f64;
    let j0 = libm::round(t0 * kf);
    let j1 = libm::round(t1 * kf);
    if libm::fabs(j0 - t0 * kf) > 1e-9 || libm::fabs(j1 - t1 * kf) > 1e-9 {
        return Err(Error::GridMismatch { t: t0 });
    }
    let (j0, j1) = (j0 as usize, j1 as usize);
    let mut times = Vec::with_capacity(j1 - j0 + 1);
    let mut values = Vec::with_capacity(j1 - j0 + 1);
    let mut y = initial;
    for j in j0..j1 {
        let t = j as f64 / kf;
        times.push(t);
        values.push(y);
        y += delta_t * limit_rhs(kind, t, y, params)?;
        if !y.is_finite() {
            return Err(Error::BlowUp { t });
        }
    }
    times.push(j1 as f64 / kf);
    values.push(y);
    Ok(LimitTrajectory {
        kind,
        times,
        values,
    })
}

/// Draws a starting value from the law the full process induces at the
/// start of `kind`'s interval.
pub fn initial_sample<R: Rng + ?Sized>(kind: LimitKind, params: &LimitParams, rng: &mut R) -> f64 {
    use LimitKind::*;
    let z: f64 = rng.sample(StandardNormal);
    match kind {
        VeMagnetization | VpDilatedPhase1Mu | VeDilatedPhase1M | CwVePhase1M | CwVpPhase1Mu => z,
        VpDilatedPhase2M | VpCircularPhase2M => 0.0,
        CwVePhase2Coord => params.kappa * z + params.m * params.mode_sign,
        CwVpPhase2Coord => z,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum OrthPrediction {
    /// Dilated linear VP.
    DilatedVp,
    /// Dilated linear VE; below `t = 1/2` the value is in units of `sqrt(d)`.
    DilatedVe,
    /// Dilated circular VP.
    DilatedVpCircular,
}

/// Predicted standard deviation of a coordinate orthogonal to `r`.
pub fn predicted_orth_std(which: OrthPrediction, t: f64, sigma2: f64, kappa: f64) -> f64 {
    match which {
        OrthPrediction::DilatedVp => {
            if t < 0.5 {
                1.0
            } else {
                let u = 2.0 - 2.0 * t;
                let w = 2.0 * t - 1.0;
                sqrt(u * u + w * w * sigma2)
            }
        }
        OrthPrediction::DilatedVe => {
            if t < 0.5 {
                1.0 - 2.0 * t
            } else {
                let k2 = kappa * kappa;
                let u = 2.0 - 2.0 * t;
                kappa * sqrt((k2 * u * u + sigma2) / (k2 + sigma2))
            }
        }
        OrthPrediction::DilatedVpCircular => {
            if t < 0.5 {
                1.0
            } else {
                let w = 2.0 * t - 1.0;
                sqrt(1.0 + (sigma2 - 1.0) * w * w)
            }
        }
    }
}

/// Growth factor of the orthogonal variance over one forward-Euler run:
/// `prod_k (1 + delta_t a(t_k))^2` with `a = (c^2 alpha alpha' + s2 beta beta') / den`.
/// The orthogonal component obeys this linear recursion exactly.
pub fn orth_variance_gain(
    spec: &InterpolantSpec,
    dilation: &TimeDilation,
    sigma2: f64,
    dim: usize,
    steps: usize,
) -> Result<f64> {
    let model = GaussianMixture::new(0.5, sigma2, dim)?;
    let dt = 1.0 / steps as f64;
    let mut x = 1.0;
    for k in 0..steps {
        let t = k as f64 / steps as f64;
        let coeffs = crate::schedules::eval_coeffs(spec, dilation, t, dim)?;
        let f = crate::velocity::gm_factors(&model, &coeffs)?;
        x += dt * f.linear * x;
    }
    Ok(x * x)
}

/// Mean-field potential of `mu = r.x / sqrt(d)`; requires `beta > 0`.
pub fn potential_landscape(model: &GaussianMixture, k: &InterpolantCoeffs, mu: f64) -> Result<f64> {
    if !(k.beta > 0.0) {
        return Err(Error::Singular {
            what: "potential (beta = 0)",
            tau: k.tau,
        });
    }
    let f = crate::velocity::gm_factors(model, k)?;
    let rd = sqrt(model.dim as f64);
    let weight = k.c * k.c * k.alpha * k.cross() / k.beta;
    Ok(-0.5 * f.linear * mu * mu - weight * log_cosh(model.h + f.field * rd * mu))
}

/// Drift of `mu`, equal to `-dV/dmu`.
pub fn potential_drift(model: &GaussianMixture, k: &InterpolantCoeffs, mu: f64) -> Result<f64> {
    let f = crate::velocity::gm_factors(model, k)?;
    let rd = sqrt(model.dim as f64);
    Ok(f.linear * mu + f.tilt * rd * tanh(model.h + f.field * rd * mu))
}

/// `tau` at which `alpha(tau) = sqrt(d) beta(tau)`, by bisection.
pub fn balance_point(form: AlphaForm, dim: usize) -> f64 {
    let rd = sqrt(dim as f64);
    let g = |tau: f64| {
        let alpha = match form {
            AlphaForm::Linear => 1.0 - tau,
            AlphaForm::Circular => sqrt(1.0 - tau * tau),
        };
        alpha - rd * tau
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Balance points per dimension and the log-log slope of `tau_0` against `d`.
pub fn speciation_scaling(form: AlphaForm, dims: &[usize]) -> Result<(Vec<f64>, f64)> {
    if dims.len() < 3 {
        return Err(Error::InvalidConfig("need at least three dimensions".into()));
    }
    let lo = dims.iter().copied().min().unwrap_or(1) as f64;
    let hi = dims.iter().copied().max().unwrap_or(1) as f64;
    if !(hi / lo >= 100.0) {
        return Err(Error::InvalidConfig("dimensions must span at least two decades".into()));
    }
    let taus: Vec<f64> = dims.iter().map(|&d| balance_point(form, d)).collect();
    let lx: Vec<f64> = dims.iter().map(|&d| ln(d as f64)).collect();
    let ly: Vec<f64> = taus.iter().map(|&t| ln(t)).collect();
    Ok((taus, ols_slope(&lx, &ly)))
}

/// Monte-Carlo mean and standard error of `tanh(beta m + lambda Z + lambda^2 a)`
/// with `a = +-1`, `P(a = 1) = (1 + m) / 2`. The exact value is `m`.
pub fn cw_conservation_mc<R: Rng + ?Sized>(
    beta_temp: f64,
    m: f64,
    lambda: f64,
    n: usize,
    rng: &mut R,
) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    let up = 0.5 * (1.0 + m);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let a = if rng.random::<f64>() < up { 1.0 } else { -1.0 };
        let v = tanh(beta_temp * m + lambda * z + lambda * lambda * a);
        sum += v;
        sum2 += v * v;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    (mean, sqrt(var / nf))
}

//! Closed-form probability-flow drifts.
//!
//! For any target the drift is `b(x) = (alpha'/alpha) x + (cross/alpha) E[a | I = x]`
//! with `cross = alpha beta' - alpha' beta`. The Gaussian mixture admits the
//! expanded form used by [`gm_velocity`], which stays finite at `alpha = 0`
//! when `s2 > 0`.

use crate::error::{Error, Result};
use crate::math::{abs, ln, ln_1p, softmax2, tanh, tanh_clamped, TANH_CLAMP};
use crate::models::{CurieWeiss, GaussianMixture, TargetModel};
use crate::schedules::{eval_coeffs, InterpolantCoeffs, InterpolantSpec, TimeDilation};

/// A model together with the interpolant coefficients at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldContext {
    pub model: TargetModel,
    pub coeffs: InterpolantCoeffs,
}

impl FieldContext {
    pub fn new(model: TargetModel, coeffs: InterpolantCoeffs) -> Self {
        Self { model, coeffs }
    }

    pub fn velocity(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.model {
            TargetModel::GaussianMixture(g) => gm_velocity(g, &self.coeffs, x, out),
            TargetModel::CurieWeiss(c) => cw_velocity(c, &self.coeffs, x, out),
        }
    }

    pub fn denoiser(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.model {
            TargetModel::GaussianMixture(g) => gm_denoiser(g, &self.coeffs, x, out),
            TargetModel::CurieWeiss(c) => cw_denoiser(c, &self.coeffs, x, out),
        }
    }
}

/// Scalar factors of the mixture drift: `v = a x + b r tanh(h + beta (r.x) / den)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmFactors {
    /// `(c^2 alpha alpha' + s2 beta beta') / den`
    pub linear: f64,
    /// `c^2 alpha cross / den`
    pub tilt: f64,
    /// `beta / den`
    pub field: f64,
    pub den: f64,
}

pub fn gm_factors(model: &GaussianMixture, k: &InterpolantCoeffs) -> Result<GmFactors> {
    let den = k.gm_denominator(model.sigma2);
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::Singular {
            what: "mixture drift denominator",
            tau: k.tau,
        });
    }
    let c2 = k.c * k.c;
    Ok(GmFactors {
        linear: (c2 * k.alpha * k.alpha_dot + model.sigma2 * k.beta * k.beta_dot) / den,
        tilt: c2 * k.alpha * k.cross() / den,
        field: k.beta / den,
        den,
    })
}

fn check_len(x: &[f64], out: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim || out.len() != dim {
        return Err(Error::InvalidConfig(alloc::format!(
            "state length {} / output length {} differ from dimension {dim}",
            x.len(),
            out.len()
        )));
    }
    Ok(())
}

pub fn gm_velocity(
    model: &GaussianMixture,
    k: &InterpolantCoeffs,
    x: &[f64],
    out: &mut [f64],
) -> Result<()> {
    check_len(x, out, model.dim)?;
    let f = gm_factors(model, k)?;
    let rx: f64 = x.iter().sum();
    let shift = f.tilt * tanh(model.h + f.field * rx);
    for (o, &xi) in out.iter_mut().zip(x) {
        *o = f.linear * xi + shift;
    }
    Ok(())
}

/// `E[a | I = x] = (s2 beta x + c^2 alpha^2 r tanh(h + beta (r.x) / den)) / den`.
pub fn gm_denoiser(
    model: &GaussianMixture,
    k: &InterpolantCoeffs,
    x: &[f64],
    out: &mut [f64],
) -> Result<()> {
    check_len(x, out, model.dim)?;
    let f = gm_factors(model, k)?;
    let rx: f64 = x.iter().sum();
    let c2a2 = k.c * k.c * k.alpha * k.alpha;
    let shift = c2a2 * tanh(model.h + f.field * rx) / f.den;
    let lin = model.sigma2 * k.beta / f.den;
    for (o, &xi) in out.iter_mut().zip(x) {
        *o = lin * xi + shift;
    }
    Ok(())
}

/// Posterior mean of the spins. Entries lie in `[-1, 1]`.
pub fn cw_denoiser(
    model: &CurieWeiss,
    k: &InterpolantCoeffs,
    x: &[f64],
    out: &mut [f64],
) -> Result<()> {
    check_len(x, out, model.dim)?;
    let var = k.c * k.c * k.alpha * k.alpha;
    if !(var > 0.0) {
        return Err(Error::Singular {
            what: "spin posterior (alpha = 0)",
            tau: k.tau,
        });
    }
    let scale = k.beta / var;
    let m = model.m;
    debug_assert!(m < 1.0);

    // pass 1: out <- tanh(s_i), accumulate ln Q+-
    let mut lq_plus = 0.0;
    let mut lq_minus = 0.0;
    for (o, &xi) in out.iter_mut().zip(x) {
        let t = tanh_clamped(scale * xi);
        lq_plus += ln_1p(m * t);
        lq_minus += ln_1p(-m * t);
        *o = t;
    }
    let w_plus = if model.p >= 1.0 {
        1.0
    } else if model.p <= 0.0 {
        0.0
    } else {
        softmax2(ln(model.p) + lq_plus, ln(1.0 - model.p) + lq_minus)
    };
    let w_minus = 1.0 - w_plus;

    // pass 2: tanh(+-bm + s) = (T +- A) / (1 +- A T)
    let bm = model.beta_temp * m;
    let a = tanh(bm);
    for (o, &xi) in out.iter_mut().zip(x) {
        let t = *o;
        let dp = 1.0 + a * t;
        let dm = 1.0 - a * t;
        let up = if dp > 1e-3 {
            (t + a) / dp
        } else {
            tanh_clamped(bm + clamp_arg(scale * xi))
        };
        let down = if dm > 1e-3 {
            (t - a) / dm
        } else {
            tanh_clamped(-bm + clamp_arg(scale * xi))
        };
        *o = (w_plus * up + w_minus * down).clamp(-1.0, 1.0);
    }
    Ok(())
}

#[inline]
fn clamp_arg(s: f64) -> f64 {
    if abs(s) > 2.0 * TANH_CLAMP {
        s.signum() * 2.0 * TANH_CLAMP
    } else {
        s
    }
}

pub fn cw_velocity(
    model: &CurieWeiss,
    k: &InterpolantCoeffs,
    x: &[f64],
    out: &mut [f64],
) -> Result<()> {
    if !(k.alpha > 0.0) {
        return Err(Error::Singular {
            what: "spin drift (alpha = 0)",
            tau: k.tau,
        });
    }
    cw_denoiser(model, k, x, out)?;
    let lin = k.alpha_dot / k.alpha;
    let gain = k.cross() / k.alpha;
    for (o, &xi) in out.iter_mut().zip(x) {
        *o = lin * xi + gain * *o;
    }
    Ok(())
}

/// A time-dependent drift on `R^d`.
pub trait VelocityField {
    fn dim(&self) -> usize;

    /// Interpolation time at clock time `t`, for error reporting.
    fn tau(&self, t: f64) -> f64 {
        t
    }

    fn velocity(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()>;
}

/// The exact probability-flow drift of a model under an interpolant and dilation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityFlow {
    pub model: TargetModel,
    pub spec: InterpolantSpec,
    pub dilation: TimeDilation,
}

impl ProbabilityFlow {
    pub fn new(model: TargetModel, spec: InterpolantSpec, dilation: TimeDilation) -> Result<Self> {
        dilation.validate()?;
        Ok(Self {
            model,
            spec,
            dilation,
        })
    }

    pub fn context(&self, t: f64) -> Result<FieldContext> {
        let coeffs = eval_coeffs(&self.spec, &self.dilation, t, self.model.dim())?;
        Ok(FieldContext::new(self.model, coeffs))
    }
}

impl VelocityField for ProbabilityFlow {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn tau(&self, t: f64) -> f64 {
        self.dilation.eval(t).map(|(tau, _)| tau).unwrap_or(f64::NAN)
    }

    fn velocity(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.context(t)?.velocity(x, out)
    }
}

/// Adapts a closure `(t, x, out)` into a [`VelocityField`].
pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> VelocityField for FnField<F>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn velocity(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(t, x, out)
    }
}

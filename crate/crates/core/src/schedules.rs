//! Interpolant coefficient families and time dilations.
//!
//! A [`TimeDilation`] maps the uniform simulation clock `t in [0, 1]` to
//! interpolation time `tau`. Dilations spend half of the clock on the window
//! where the mode (speciation) decision happens and half on the rest, with the
//! window width `kappa / sqrt(d)` set by the dimension.

use crate::error::{Error, Result};
use crate::math::{ln, exp, sqrt};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum TimeDilation {
    /// `tau = t`.
    Uniform,
    /// `2 kappa t / sqrt(d)` on `[0, 1/2]`, then linear up to 1.
    DilatedVp { kappa: f64, dim: usize },
    /// `(1 - kappa/sqrt(d)) 2t` on `[0, 1/2]`, then linear up to 1.
    DilatedVe { kappa: f64, dim: usize },
    /// `exp(g_min ln t - (g_max - g_min) (ln t)^2 / 2)`, the DDPM linear-gamma
    /// schedule seen as a dilation. Only reaches `tau = 0` asymptotically.
    DdpmGamma { gamma_min: f64, gamma_max: f64 },
}

impl TimeDilation {
    /// Checks parameters; dilated kinds need `0 < kappa < sqrt(d)`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            TimeDilation::Uniform => Ok(()),
            TimeDilation::DilatedVp { kappa, dim } | TimeDilation::DilatedVe { kappa, dim } => {
                if dim == 0 {
                    return Err(Error::InvalidConfig("dilation dimension must be positive".into()));
                }
                let width = kappa / sqrt(dim as f64);
                if !(kappa > 0.0) || !(width < 1.0) {
                    return Err(Error::domain("kappa", kappa, "(0, sqrt(d))"));
                }
                Ok(())
            }
            TimeDilation::DdpmGamma {
                gamma_min,
                gamma_max,
            } => {
                if !(gamma_min >= 0.0) || !(gamma_max >= gamma_min) || !gamma_max.is_finite() {
                    return Err(Error::InvalidConfig(
                        "ddpm-gamma needs 0 <= gamma_min <= gamma_max".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// `(tau(t), tau'(t))`; see [`eval_dilation`].
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        eval_dilation(self, t)
    }

    /// Width of the first-phase window, `kappa / sqrt(d)`, for dilated kinds.
    pub fn window(&self) -> Option<f64> {
        match *self {
            TimeDilation::DilatedVp { kappa, dim } | TimeDilation::DilatedVe { kappa, dim } => {
                Some(kappa / sqrt(dim as f64))
            }
            _ => None,
        }
    }
}

/// Evaluates `tau(t)` and its derivative. At the `t = 1/2` kink of the
/// dilated kinds the right derivative is returned.
pub fn eval_dilation(dilation: &TimeDilation, t: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain("t", t, "[0, 1]"));
    }
    match *dilation {
        TimeDilation::Uniform => Ok((t, 1.0)),
        TimeDilation::DilatedVp { kappa, dim } => {
            let w = kappa / sqrt(dim as f64);
            if t < 0.5 {
                Ok((2.0 * w * t, 2.0 * w))
            } else {
                // written from the right end so that tau(1) == 1 exactly
                Ok((1.0 - (1.0 - w) * (2.0 - 2.0 * t), 2.0 * (1.0 - w)))
            }
        }
        TimeDilation::DilatedVe { kappa, dim } => {
            let w = kappa / sqrt(dim as f64);
            if t < 0.5 {
                Ok(((1.0 - w) * 2.0 * t, 2.0 * (1.0 - w)))
            } else {
                Ok((1.0 - w * (2.0 - 2.0 * t), 2.0 * w))
            }
        }
        TimeDilation::DdpmGamma {
            gamma_min,
            gamma_max,
        } => {
            if t <= 0.0 {
                return Err(Error::domain("t", t, "(0, 1] for ddpm-gamma"));
            }
            let lt = ln(t);
            let spread = gamma_max - gamma_min;
            let tau = exp(gamma_min * lt - spread * lt * lt / 2.0);
            let tau_dot = tau * (gamma_min - spread * lt) / t;
            Ok((tau, tau_dot))
        }
    }
}

/// Noise magnitude `sqrt(s(1-t)^2 - s(0)^2)` of the VE SDE with geometric
/// `s(u) = s_min (s_max / s_min)^u`. For schedule comparison plots only.
pub fn ve_sde_noise_magnitude(sigma_min: f64, sigma_max: f64, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain("t", t, "[0, 1]"));
    }
    if !(sigma_min > 0.0) || !(sigma_max >= sigma_min) {
        return Err(Error::InvalidConfig("need 0 < sigma_min <= sigma_max".into()));
    }
    let s = |u: f64| sigma_min * crate::math::powf(sigma_max / sigma_min, u);
    let v = s(1.0 - t) * s(1.0 - t) - sigma_min * sigma_min;
    Ok(sqrt(v.max(0.0)))
}

/// Noise magnitude `sqrt(d) (1 - tau_t)` of the dilated VE interpolant.
pub fn dilated_ve_noise_magnitude(kappa: f64, dim: usize, t: f64) -> Result<f64> {
    let dilation = TimeDilation::DilatedVe { kappa, dim };
    dilation.validate()?;
    let (tau, _) = dilation.eval(t)?;
    Ok(sqrt(dim as f64) * (1.0 - tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum AlphaForm {
    /// `alpha = 1 - tau`
    Linear,
    /// `alpha = sqrt(1 - tau^2)`
    Circular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum NoiseScale {
    /// `c = 1`
    Vp,
    /// `c = sqrt(d)`
    Ve,
}

/// `I = c alpha(tau) z + tau a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InterpolantSpec {
    pub alpha_form: AlphaForm,
    pub noise_scale: NoiseScale,
}

impl InterpolantSpec {
    pub const fn new(alpha_form: AlphaForm, noise_scale: NoiseScale) -> Self {
        Self {
            alpha_form,
            noise_scale,
        }
    }

    pub const fn linear_vp() -> Self {
        Self::new(AlphaForm::Linear, NoiseScale::Vp)
    }

    pub const fn linear_ve() -> Self {
        Self::new(AlphaForm::Linear, NoiseScale::Ve)
    }

    pub fn noise_scale_value(&self, dim: usize) -> f64 {
        match self.noise_scale {
            NoiseScale::Vp => 1.0,
            NoiseScale::Ve => sqrt(dim as f64),
        }
    }
}

/// Instantaneous coefficients at a clock time `t`, derivatives taken with
/// respect to `t` through the dilation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InterpolantCoeffs {
    pub alpha: f64,
    pub alpha_dot: f64,
    pub beta: f64,
    pub beta_dot: f64,
    pub c: f64,
    pub tau: f64,
    pub tau_dot: f64,
}

impl InterpolantCoeffs {
    /// Coefficients of the form `alpha_form` at interpolation time `tau` with
    /// clock speed `tau_dot`.
    pub fn at_tau(alpha_form: AlphaForm, tau: f64, tau_dot: f64, c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::domain("tau", tau, "[0, 1]"));
        }
        let (alpha, dalpha) = match alpha_form {
            AlphaForm::Linear => (1.0 - tau, -1.0),
            AlphaForm::Circular => {
                let alpha = sqrt(1.0 - tau * tau);
                if !(alpha > 0.0) {
                    return Err(Error::Singular {
                        what: "d alpha / d tau of the circular form",
                        tau,
                    });
                }
                (alpha, -tau / alpha)
            }
        };
        Ok(Self {
            alpha,
            alpha_dot: dalpha * tau_dot,
            beta: tau,
            beta_dot: tau_dot,
            c,
            tau,
            tau_dot,
        })
    }

    /// `alpha beta' - alpha' beta`, positive for any admissible schedule.
    #[inline]
    pub fn cross(&self) -> f64 {
        self.alpha * self.beta_dot - self.alpha_dot * self.beta
    }

    /// `c^2 alpha^2 + s2 beta^2`, the variance of a coordinate of the
    /// interpolant conditional on the mode.
    #[inline]
    pub fn gm_denominator(&self, sigma2: f64) -> f64 {
        self.c * self.c * self.alpha * self.alpha + sigma2 * self.beta * self.beta
    }
}

/// Coefficients of `spec` under `dilation` at clock time `t` in dimension `dim`.
pub fn eval_coeffs(
    spec: &InterpolantSpec,
    dilation: &TimeDilation,
    t: f64,
    dim: usize,
) -> Result<InterpolantCoeffs> {
    let (tau, tau_dot) = eval_dilation(dilation, t)?;
    InterpolantCoeffs::at_tau(spec.alpha_form, tau, tau_dot, spec.noise_scale_value(dim))
}

use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("{what} = {value} is outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("mode weight p = {0} maps to an infinite bias")]
    InfiniteBias(f64),

    #[error("inverse temperature {0} <= 1 has no positive magnetization")]
    NoPositiveRoot(f64),

    #[error("{what} is singular at tau = {tau}")]
    Singular { what: &'static str, tau: f64 },

    #[error("trajectory {traj} failed at step {step} (t = {t}, tau = {tau}): {reason}")]
    StepFailed {
        traj: usize,
        step: usize,
        t: f64,
        tau: f64,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("t = {requested} was not recorded (available: {available:?})")]
    UnrecordedTime { requested: f64, available: Vec<f64> },

    #[error("reduced ODE left the finite range at t = {t}")]
    BlowUp { t: f64 },

    #[error("time grids do not match at t = {t}")]
    GridMismatch { t: f64 },

    #[error("{unroundable} of {total} final coordinates have |x| <= 0.5")]
    Quality { unroundable: usize, total: usize },

    #[error("effective sample size {ess:.1} is below {min}")]
    Unreliable { ess: f64, min: f64 },

    #[error("batch carries no {0}")]
    Missing(&'static str),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain {
            what,
            value,
            domain,
        }
    }
}

//! Probability-flow ODE samplers with exact velocity fields for two-mode
//! targets: a Gaussian mixture `p N(r, s2 I) + (1-p) N(-r, s2 I)` and the
//! Curie-Weiss spin model.
//!
//! The crate is `no_std` (with `alloc`). Everything here is pure computation:
//! schedules, target models, closed-form drifts, a forward-Euler batch
//! integrator, reduced large-dimension ODEs, estimators, and Monte-Carlo /
//! enumeration oracles for the drifts. File formats, the CLI and parallel
//! execution live in the `interflow` crate.
//!
//! Interpolants have the form `I = c * alpha(tau) * z + beta(tau) * a` with
//! `tau = tau(t)` a time dilation of the uniform simulation clock `t`.
//! The mode direction `r` is always the all-ones vector, so `|r|^2 = d`.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::approx_constant, clippy::needless_range_loop))]

extern crate alloc;

pub mod analysis;
mod error;
pub mod integrator;
pub mod limits;
pub mod math;
pub mod models;
pub mod oracle;
pub mod rng;
pub mod schedules;
pub mod velocity;

pub use error::{Error, Result};
pub use integrator::{
    euler_step, init_noise, simulate_batch, simulate_trajectory, ObservableRecord,
    SimulationConfig, Trajectory, TrajectoryBatch,
};
pub use models::{bias_from_weight, cw_fixed_point, CurieWeiss, GaussianMixture, TargetModel};
pub use schedules::{
    eval_coeffs, eval_dilation, AlphaForm, InterpolantCoeffs, InterpolantSpec, NoiseScale,
    TimeDilation,
};
pub use velocity::{FieldContext, ProbabilityFlow, VelocityField};

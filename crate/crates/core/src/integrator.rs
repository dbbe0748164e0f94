//! Forward-Euler integration of the probability-flow ODE on the uniform grid
//! `t_k = k / K`, with one RNG stream per trajectory.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::models::TargetModel;
use crate::rng::stream;
use crate::schedules::{InterpolantSpec, TimeDilation};
use crate::velocity::{ProbabilityFlow, VelocityField};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimulationConfig {
    pub model: TargetModel,
    pub interpolant: InterpolantSpec,
    pub dilation: TimeDilation,
    /// Number of Euler steps `K`; the step size is `1 / K`.
    pub steps: usize,
    pub n_traj: usize,
    pub seed: u64,
    /// Leading coordinates stored with every record.
    pub record_coords: usize,
    /// Steps between records; `t = 0` and `t = 1` are always recorded.
    pub record_stride: usize,
    pub keep_final_state: bool,
}

impl SimulationConfig {
    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn delta_t(&self) -> f64 {
        1.0 / self.steps as f64
    }

    /// Number of steps for a step size, requiring `K * delta_t = 1`.
    pub fn steps_for(delta_t: f64) -> Result<usize> {
        if !(delta_t > 0.0 && delta_t <= 1.0) {
            return Err(Error::domain("delta_t", delta_t, "(0, 1]"));
        }
        let k = libm::round(1.0 / delta_t);
        if libm::fabs(k * delta_t - 1.0) > 1e-9 {
            return Err(Error::InvalidConfig(alloc::format!(
                "delta_t = {delta_t} is not 1/K for an integer K"
            )));
        }
        Ok(k as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(Error::InvalidConfig("n_traj must be at least 1".into()));
        }
        if self.dim() == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("number of steps must be at least 1".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig("record_stride must be at least 1".into()));
        }
        if self.record_coords > self.dim() {
            return Err(Error::InvalidConfig(alloc::format!(
                "record_coords = {} exceeds the dimension {}",
                self.record_coords,
                self.dim()
            )));
        }
        match self.dilation {
            TimeDilation::DilatedVp { dim, .. } | TimeDilation::DilatedVe { dim, .. }
                if dim != self.dim() =>
            {
                return Err(Error::InvalidConfig(alloc::format!(
                    "dilation dimension {dim} differs from model dimension {}",
                    self.dim()
                )));
            }
            TimeDilation::DdpmGamma { .. } => {
                return Err(Error::InvalidConfig(
                    "ddpm-gamma never reaches tau = 0 and is for schedule comparison only".into(),
                ));
            }
            _ => {}
        }
        self.dilation.validate()
    }

    pub fn flow(&self) -> Result<ProbabilityFlow> {
        ProbabilityFlow::new(self.model, self.interpolant, self.dilation)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObservableRecord {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    /// `r.x / d`
    pub magnetization: f64,
    /// `r.x / sqrt(d)`
    pub mu: f64,
    /// `|x - M r|^2 / (d - 1)`, zero when `d = 1`.
    pub sigma_perp2: f64,
    pub coords: Vec<f64>,
}

impl ObservableRecord {
    pub fn observe(step: usize, t: f64, tau: f64, x: &[f64], n_coords: usize) -> Self {
        let d = x.len() as f64;
        let sum: f64 = x.iter().sum();
        let m = sum / d;
        let sigma_perp2 = if x.len() > 1 {
            x.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / (d - 1.0)
        } else {
            0.0
        };
        Self {
            step,
            t,
            tau,
            magnetization: m,
            mu: sum / sqrt(d),
            sigma_perp2,
            coords: x[..n_coords.min(x.len())].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    /// Stream index under the master seed.
    pub index: usize,
    pub records: Vec<ObservableRecord>,
    pub final_state: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn final_record(&self) -> &ObservableRecord {
        self.records.last().expect("a trajectory always holds its t = 1 record")
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryBatch {
    pub config: SimulationConfig,
    /// Ordered by trajectory index.
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryBatch {
    pub fn recorded_times(&self) -> Vec<f64> {
        self.trajectories
            .first()
            .map(|tr| tr.records.iter().map(|r| r.t).collect())
            .unwrap_or_default()
    }
}

/// `d` i.i.d. `N(0, c^2)` entries.
pub fn init_noise<R: Rng + ?Sized>(dim: usize, c: f64, rng: &mut R) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            c * z
        })
        .collect()
}

/// `x <- x + delta_t b_t(x)`; `scratch` must have the state's length.
pub fn euler_step<F: VelocityField + ?Sized>(
    field: &F,
    x: &mut [f64],
    t: f64,
    delta_t: f64,
    scratch: &mut [f64],
) -> Result<()> {
    field.velocity(t, x, scratch)?;
    let mut finite = true;
    for (xi, &v) in x.iter_mut().zip(scratch.iter()) {
        finite &= v.is_finite();
        *xi += delta_t * v;
    }
    if !finite {
        return Err(Error::Singular {
            what: "non-finite drift",
            tau: field.tau(t),
        });
    }
    Ok(())
}

/// Integrates trajectory `index` of `config` from its own noise draw.
pub fn simulate_trajectory(config: &SimulationConfig, index: usize) -> Result<Trajectory> {
    let flow = config.flow()?;
    let c = config.interpolant.noise_scale_value(config.dim());
    let mut rng = stream(config.seed, index as u64);
    let x = init_noise(config.dim(), c, &mut rng);
    integrate_from(config, &flow, index, x)
}

/// Integrates an arbitrary drift from `x0` on the grid of `config`.
pub fn integrate_from<F: VelocityField + ?Sized>(
    config: &SimulationConfig,
    field: &F,
    index: usize,
    mut x: Vec<f64>,
) -> Result<Trajectory> {
    let k_total = config.steps;
    let dt = config.delta_t();
    let mut scratch = vec![0.0; x.len()];
    let mut records = Vec::with_capacity(k_total / config.record_stride + 2);
    let tau_at = |t: f64| config.dilation.eval(t).map(|(tau, _)| tau).unwrap_or(f64::NAN);
    for k in 0..k_total {
        let t = k as f64 / k_total as f64;
        if k % config.record_stride == 0 {
            records.push(ObservableRecord::observe(k, t, tau_at(t), &x, config.record_coords));
        }
        euler_step(field, &mut x, t, dt, &mut scratch).map_err(|e| Error::StepFailed {
            traj: index,
            step: k,
            t,
            tau: field.tau(t),
            reason: e.to_string(),
        })?;
    }
    records.push(ObservableRecord::observe(k_total, 1.0, tau_at(1.0), &x, config.record_coords));
    Ok(Trajectory {
        index,
        records,
        final_state: config.keep_final_state.then_some(x),
    })
}

/// Runs every trajectory in index order.
pub fn simulate_batch(config: &SimulationConfig) -> Result<TrajectoryBatch> {
    config.validate()?;
    let trajectories = (0..config.n_traj)
        .map(|j| simulate_trajectory(config, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryBatch {
        config: *config,
        trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GaussianMixture;
    use crate::velocity::FnField;

    fn gm_config(p: f64, s2: f64, d: usize, steps: usize) -> SimulationConfig {
        SimulationConfig {
            model: GaussianMixture::new(p, s2, d).unwrap().into(),
            interpolant: InterpolantSpec::linear_vp(),
            dilation: TimeDilation::Uniform,
            steps,
            n_traj: 2,
            seed: 7,
            record_coords: 2,
            record_stride: 10,
            keep_final_state: false,
        }
    }

    #[test]
    fn noise_variance() {
        let x = init_noise(100_000, 1.0, &mut stream(1, 0));
        let v = x.iter().map(|a| a * a).sum::<f64>() / x.len() as f64;
        assert!((0.98..=1.02).contains(&v), "{v}");
        let x = init_noise(10_000, 100.0, &mut stream(1, 1));
        let v = x.iter().map(|a| a * a).sum::<f64>() / x.len() as f64;
        assert!((v / 1e4 - 1.0).abs() < 0.04, "{v}");
        assert_eq!(init_noise(50, 1.0, &mut stream(9, 3)), init_noise(50, 1.0, &mut stream(9, 3)));
    }

    #[test]
    fn zero_field_leaves_state() {
        let f = FnField {
            dim: 3,
            f: |_t: f64, _x: &[f64], out: &mut [f64]| {
                out.fill(0.0);
                Ok(())
            },
        };
        let mut x = [1.0, -2.0, 3.5];
        let mut s = [0.0; 3];
        euler_step(&f, &mut x, 0.3, 0.01, &mut s).unwrap();
        assert_eq!(x, [1.0, -2.0, 3.5]);
    }

    #[test]
    fn scalar_decay_is_euler_product() {
        let f = FnField {
            dim: 1,
            f: |_t: f64, x: &[f64], out: &mut [f64]| {
                out[0] = -x[0];
                Ok(())
            },
        };
        let mut x = [1.0];
        let mut s = [0.0];
        for k in 0..100 {
            euler_step(&f, &mut x, k as f64 / 100.0, 0.01, &mut s).unwrap();
        }
        assert!((x[0] - 0.99f64.powi(100)).abs() < 1e-14);
        assert!((x[0] - 0.366).abs() < 1e-3);
    }

    #[test]
    fn first_step_from_origin() {
        let d = 10;
        let g = GaussianMixture::new(0.8, 0.25, d).unwrap();
        let flow = ProbabilityFlow::new(g.into(), InterpolantSpec::linear_vp(), TimeDilation::Uniform).unwrap();
        let mut x = vec![0.0; d];
        let mut s = vec![0.0; d];
        euler_step(&flow, &mut x, 0.0, 0.01, &mut s).unwrap();
        let m = x.iter().sum::<f64>() / d as f64;
        assert!((m - 0.01 * 0.6).abs() < 1e-15);
    }

    #[test]
    fn non_finite_drift_is_reported() {
        let f = FnField {
            dim: 1,
            f: |_t: f64, _x: &[f64], out: &mut [f64]| {
                out[0] = f64::NAN;
                Ok(())
            },
        };
        let cfg = gm_config(0.8, 0.25, 1, 10);
        let err = integrate_from(&cfg, &f, 4, vec![0.0]).unwrap_err();
        assert!(matches!(err, Error::StepFailed { traj: 4, step: 0, .. }));
    }

    #[test]
    fn record_layout() {
        let cfg = gm_config(0.8, 0.25, 5, 25);
        let b = simulate_batch(&cfg).unwrap();
        assert_eq!(b.recorded_times(), vec![0.0, 0.4, 0.8, 1.0]);
        let r = &b.trajectories[0].records[1];
        assert_eq!(r.coords.len(), 2);
        assert!((r.magnetization - r.mu / 5f64.sqrt()).abs() <= 1e-12 * r.magnetization.abs());
        assert!(b.trajectories[0].final_state.is_none());
    }

    #[test]
    fn deterministic_and_order_free() {
        let cfg = gm_config(0.8, 0.25, 8, 20);
        let b = simulate_batch(&cfg).unwrap();
        assert_eq!(b, simulate_batch(&cfg).unwrap());
        assert_eq!(b.trajectories[1], simulate_trajectory(&cfg, 1).unwrap());
    }

    #[test]
    fn validation() {
        let mut cfg = gm_config(0.8, 0.25, 8, 20);
        cfg.n_traj = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = gm_config(0.8, 0.25, 8, 20);
        cfg.dilation = TimeDilation::DilatedVp { kappa: 1.0, dim: 9 };
        assert!(cfg.validate().is_err());
        assert_eq!(SimulationConfig::steps_for(0.01).unwrap(), 100);
        assert!(SimulationConfig::steps_for(0.03).is_err());
    }
}

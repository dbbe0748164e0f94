//! Estimators over trajectory batches.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::integrator::{ObservableRecord, Trajectory, TrajectoryBatch};
use crate::limits::LimitTrajectory;
use crate::math::{abs, median, sgn, sqrt};
use crate::models::TargetModel;

const TIME_MATCH: f64 = 1e-12;
const AMBIGUOUS_M: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeWeight {
    pub p_hat: f64,
    pub std_err: f64,
    /// Final magnetizations within `1e-6` of zero (still classified by sign).
    pub ambiguous: usize,
    pub n: usize,
}

/// Fraction of positive entries among final magnetizations.
pub fn mode_weight_of(finals: &[f64]) -> ModeWeight {
    let n = finals.len();
    let plus = finals.iter().filter(|&&m| m > 0.0).count();
    let ambiguous = finals.iter().filter(|&&m| abs(m) < AMBIGUOUS_M).count();
    let p_hat = if n == 0 { 0.0 } else { plus as f64 / n as f64 };
    let std_err = if n == 0 {
        0.0
    } else {
        sqrt(p_hat * (1.0 - p_hat) / n as f64)
    };
    ModeWeight {
        p_hat,
        std_err,
        ambiguous,
        n,
    }
}

pub fn final_magnetizations(batch: &TrajectoryBatch) -> Vec<f64> {
    batch
        .trajectories
        .iter()
        .map(|tr| tr.final_record().magnetization)
        .collect()
}

pub fn mode_weight(batch: &TrajectoryBatch) -> ModeWeight {
    mode_weight_of(&final_magnetizations(batch))
}

fn record_at(tr: &Trajectory, t: f64) -> Option<&ObservableRecord> {
    tr.records.iter().find(|r| abs(r.t - t) < TIME_MATCH)
}

fn unrecorded(batch: &TrajectoryBatch, t: f64) -> Error {
    Error::UnrecordedTime {
        requested: t,
        available: batch.recorded_times(),
    }
}

/// Mean over trajectories of `sigma_perp2` at recorded time `t`.
pub fn orth_variance(batch: &TrajectoryBatch, t: f64) -> Result<f64> {
    let mut acc = 0.0;
    for tr in &batch.trajectories {
        acc += record_at(tr, t).ok_or_else(|| unrecorded(batch, t))?.sigma_perp2;
    }
    Ok(acc / batch.trajectories.len() as f64)
}

/// `(t, sigma_hat2)` at every recorded time.
pub fn orth_variance_series(batch: &TrajectoryBatch) -> Vec<(f64, f64)> {
    batch
        .recorded_times()
        .into_iter()
        .filter_map(|t| orth_variance(batch, t).ok().map(|v| (t, v)))
        .collect()
}

/// Excess kurtosis of recorded coordinates minus the magnetization at `t`,
/// pooled over trajectories.
pub fn orth_excess_kurtosis(batch: &TrajectoryBatch, t: f64) -> Result<f64> {
    let mut vals = Vec::new();
    for tr in &batch.trajectories {
        let r = record_at(tr, t).ok_or_else(|| unrecorded(batch, t))?;
        vals.extend(r.coords.iter().map(|&x| x - r.magnetization));
    }
    if vals.len() < 4 {
        return Err(Error::Missing("recorded coordinates"));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let m2 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let m4 = vals.iter().map(|v| crate::math::powf(v - mean, 4.0)).sum::<f64>() / n;
    Ok(m4 / (m2 * m2) - 3.0)
}

/// Per-trajectory speciation: the first record after the last one whose
/// magnetization disagrees in sign with the final one or has `|M|` below
/// `threshold`. `None` when even the final record fails the threshold.
pub fn trajectory_speciation(tr: &Trajectory, threshold: f64) -> Option<&ObservableRecord> {
    let recs = &tr.records;
    let s_final = sgn(tr.final_record().magnetization);
    let last_bad = recs
        .iter()
        .rposition(|r| sgn(r.magnetization) != s_final || abs(r.magnetization) < threshold);
    match last_bad {
        None => recs.first(),
        Some(j) if j + 1 < recs.len() => Some(&recs[j + 1]),
        Some(_) => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpeciationEstimate {
    /// Median in interpolation time.
    pub tau_s: f64,
    /// Median in clock time.
    pub t_s: f64,
    pub threshold: f64,
    pub n_used: usize,
    /// Trajectories whose sign never settles (excluded).
    pub n_unsettled: usize,
}

/// Default magnetization threshold `2 / sqrt(d)`.
pub fn default_speciation_threshold(dim: usize) -> f64 {
    2.0 / sqrt(dim as f64)
}

pub fn speciation_time(batch: &TrajectoryBatch, threshold: f64) -> Result<SpeciationEstimate> {
    let mut taus = Vec::with_capacity(batch.trajectories.len());
    let mut ts = Vec::with_capacity(batch.trajectories.len());
    let mut unsettled = 0;
    for tr in &batch.trajectories {
        match trajectory_speciation(tr, threshold) {
            Some(r) => {
                taus.push(r.tau);
                ts.push(r.t);
            }
            None => unsettled += 1,
        }
    }
    let tau_s = median(&taus).ok_or(Error::Missing("settled trajectories"))?;
    let t_s = median(&ts).ok_or(Error::Missing("settled trajectories"))?;
    Ok(SpeciationEstimate {
        tau_s,
        t_s,
        threshold,
        n_used: taus.len(),
        n_unsettled: unsettled,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeSpins {
    pub n_traj: usize,
    pub plus: usize,
    pub minus: usize,
    /// `plus / (plus + minus)`.
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpinStats {
    /// Trajectories ending with positive magnetization.
    pub plus_mode: ModeSpins,
    pub minus_mode: ModeSpins,
    pub unroundable: usize,
    pub total: usize,
}

impl SpinStats {
    pub fn roundable_fraction(&self) -> f64 {
        1.0 - self.unroundable as f64 / self.total.max(1) as f64
    }
}

fn final_coords(tr: &Trajectory) -> &[f64] {
    match &tr.final_state {
        Some(x) => x,
        None => &tr.final_record().coords,
    }
}

/// Rounds final coordinates (full state when kept, recorded ones otherwise)
/// to `+-1` and tallies them by the trajectory's final mode. No quality gate.
pub fn spin_counts(batch: &TrajectoryBatch) -> Result<SpinStats> {
    let mut plus_mode = ModeSpins::default();
    let mut minus_mode = ModeSpins::default();
    let mut unroundable = 0;
    let mut total = 0;
    for tr in &batch.trajectories {
        let coords = final_coords(tr);
        let group = if tr.final_record().magnetization > 0.0 {
            &mut plus_mode
        } else {
            &mut minus_mode
        };
        group.n_traj += 1;
        for &x in coords {
            total += 1;
            if x > 0.5 {
                group.plus += 1;
            } else if x < -0.5 {
                group.minus += 1;
            } else {
                unroundable += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Missing("final coordinates"));
    }
    for g in [&mut plus_mode, &mut minus_mode] {
        let n = g.plus + g.minus;
        g.fraction = if n == 0 { f64::NAN } else { g.plus as f64 / n as f64 };
    }
    Ok(SpinStats {
        plus_mode,
        minus_mode,
        unroundable,
        total,
    })
}

/// [`spin_counts`] with the quality gate: more than 1% of coordinates
/// inside `(-0.5, 0.5)` is an error.
pub fn spin_stats(batch: &TrajectoryBatch) -> Result<SpinStats> {
    let s = spin_counts(batch)?;
    if s.unroundable * 100 > s.total {
        return Err(Error::Quality {
            unroundable: s.unroundable,
            total: s.total,
        });
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Observable {
    Magnetization,
    Mu,
    /// `M_t sgn(M_1)`, the magnetization seen from the trajectory's final mode.
    AlignedMagnetization,
    SigmaPerp2,
}

impl Observable {
    pub fn of(self, r: &ObservableRecord, final_sign: f64) -> f64 {
        match self {
            Observable::Magnetization => r.magnetization,
            Observable::Mu => r.mu,
            Observable::AlignedMagnetization => r.magnetization * final_sign,
            Observable::SigmaPerp2 => r.sigma_perp2,
        }
    }
}

/// Batch mean of an observable at recorded time `t`.
pub fn batch_mean(batch: &TrajectoryBatch, observable: Observable, t: f64) -> Result<f64> {
    let mut acc = 0.0;
    for tr in &batch.trajectories {
        let s = sgn(tr.final_record().magnetization);
        acc += observable.of(record_at(tr, t).ok_or_else(|| unrecorded(batch, t))?, s);
    }
    Ok(acc / batch.trajectories.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LimitComparison {
    pub times: Vec<f64>,
    pub diffs: Vec<f64>,
    pub sup: f64,
}

/// `|batch mean - limit|` at every time of `limit`.
pub fn compare_to_limit(
    batch: &TrajectoryBatch,
    limit: &LimitTrajectory,
    observable: Observable,
) -> Result<LimitComparison> {
    let mut diffs = Vec::with_capacity(limit.times.len());
    for (&t, &v) in limit.times.iter().zip(&limit.values) {
        let mean = batch_mean(batch, observable, t).map_err(|_| Error::GridMismatch { t })?;
        diffs.push(abs(mean - v));
    }
    let sup = diffs.iter().copied().fold(0.0, f64::max);
    Ok(LimitComparison {
        times: limit.times.clone(),
        diffs,
        sup,
    })
}

/// Pointwise mean of equally gridded limit trajectories.
pub fn ensemble_mean(members: &[LimitTrajectory]) -> Result<LimitTrajectory> {
    let first = members.first().ok_or(Error::Missing("limit members"))?;
    let mut values = alloc::vec![0.0; first.values.len()];
    for m in members {
        if m.times.len() != first.times.len() {
            return Err(Error::GridMismatch {
                t: *m.times.last().unwrap_or(&0.0),
            });
        }
        for (acc, v) in values.iter_mut().zip(&m.values) {
            *acc += v;
        }
    }
    let n = members.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    Ok(LimitTrajectory {
        kind: first.kind,
        times: first.times.clone(),
        values,
    })
}

/// Largest `|M_t - M_{t0}|` over `t >= t0`, per trajectory, for the
/// observable; returns the mean and the maximum over trajectories.
pub fn drift_after(batch: &TrajectoryBatch, t0: f64, observable: Observable) -> Result<(f64, f64)> {
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for tr in &batch.trajectories {
        let s = sgn(tr.final_record().magnetization);
        let start = observable.of(record_at(tr, t0).ok_or_else(|| unrecorded(batch, t0))?, s);
        let sup = tr
            .records
            .iter()
            .filter(|r| r.t >= t0 - TIME_MATCH)
            .map(|r| abs(observable.of(r, s) - start))
            .fold(0.0, f64::max);
        sum += sup;
        max = max.max(sup);
    }
    Ok((sum / batch.trajectories.len() as f64, max))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureReport {
    pub p_hat: f64,
    pub p_std_err: f64,
    pub ambiguous: usize,
    /// `(t, sigma_hat2)` per recorded time.
    pub sigma_hat2: Vec<(f64, f64)>,
    pub speciation: Option<SpeciationEstimate>,
    pub spin_stats: Option<SpinStats>,
    pub n_traj: usize,
    pub d: usize,
    pub delta_t: f64,
}

/// Mode weight, orthogonal variances, speciation at the default threshold,
/// and for spin models the ungated spin counts.
pub fn feature_report(batch: &TrajectoryBatch) -> FeatureReport {
    let w = mode_weight(batch);
    let d = batch.config.dim();
    let spin_stats = match batch.config.model {
        TargetModel::CurieWeiss(_) => spin_counts(batch).ok(),
        TargetModel::GaussianMixture(_) => None,
    };
    FeatureReport {
        p_hat: w.p_hat,
        p_std_err: w.std_err,
        ambiguous: w.ambiguous,
        sigma_hat2: orth_variance_series(batch),
        speciation: speciation_time(batch, default_speciation_threshold(d)).ok(),
        spin_stats,
        n_traj: batch.trajectories.len(),
        d,
        delta_t: batch.config.delta_t(),
    }
}

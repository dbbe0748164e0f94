//! Parallel batch execution.

use anyhow::{Context, Result};
use interflow_core::{simulate_trajectory, SimulationConfig, TrajectoryBatch};
use rayon::prelude::*;

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building the thread pool")
}

/// Runs all trajectories on `threads` workers (`0` = one per core). The
/// result does not depend on `threads`.
pub fn run_batch(config: &SimulationConfig, threads: usize) -> Result<TrajectoryBatch> {
    config.validate()?;
    let trajectories = pool(threads)?.install(|| {
        (0..config.n_traj)
            .into_par_iter()
            .map(|j| simulate_trajectory(config, j))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(TrajectoryBatch {
        config: *config,
        trajectories,
    })
}

/// Maps `f` over `0..n` on `threads` workers, keeping index order.
pub fn par_map<T, F>(n: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    Ok(pool(threads)?.install(|| (0..n).into_par_iter().map(f).collect()))
}

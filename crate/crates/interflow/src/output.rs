//! CSV and JSON artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use interflow_core::TrajectoryBatch;
use serde::Serialize;

/// Fixed-width scientific notation with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// Columns `t, traj_id, M, mu, sigma_perp2`.
pub fn magnetization_csv(batch: &TrajectoryBatch) -> Result<Vec<u8>> {
    let mut w = csv_writer(Vec::new());
    w.write_record(["t", "traj_id", "M", "mu", "sigma_perp2"])?;
    for tr in &batch.trajectories {
        for r in &tr.records {
            w.write_record([num(r.t), tr.index.to_string(), num(r.magnetization), num(r.mu), num(r.sigma_perp2)])?;
        }
    }
    Ok(w.into_inner()?)
}

/// Columns `t, traj_id, x0, x1, ...` for the recorded leading coordinates.
pub fn coords_csv(batch: &TrajectoryBatch) -> Result<Vec<u8>> {
    let n = batch.config.record_coords;
    let mut w = csv_writer(Vec::new());
    let mut header = vec!["t".to_string(), "traj_id".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for tr in &batch.trajectories {
        for r in &tr.records {
            let mut row = Vec::with_capacity(n + 2);
            row.push(num(r.t));
            row.push(tr.index.to_string());
            row.extend(r.coords.iter().map(|&x| num(x)));
            w.write_record(&row)?;
        }
    }
    Ok(w.into_inner()?)
}

pub fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Writes a set of files so that either all of them appear or none does.
/// Each file goes to a temporary sibling first and is renamed into place.
pub fn write_all_or_nothing(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    let cleanup = |staged: &[(PathBuf, PathBuf)], done: &[PathBuf]| {
        for (tmp, _) in staged {
            let _ = fs::remove_file(tmp);
        }
        for p in done {
            let _ = fs::remove_file(p);
        }
    };
    for (path, bytes) in files {
        let tmp = tmp_path(path);
        if let Err(e) = fs::write(&tmp, bytes) {
            cleanup(&staged, &[]);
            let _ = fs::remove_file(&tmp);
            return Err(e).with_context(|| format!("writing {}", tmp.display()));
        }
        staged.push((tmp, path.clone()));
    }
    let mut done = Vec::new();
    for (tmp, path) in &staged {
        if let Err(e) = fs::rename(tmp, path) {
            cleanup(&staged, &done);
            return Err(e).with_context(|| format!("moving {} into place", path.display()));
        }
        done.push(path.clone());
    }
    Ok(())
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

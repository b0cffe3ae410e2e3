//! CSV and JSON artifacts.
//!
//! Floats are written in shortest round-trip form so identical runs give
//! byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::EquilibriumPoint;
use crate::error::Result;
use crate::solver::Trajectory;
use crate::stability::StabilityReport;

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

/// `t,rho,P,Q,iters`, one row per time node.
pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "rho", "P", "Q", "iters"])?;
    for k in 0..traj.len() {
        w.write_record([
            traj.times[k].to_string(),
            traj.rho[k].to_string(),
            traj.p[k].to_string(),
            traj.q[k].to_string(),
            traj.iterations[k].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One `snapshot_t<k>.csv` with columns `a,n` per stored snapshot, `k` the step index.
pub fn write_snapshots(traj: &Trajectory, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(traj.snapshots.len());
    for snap in &traj.snapshots {
        let path = dir.join(format!("snapshot_t{}.csv", snap.step));
        let mut w = writer(&path)?;
        w.write_record(["a", "n"])?;
        for (i, n) in snap.density.iter().enumerate() {
            w.write_record([(i as f64 * traj.h).to_string(), n.to_string()])?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

/// `P_star,Q_star,rho_star,residual`.
pub fn write_equilibria(eqs: &[EquilibriumPoint], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["P_star", "Q_star", "rho_star", "residual"])?;
    for e in eqs {
        w.write_record([e.p_star.to_string(), e.q_star.to_string(), e.rho_star.to_string(), e.residual.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Roots as `re,im,residual,multiplicity`, plus the classification line in
/// a sibling `.txt` file.
pub fn write_stability(report: &StabilityReport, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["re", "im", "residual", "multiplicity"])?;
    for r in &report.roots {
        w.write_record([r.re.to_string(), r.im.to_string(), r.residual.to_string(), r.multiplicity.to_string()])?;
    }
    w.flush()?;
    fs::write(path.with_extension("txt"), classification_line(report) + "\n")?;
    Ok(())
}

pub fn classification_line(report: &StabilityReport) -> String {
    let r = &report.rect;
    let dom = report
        .dominant
        .map(|d| format!("{},{}", d.re, d.im))
        .unwrap_or_else(|| "none".into());
    format!(
        "classification={} dominant={} roots={} winding={} right_half={} right_limit_certified={} region=[{},{}]x[{},{}]",
        report.classification,
        dom,
        report.roots.len(),
        report.winding_count,
        report.right_half_count,
        report.right_limit_certified,
        r.re_min,
        r.re_max,
        r.im_min,
        r.im_max
    )
}

/// Pretty JSON record for certificates, thresholds and outcomes.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Snapshot;

    #[test]
    fn trajectory_and_snapshots() {
        let dir = tempfile::tempdir().unwrap();
        let traj = Trajectory {
            h: 0.5,
            a_dagger: 1.0,
            times: vec![0.0, 0.5],
            rho: vec![1.0, 0.25],
            p: vec![2.0, 1.5],
            q: vec![2.0, 1.5],
            iterations: vec![0, 3],
            snapshots: vec![Snapshot {
                step: 1,
                time: 0.5,
                density: vec![0.25, 1.0, 0.0],
            }],
        };
        let path = dir.path().join("traj.csv");
        write_trajectory(&traj, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "t,rho,P,Q,iters\n0,1,2,2,0\n0.5,0.25,1.5,1.5,3\n");
        let snaps = write_snapshots(&traj, dir.path()).unwrap();
        assert!(snaps[0].ends_with("snapshot_t1.csv"));
        assert_eq!(fs::read_to_string(&snaps[0]).unwrap(), "a,n\n0,0.25\n0.5,1\n1,0\n");
    }
}

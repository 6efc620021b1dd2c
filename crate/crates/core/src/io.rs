//! CSV and JSON persistence for profiles and trajectories.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MassProfile, Params, RadialProfile};
use crate::solver::{StepControls, StepDiagnostic, Termination, Trajectory};

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(row.into_iter().map(fmt))?;
    }
    wtr.flush()?;
    Ok(())
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let found: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if found != header {
        return Err(Error::InvalidProfile(format!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            header,
            found
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidProfile(format!("{} row {}: {e}", path.display(), line + 2)))?;
        if row.len() != header.len() {
            return Err(Error::InvalidProfile(format!("{} row {}: wrong field count", path.display(), line + 2)));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_radial_csv(path: &Path, u: &RadialProfile) -> Result<()> {
    write_rows(path, &["r", "u"], u.r().iter().zip(u.u()).map(|(r, v)| vec![*r, *v]))
}

pub fn read_radial_csv(path: &Path) -> Result<RadialProfile> {
    let rows = read_rows(path, &["r", "u"])?;
    RadialProfile::new(rows.iter().map(|r| r[0]).collect(), rows.iter().map(|r| r[1]).collect())
}

pub fn write_mass_csv(path: &Path, w: &MassProfile) -> Result<()> {
    let t = w.time();
    write_rows(path, &["s", "w", "t"], w.s().iter().zip(w.w()).map(|(s, v)| vec![*s, *v, t]))
}

pub fn read_mass_csv(path: &Path) -> Result<MassProfile> {
    let rows = read_rows(path, &["s", "w", "t"])?;
    let t = rows.first().map_or(0.0, |r| r[2]);
    if rows.iter().any(|r| r[2] != t) {
        return Err(Error::InvalidProfile(format!("{}: mixed snapshot times", path.display())));
    }
    MassProfile::new(rows.iter().map(|r| r[0]).collect(), rows.iter().map(|r| r[1]).collect(), t)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub params: Params,
    pub epsilon: f64,
    pub controls: StepControls,
    pub termination: Termination,
    pub snapshots: usize,
    pub final_time: f64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Writes `meta.json`, `snap_<k>.csv` and `diag.csv` into `dir`.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = TrajectoryMeta {
        params: traj.params,
        epsilon: traj.epsilon,
        controls: traj.controls.clone(),
        termination: traj.termination,
        snapshots: traj.snapshots().len(),
        final_time: traj.final_time(),
    };
    write_json(&dir.join("meta.json"), &meta)?;
    for (k, snap) in traj.snapshots().iter().enumerate() {
        write_mass_csv(&dir.join(format!("snap_{k}.csv")), snap)?;
    }
    write_rows(
        &dir.join("diag.csv"),
        &["t", "dt", "sup_u", "min_second_diff"],
        traj.diagnostics.iter().map(|d| vec![d.t, d.dt, d.sup_u, d.min_second_diff]),
    )
}

pub fn read_trajectory(dir: &Path) -> Result<Trajectory> {
    let meta_path = dir.join("meta.json");
    if !meta_path.is_file() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no trajectory at {}", dir.display()),
        )));
    }
    let meta: TrajectoryMeta = serde_json::from_reader(fs::File::open(&meta_path)?)?;
    let snapshots = (0..meta.snapshots)
        .map(|k| read_mass_csv(&dir.join(format!("snap_{k}.csv"))))
        .collect::<Result<Vec<_>>>()?;
    if snapshots.is_empty() {
        return Err(Error::InvalidProfile("trajectory has no snapshots".into()));
    }
    if snapshots.windows(2).any(|p| !(p[1].time() > p[0].time())) {
        return Err(Error::InvalidProfile("snapshot times must increase strictly".into()));
    }
    let diagnostics = read_rows(&dir.join("diag.csv"), &["t", "dt", "sup_u", "min_second_diff"])?
        .into_iter()
        .map(|r| StepDiagnostic { t: r[0], dt: r[1], sup_u: r[2], min_second_diff: r[3] })
        .collect();
    Ok(Trajectory {
        params: meta.params,
        epsilon: meta.epsilon,
        controls: meta.controls,
        snapshots,
        diagnostics,
        termination: meta.termination,
    })
}

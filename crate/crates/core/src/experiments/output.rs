//! CSV tables and JSON sidecars consumed by the plotting scripts.
//!
//! Convergence tables have columns `k,h,error,stderr`; time series have
//! `t,value,bound,stderr`; histograms have `bin_left,bin_right,count,reference_density`.
//! Floats are written in shortest round-trip form, so files are byte-identical across reruns.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::convergence::StudyResult;
use super::density::Histogram;
use super::energy::EvolutionRow;
use super::longtime::LongtimeCurve;
use crate::error::Result;
use crate::integrators::TrajectoryRecord;
use crate::sav::AugmentedState;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_convergence_csv(path: &Path, result: &StudyResult) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "k,h,error,stderr")?;
    for r in &result.rows {
        writeln!(w, "{},{},{},{}", r.k, r.h, r.error, r.stderr)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series_csv(path: &Path, rows: &[EvolutionRow]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "t,value,bound,stderr")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.t, r.value, r.bound, r.stderr)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-time curve as a time series: `value` is the error and `bound` the ground truth.
pub fn write_longtime_csv(path: &Path, curve: &LongtimeCurve) -> Result<()> {
    let rows: Vec<EvolutionRow> = curve
        .rows
        .iter()
        .map(|r| EvolutionRow {
            t: r.t,
            value: r.error,
            bound: curve.truth,
            stderr: r.stderr,
        })
        .collect();
    write_series_csv(path, &rows)
}

pub fn write_histogram_csv(path: &Path, hist: &Histogram) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "bin_left,bin_right,count,reference_density")?;
    for b in &hist.bins {
        writeln!(w, "{},{},{},{}", b.bin_left, b.bin_right, b.count, b.reference_density)?;
    }
    w.flush()?;
    Ok(())
}

fn state_header(first: &str, m: usize, last: &[&str]) -> String {
    let mut header = vec![first.to_string()];
    header.extend((0..m).map(|i| format!("v_{i}")));
    header.extend((0..m).map(|i| format!("u_{i}")));
    header.extend(last.iter().map(|s| s.to_string()));
    header.join(",")
}

fn write_state(w: &mut impl Write, s: &AugmentedState) -> Result<()> {
    for x in s.v.iter().chain(&s.u) {
        write!(w, ",{x}")?;
    }
    write!(w, ",{}", s.rho)?;
    Ok(())
}

/// One row per path: `path_index,v_0..,u_0..,rho,diverged`.
pub fn write_samples_csv(path: &Path, samples: &[AugmentedState]) -> Result<()> {
    let mut w = create(path)?;
    let m = samples.first().map_or(0, |s| s.dim());
    writeln!(w, "{}", state_header("path_index", m, &["rho", "diverged"]))?;
    for (p, s) in samples.iter().enumerate() {
        write!(w, "{p}")?;
        write_state(&mut w, s)?;
        let diverged = !s.v.iter().chain(&s.u).all(|x| x.is_finite());
        writeln!(w, ",{}", u8::from(diverged))?;
    }
    w.flush()?;
    Ok(())
}

/// One row per recorded step: `t,v_0..,u_0..,rho,energy`.
pub fn write_trajectory_csv(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let mut w = create(path)?;
    let m = record.states.first().map_or(0, |s| s.dim());
    writeln!(w, "{}", state_header("t", m, &["rho", "energy"]))?;
    for (i, (t, s)) in record.times.iter().zip(&record.states).enumerate() {
        write!(w, "{t}")?;
        write_state(&mut w, s)?;
        let e = record.energies.as_ref().map_or(f64::NAN, |e| e[i]);
        writeln!(w, ",{e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty-printed JSON next to a table.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

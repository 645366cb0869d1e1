//! CSV export of rate tables, density series, and ensemble estimates.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! reader recovers the exact double-precision values. Every file starts with
//! a `# time unit:` comment.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::ensemble::EnsembleEstimate;
use crate::error::Result;
use crate::grid::TimeGrid;
use crate::mastereq::DensitySeries;
use crate::rates::RateTable;
use crate::scalar::Real;
use crate::unravel::JumpEvent;
use num_complex::Complex;

fn open(path: &Path, time_unit: &str) -> Result<BufWriter<File>> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# time unit: {}", time_unit)?;
    Ok(w)
}

/// Columns: t, gamma, shift, method, model_id.
pub fn write_rate_table<T: Real>(path: &Path, table: &RateTable<T>, time_unit: &str) -> Result<()> {
    let mut w = open(path, time_unit)?;
    if let Some(tt) = table.truncated_at {
        writeln!(w, "# truncated at t = {}", tt)?;
    }
    writeln!(w, "t,gamma,shift,method,model_id")?;
    for (k, p) in table.pairs.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{}",
            table.grid.t(k),
            p.gamma,
            p.shift,
            table.method.label(),
            table.model_id
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Two-level layout: t, rho00_re, rho01_re, rho01_im, rho11_re. Higher
/// dimensions get a flattened layout with a header naming every component.
pub fn write_density_series<T: Real>(
    path: &Path,
    ds: &DensitySeries<T>,
    time_unit: &str,
) -> Result<()> {
    let mut w = open(path, time_unit)?;
    if let Some(tt) = ds.truncated_at {
        writeln!(w, "# truncated at t = {}", tt)?;
    }
    let dim = ds.rho.first().map_or(0, |r| r.dim());
    if dim == 2 {
        writeln!(w, "t,rho00_re,rho01_re,rho01_im,rho11_re")?;
        for (k, r) in ds.rho.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                ds.grid.t(k),
                r.get(0, 0).re,
                r.get(0, 1).re,
                r.get(0, 1).im,
                r.get(1, 1).re
            )?;
        }
    } else {
        let mut header = String::from("t");
        for a in 0..dim {
            for b in 0..dim {
                header.push_str(&format!(",rho{a}{b}_re,rho{a}{b}_im"));
            }
        }
        writeln!(w, "{header}")?;
        for (k, r) in ds.rho.iter().enumerate() {
            write!(w, "{}", ds.grid.t(k))?;
            for a in 0..dim {
                for b in 0..dim {
                    write!(w, ",{},{}", r.get(a, b).re, r.get(a, b).im)?;
                }
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns: t, value.
pub fn write_real_series<T: Real>(
    path: &Path,
    grid: &TimeGrid<T>,
    values: &[T],
    label: &str,
    time_unit: &str,
) -> Result<()> {
    let mut w = open(path, time_unit)?;
    writeln!(w, "t,{label}")?;
    for (k, v) in values.iter().enumerate() {
        writeln!(w, "{},{}", grid.t(k), v)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: t, re, im.
pub fn write_complex_series<T: Real>(
    path: &Path,
    grid: &TimeGrid<T>,
    values: &[Complex<T>],
    time_unit: &str,
) -> Result<()> {
    let mut w = open(path, time_unit)?;
    writeln!(w, "t,re,im")?;
    for (k, v) in values.iter().enumerate() {
        writeln!(w, "{},{},{}", grid.t(k), v.re, v.im)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: t, rho11_hat, rho11_se, rho01_re_hat, rho01_im_hat,
/// rho01_re_se, rho01_im_se, n_traj.
pub fn write_ensemble<T: Real>(
    path: &Path,
    e: &EnsembleEstimate<T>,
    time_unit: &str,
) -> Result<()> {
    let mut w = open(path, time_unit)?;
    writeln!(
        w,
        "t,rho11_hat,rho11_se,rho01_re_hat,rho01_im_hat,rho01_re_se,rho01_im_se,n_traj"
    )?;
    for k in 0..e.grid.len {
        let r = &e.rho_hat[k];
        let s = &e.se[k];
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            e.grid.t(k),
            r.get(1, 1).re,
            s.get(1, 1).re,
            r.get(0, 1).re,
            r.get(0, 1).im,
            s.get(0, 1).re,
            s.get(0, 1).im,
            e.n_traj
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Diagnostic jump log: trajectory_index, t_jump, channel.
pub fn write_jump_log<T: Real>(
    path: &Path,
    jumps: &[(u64, Vec<JumpEvent<T>>)],
    time_unit: &str,
) -> Result<()> {
    let mut w = open(path, time_unit)?;
    writeln!(w, "trajectory_index,t_jump,channel")?;
    for (index, events) in jumps {
        for (t, ch) in events {
            writeln!(w, "{},{},{}", index, t, ch)?;
        }
    }
    w.flush()?;
    Ok(())
}

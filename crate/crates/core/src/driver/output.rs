//! Result tables, field dumps and the other run artifacts.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rustfft::FftPlanner;

use super::{ResultRow, RunOutcome};
use crate::assembly::C;
use crate::error::Result;
use crate::reference::{wavenumber, SpectralGrid};

pub const RESULTS_FILE: &str = "results.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const PHASE_COUNT_FILE: &str = "phase_count.txt";
pub const DG_FIELD_FILE: &str = "dg_field.bin";
pub const REF_FIELD_FILE: &str = "ref_field.bin";
pub const DIFF_FIELD_FILE: &str = "diff_field.bin";
pub const SLICE_FILE: &str = "slice.csv";
pub const CONFIG_FILE: &str = "config.toml";

pub const RESULTS_HEADER: &str =
    "omega,inv_h,omega_h,cond_original,cond_pod,dof_original,dof_pod,rel_l2_error_percent";

/// Writes the results table; optional columns are left empty.
pub fn write_results(rows: &[ResultRow], out: &mut impl Write) -> Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in rows {
        let cond_pod = r.cond_pod.map(|v| format!("{v:.6e}")).unwrap_or_default();
        let dof_pod = r.dof_pod.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{:.15e},{},{:.15e},{:.6e},{},{},{},{:.6}",
            r.omega, r.inv_h, r.omega_h, r.cond_original, cond_pod, r.dof_original, dof_pod, r.rel_l2_error_percent
        )?;
    }
    Ok(())
}

pub fn write_timings(outcome: &RunOutcome, out: &mut impl Write) -> Result<()> {
    let t = &outcome.times;
    writeln!(out, "stage,seconds")?;
    for (name, v) in [
        ("rays", t.rays),
        ("assembly", t.assembly),
        ("pod", t.pod),
        ("marching", t.marching),
        ("reference", t.reference),
        ("comparison", t.comparison),
        ("total", outcome.row.wall_time),
    ] {
        writeln!(out, "{name},{v:.6}")?;
    }
    Ok(())
}

/// Direction counts per cell, one text row per mesh row, top row (largest `x₂`) first.
pub fn write_phase_counts(n: usize, counts: &[usize], out: &mut impl Write) -> Result<()> {
    for j in (0..n).rev() {
        let row: Vec<String> = (0..n).map(|i| counts[j * n + i].to_string()).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Trigonometric interpolation of a grid along the line `x₂ = y` at the grid's `x₁` points.
pub fn interpolate_row(grid: &SpectralGrid, y: f64) -> Vec<C> {
    let n = grid.n;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut column = vec![C::new(0.0, 0.0); n];
    let phases: Vec<C> = (0..n).map(|k| C::from_polar(1.0 / n as f64, 2.0 * PI * wavenumber(k, n) * y)).collect();
    (0..n)
        .map(|i| {
            for (j, c) in column.iter_mut().enumerate() {
                *c = grid.values[j * n + i];
            }
            fft.process(&mut column);
            column.iter().zip(&phases).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// `x₁, Re u_h, Re u_ref, |u_h − u_ref|` along `x₂ = y` at the reference grid abscissae.
pub fn write_slice(outcome: &RunOutcome, y: f64, out: &mut impl Write) -> Result<()> {
    let reference = interpolate_row(&outcome.reference, y);
    let n = outcome.reference.n;
    writeln!(out, "x1,re_dg,re_ref,abs_diff")?;
    for (i, r) in reference.iter().enumerate() {
        let x = i as f64 / n as f64;
        let u = outcome.space.evaluate(&outcome.coeffs, [x, y]);
        writeln!(out, "{x:.10},{:.12e},{:.12e},{:.12e}", u.re, r.re, (u - r).norm())?;
    }
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes every artifact of a run into `dir` and returns the paths written.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, f: &mut dyn FnMut(&mut BufWriter<File>) -> Result<()>| -> Result<()> {
        let mut w = create(dir, name)?;
        f(&mut w)?;
        w.flush()?;
        written.push(dir.join(name));
        Ok(())
    };
    emit(CONFIG_FILE, &mut |w| Ok(w.write_all(outcome.config.to_toml().as_bytes())?))?;
    emit(RESULTS_FILE, &mut |w| write_results(std::slice::from_ref(&outcome.row), w))?;
    emit(TIMINGS_FILE, &mut |w| write_timings(outcome, w))?;
    let n = outcome.space.mesh.cells_per_side();
    emit(PHASE_COUNT_FILE, &mut |w| write_phase_counts(n, &outcome.phase_counts(), w))?;
    emit(DG_FIELD_FILE, &mut |w| outcome.dg_grid.write_to(w))?;
    emit(REF_FIELD_FILE, &mut |w| outcome.reference.write_to(w))?;
    let diff = outcome.dg_grid.difference(&outcome.reference);
    emit(DIFF_FIELD_FILE, &mut |w| diff.write_to(w))?;
    emit(SLICE_FILE, &mut |w| write_slice(outcome, outcome.config.output.slice_x2, w))?;
    for (k, s) in outcome.snapshots.iter().enumerate() {
        let name = format!("snapshot_{:02}.bin", k + 1);
        emit(&name, &mut |w| s.write_to(n, outcome.space.omega, w))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let mut buf = Vec::new();
        write_results(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{RESULTS_HEADER}\n"));
    }

    #[test]
    fn row_interpolation_is_exact_for_trigonometric_data() {
        let g = SpectralGrid::sample(16, 0.0, |x| C::from_polar(1.0, 2.0 * PI * (2.0 * x[0] - 3.0 * x[1]))).unwrap();
        let row = interpolate_row(&g, 0.37);
        for (i, v) in row.iter().enumerate() {
            let want = C::from_polar(1.0, 2.0 * PI * (2.0 * i as f64 / 16.0 - 3.0 * 0.37));
            assert!((v - want).norm() < 1e-12);
        }
    }

    #[test]
    fn phase_count_layout() {
        let mut buf = Vec::new();
        write_phase_counts(2, &[1, 2, 3, 4], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "3 4\n1 2\n");
    }
}

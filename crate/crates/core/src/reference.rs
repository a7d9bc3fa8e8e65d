//! Pseudospectral reference solutions on a uniform periodic grid.
//!
//! Grid point `(i, j)` sits at `x = (i/n, j/n)`; values are stored row-major
//! with rows indexed by `j` (the `x₂` coordinate).

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64 as C;
use rustfft::{Fft, FftPlanner};

use crate::assembly::DgSpace;
use crate::error::{Error, Result};
use crate::marching::{InitialData, BLOWUP_FACTOR};
use crate::medium::{Medium, Point};
use crate::par;

const GRID_MAGIC: &[u8; 8] = b"RDGGRID1";
const MIN_POINTS: usize = 256;

/// Complex samples on the `n × n` periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGrid {
    pub n: usize,
    pub time: f64,
    pub values: Vec<C>,
}

impl SpectralGrid {
    pub fn new(n: usize, time: f64, values: Vec<C>) -> Result<Self> {
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::config(format!("grid size {n} must be a power of two")));
        }
        if values.len() != n * n {
            return Err(Error::config("grid values do not match the grid size"));
        }
        Ok(SpectralGrid { n, time, values })
    }

    pub fn point(n: usize, i: usize, j: usize) -> Point {
        [i as f64 / n as f64, j as f64 / n as f64]
    }

    pub fn sample(n: usize, time: f64, f: impl Fn(Point) -> C + Sync + Send) -> Result<Self> {
        let rows = par::map_range(n, |j| (0..n).map(|i| f(Self::point(n, i, j))).collect::<Vec<_>>());
        SpectralGrid::new(n, time, rows.concat())
    }

    /// Root-mean-square value, the grid quadrature of the L² norm on the unit square.
    pub fn norm_l2(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// `100 ‖self − reference‖ / ‖reference‖`.
    pub fn relative_error_percent(&self, reference: &SpectralGrid) -> Result<f64> {
        if self.n != reference.n {
            return Err(Error::config("grids of different size"));
        }
        let den = reference.norm_l2();
        if !(den > 0.0) {
            return Err(Error::config("reference field has zero norm"));
        }
        let num: f64 = self
            .values
            .iter()
            .zip(&reference.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / self.values.len() as f64;
        Ok(100.0 * num.sqrt() / den)
    }

    pub fn difference(&self, other: &SpectralGrid) -> SpectralGrid {
        SpectralGrid {
            n: self.n,
            time: self.time,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    /// Writes `magic, u64 n, f64 t, n² × (f64 re, f64 im)`, little endian.
    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        out.write_all(GRID_MAGIC)?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        out.write_all(&self.time.to_le_bytes())?;
        let mut buf = Vec::with_capacity(16 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(input: &mut impl Read) -> Result<Self> {
        let mut head = [0u8; 24];
        input.read_exact(&mut head)?;
        if &head[..8] != GRID_MAGIC {
            return Err(Error::Format("not a grid file".into()));
        }
        let n = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
        let time = f64::from_le_bytes(head[16..24].try_into().unwrap());
        let count = n.checked_mul(n).ok_or_else(|| Error::Format("grid size overflow".into()))?;
        let mut buf = vec![0u8; 16 * count];
        input.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(16)
            .map(|c| {
                C::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        SpectralGrid::new(n, time, values).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Signed integer frequency of DFT index `k` on `n` points, in `[−n/2, n/2)`.
pub fn wavenumber(k: usize, n: usize) -> f64 {
    if k < n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Planned 2D transforms and the spectral Laplacian symbol for one grid size.
pub struct SpectralOps {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `−(2π)²(k₁² + k₂²) / n²`, including the inverse-transform normalization.
    symbol: Vec<f64>,
    scratch: Vec<C>,
}

impl SpectralOps {
    pub fn new(n: usize) -> Result<Self> {
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::config(format!("grid size {n} must be a power of two")));
        }
        let mut planner = FftPlanner::new();
        let norm = 1.0 / (n * n) as f64;
        let mut symbol = Vec::with_capacity(n * n);
        for j in 0..n {
            let k2 = wavenumber(j, n);
            for i in 0..n {
                let k1 = wavenumber(i, n);
                symbol.push(-(2.0 * PI).powi(2) * (k1 * k1 + k2 * k2) * norm);
            }
        }
        Ok(SpectralOps {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            symbol,
            scratch: vec![C::new(0.0, 0.0); n * n],
        })
    }

    fn rows(&self, data: &mut [C], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let chunk = (n / 8).max(1) * n;
        let offsets: Vec<usize> = (0..=n * n / chunk).map(|c| c * chunk).collect();
        par::for_each_segment_mut(data, &offsets, |_, seg| fft.process(seg));
    }

    fn transpose(n: usize, src: &[C], dst: &mut [C]) {
        const TILE: usize = 32;
        for jb in (0..n).step_by(TILE) {
            for ib in (0..n).step_by(TILE) {
                for j in jb..(jb + TILE).min(n) {
                    for i in ib..(ib + TILE).min(n) {
                        dst[i * n + j] = src[j * n + i];
                    }
                }
            }
        }
    }

    /// Unnormalized 2D transform in place.
    fn transform(&mut self, data: &mut [C], forward: bool) {
        let fft = if forward { self.forward.clone() } else { self.inverse.clone() };
        let mut scratch = std::mem::take(&mut self.scratch);
        self.rows(data, &fft);
        Self::transpose(self.n, data, &mut scratch);
        self.rows(&mut scratch, &fft);
        Self::transpose(self.n, &scratch, data);
        self.scratch = scratch;
    }

    /// Overwrites `data` with its spectral Laplacian.
    pub fn laplacian_in_place(&mut self, data: &mut [C]) {
        self.transform(data, true);
        for (v, s) in data.iter_mut().zip(&self.symbol) {
            *v *= *s;
        }
        self.transform(data, false);
    }

    pub fn laplacian(&mut self, grid: &SpectralGrid) -> SpectralGrid {
        let mut values = grid.values.clone();
        self.laplacian_in_place(&mut values);
        SpectralGrid { n: grid.n, time: grid.time, values }
    }

    /// Unitary-normalized Fourier coefficients (`Σ|ĉ|² = mean |u|²`).
    pub fn spectrum(&mut self, grid: &SpectralGrid) -> Vec<C> {
        let mut values = grid.values.clone();
        self.transform(&mut values, true);
        let s = 1.0 / (self.n * self.n) as f64;
        values.iter_mut().for_each(|v| *v *= s);
        values
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceConfig {
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
}

impl ReferenceConfig {
    /// `n = max(256, next power of two ≥ 16ω/2π)` with [`ReferenceConfig::default_dt`].
    pub fn for_frequency(omega: f64, t_final: f64) -> Self {
        let want = (16.0 * omega / (2.0 * PI)).ceil().max(1.0) as usize;
        let n = want.next_power_of_two().max(MIN_POINTS);
        ReferenceConfig { n, dt: Self::default_dt(n, t_final), t_final }
    }

    /// Largest step `≤ 1/(8n)` that divides `T`.
    pub fn default_dt(n: usize, t_final: f64) -> f64 {
        let dt = 1.0 / (8.0 * n as f64);
        if t_final > 0.0 {
            t_final / (t_final / dt).ceil()
        } else {
            dt
        }
    }

    /// Same run with the grid doubled and the step halved.
    pub fn refined(&self) -> Self {
        ReferenceConfig { n: 2 * self.n, dt: 0.5 * self.dt, t_final: self.t_final }
    }

    /// Largest stable leapfrog step for the spectral Laplacian.
    pub fn max_stable_dt(n: usize, max_speed: f64) -> f64 {
        // λ_max(−c²Δ) = c² (2π)² · 2 (n/2)²
        2.0 / (max_speed * PI * 2f64.sqrt() * n as f64)
    }

    fn steps(&self) -> Result<usize> {
        let r = self.t_final / self.dt;
        let k = r.round();
        if !(self.dt > 0.0) || (r - k).abs() > 1e-12 * r.max(1.0) {
            return Err(Error::config(format!(
                "reference time step {} does not divide the final time {}",
                self.dt, self.t_final
            )));
        }
        Ok(k as usize)
    }
}

/// Integrates `u_tt = c² Δu` with leapfrog and a second-order Taylor start.
pub fn reference_run(medium: &Medium, data: &InitialData, omega: f64, cfg: &ReferenceConfig) -> Result<SpectralGrid> {
    let n = cfg.n;
    let steps = cfg.steps()?;
    if cfg.dt > ReferenceConfig::max_stable_dt(n, medium.max_speed()) {
        return Err(Error::config(format!(
            "reference time step {} exceeds the stability limit {:e}",
            cfg.dt,
            ReferenceConfig::max_stable_dt(n, medium.max_speed())
        )));
    }
    let mut ops = SpectralOps::new(n)?;
    let c2 = SpectralGrid::sample(n, 0.0, |x| C::new(medium.speed(x).powi(2), 0.0))?.values;
    let u0 = SpectralGrid::sample(n, 0.0, |x| data.displacement(omega, x))?;
    let v0 = SpectralGrid::sample(n, 0.0, |x| data.velocity(omega, x))?;
    if steps == 0 {
        return Ok(u0);
    }
    let dt = cfg.dt;
    let dt2 = dt * dt;
    let mut lap = u0.values.clone();
    ops.laplacian_in_place(&mut lap);
    let mut prev = u0.values;
    let mut curr: Vec<C> = prev
        .iter()
        .zip(&v0.values)
        .zip(lap.iter().zip(&c2))
        .map(|((u, v), (l, c))| u + v * dt + l * c * (0.5 * dt2))
        .collect();
    let floor = prev
        .iter()
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        .max(curr.iter().map(|v| v.norm_sqr()).sum())
        .max(f64::MIN_POSITIVE);
    for step in 1..steps {
        lap.copy_from_slice(&curr);
        ops.laplacian_in_place(&mut lap);
        let mut s = 0.0;
        for (((p, &c), &l), &w) in prev.iter_mut().zip(&curr).zip(&lap).zip(&c2) {
            *p = c * 2.0 - *p + l * w * dt2;
            s += p.norm_sqr();
        }
        std::mem::swap(&mut prev, &mut curr);
        if !s.is_finite() || s > BLOWUP_FACTOR * floor {
            return Err(Error::Instability { step: step + 1 });
        }
    }
    SpectralGrid::new(n, steps as f64 * dt, curr)
}

/// Samples a DG field (unreduced coefficients) on the reference grid.
pub fn sample_dg(space: &DgSpace, coeffs: &[C], n: usize, time: f64) -> Result<SpectralGrid> {
    if coeffs.len() != space.n_dofs() {
        return Err(Error::config("coefficient vector does not match the DG space"));
    }
    SpectralGrid::sample(n, time, |x| space.evaluate(coeffs, x))
}

/// Relative L² error in percent of a DG field against a reference grid.
pub fn relative_l2_error(space: &DgSpace, coeffs: &[C], reference: &SpectralGrid) -> Result<f64> {
    sample_dg(space, coeffs, reference.n, reference.time)?.relative_error_percent(reference)
}

//! Leapfrog time marching of the semi-discrete system `M^c u'' + A u = 0`.
//!
//! The operator `B = (M^c)⁻¹A` is applied through per-cell blocks with the
//! weighted-mass inverse folded in once, so a step costs one face-sparse
//! block product.

use std::io::{Read, Write};

use nalgebra::{Cholesky, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{DgSpace, DofLayout, LinearSystem, PodTransform, C, ZERO};
use crate::error::{Error, Result};
use crate::medium::Point;
use crate::par;

/// Growth of `‖u‖²` over its initial value treated as blow-up.
pub const BLOWUP_FACTOR: f64 = 1e20;
/// Relative difference between two load quadrature orders treated as under-resolved.
pub const LOAD_RESOLUTION_TOL: f64 = 1e-8;
/// Gauss points per axis for loads of non-affine phases.
pub const LOAD_ORDER: usize = 30;
const LOAD_CHECK_ORDER: usize = 22;

/// Coefficient vector at a time level.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveField {
    pub coeffs: Vec<C>,
    pub time: f64,
}

const FIELD_MAGIC: &[u8; 8] = b"RDGCOEF1";

impl WaveField {
    /// Writes `magic, u64 N, f64 ω, f64 t, u64 len, len × (f64 re, f64 im)`, little endian.
    pub fn write_to(&self, cells_per_side: usize, omega: f64, out: &mut impl Write) -> Result<()> {
        out.write_all(FIELD_MAGIC)?;
        out.write_all(&(cells_per_side as u64).to_le_bytes())?;
        out.write_all(&omega.to_le_bytes())?;
        out.write_all(&self.time.to_le_bytes())?;
        out.write_all(&(self.coeffs.len() as u64).to_le_bytes())?;
        for v in &self.coeffs {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a field written by [`WaveField::write_to`]; returns `(N, ω, field)`.
    pub fn read_from(input: &mut impl Read) -> Result<(usize, f64, WaveField)> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != FIELD_MAGIC {
            return Err(Error::Format("not a coefficient file".into()));
        }
        let mut b = [0u8; 8];
        let mut next = |input: &mut dyn Read| -> Result<[u8; 8]> {
            input.read_exact(&mut b)?;
            Ok(b)
        };
        let n = u64::from_le_bytes(next(input)?) as usize;
        let omega = f64::from_le_bytes(next(input)?);
        let time = f64::from_le_bytes(next(input)?);
        let len = u64::from_le_bytes(next(input)?) as usize;
        let mut coeffs = Vec::with_capacity(len);
        for _ in 0..len {
            let re = f64::from_le_bytes(next(input)?);
            let im = f64::from_le_bytes(next(input)?);
            coeffs.push(C::new(re, im));
        }
        Ok((n, omega, WaveField { coeffs, time }))
    }
}

/// `out += m x` for a column-major block.
fn gemv_add(out: &mut [C], m: &DMatrix<C>, x: &[C]) {
    let rows = m.nrows();
    for (col, &xc) in m.as_slice().chunks_exact(rows).zip(x) {
        if xc == ZERO {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(col) {
            *o += a * xc;
        }
    }
}

/// Per-cell rows of `B = (M^c)⁻¹A`: the cell itself, right, top, left and
/// bottom neighbors.
#[derive(Clone, Debug)]
struct CellRow {
    neighbors: [usize; 5],
    blocks: [DMatrix<C>; 5],
}

/// `(M^c)⁻¹A` with the block inverses folded in.
#[derive(Clone, Debug)]
pub struct StepOperator {
    layout: DofLayout,
    rows: Vec<CellRow>,
}

impl StepOperator {
    pub fn new(system: &LinearSystem) -> Result<Self> {
        let layout = system.layout.clone();
        let a = &system.stiffness;
        let mesh = a.mesh;
        let n = mesh.cells_per_side() as i64;
        let rows = par::map_range(layout.n_cells(), |k| -> Result<CellRow> {
            let chol = Cholesky::new(system.weighted_mass.blocks[k].clone()).ok_or_else(|| {
                Error::Integrity(format!("weighted mass block of cell {k} is not positive definite"))
            })?;
            let c = mesh.index(k);
            let (i, j) = (c.i as i64, c.j as i64);
            let left = mesh.wrapped_id(i - 1 + n, j);
            let down = mesh.wrapped_id(i, j - 1 + n);
            let neighbors = [k, mesh.wrapped_id(i + 1, j), mesh.wrapped_id(i, j + 1), left, down];
            let blocks = [
                chol.solve(&a.diag[k]),
                chol.solve(&a.right[k]),
                chol.solve(&a.up[k]),
                chol.solve(&a.right[left].adjoint()),
                chol.solve(&a.up[down].adjoint()),
            ];
            Ok(CellRow { neighbors, blocks })
        });
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(StepOperator { layout, rows })
    }

    pub fn layout(&self) -> &DofLayout {
        &self.layout
    }

    fn row_into(&self, k: usize, u: &[C], out: &mut [C]) {
        let row = &self.rows[k];
        for (&nb, b) in row.neighbors.iter().zip(&row.blocks) {
            gemv_add(out, b, &u[self.layout.range(nb)]);
        }
    }

    /// `(M^c)⁻¹ A u`.
    pub fn apply(&self, u: &[C]) -> Vec<C> {
        let mut out = vec![ZERO; u.len()];
        par::for_each_segment_mut(&mut out, self.layout.offsets(), |k, seg| self.row_into(k, u, seg));
        out
    }

    /// Overwrites `prev` with `2 curr − prev − dt² B curr`.
    pub fn leapfrog(&self, prev: &mut [C], curr: &[C], dt: f64) {
        let dt2 = dt * dt;
        let width = self.layout.max_size();
        par::for_each_segment_mut(prev, self.layout.offsets(), |k, seg| {
            let mut buf = [ZERO; 64];
            let mut heap;
            let bu: &mut [C] = if width <= buf.len() {
                &mut buf[..seg.len()]
            } else {
                heap = vec![ZERO; seg.len()];
                &mut heap
            };
            self.row_into(k, curr, bu);
            let cur = &curr[self.layout.range(k)];
            for ((p, &c), &b) in seg.iter_mut().zip(cur).zip(bu.iter()) {
                *p = c * 2.0 - *p - b * dt2;
            }
        });
    }
}

fn norm_sqr(u: &[C]) -> f64 {
    u.iter().map(|v| v.norm_sqr()).sum()
}

/// Hermitian inner product `⟨x, y⟩ = Σ x_i ȳ_i`.
fn inner(x: &[C], y: &[C]) -> C {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

/// Discrete energy `‖(u⁺ − u)/Δt‖²_{M^c} + Re⟨A u⁺, u⟩`.
pub fn energy(system: &LinearSystem, next: &[C], curr: &[C], dt: f64) -> f64 {
    let v: Vec<C> = next.iter().zip(curr).map(|(a, b)| (a - b) / dt).collect();
    let mv = system.weighted_mass.matvec(&system.layout, &v);
    let au = system.stiffness.matvec(&system.layout, next);
    inner(&mv, &v).re + inner(&au, curr).re
}

/// One plane-wave component of the initial data:
/// `u(x,0) += a e^{iω(g·x + c)}`, `u_t(x,0) += iω b e^{iω(g·x + c)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneWave {
    pub amplitude: C,
    pub velocity: C,
    pub grad: Point,
    pub offset: f64,
}

impl PlaneWave {
    /// Right-going unit wave along `grad` for unit speed: `u_t = −iω |g| u`.
    pub fn travelling(grad: Point) -> Self {
        PlaneWave {
            amplitude: C::new(1.0, 0.0),
            velocity: C::new(-(grad[0].hypot(grad[1])), 0.0),
            grad,
            offset: 0.0,
        }
    }

    pub fn value(&self, omega: f64, x: Point) -> C {
        self.amplitude * C::from_polar(1.0, omega * (self.grad[0] * x[0] + self.grad[1] * x[1] + self.offset))
    }

    pub fn rate(&self, omega: f64, x: Point) -> C {
        C::new(0.0, omega) * self.velocity
            * C::from_polar(1.0, omega * (self.grad[0] * x[0] + self.grad[1] * x[1] + self.offset))
    }
}

pub type FieldFn = Box<dyn Fn(Point) -> C + Sync + Send>;

/// Initial displacement and velocity.
pub enum InitialData {
    /// Superposition of plane waves with affine phases; loads are exact.
    PlaneWaves(Vec<PlaneWave>),
    /// Arbitrary closed forms; loads use tensor Gauss quadrature.
    Custom { displacement: FieldFn, velocity: FieldFn },
}

impl std::fmt::Debug for InitialData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialData::PlaneWaves(w) => f.debug_tuple("PlaneWaves").field(w).finish(),
            InitialData::Custom { .. } => f.write_str("Custom"),
        }
    }
}

impl InitialData {
    pub fn displacement(&self, omega: f64, x: Point) -> C {
        match self {
            InitialData::PlaneWaves(w) => w.iter().map(|p| p.value(omega, x)).sum(),
            InitialData::Custom { displacement, .. } => displacement(x),
        }
    }

    pub fn velocity(&self, omega: f64, x: Point) -> C {
        match self {
            InitialData::PlaneWaves(w) => w.iter().map(|p| p.rate(omega, x)).sum(),
            InitialData::Custom { velocity, .. } => velocity(x),
        }
    }

    /// Loads `(∫u₀ψ̄_i, ∫u₁ψ̄_i)` on the unreduced space.
    pub fn loads(&self, space: &DgSpace) -> Result<(Vec<C>, Vec<C>)> {
        let n = space.n_dofs();
        match self {
            InitialData::PlaneWaves(waves) => {
                let mut u0 = vec![ZERO; n];
                let mut u1 = vec![ZERO; n];
                let iw = C::new(0.0, space.omega);
                for w in waves {
                    let base = space.plane_wave_load(C::new(1.0, 0.0), w.grad, w.offset);
                    for ((a, b), v) in u0.iter_mut().zip(u1.iter_mut()).zip(&base) {
                        *a += w.amplitude * v;
                        *b += iw * w.velocity * v;
                    }
                }
                Ok((u0, u1))
            }
            InitialData::Custom { displacement, velocity } => {
                let checked = |f: &FieldFn, what: &str| -> Result<Vec<C>> {
                    let fine = space.quadrature_load(f.as_ref(), LOAD_ORDER);
                    let coarse = space.quadrature_load(f.as_ref(), LOAD_CHECK_ORDER);
                    let diff: f64 = fine.iter().zip(&coarse).map(|(a, b)| (a - b).norm_sqr()).sum();
                    let scale = norm_sqr(&fine);
                    if diff.sqrt() > LOAD_RESOLUTION_TOL * scale.sqrt().max(f64::MIN_POSITIVE) {
                        return Err(Error::config(format!(
                            "initial {what} is under-resolved by the load quadrature (relative difference {:e})",
                            (diff / scale).sqrt()
                        )));
                    }
                    Ok(fine)
                };
                Ok((checked(displacement, "displacement")?, checked(velocity, "velocity")?))
            }
        }
    }
}

/// How the second time level is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StartScheme {
    /// `u¹ = u⁰ + Δt u_t`.
    #[default]
    ForwardEuler,
    /// Adds `½Δt² (M^c)⁻¹(−A u⁰)`.
    Taylor,
}

/// Projects the initial data with `M` and forms `(u⁰, u¹)` in the coefficient
/// space of `system` (reduced if `pod` is given).
pub fn project_initial(
    space: &DgSpace,
    system: &LinearSystem,
    pod: Option<&PodTransform>,
    op: &StepOperator,
    data: &InitialData,
    dt: f64,
    start: StartScheme,
) -> Result<(WaveField, WaveField)> {
    let (mut l0, mut l1) = data.loads(space)?;
    if let Some(t) = pod {
        l0 = t.reduce(&l0);
        l1 = t.reduce(&l1);
    }
    let u0 = system.solve_mass(&l0)?;
    let v0 = system.solve_mass(&l1)?;
    let mut u1: Vec<C> = u0.iter().zip(&v0).map(|(a, b)| a + b * dt).collect();
    if start == StartScheme::Taylor {
        let bu = op.apply(&u0);
        for (x, b) in u1.iter_mut().zip(&bu) {
            *x -= b * (0.5 * dt * dt);
        }
    }
    Ok((WaveField { coeffs: u0, time: 0.0 }, WaveField { coeffs: u1, time: dt }))
}

/// Largest-eigenvalue estimate from power iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const POWER_TOL: f64 = 1e-4;
pub const POWER_MAX_ITER: usize = 500;

fn power_iteration(
    n: usize,
    apply: impl Fn(&[C]) -> Vec<C>,
    rayleigh: impl Fn(&[C], &[C]) -> f64,
    normalize: impl Fn(&[C]) -> f64,
) -> PowerEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<C> = (0..n)
        .map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let mut last = f64::NAN;
    for it in 1..=POWER_MAX_ITER {
        let s = normalize(&v);
        if !(s > 0.0) {
            return PowerEstimate { value: 0.0, iterations: it, converged: true };
        }
        v.iter_mut().for_each(|x| *x /= s);
        let w = apply(&v);
        let value = rayleigh(&v, &w);
        if (value - last).abs() <= POWER_TOL * value.abs() {
            return PowerEstimate { value, iterations: it, converged: true };
        }
        last = value;
        v = w;
    }
    PowerEstimate { value: last, iterations: POWER_MAX_ITER, converged: false }
}

/// Both stability criteria for a time step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityReport {
    pub dt: f64,
    /// `λ_max((M^c)⁻¹A)`.
    pub lambda_max: PowerEstimate,
    /// Upper estimate of `λ_min((M^c)⁻¹A)`; a negative value proves the stiffness is indefinite.
    pub lambda_min: PowerEstimate,
    /// `‖A‖₂`.
    pub stiffness_norm: PowerEstimate,
}

/// Relative rounding floor below which a negative `λ_min` counts as indefinite.
pub const INDEFINITE_TOL: f64 = 1e-8;

impl StabilityReport {
    /// Sharp leapfrog bound `Δt² λ_max ≤ 4`.
    pub fn sharp_ok(&self) -> bool {
        self.dt * self.dt * self.lambda_max.value <= 4.0
    }

    /// `Δt ‖A‖₂ < 1`.
    pub fn stated_ok(&self) -> bool {
        self.dt * self.stiffness_norm.value < 1.0
    }

    /// The stiffness is positive semidefinite on the discrete space. Leapfrog grows like
    /// `exp(t √(−λ_min))` otherwise, whatever the step.
    pub fn definite(&self) -> bool {
        self.lambda_min.value >= -INDEFINITE_TOL * self.lambda_max.value.abs()
    }

    /// `e^{T √(−λ_min)}` for an indefinite stiffness, `1` otherwise.
    pub fn growth_over(&self, t_final: f64) -> f64 {
        (t_final * (-self.lambda_min.value).max(0.0).sqrt()).exp()
    }

    pub fn reliable(&self) -> bool {
        self.lambda_max.converged && self.lambda_min.converged && self.stiffness_norm.converged
    }
}

pub fn check_stability(system: &LinearSystem, op: &StepOperator, dt: f64) -> StabilityReport {
    let n = system.layout.n_dofs();
    let mc_norm = |v: &[C]| inner(&system.weighted_mass.matvec(&system.layout, v), v).re.sqrt();
    // Rayleigh quotient in the M^c inner product: ⟨M^c B v, v⟩ / ⟨M^c v, v⟩ = ⟨A v, v⟩ (v normalized)
    let lambda_max = power_iteration(
        n,
        |v| op.apply(v),
        |v, _| inner(&system.stiffness.matvec(&system.layout, v), v).re,
        mc_norm,
    );
    // shifted iteration on σ − B; its Rayleigh quotient never exceeds σ − λ_min
    let shift = lambda_max.value.abs();
    let shifted = power_iteration(
        n,
        |v| op.apply(v).iter().zip(v).map(|(b, x)| x * shift - b).collect(),
        |v, _| shift - inner(&system.stiffness.matvec(&system.layout, v), v).re,
        mc_norm,
    );
    let lambda_min = PowerEstimate { value: shift - shifted.value, ..shifted };
    let stiffness_norm = power_iteration(
        n,
        |v| system.stiffness.matvec(&system.layout, v),
        |v, w| inner(w, v).re.abs(),
        |v| norm_sqr(v).sqrt(),
    );
    StabilityReport { dt, lambda_max, lambda_min, stiffness_norm }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarchConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Number of evenly spaced snapshot times in `(0, T]`.
    pub snapshots: usize,
    pub start: StartScheme,
}

impl MarchConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        MarchConfig { dt, t_final, snapshots: 10, start: StartScheme::default() }
    }

    /// Number of steps; `T/Δt` must be an integer up to 1e-12 relative.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_final >= 0.0) {
            return Err(Error::config("time step must be positive and final time nonnegative"));
        }
        let r = self.t_final / self.dt;
        let n = r.round();
        if (r - n).abs() > 1e-12 * r.max(1.0) {
            return Err(Error::config(format!("final time {} is not a multiple of the time step {}", self.t_final, self.dt)));
        }
        Ok(n as usize)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarchOutput {
    pub last: WaveField,
    pub previous: WaveField,
    pub snapshots: Vec<WaveField>,
    pub steps: usize,
}

/// Marches `(u⁰, u¹)` to the final time.
pub fn run(config: &MarchConfig, op: &StepOperator, u0: WaveField, u1: WaveField) -> Result<MarchOutput> {
    let steps = config.steps()?;
    let dt = config.dt;
    let snapshot_steps: Vec<usize> = (1..=config.snapshots)
        .map(|k| ((k as f64 * steps as f64) / config.snapshots as f64).round() as usize)
        .collect();
    let mut snapshots = Vec::new();
    if steps == 0 {
        if snapshot_steps.contains(&0) {
            snapshots.push(u0.clone());
        }
        return Ok(MarchOutput { previous: u0.clone(), last: u0, snapshots, steps });
    }
    let mut prev = u0.coeffs;
    let mut curr = u1.coeffs;
    let floor = norm_sqr(&prev).max(norm_sqr(&curr)).max(f64::MIN_POSITIVE);
    let take = |n: usize, c: &[C], snaps: &mut Vec<WaveField>| {
        if snapshot_steps.contains(&n) {
            snaps.push(WaveField { coeffs: c.to_vec(), time: n as f64 * dt });
        }
    };
    take(1, &curr, &mut snapshots);
    for n in 1..steps {
        op.leapfrog(&mut prev, &curr, dt);
        std::mem::swap(&mut prev, &mut curr);
        let s = norm_sqr(&curr);
        if !s.is_finite() || s > BLOWUP_FACTOR * floor {
            return Err(Error::Instability { step: n + 1 });
        }
        take(n + 1, &curr, &mut snapshots);
    }
    Ok(MarchOutput {
        last: WaveField { coeffs: curr, time: steps as f64 * dt },
        previous: WaveField { coeffs: prev, time: (steps - 1) as f64 * dt },
        snapshots,
        steps,
    })
}

//! Wavefront tracking: ray propagation, adaptive refinement of discrete
//! fronts, ray cells and direction capture at observation points.
//!
//! Ray positions are stored unwrapped so neighbor differences stay small;
//! the medium and the mesh see wrapped coordinates.

use std::io::Write;

use crate::error::{Error, Result};
use crate::medium::{Medium, Mesh, Point};
use crate::par;

/// Largest number of rays inserted between one neighbor pair in one step.
pub const MAX_INSERT_PER_PAIR: usize = 10_000;
/// Barycentric tolerance for inclusive containment.
pub const CONTAINMENT_SLACK: f64 = 1e-12;
/// Triangles with smaller area are skipped.
pub const DEGENERATE_AREA: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub x: Point,
    pub p: Point,
}

impl Ray {
    pub fn new(x: Point, p: Point) -> Self {
        Ray { x, p }
    }

    /// `c(x)|p|`.
    pub fn hamiltonian(&self, medium: &Medium) -> f64 {
        medium.speed(self.x) * norm(self.p)
    }

    fn lerp(&self, other: &Ray, w: f64) -> Ray {
        let v = 1.0 - w;
        Ray {
            x: [v * self.x[0] + w * other.x[0], v * self.x[1] + w * other.x[1]],
            p: [v * self.p[0] + w * other.p[0], v * self.p[1] + w * other.p[1]],
        }
    }
}

pub(crate) fn norm(v: Point) -> f64 {
    v[0].hypot(v[1])
}

/// Right-hand side used for the bicharacteristics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RayDynamics {
    /// `ẋ = c p/|p|, ṗ = −|p|∇c`; valid for any `c|p|`, so seeds may carry
    /// the phase gradient itself.
    #[default]
    Eikonal,
    /// `ẋ = c² p, ṗ = −|p|∇c`; agrees with [`RayDynamics::Eikonal`] only on
    /// `c|p| = 1`, so seeds must be normalized.
    Normalized,
}

impl RayDynamics {
    fn rhs(self, medium: &Medium, r: &Ray) -> [f64; 4] {
        let c = medium.speed(r.x);
        let g = medium.grad_speed(r.x);
        let pn = norm(r.p);
        let (vx, vy) = match self {
            RayDynamics::Eikonal => (c * r.p[0] / pn, c * r.p[1] / pn),
            RayDynamics::Normalized => (c * c * r.p[0], c * c * r.p[1]),
        };
        [vx, vy, -pn * g[0], -pn * g[1]]
    }

    /// Seed direction for a front whose phase gradient is `grad`.
    pub fn seed_direction(self, medium: &Medium, x: Point, grad: Point) -> Point {
        match self {
            RayDynamics::Eikonal => grad,
            RayDynamics::Normalized => {
                let s = 1.0 / (medium.speed(x) * norm(grad));
                [grad[0] * s, grad[1] * s]
            }
        }
    }
}

/// One classical RK4 step of a single ray.
pub fn rk4_step(medium: &Medium, ray: &Ray, dt: f64, dynamics: RayDynamics) -> Ray {
    let shift = |r: &Ray, k: &[f64; 4], s: f64| Ray {
        x: [r.x[0] + s * k[0], r.x[1] + s * k[1]],
        p: [r.p[0] + s * k[2], r.p[1] + s * k[3]],
    };
    let k1 = dynamics.rhs(medium, ray);
    let k2 = dynamics.rhs(medium, &shift(ray, &k1, 0.5 * dt));
    let k3 = dynamics.rhs(medium, &shift(ray, &k2, 0.5 * dt));
    let k4 = dynamics.rhs(medium, &shift(ray, &k3, dt));
    let mut k = [0.0; 4];
    for i in 0..4 {
        k[i] = k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i];
    }
    shift(ray, &k, dt / 6.0)
}

/// Advances every ray of a front by one step.
pub fn propagate(
    rays: &[Ray],
    medium: &Medium,
    dt: f64,
    dynamics: RayDynamics,
    step: usize,
) -> Result<Vec<Ray>> {
    let mut out = Vec::with_capacity(rays.len());
    for (index, r) in rays.iter().enumerate() {
        let next = rk4_step(medium, r, dt, dynamics);
        let finite = next.x.iter().chain(&next.p).all(|v| v.is_finite());
        if !finite || norm(next.p) == 0.0 {
            return Err(Error::Propagation { index, step });
        }
        out.push(next);
    }
    Ok(out)
}

/// `tol(x, p) = α₁|x| + α₂|p|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub alpha_x: f64,
    pub alpha_p: f64,
}

impl Tolerance {
    pub fn new(alpha_x: f64, alpha_p: f64) -> Result<Self> {
        if !(alpha_x >= 0.0 && alpha_p >= 0.0) || alpha_x + alpha_p == 0.0 {
            return Err(Error::config("tolerance weights must be nonnegative and not both zero"));
        }
        Ok(Tolerance { alpha_x, alpha_p })
    }

    pub fn eval(&self, a: &Ray, b: &Ray) -> f64 {
        let dx = [a.x[0] - b.x[0], a.x[1] - b.x[1]];
        let dp = [a.p[0] - b.p[0], a.p[1] - b.p[1]];
        self.alpha_x * norm(dx) + self.alpha_p * norm(dp)
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            alpha_x: 10.0,
            alpha_p: 100.0,
        }
    }
}

/// Ordered rays with the index of the pre-refinement ray at or before each.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Wavefront {
    pub rays: Vec<Ray>,
    pub parent: Vec<usize>,
}

impl Wavefront {
    pub fn unrefined(rays: Vec<Ray>) -> Self {
        let parent = (0..rays.len()).collect();
        Wavefront { rays, parent }
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    /// Writes rows `t j x1 x2 p1 p2 I_j`.
    pub fn dump(&self, t: f64, out: &mut impl Write) -> std::io::Result<()> {
        for (j, (r, i)) in self.rays.iter().zip(&self.parent).enumerate() {
            writeln!(
                out,
                "{t} {j} {} {} {} {} {i}",
                r.x[0], r.x[1], r.p[0], r.p[1]
            )?;
        }
        Ok(())
    }
}

/// Inserts `floor(tol(r_k − r_{k+1}))` equidistant interpolants between each
/// neighbor pair.
pub fn reconstruct(stepped: Vec<Ray>, tol: &Tolerance) -> Wavefront {
    if stepped.len() < 2 {
        return Wavefront::unrefined(stepped);
    }
    let mut rays = Vec::with_capacity(stepped.len());
    let mut parent = Vec::with_capacity(stepped.len());
    for k in 0..stepped.len() - 1 {
        let (a, b) = (&stepped[k], &stepped[k + 1]);
        let t = tol.eval(a, b);
        let n = if t.is_finite() {
            (t.floor() as usize).min(MAX_INSERT_PER_PAIR)
        } else {
            MAX_INSERT_PER_PAIR
        };
        rays.push(*a);
        parent.push(k);
        for l in 1..=n {
            rays.push(a.lerp(b, l as f64 / (n + 1) as f64));
            parent.push(k);
        }
    }
    rays.push(*stepped.last().unwrap());
    parent.push(stepped.len() - 1);
    Wavefront { rays, parent }
}

/// Triangle of three rays from two consecutive fronts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayCell {
    pub vertices: [Ray; 3],
}

impl RayCell {
    /// Barycentric coordinates of `x`, or `None` for a degenerate triangle.
    pub fn barycentric(&self, x: Point) -> Option<[f64; 3]> {
        let [a, b, c] = [self.vertices[0].x, self.vertices[1].x, self.vertices[2].x];
        let e1 = [b[0] - a[0], b[1] - a[1]];
        let e2 = [c[0] - a[0], c[1] - a[1]];
        let det = e1[0] * e2[1] - e1[1] * e2[0];
        if 0.5 * det.abs() < DEGENERATE_AREA {
            return None;
        }
        let d = [x[0] - a[0], x[1] - a[1]];
        let l2 = (d[0] * e2[1] - d[1] * e2[0]) / det;
        let l3 = (e1[0] * d[1] - e1[1] * d[0]) / det;
        Some([1.0 - l2 - l3, l2, l3])
    }

    /// Linear interpolation of the directions at `x` if `x` lies in the cell.
    pub fn interpolate(&self, x: Point) -> Option<Point> {
        let l = self.barycentric(x)?;
        if l.iter().any(|&v| v < -CONTAINMENT_SLACK) {
            return None;
        }
        let v = &self.vertices;
        Some([
            l[0] * v[0].p[0] + l[1] * v[1].p[0] + l[2] * v[2].p[0],
            l[0] * v[0].p[1] + l[1] * v[1].p[1] + l[2] * v[2].p[1],
        ])
    }

    pub fn is_degenerate(&self) -> bool {
        self.barycentric(self.vertices[0].x).is_none()
    }
}

/// Ray cells swept between `prev` (pre-refinement front at step n) and the
/// refined front at step n+1.
///
/// For each old ray `i` the fan `(r_iⁿ, r_jⁿ⁺¹, r_{j+1}ⁿ⁺¹)` covers the
/// inserted span `i* ≤ j < (i+1)*`, followed by the closing triangle
/// `(r_iⁿ, r_{i+1}ⁿ, r_{(i+1)*}ⁿ⁺¹)`.
pub fn form_ray_cells(prev: &[Ray], next: &Wavefront) -> Vec<RayCell> {
    let mut cells = Vec::new();
    for_each_ray_cell(prev, next, |c| cells.push(c));
    cells
}

fn for_each_ray_cell(prev: &[Ray], next: &Wavefront, mut f: impl FnMut(RayCell)) {
    if prev.len() < 2 {
        return;
    }
    // star[i] = index of the first ray of the new front descending from i
    let mut star = vec![usize::MAX; prev.len()];
    for (j, &i) in next.parent.iter().enumerate().rev() {
        star[i] = j;
    }
    for i in 0..prev.len() - 1 {
        let (s0, s1) = (star[i], star[i + 1]);
        for j in s0..s1 {
            f(RayCell {
                vertices: [prev[i], next.rays[j], next.rays[j + 1]],
            });
        }
        f(RayCell {
            vertices: [prev[i], prev[i + 1], next.rays[s1]],
        });
    }
}

/// Captured directions per mesh cell, in capture order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Capture {
    pub sets: Vec<Vec<Point>>,
    pub degenerate: usize,
}

impl Capture {
    pub fn new(mesh: &Mesh) -> Self {
        Capture {
            sets: vec![Vec::new(); mesh.n_cells()],
            degenerate: 0,
        }
    }

    pub fn total(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }
}

/// Tests every observation point inside the bounding box of `cell`
/// (including periodic images) and reports `(cell id, direction)` hits.
fn visit_observations(cell: &RayCell, mesh: &Mesh, mut hit: impl FnMut(usize, Point)) -> bool {
    if cell.is_degenerate() {
        return false;
    }
    let n = mesh.cells_per_side() as f64;
    let h = mesh.h();
    let v = &cell.vertices;
    let lo = |k: usize| v.iter().map(|r| r.x[k]).fold(f64::INFINITY, f64::min);
    let hi = |k: usize| v.iter().map(|r| r.x[k]).fold(f64::NEG_INFINITY, f64::max);
    let i0 = (lo(0) * n - 0.5).ceil() as i64;
    let i1 = (hi(0) * n - 0.5).floor() as i64;
    let j0 = (lo(1) * n - 0.5).ceil() as i64;
    let j1 = (hi(1) * n - 0.5).floor() as i64;
    for j in j0..=j1 {
        for i in i0..=i1 {
            let x = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
            if let Some(p) = cell.interpolate(x) {
                hit(mesh.wrapped_id(i, j), p);
            }
        }
    }
    true
}

/// Appends the interpolated direction for every observation point covered by
/// one of `cells`.
pub fn determine_rays(cells: &[RayCell], mesh: &Mesh, capture: &mut Capture) {
    for c in cells {
        let sets = &mut capture.sets;
        if !visit_observations(c, mesh, |id, p| sets[id].push(p)) {
            capture.degenerate += 1;
        }
    }
}

/// Level line `x_axis = β` sampled at `samples` equispaced points across the
/// unit period, carrying the phase gradient along `axis`.
pub fn level_line(
    medium: &Medium,
    axis: usize,
    beta: f64,
    samples: usize,
    dynamics: RayDynamics,
) -> Vec<Ray> {
    assert!(axis < 2 && samples >= 2);
    let mut grad = [0.0; 2];
    grad[axis] = 1.0;
    (0..samples)
        .map(|k| {
            let s = k as f64 / (samples - 1) as f64;
            let mut x = [s, s];
            x[axis] = beta;
            Ray::new(x, dynamics.seed_direction(medium, x, grad))
        })
        .collect()
}

/// Closes a front by repeating its first ray at the end.
pub fn close_front(mut rays: Vec<Ray>) -> Vec<Ray> {
    if let Some(&first) = rays.first() {
        rays.push(first);
    }
    rays
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerSettings {
    pub t_final: f64,
    pub dt: f64,
    pub tol: Tolerance,
    pub dynamics: RayDynamics,
    /// Sub-fronts per initial front; the captured sets do not depend on it.
    pub splits: usize,
}

impl TrackerSettings {
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.t_final >= 0.0) {
            return Err(Error::config("ray time step must be positive"));
        }
        Ok((self.t_final / self.dt).round() as usize)
    }
}

/// Statistics and captured directions of the phase-construction stage.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RayConstruction {
    pub capture: Capture,
    pub max_front_size: usize,
    pub steps: usize,
}

struct JobOutput {
    hits: Vec<(u32, u32, Point)>,
    degenerate: usize,
    max_size: usize,
}

fn track_sub_front(
    medium: &Medium,
    mesh: &Mesh,
    rays: Vec<Ray>,
    settings: &TrackerSettings,
    steps: usize,
) -> Result<JobOutput> {
    let mut out = JobOutput {
        hits: Vec::new(),
        degenerate: 0,
        max_size: rays.len(),
    };
    let mut current = rays;
    for step in 0..steps {
        let stepped = propagate(&current, medium, settings.dt, settings.dynamics, step + 1)?;
        let next = reconstruct(stepped, &settings.tol);
        let hits = &mut out.hits;
        let mut degenerate = 0;
        for_each_ray_cell(&current, &next, |cell| {
            if !visit_observations(&cell, mesh, |id, p| hits.push(((step + 1) as u32, id as u32, p))) {
                degenerate += 1;
            }
        });
        out.degenerate += degenerate;
        out.max_size = out.max_size.max(next.len());
        current = next.rays;
    }
    Ok(out)
}

/// Splits a front into `k` consecutive pieces sharing their endpoints.
pub fn split_front(rays: &[Ray], k: usize) -> Vec<Vec<Ray>> {
    let m = rays.len();
    if k <= 1 || m < 3 {
        return vec![rays.to_vec()];
    }
    let pieces = k.min(m - 1);
    (0..pieces)
        .map(|s| {
            let a = s * (m - 1) / pieces;
            let b = (s + 1) * (m - 1) / pieces;
            rays[a..=b].to_vec()
        })
        .collect()
}

/// Tracks every initial front to `t_final` and collects the raw direction
/// multisets per mesh cell.
///
/// Fronts and sub-fronts run concurrently; captures are merged in the order
/// a single sequential sweep would produce.
pub fn construct_rays(
    medium: &Medium,
    mesh: &Mesh,
    fronts: &[Vec<Ray>],
    settings: &TrackerSettings,
) -> Result<RayConstruction> {
    let steps = settings.steps()?;
    if settings.dynamics == RayDynamics::Normalized {
        for r in fronts.iter().flatten() {
            if (r.hamiltonian(medium) - 1.0).abs() > 1e-6 {
                return Err(Error::config("normalized ray dynamics need seeds with c|p| = 1"));
            }
        }
    }
    for r in fronts.iter().flatten() {
        if !(norm(r.p) > 0.0) {
            return Err(Error::config("seed ray with zero direction"));
        }
    }
    let jobs: Vec<(usize, Vec<Ray>)> = fronts
        .iter()
        .enumerate()
        .flat_map(|(f, rays)| {
            split_front(rays, settings.splits)
                .into_iter()
                .map(move |piece| (f, piece))
        })
        .collect();
    let outputs = par::map(&jobs, |(_, rays)| {
        track_sub_front(medium, mesh, rays.clone(), settings, steps)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut capture = Capture::new(mesh);
    let mut max_front_size = 0;
    let mut start = 0;
    while start < jobs.len() {
        let front = jobs[start].0;
        let end = start + jobs[start..].iter().take_while(|(f, _)| *f == front).count();
        let mut merged = Vec::new();
        let mut size = 0;
        for out in &outputs[start..end] {
            merged.extend_from_slice(&out.hits);
            capture.degenerate += out.degenerate;
            size += out.max_size;
        }
        // step-major, then sub-front order, then sequence within the sub-front
        merged.sort_by_key(|h| h.0);
        for (_, id, p) in merged {
            capture.sets[id as usize].push(p);
        }
        max_front_size = max_front_size.max(size - (end - start - 1));
        start = end;
    }
    Ok(RayConstruction {
        capture,
        max_front_size,
        steps,
    })
}

/// Writes the evolution of one front, one block of rows per recorded step.
pub fn dump_front_history(
    medium: &Medium,
    rays: Vec<Ray>,
    settings: &TrackerSettings,
    every: usize,
    out: &mut impl Write,
) -> Result<()> {
    let steps = settings.steps()?;
    let mut front = Wavefront::unrefined(rays);
    front.dump(0.0, out)?;
    for step in 1..=steps {
        let stepped = propagate(&front.rays, medium, settings.dt, settings.dynamics, step)?;
        front = reconstruct(stepped, &settings.tol);
        if step % every.max(1) == 0 || step == steps {
            front.dump(step as f64 * settings.dt, out)?;
        }
    }
    Ok(())
}

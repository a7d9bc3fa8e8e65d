//! Dense-quadrature oracle for the assembly blocks in physical coordinates.
#![allow(dead_code)]

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use raydg::assembly::{self, kernels, AssemblyOptions, KernelParams};
use raydg::{Medium, Mesh, Point};

use crate::oracle;

/// Physical-coordinate basis function and gradient, written out directly.
pub struct Basis {
    pub center: Point,
    pub h: f64,
    pub omega: f64,
    pub p: Point,
    pub vertex: usize,
}

impl Basis {
    fn corner(&self) -> (f64, f64) {
        // vertex positions (−,−), (+,−), (+,+), (−,+)
        let (sx, sy) = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)][self.vertex];
        (self.center[0] + sx * self.h / 2.0, self.center[1] + sy * self.h / 2.0)
    }

    pub fn value_grad(&self, x: f64, y: f64) -> (C, [C; 2]) {
        let (vx, vy) = self.corner();
        // bilinear Lagrange function equal to one at (vx, vy)
        let sx = if vx > self.center[0] { 1.0 } else { -1.0 };
        let sy = if vy > self.center[1] { 1.0 } else { -1.0 };
        let fx = 1.0 - (vx - x) * sx / self.h;
        let fy = 1.0 - (vy - y) * sy / self.h;
        let dfx = sx / self.h;
        let dfy = sy / self.h;
        let phase = self.omega * (self.p[0] * (x - self.center[0]) + self.p[1] * (y - self.center[1]));
        let e = C::from_polar(1.0, phase);
        let i = C::new(0.0, 1.0);
        let v = e * fx * fy;
        let gx = e * (dfx * fy) + v * i * self.omega * self.p[0];
        let gy = e * (fx * dfy) + v * i * self.omega * self.p[1];
        (v, [gx, gy])
    }
}

pub fn random_dir(rng: &mut ChaCha8Rng) -> Point {
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    let r = rng.random_range(0.5..1.3);
    [r * a.cos(), r * a.sin()]
}

fn rel_err(a: C, b: C, scale: f64) -> f64 {
    (a - b).norm() / scale
}

pub fn max_norm(b: &kernels::Block4) -> f64 {
    b.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Volume plus the four same-cell face terms, vector jump/average form.
pub fn oracle_self_stiffness(ti: &Basis, tj: &Basis, gamma: f64) -> C {
    let (cx, cy, h) = (ti.center[0], ti.center[1], ti.h);
    let vol = oracle::dense_2d(
        |x, y| {
            let (_, gi) = ti.value_grad(x, y);
            let (_, gj) = tj.value_grad(x, y);
            gj[0] * gi[0].conj() + gj[1] * gi[1].conj()
        },
        (cx - h / 2.0, cx + h / 2.0),
        (cy - h / 2.0, cy + h / 2.0),
        20,
        6,
    );
    let mut face = C::new(0.0, 0.0);
    // outward normals of the four faces
    for (n, fixed_is_x, at) in [
        ([1.0, 0.0], true, cx + h / 2.0),
        ([-1.0, 0.0], true, cx - h / 2.0),
        ([0.0, 1.0], false, cy + h / 2.0),
        ([0.0, -1.0], false, cy - h / 2.0),
    ] {
        let (lo, hi) = if fixed_is_x {
            (cy - h / 2.0, cy + h / 2.0)
        } else {
            (cx - h / 2.0, cx + h / 2.0)
        };
        face += oracle::dense_1d(
            |s| {
                let (x, y) = if fixed_is_x { (at, s) } else { (s, at) };
                let (vi, gi) = ti.value_grad(x, y);
                let (vj, gj) = tj.value_grad(x, y);
                let avg_j = [gj[0] * 0.5, gj[1] * 0.5];
                let avg_i = [gi[0] * 0.5, gi[1] * 0.5];
                let jump_j = [vj * n[0], vj * n[1]];
                let jump_i = [vi * n[0], vi * n[1]];
                let dot = |a: [C; 2], b: [C; 2]| a[0] * b[0].conj() + a[1] * b[1].conj();
                -dot(avg_j, jump_i) - dot(jump_j, avg_i) + dot(jump_j, jump_i) * (gamma / h)
            },
            lo,
            hi,
            20,
            6,
        );
    }
    vol + face
}

/// Worst relative entry errors against the oracle, each scaled by the block's largest entry.
#[derive(Clone, Copy, Debug, Default)]
pub struct BlockErrors {
    pub mass: f64,
    pub weighted_mass: f64,
    pub stiffness: f64,
    pub face: f64,
}

impl BlockErrors {
    pub fn worst(&self) -> f64 {
        self.mass.max(self.weighted_mass).max(self.stiffness).max(self.face)
    }
}

/// Random cells, frequencies and direction pairs on the lens medium (every
/// fourth pair repeats a direction).
pub fn block_errors(seed: u64, trials: usize) -> BlockErrors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let medium = Medium::GaussianLens;
    let mesh = Mesh::new(10).unwrap();
    let h = mesh.h();
    let gamma = 10.0;
    let opts = AssemblyOptions::default();
    let weights = assembly::CellWeights::from_medium(&medium, &mesh, opts.weight_degree, opts.weight_tolerance);
    let mut errs = BlockErrors::default();
    for trial in 0..trials {
        let omega = rng.random_range(1.0..100.0 * std::f64::consts::PI);
        let params = KernelParams { omega, h, gamma, weight_degree: opts.weight_degree };
        let cell = rng.random_range(0..mesh.n_cells());
        let center = mesh.centroid(cell);
        let (pi, pj) = (random_dir(&mut rng), random_dir(&mut rng));
        let pj = if trial % 4 == 0 { pi } else { pj };
        let sp = kernels::self_pair(pi, pj, &params);
        let mc = sp.weighted_mass(&weights.coeffs[cell], h);
        let (scale_m, scale_w, scale_a) = (max_norm(&sp.mass), max_norm(&mc), max_norm(&sp.stiffness));
        let rect = ((center[0] - h / 2.0, center[0] + h / 2.0), (center[1] - h / 2.0, center[1] + h / 2.0));
        for vi in 0..4 {
            for vj in 0..4 {
                let ti = Basis { center, h, omega, p: pi, vertex: vi };
                let tj = Basis { center, h, omega, p: pj, vertex: vj };
                let product = |x: f64, y: f64| ti.value_grad(x, y).0.conj() * tj.value_grad(x, y).0;
                let m = oracle::dense_2d(product, rect.0, rect.1, 20, 6);
                let w = oracle::dense_2d(|x, y| product(x, y) * medium.slowness_squared([x, y]), rect.0, rect.1, 20, 6);
                let a = oracle_self_stiffness(&ti, &tj, gamma);
                errs.mass = errs.mass.max(rel_err(sp.mass[vi][vj], m, scale_m));
                errs.weighted_mass = errs.weighted_mass.max(rel_err(mc[vi][vj], w, scale_w));
                errs.stiffness = errs.stiffness.max(rel_err(sp.stiffness[vi][vj], a, scale_a));
            }
        }
        // couplings across the right and the top face
        for axis in 0..2 {
            // the geometric neighbor, not its periodic representative
            let mut nb_center = center;
            nb_center[axis] += h;
            let f = kernels::face_pair(pi, pj, axis, &params);
            let scale = max_norm(&f);
            let mut n = [0.0; 2];
            n[axis] = 1.0;
            for vi in 0..4 {
                for vj in 0..4 {
                    let ti = Basis { center, h, omega, p: pi, vertex: vi };
                    let tj = Basis { center: nb_center, h, omega, p: pj, vertex: vj };
                    let at = center[axis] + h / 2.0;
                    let other = 1 - axis;
                    let want = oracle::dense_1d(
                        |s| {
                            let mut x = [0.0; 2];
                            x[axis] = at;
                            x[other] = s;
                            let (vi_, gi) = ti.value_grad(x[0], x[1]);
                            let (vj_, gj) = tj.value_grad(x[0], x[1]);
                            // test on the lower cell (outward n), trial on the upper (outward −n)
                            let jump_i = [vi_ * n[0], vi_ * n[1]];
                            let jump_j = [-vj_ * n[0], -vj_ * n[1]];
                            let avg_i = [gi[0] * 0.5, gi[1] * 0.5];
                            let avg_j = [gj[0] * 0.5, gj[1] * 0.5];
                            let dot = |a: [C; 2], b: [C; 2]| a[0] * b[0].conj() + a[1] * b[1].conj();
                            -dot(avg_j, jump_i) - dot(jump_j, avg_i) + dot(jump_j, jump_i) * (gamma / h)
                        },
                        center[other] - h / 2.0,
                        center[other] + h / 2.0,
                        20,
                        6,
                    );
                    errs.face = errs.face.max(rel_err(f[vi][vj], want, scale));
                }
            }
        }
    }
    errs
}

//! Entry kernels for one pair of plane-wave directions.
//!
//! A basis function on cell `K` is `f_a(s) f_b(t) e^{iθ·(s,t)}` with local
//! coordinates `s, t ∈ [-1, 1]`, bilinear factors `f_0 = (1−s)/2`,
//! `f_1 = (1+s)/2` and `θ = ω p h/2`. Vertices are ordered
//! `(−,−), (+,−), (+,+), (−,+)`. Blocks are indexed `[test][trial]`, the test
//! function entering conjugated.

use num_complex::Complex64;

use crate::medium::Point;
use crate::quadrature::OscMoments;

pub type C = Complex64;
pub type Block2 = [[C; 2]; 2];
pub type Block4 = [[C; 4]; 4];

pub const ZERO: C = C { re: 0.0, im: 0.0 };
const I: C = C { re: 0.0, im: 1.0 };

/// 1D factor of each vertex along `s` and along `t`.
pub const VERTEX_FACTORS: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];
const HAT_SLOPE: [f64; 2] = [-0.5, 0.5];

fn hat(a: usize, s: f64) -> f64 {
    if a == 0 {
        0.5 * (1.0 - s)
    } else {
        0.5 * (1.0 + s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    pub omega: f64,
    pub h: f64,
    pub gamma: f64,
    /// Degree of the per-cell polynomial model of `1/c²`.
    pub weight_degree: usize,
}

impl KernelParams {
    fn theta(&self, p: Point) -> [f64; 2] {
        let k = 0.5 * self.omega * self.h;
        [k * p[0], k * p[1]]
    }
}

/// One-dimensional integrals for a frequency difference `Δθ = θ_trial − θ_test`.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisTables {
    /// `∫ s^m f_a f_b e^{iΔθs}` for `m ≤ degree`, indexed `[m][test a][trial b]`.
    pub gram: Vec<Block2>,
    /// `∫ f_a e^{iΔθs}`.
    pub single: [C; 2],
    /// `∫ e^{iΔθs}`.
    pub plain: C,
}

impl AxisTables {
    pub fn new(delta_theta: f64, degree: usize) -> Self {
        let mu = OscMoments::new(delta_theta, degree + 2);
        let gram = (0..=degree)
            .map(|m| {
                let (a, b, c) = (mu.moment(m), mu.moment(m + 1), mu.moment(m + 2));
                let g00 = (a - b * 2.0 + c) * 0.25;
                let g01 = (a - c) * 0.25;
                let g11 = (a + b * 2.0 + c) * 0.25;
                [[g00, g01], [g01, g11]]
            })
            .collect();
        let (m0, m1) = (mu.moment(0), mu.moment(1));
        AxisTables {
            gram,
            single: [(m0 - m1) * 0.5, (m0 + m1) * 0.5],
            plain: m0,
        }
    }

    /// `∫ ∂^{dt}f_test · ∂^{db}f_trial · e^{iΔθs}` for derivative orders 0/1.
    fn derivative(&self, a: usize, b: usize, d_test: bool, d_trial: bool) -> C {
        match (d_test, d_trial) {
            (false, false) => self.gram[0][a][b],
            (false, true) => self.single[a] * HAT_SLOPE[b],
            (true, false) => self.single[b] * HAT_SLOPE[a],
            (true, true) => self.plain * (HAT_SLOPE[a] * HAT_SLOPE[b]),
        }
    }

    fn conj_transpose(&self) -> Self {
        AxisTables {
            gram: self.gram.iter().map(conj_t2).collect(),
            single: [self.single[0].conj(), self.single[1].conj()],
            plain: self.plain.conj(),
        }
    }
}

fn conj_t2(b: &Block2) -> Block2 {
    [[b[0][0].conj(), b[1][0].conj()], [b[0][1].conj(), b[1][1].conj()]]
}

pub fn conj_t4(b: &Block4) -> Block4 {
    let mut out = [[ZERO; 4]; 4];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = b[c][r].conj();
        }
    }
    out
}

/// Blocks coupling two directions on the same cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfPair {
    /// `∫_K ψ_trial ψ̄_test`.
    pub mass: Block4,
    /// Volume term plus the four same-cell face terms of the interior
    /// penalty form.
    pub stiffness: Block4,
    pub x: AxisTables,
    pub y: AxisTables,
}

impl SelfPair {
    pub fn conj_transpose(&self) -> Self {
        SelfPair {
            mass: conj_t4(&self.mass),
            stiffness: conj_t4(&self.stiffness),
            x: self.x.conj_transpose(),
            y: self.y.conj_transpose(),
        }
    }

    /// `∫_K ρ ψ_trial ψ̄_test` for `ρ = Σ b_mn s^m t^n` (row-major
    /// `(degree+1)²` coefficients).
    pub fn weighted_mass(&self, rho: &[f64], h: f64) -> Block4 {
        let d = self.x.gram.len() - 1;
        debug_assert_eq!(rho.len(), (d + 1) * (d + 1));
        let scale = 0.25 * h * h;
        // inner[m][b_test][b_trial] = Σ_n ρ_mn G^y_n
        let mut inner = vec![[[ZERO; 2]; 2]; d + 1];
        for (m, acc) in inner.iter_mut().enumerate() {
            for n in 0..=d {
                let w = rho[m * (d + 1) + n];
                if w == 0.0 {
                    continue;
                }
                let g = &self.y.gram[n];
                for bi in 0..2 {
                    for bj in 0..2 {
                        acc[bi][bj] += g[bi][bj] * w;
                    }
                }
            }
        }
        let mut out = [[ZERO; 4]; 4];
        for (vi, row) in out.iter_mut().enumerate() {
            let (ai, bi) = VERTEX_FACTORS[vi];
            for (vj, v) in row.iter_mut().enumerate() {
                let (aj, bj) = VERTEX_FACTORS[vj];
                let mut acc = ZERO;
                for m in 0..=d {
                    acc += self.x.gram[m][ai][aj] * inner[m][bi][bj];
                }
                *v = acc * scale;
            }
        }
        out
    }
}

fn lex_greater(a: Point, b: Point) -> bool {
    a[0] > b[0] || (a[0] == b[0] && a[1] > b[1])
}

/// Trace of a face function `f_a e^{iθ s}` and of its scaled normal
/// derivative at the face coordinate `sf = ±1`.
fn face_values(a: usize, theta: f64, sf: f64, h: f64) -> (C, C) {
    let e = C::from_polar(1.0, theta * sf);
    let v = e * hat(a, sf);
    let d = e * (C::new(HAT_SLOPE[a], theta * hat(a, sf))) * (2.0 / h);
    (v, d)
}

/// Face integrand factor across the normal axis:
/// `−½σ_i D_j V̄_i − ½σ_j V_j D̄_i + (γ/h)σ_iσ_j V_j V̄_i`.
fn face_normal_factor(
    a_test: usize,
    a_trial: usize,
    theta_test: f64,
    theta_trial: f64,
    side_test: f64,
    side_trial: f64,
    params: &KernelParams,
) -> C {
    let (vi, di) = face_values(a_test, theta_test, side_test, params.h);
    let (vj, dj) = face_values(a_trial, theta_trial, side_trial, params.h);
    let (si, sj) = (side_test, side_trial);
    dj * vi.conj() * (-0.5 * si) + vj * di.conj() * (-0.5 * sj)
        + vj * vi.conj() * (params.gamma / params.h * si * sj)
}

fn self_pair_raw(p_test: Point, p_trial: Point, params: &KernelParams) -> SelfPair {
    let ti = params.theta(p_test);
    let tj = params.theta(p_trial);
    let x = AxisTables::new(tj[0] - ti[0], params.weight_degree);
    let y = AxisTables::new(tj[1] - ti[1], params.weight_degree);
    let h = params.h;
    let mut mass = [[ZERO; 4]; 4];
    let mut stiffness = [[ZERO; 4]; 4];
    for vi in 0..4 {
        let (ai, bi) = VERTEX_FACTORS[vi];
        for vj in 0..4 {
            let (aj, bj) = VERTEX_FACTORS[vj];
            mass[vi][vj] = x.gram[0][ai][aj] * y.gram[0][bi][bj] * (0.25 * h * h);

            // (f'_j + iθ_j f_j)(f'_i − iθ_i f_i) along each axis
            let grad = |t: &AxisTables, a: usize, b: usize, th_i: f64, th_j: f64| {
                t.derivative(a, b, true, true) - I * th_i * t.derivative(a, b, false, true)
                    + I * th_j * t.derivative(a, b, true, false)
                    + t.derivative(a, b, false, false) * (th_i * th_j)
            };
            let vol = grad(&x, ai, aj, ti[0], tj[0]) * y.gram[0][bi][bj]
                + grad(&y, bi, bj, ti[1], tj[1]) * x.gram[0][ai][aj];

            let mut face = ZERO;
            for side in [1.0, -1.0] {
                face += face_normal_factor(ai, aj, ti[0], tj[0], side, side, params)
                    * y.gram[0][bi][bj]
                    * (0.5 * h);
                face += face_normal_factor(bi, bj, ti[1], tj[1], side, side, params)
                    * x.gram[0][ai][aj]
                    * (0.5 * h);
            }
            stiffness[vi][vj] = vol + face;
        }
    }
    let mut pair = SelfPair { mass, stiffness, x, y };
    if p_test == p_trial {
        hermitize(&mut pair.mass);
        hermitize(&mut pair.stiffness);
    }
    pair
}

fn hermitize(b: &mut Block4) {
    for r in 0..4 {
        b[r][r].im = 0.0;
        for c in r + 1..4 {
            let v = (b[r][c] + b[c][r].conj()) * 0.5;
            b[r][c] = v;
            b[c][r] = v.conj();
        }
    }
}

/// Same-cell blocks for `(p_test, p_trial)`. The pair is always evaluated in
/// lexicographic order and conjugate-transposed if needed, so results are
/// bitwise reproducible regardless of call order.
pub fn self_pair(p_test: Point, p_trial: Point, params: &KernelParams) -> SelfPair {
    if lex_greater(p_test, p_trial) {
        self_pair_raw(p_trial, p_test, params).conj_transpose()
    } else {
        self_pair_raw(p_test, p_trial, params)
    }
}

/// Coupling across a face normal to `axis`: test functions live on the
/// lower cell `K⁻`, trial functions on the upper cell `K⁺`. The reverse
/// coupling is the conjugate transpose.
pub fn face_pair(p_lower: Point, p_upper: Point, axis: usize, params: &KernelParams) -> Block4 {
    let ti = params.theta(p_lower);
    let tj = params.theta(p_upper);
    let other = 1 - axis;
    let tangential = AxisTables::new(tj[other] - ti[other], 0);
    let mut out = [[ZERO; 4]; 4];
    for (vi, row) in out.iter_mut().enumerate() {
        let fi = VERTEX_FACTORS[vi];
        for (vj, v) in row.iter_mut().enumerate() {
            let fj = VERTEX_FACTORS[vj];
            let (ni, nj, ci, cj) = if axis == 0 {
                (fi.0, fj.0, fi.1, fj.1)
            } else {
                (fi.1, fj.1, fi.0, fj.0)
            };
            let normal = face_normal_factor(ni, nj, ti[axis], tj[axis], 1.0, -1.0, params);
            *v = normal * tangential.gram[0][ci][cj] * (0.5 * params.h);
        }
    }
    out
}

/// `∫_K e^{iω(g−p)·(x−x_K)} ψ̄ (x) dx`-type loads for all four vertices of a
/// direction `p`, for an affine phase with gradient `g`.
pub fn plane_wave_load(p_test: Point, grad: Point, params: &KernelParams) -> [C; 4] {
    let ti = params.theta(p_test);
    let tg = params.theta(grad);
    let x = AxisTables::new(tg[0] - ti[0], 0);
    let y = AxisTables::new(tg[1] - ti[1], 0);
    let mut out = [ZERO; 4];
    for (v, o) in out.iter_mut().enumerate() {
        let (a, b) = VERTEX_FACTORS[v];
        *o = x.single[a] * y.single[b] * (0.25 * params.h * params.h);
    }
    out
}

/// Value of the basis function `(p, vertex)` at local coordinates.
pub fn basis_value(p: Point, vertex: usize, s: f64, t: f64, params: &KernelParams) -> C {
    let th = params.theta(p);
    let (a, b) = VERTEX_FACTORS[vertex];
    C::from_polar(hat(a, s) * hat(b, t), th[0] * s + th[1] * t)
}

//! Oscillatory integrals of polynomial × plane-wave integrands.
//!
//! Every mass and stiffness entry reduces to products of one-dimensional
//! integrals `∫₋₁¹ q(s) e^{iθs} ds` with a polynomial `q`. These are evaluated
//! exactly through the Legendre–Bessel identity
//!
//! ```text
//! ∫₋₁¹ P_k(s) e^{iθs} ds = 2 iᵏ j_k(θ)
//! ```
//!
//! where `j_k` is the spherical Bessel function of the first kind. Monomials
//! are expanded in Legendre polynomials once (a fixed table), so the moments
//! `μ_m(θ) = ∫ s^m e^{iθs} ds` cost one Bessel sweep per frequency.

use std::sync::OnceLock;

use num_complex::Complex64;

/// Below this argument `j_k` is summed from its Maclaurin series.
pub const SERIES_SWITCH: f64 = 0.5;
/// Largest supported Legendre degree / monomial power.
pub const MAX_DEGREE: usize = 64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `P_0(x), …, P_kmax(x)`.
pub fn legendre_values(kmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(1.0);
    if kmax >= 1 {
        out.push(x);
    }
    for k in 1..kmax {
        let next = ((2 * k + 1) as f64 * x * out[k] - k as f64 * out[k - 1]) / (k + 1) as f64;
        out.push(next);
    }
    out
}

/// Spherical Bessel functions `j_0(x), …, j_kmax(x)`.
///
/// Small arguments use the Maclaurin series; otherwise Miller's backward
/// recurrence is started well above both `kmax` and the turning point `|x|` and normalized
/// against the closed forms of `j_0` or `j_1`.
pub fn spherical_bessel_j(kmax: usize, x: f64) -> Vec<f64> {
    let ax = x.abs();
    let mut out = if ax < SERIES_SWITCH {
        bessel_series(kmax, ax)
    } else {
        bessel_miller(kmax, ax)
    };
    if x < 0.0 {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

fn bessel_series(kmax: usize, x: f64) -> Vec<f64> {
    let z = -0.5 * x * x;
    let mut out = Vec::with_capacity(kmax + 1);
    // x^k / (2k+1)!!
    let mut pre = 1.0;
    for k in 0..=kmax {
        if k > 0 {
            pre *= x / (2 * k + 1) as f64;
        }
        let mut term = 1.0;
        let mut sum = 1.0;
        for m in 1..40 {
            term *= z / (m as f64 * (2 * k + 2 * m + 1) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        out.push(pre * sum);
    }
    out
}

fn bessel_miller(kmax: usize, x: f64) -> Vec<f64> {
    let top = kmax.max(1);
    // the transition zone k ≈ x has width ~x^(1/3); start far enough past it
    let start = top + 20 + x.ceil() as usize + (8.0 * x.cbrt()).ceil() as usize;
    let mut vals = vec![0.0; top + 1];
    let mut above = 0.0;
    let mut cur = 1e-30;
    for k in (1..=start).rev() {
        if k <= top {
            vals[k] = cur;
        }
        let below = (2 * k + 1) as f64 / x * cur - above;
        above = cur;
        cur = below;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            above *= 1e-250;
            for v in vals.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    vals[0] = cur;
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = (s / x - c) / x;
    let scale = if j0.abs() >= j1.abs() {
        j0 / vals[0]
    } else {
        j1 / vals[1]
    };
    vals.truncate(kmax + 1);
    vals.iter().map(|v| v * scale).collect()
}

fn i_pow(k: usize) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => I,
        2 => Complex64::new(-1.0, 0.0),
        _ => -I,
    }
}

/// `∫₋₁¹ P_k(x) e^{iωx} dx`.
pub fn legendre_osc(k: usize, omega: f64) -> Complex64 {
    legendre_osc_all(k, omega)[k]
}

/// `∫₋₁¹ P_k(x) e^{iωx} dx` for every `k ≤ kmax`.
pub fn legendre_osc_all(kmax: usize, omega: f64) -> Vec<Complex64> {
    assert!(kmax <= MAX_DEGREE, "Legendre degree {kmax} above {MAX_DEGREE}");
    spherical_bessel_j(kmax, omega)
        .into_iter()
        .enumerate()
        .map(|(k, j)| i_pow(k) * (2.0 * j))
        .collect()
}

/// Row `m` holds the Legendre coefficients of `s^m`.
fn monomial_to_legendre() -> &'static [Vec<f64>] {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rows = vec![vec![1.0]];
        for m in 0..MAX_DEGREE {
            let prev = &rows[m];
            let mut next = vec![0.0; m + 2];
            // s P_k = ((k+1) P_{k+1} + k P_{k-1}) / (2k+1)
            for (k, &c) in prev.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let d = (2 * k + 1) as f64;
                next[k + 1] += c * (k + 1) as f64 / d;
                if k > 0 {
                    next[k - 1] += c * k as f64 / d;
                }
            }
            rows.push(next);
        }
        rows
    })
}

/// Row `r` holds the monomial coefficients of `P_r`.
pub fn legendre_to_monomial() -> &'static [Vec<f64>] {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rows: Vec<Vec<f64>> = vec![vec![1.0], vec![0.0, 1.0]];
        for r in 1..MAX_DEGREE {
            let mut next = vec![0.0; r + 2];
            for (m, &c) in rows[r].iter().enumerate() {
                next[m + 1] += (2 * r + 1) as f64 * c / (r + 1) as f64;
            }
            for (m, &c) in rows[r - 1].iter().enumerate() {
                next[m] -= r as f64 * c / (r + 1) as f64;
            }
            rows.push(next);
        }
        rows
    })
}

/// Real polynomial in monomial form, `Σ c_m s^m`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.0.is_empty() || other.0.is_empty() {
            return Poly::default();
        }
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (a, &x) in self.0.iter().enumerate() {
            for (b, &y) in other.0.iter().enumerate() {
                out[a + b] += x * y;
            }
        }
        Poly(out)
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(m, &c)| m as f64 * c)
                .collect(),
        )
    }

    /// `q(s) = p(center + half·s)`.
    pub fn compose_affine(&self, center: f64, half: f64) -> Poly {
        let lin = Poly(vec![center, half]);
        let mut out = Poly(vec![0.0]);
        for &c in self.0.iter().rev() {
            out = out.mul(&lin);
            out.0[0] += c;
        }
        out
    }
}

/// Monomial moments `μ_m(θ) = ∫₋₁¹ s^m e^{iθs} ds` for `m ≤ max_degree`.
#[derive(Clone, Debug)]
pub struct OscMoments {
    theta: f64,
    moments: Vec<Complex64>,
}

impl OscMoments {
    pub fn new(theta: f64, max_degree: usize) -> Self {
        let leg = legendre_osc_all(max_degree, theta);
        let table = monomial_to_legendre();
        let moments = (0..=max_degree)
            .map(|m| {
                table[m]
                    .iter()
                    .zip(&leg)
                    .filter(|(c, _)| **c != 0.0)
                    .map(|(&c, &l)| l * c)
                    .sum()
            })
            .collect();
        OscMoments { theta, moments }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn moment(&self, m: usize) -> Complex64 {
        self.moments[m]
    }

    /// `∫₋₁¹ q(s) e^{iθs} ds`.
    pub fn integrate(&self, q: &Poly) -> Complex64 {
        assert!(
            q.0.len() <= self.moments.len(),
            "polynomial degree {} exceeds moment table",
            q.degree()
        );
        q.0.iter()
            .zip(&self.moments)
            .map(|(&c, &mu)| mu * c)
            .sum()
    }
}

/// `∫_a^b q(x) e^{iω(x − x0)} dx` for a polynomial `q` in the physical variable.
pub fn osc_moment_1d(q: &Poly, a: f64, b: f64, omega: f64, x0: f64) -> Complex64 {
    assert!(b > a, "empty interval");
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let local = q.compose_affine(mid, half);
    let moments = OscMoments::new(omega * half, local.degree());
    let phase = Complex64::from_polar(1.0, omega * (mid - x0));
    phase * moments.integrate(&local) * half
}

/// Tensor Legendre expansion of a smooth function on one square cell,
/// `f ≈ Σ a_rs P_r(s) P_s(t)` in local coordinates `s, t ∈ [-1, 1]`.
#[derive(Clone, Debug)]
pub struct LegendreExpansion {
    pub center: [f64; 2],
    pub h: f64,
    pub max_degree: usize,
    /// `a_rs` at index `r·(max_degree+1) + s`.
    pub coeffs: Vec<f64>,
    /// Estimated `∫_K |f − expansion| dx`.
    pub residual_l1: f64,
}

impl LegendreExpansion {
    pub fn coeff(&self, r: usize, s: usize) -> f64 {
        self.coeffs[r * (self.max_degree + 1) + s]
    }

    pub fn eval_local(&self, s: f64, t: f64) -> f64 {
        let d = self.max_degree;
        let ps = legendre_values(d, s);
        let pt = legendre_values(d, t);
        let mut acc = 0.0;
        for r in 0..=d {
            for q in 0..=d {
                acc += self.coeffs[r * (d + 1) + q] * ps[r] * pt[q];
            }
        }
        acc
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let half = 0.5 * self.h;
        self.eval_local((x[0] - self.center[0]) / half, (x[1] - self.center[1]) / half)
    }

    /// Monomial coefficients `b_ab` of `s^a t^b`, same layout as `coeffs`.
    pub fn to_monomial(&self) -> Vec<f64> {
        let d = self.max_degree;
        let table = legendre_to_monomial();
        let mut out = vec![0.0; (d + 1) * (d + 1)];
        for r in 0..=d {
            for q in 0..=d {
                let a_rq = self.coeffs[r * (d + 1) + q];
                if a_rq == 0.0 {
                    continue;
                }
                for (a, &lr) in table[r].iter().enumerate() {
                    if lr == 0.0 {
                        continue;
                    }
                    for (b, &lq) in table[q].iter().enumerate() {
                        out[a * (d + 1) + b] += a_rq * lr * lq;
                    }
                }
            }
        }
        out
    }

    pub fn exceeds(&self, tolerance: f64) -> bool {
        !(self.residual_l1 <= tolerance)
    }
}

/// Reusable quadrature for [`expand_legendre_2d`].
#[derive(Clone, Debug)]
pub struct ExpansionRule {
    max_degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    legendre: Vec<Vec<f64>>,
    check_nodes: Vec<f64>,
    check_weights: Vec<f64>,
    check_legendre: Vec<Vec<f64>>,
}

impl ExpansionRule {
    pub fn new(max_degree: usize) -> Self {
        let (nodes, weights) = gauss_legendre(2 * max_degree + 2);
        let legendre = nodes.iter().map(|&s| legendre_values(max_degree, s)).collect();
        let (check_nodes, check_weights) = gauss_legendre(2 * max_degree + 9);
        let check_legendre = check_nodes
            .iter()
            .map(|&s| legendre_values(max_degree, s))
            .collect();
        ExpansionRule {
            max_degree,
            nodes,
            weights,
            legendre,
            check_nodes,
            check_weights,
            check_legendre,
        }
    }

    pub fn expand(&self, f: impl Fn([f64; 2]) -> f64, center: [f64; 2], h: f64) -> LegendreExpansion {
        let d = self.max_degree;
        let half = 0.5 * h;
        let n = self.nodes.len();
        // project the deviation from the central value so constant parts
        // land exactly in a_00
        let base = f(center);
        let samples: Vec<f64> = (0..n * n)
            .map(|k| {
                let (a, b) = (k / n, k % n);
                f([center[0] + half * self.nodes[a], center[1] + half * self.nodes[b]]) - base
            })
            .collect();
        // contract over t first, then over s
        let mut partial = vec![0.0; n * (d + 1)];
        for a in 0..n {
            for q in 0..=d {
                partial[a * (d + 1) + q] = (0..n)
                    .map(|b| self.weights[b] * self.legendre[b][q] * samples[a * n + b])
                    .sum();
            }
        }
        let mut coeffs = vec![0.0; (d + 1) * (d + 1)];
        for r in 0..=d {
            for q in 0..=d {
                let acc: f64 = (0..n)
                    .map(|a| self.weights[a] * self.legendre[a][r] * partial[a * (d + 1) + q])
                    .sum();
                coeffs[r * (d + 1) + q] = acc * (2 * r + 1) as f64 * (2 * q + 1) as f64 / 4.0;
            }
        }
        coeffs[0] += base;
        let mut exp = LegendreExpansion {
            center,
            h,
            max_degree: d,
            coeffs,
            residual_l1: 0.0,
        };
        let m = self.check_nodes.len();
        let mut resid = 0.0;
        for a in 0..m {
            for b in 0..m {
                let x = [
                    center[0] + half * self.check_nodes[a],
                    center[1] + half * self.check_nodes[b],
                ];
                let mut g = 0.0;
                for r in 0..=d {
                    for q in 0..=d {
                        g += exp.coeffs[r * (d + 1) + q]
                            * self.check_legendre[a][r]
                            * self.check_legendre[b][q];
                    }
                }
                resid += self.check_weights[a] * self.check_weights[b] * (f(x) - g).abs();
            }
        }
        exp.residual_l1 = resid * half * half;
        exp
    }
}

/// Legendre expansion of `f` on the square of side `h` centered at `center`.
pub fn expand_legendre_2d(
    f: impl Fn([f64; 2]) -> f64,
    center: [f64; 2],
    h: f64,
    max_degree: usize,
) -> LegendreExpansion {
    ExpansionRule::new(max_degree).expand(f, center, h)
}

#[cfg(test)]
#[path = "../tests/support/oracle.rs"]
mod oracle;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::Medium;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let want = if deg % 2 == 0 { 2.0 / (deg + 1) as f64 } else { 0.0 };
                assert!((got - want).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn closed_form_values() {
        let v = legendre_osc(0, std::f64::consts::PI);
        assert!(v.norm() < 1e-15);
        let v = legendre_osc(0, 1e-9);
        assert!((v - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        let v = legendre_osc(1, 1.0);
        let want = 2.0 * (1f64.sin() - 1f64.cos());
        assert!(v.re.abs() < 1e-16 && (v.im - want).abs() < 1e-15);
        assert!((v.im - 0.60233).abs() < 1e-5);
    }

    #[test]
    fn matches_adaptive_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let k = rng.random_range(0..=12usize);
            let w = rng.random_range(0.0..500.0);
            let got = legendre_osc(k, w);
            let want = oracle::adaptive(
                |x| legendre_values(k, x)[k] * Complex64::from_polar(1.0, w * x),
                -1.0,
                1.0,
                1e-13,
            );
            assert!((got - want).norm() <= 1e-10, "k={k} w={w}: {got} vs {want}");
        }
    }

    #[test]
    fn continuous_across_series_switch() {
        for k in 0..=20 {
            let below = spherical_bessel_j(k, SERIES_SWITCH * (1.0 - 1e-12))[k];
            let above = spherical_bessel_j(k, SERIES_SWITCH)[k];
            assert!((below - above).abs() <= 1e-12, "k={k}");
            let below = bessel_series(k, 0.5)[k];
            let above = bessel_miller(k, 0.5)[k];
            assert!((below - above).abs() <= 1e-15 * (1.0 + below.abs()), "k={k}");
        }
    }

    #[test]
    fn parity_under_frequency_reversal() {
        for k in 0..10 {
            for w in [0.3, 2.0, 17.5, 120.0] {
                let plus = legendre_osc(k, w);
                let minus = legendre_osc(k, -w);
                assert!((minus - plus.conj()).norm() < 1e-15);
                // ∫P_k(x)e^{-iωx} = (-1)^k ∫P_k(x)e^{iωx}
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                assert!((minus - plus * sign).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn one_dimensional_moments() {
        let h = 0.1;
        let one = Poly::constant(1.0);
        let v = osc_moment_1d(&one, 0.0, h, 0.0, h / 2.0);
        assert!((v - Complex64::new(h, 0.0)).norm() < 1e-16);
        let hat = Poly(vec![1.0, -1.0 / h]);
        let v = osc_moment_1d(&hat, 0.0, h, 0.0, 0.0);
        assert!((v - Complex64::new(h / 2.0, 0.0)).norm() < 1e-16);

        let w = 10.0 * std::f64::consts::PI;
        let sq = hat.mul(&hat);
        let got = osc_moment_1d(&sq, 0.0, h, w, 0.03);
        let want = oracle::adaptive(
            |x| sq.eval(x) * Complex64::from_polar(1.0, w * (x - 0.03)),
            0.0,
            h,
            1e-15,
        );
        assert!((got - want).norm() < 1e-12);
    }

    #[test]
    fn expansions() {
        let e = expand_legendre_2d(|_| 1.0, [0.05, 0.05], 0.1, 4);
        assert!((e.coeff(0, 0) - 1.0).abs() < 1e-15);
        for (k, c) in e.coeffs.iter().enumerate().skip(1) {
            assert!(c.abs() <= 1e-15, "{k}: {c}");
        }
        let center = [0.35, 0.65];
        let h = 0.1;
        let p2 = |x: [f64; 2]| {
            let s = (x[0] - center[0]) / (h / 2.0);
            legendre_values(2, s)[2]
        };
        let e = expand_legendre_2d(p2, center, h, 6);
        for r in 0..=6 {
            for q in 0..=6 {
                let want = if (r, q) == (2, 0) { 1.0 } else { 0.0 };
                assert!((e.coeff(r, q) - want).abs() < 1e-14);
            }
        }
        let m = Medium::Layered;
        let e = expand_legendre_2d(|x| m.slowness_squared(x), [0.45, 0.15], 0.1, 8);
        assert!(e.residual_l1 <= 1e-10, "{}", e.residual_l1);
        let mono = e.to_monomial();
        let s: f64 = 0.3;
        let t: f64 = -0.7;
        let mut direct = 0.0;
        for a in 0..=8 {
            for b in 0..=8 {
                direct += mono[a * 9 + b] * s.powi(a as i32) * t.powi(b as i32);
            }
        }
        assert!((direct - e.eval_local(s, t)).abs() < 1e-12);
    }

    #[test]
    fn poly_helpers() {
        let p = Poly(vec![1.0, 2.0, 3.0]);
        assert_eq!(p.derivative(), Poly(vec![2.0, 6.0]));
        let q = p.compose_affine(0.5, 2.0);
        for s in [-1.0, 0.0, 0.4] {
            assert!((q.eval(s) - p.eval(0.5 + 2.0 * s)).abs() < 1e-14);
        }
    }
}

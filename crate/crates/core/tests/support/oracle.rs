//! Independent numerical oracles shared by unit and integration tests.
#![allow(dead_code)]

use num_complex::Complex64;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let x = h * XGK[k];
        let s = f(c - x) + f(c + x);
        kron += s * WGK[k];
        if k % 2 == 1 {
            gauss += s * WG[k / 2];
        }
    }
    (kron * h, ((kron - gauss) * h).norm())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature of a complex integrand.
pub fn adaptive<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, tol: f64) -> Complex64 {
    let mut stack = vec![(a, b, tol)];
    let mut total = Complex64::new(0.0, 0.0);
    while let Some((lo, hi, t)) = stack.pop() {
        let (v, err) = gk15(&f, lo, hi);
        if err <= t.max(1e-17) || hi - lo < 1e-12 * (b - a).abs() {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * t));
            stack.push((mid, hi, 0.5 * t));
        }
    }
    total
}

/// Adaptive quadrature of a real integrand.
pub fn adaptive_real<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    adaptive(|x| Complex64::new(f(x), 0.0), a, b, tol).re
}

/// Tensor Gauss–Legendre quadrature on a rectangle with `n` points per
/// direction per panel and `panels` panels per direction.
pub fn dense_2d<F: Fn(f64, f64) -> Complex64>(
    f: F,
    x: (f64, f64),
    y: (f64, f64),
    n: usize,
    panels: usize,
) -> Complex64 {
    let (nodes, weights) = golub_welsch_free_gl(n);
    let hx = (x.1 - x.0) / panels as f64;
    let hy = (y.1 - y.0) / panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for px in 0..panels {
        let cx = x.0 + (px as f64 + 0.5) * hx;
        for py in 0..panels {
            let cy = y.0 + (py as f64 + 0.5) * hy;
            for (a, wa) in nodes.iter().zip(&weights) {
                for (b, wb) in nodes.iter().zip(&weights) {
                    total += f(cx + 0.5 * hx * a, cy + 0.5 * hy * b) * (wa * wb);
                }
            }
        }
    }
    total * (0.25 * hx * hy)
}

/// One-dimensional composite Gauss–Legendre rule.
pub fn dense_1d<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, n: usize, panels: usize) -> Complex64 {
    let (nodes, weights) = golub_welsch_free_gl(n);
    let h = (b - a) / panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * h;
        for (x, w) in nodes.iter().zip(&weights) {
            total += f(c + 0.5 * h * x) * *w;
        }
    }
    total * (0.5 * h)
}

/// Gauss–Legendre nodes by Newton iteration on the three-term recurrence,
/// written independently of the library's rule.
fn golub_welsch_free_gl(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (4 * i + 3) as f64 / (4 * n + 2) as f64).cos();
        let mut d = 1.0;
        for _ in 0..60 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = x;
            }
            d = n as f64 * (p0 - x * p1) / (1.0 - x * x);
            let step = p1 / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * d * d));
    }
    (nodes, weights)
}

/// Classical RK4 for an autonomous system on `R^d`.
pub fn rk4<F: Fn(&[f64]) -> Vec<f64>>(f: F, y0: &[f64], dt: f64, steps: usize) -> Vec<f64> {
    let mut y = y0.to_vec();
    let axpy = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&axpy(&y, &k1, 0.5 * dt));
        let k3 = f(&axpy(&y, &k2, 0.5 * dt));
        let k4 = f(&axpy(&y, &k3, dt));
        for i in 0..y.len() {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

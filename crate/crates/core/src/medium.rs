//! Wave speed fields on the periodic unit square and the uniform cell mesh.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Wraps a point into the periodic cell `[0, 1)²`.
pub fn wrap(x: Point) -> Point {
    [wrap1(x[0]), wrap1(x[1])]
}

fn wrap1(v: f64) -> f64 {
    let w = v.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Smooth, strictly positive wave speed with an analytic gradient.
///
/// Positions are wrapped into the unit square before evaluation, so every
/// medium is treated as 1-periodic. For the Gaussian lens the mismatch at the
/// boundary is below 1e-60.
#[derive(Clone, Debug, PartialEq)]
pub enum Medium {
    Constant(f64),
    /// `1 + exp(-150 + 300(x₁+x₂) - 240x₁x₂ - 180(x₁²+x₂²)) / 5`
    GaussianLens,
    /// `sin(4πx₂)/5 + 1`
    Layered,
}

impl Medium {
    /// Parses `c1`, `c2` or `constant(v)`.
    pub fn from_name(name: &str) -> Result<Self> {
        let name = name.trim();
        match name {
            "c1" => Ok(Medium::GaussianLens),
            "c2" => Ok(Medium::Layered),
            _ => {
                let inner = name
                    .strip_prefix("constant(")
                    .and_then(|s| s.strip_suffix(')'))
                    .ok_or_else(|| Error::config(format!("unknown medium `{name}`")))?;
                let v: f64 = inner
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("bad constant speed `{inner}`")))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config("constant speed must be positive"));
                }
                Ok(Medium::Constant(v))
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Medium::Constant(v) => format!("constant({v})"),
            Medium::GaussianLens => "c1".into(),
            Medium::Layered => "c2".into(),
        }
    }

    pub fn speed(&self, x: Point) -> f64 {
        let [x1, x2] = wrap(x);
        match self {
            Medium::Constant(v) => *v,
            Medium::GaussianLens => 1.0 + 0.2 * lens_exponent(x1, x2).exp(),
            Medium::Layered => 0.2 * (4.0 * PI * x2).sin() + 1.0,
        }
    }

    pub fn grad_speed(&self, x: Point) -> Point {
        let [x1, x2] = wrap(x);
        match self {
            Medium::Constant(_) => [0.0, 0.0],
            Medium::GaussianLens => {
                let e = 0.2 * lens_exponent(x1, x2).exp();
                [
                    e * (300.0 - 240.0 * x2 - 360.0 * x1),
                    e * (300.0 - 240.0 * x1 - 360.0 * x2),
                ]
            }
            Medium::Layered => [0.0, 0.8 * PI * (4.0 * PI * x2).cos()],
        }
    }

    /// `1/c²`, the weight of the mass form.
    pub fn slowness_squared(&self, x: Point) -> f64 {
        let c = self.speed(x);
        1.0 / (c * c)
    }

    pub fn max_speed(&self) -> f64 {
        match self {
            Medium::Constant(v) => *v,
            Medium::GaussianLens | Medium::Layered => 1.2,
        }
    }

    pub fn min_speed(&self) -> f64 {
        match self {
            Medium::Constant(v) => *v,
            Medium::GaussianLens => 1.0,
            Medium::Layered => 0.8,
        }
    }

    /// Stable 64-bit fingerprint of the medium description (FNV-1a).
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.name().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }
}

impl fmt::Display for Medium {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn lens_exponent(x1: f64, x2: f64) -> f64 {
    -150.0 + 300.0 * (x1 + x2) - 240.0 * x1 * x2 - 180.0 * (x1 * x1 + x2 * x2)
}

/// Zero-based cell coordinates: `i` along x₁, `j` along x₂.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub i: usize,
    pub j: usize,
}

/// Uniform `N × N` partition of the unit square.
///
/// Cell ids are row-major: `id = j·N + i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mesh {
    n: usize,
}

impl Mesh {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("mesh needs at least one cell per side"));
        }
        Ok(Mesh { n })
    }

    pub fn cells_per_side(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn n_cells(&self) -> usize {
        self.n * self.n
    }

    pub fn id(&self, c: CellIndex) -> usize {
        c.j * self.n + c.i
    }

    pub fn index(&self, id: usize) -> CellIndex {
        CellIndex {
            i: id % self.n,
            j: id / self.n,
        }
    }

    /// Cell id for possibly out-of-range integer coordinates (periodic).
    pub fn wrapped_id(&self, i: i64, j: i64) -> usize {
        let n = self.n as i64;
        (j.rem_euclid(n) * n + i.rem_euclid(n)) as usize
    }

    /// Observation point `x_K`.
    pub fn centroid(&self, id: usize) -> Point {
        let c = self.index(id);
        let h = self.h();
        [(c.i as f64 + 0.5) * h, (c.j as f64 + 0.5) * h]
    }

    /// Cell containing `x` after periodic wrapping. Points on a shared edge
    /// go to the lower-index cell.
    pub fn locate(&self, x: Point) -> CellIndex {
        let [x1, x2] = wrap(x);
        CellIndex {
            i: self.locate1(x1),
            j: self.locate1(x2),
        }
    }

    fn locate1(&self, v: f64) -> usize {
        let k = (v * self.n as f64).ceil() as i64 - 1;
        k.clamp(0, self.n as i64 - 1) as usize
    }

    /// Neighbor across the right (`axis = 0`) or top (`axis = 1`) face.
    pub fn upper_neighbor(&self, id: usize, axis: usize) -> usize {
        let c = self.index(id);
        if axis == 0 {
            self.wrapped_id(c.i as i64 + 1, c.j as i64)
        } else {
            self.wrapped_id(c.i as i64, c.j as i64 + 1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn named_media() {
        let c = Medium::from_name("constant(1)").unwrap();
        assert_eq!(c.speed([0.3, 0.7]), 1.0);
        let c2 = Medium::from_name("c2").unwrap();
        assert!((c2.speed([0.0, 0.125]) - 1.2).abs() < 1e-15);
        let c1 = Medium::from_name("c1").unwrap();
        // exponent -150 + 300 - 60 - 90 = 0 at the center
        assert!((c1.speed([0.5, 0.5]) - 1.2).abs() < 1e-15);
        assert!(Medium::from_name("c3").is_err());
        assert!(Medium::from_name("constant(-1)").is_err());
        assert_eq!(Medium::from_name(&c.name()).unwrap(), c);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = 1e-5;
        for m in [Medium::Constant(2.0), Medium::GaussianLens, Medium::Layered] {
            let mut worst: f64 = 0.0;
            for _ in 0..1000 {
                let x = [rng.random_range(0.01..0.99), rng.random_range(0.01..0.99)];
                let g = m.grad_speed(x);
                let fd = [
                    (m.speed([x[0] + d, x[1]]) - m.speed([x[0] - d, x[1]])) / (2.0 * d),
                    (m.speed([x[0], x[1] + d]) - m.speed([x[0], x[1] - d])) / (2.0 * d),
                ];
                worst = worst.max((g[0] - fd[0]).abs()).max((g[1] - fd[1]).abs());
            }
            assert!(worst <= 1e-6, "{m}: {worst}");
        }
    }

    #[test]
    fn media_are_positive_and_periodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in [Medium::GaussianLens, Medium::Layered] {
            for _ in 0..200 {
                let x = [rng.random::<f64>(), rng.random::<f64>()];
                assert!(m.speed(x) >= m.min_speed() && m.speed(x) <= m.max_speed());
                assert!((m.speed(x) - m.speed([x[0] + 1.0, x[1]])).abs() < 1e-12);
                assert!((m.speed(x) - m.speed([x[0], x[1] - 1.0])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn locate_cells() {
        let mesh = Mesh::new(10).unwrap();
        assert_eq!(mesh.locate([0.05, 0.05]), CellIndex { i: 0, j: 0 });
        assert_eq!(mesh.locate([0.999, 0.001]), CellIndex { i: 9, j: 0 });
        assert_eq!(mesh.locate([1.05, -0.05]), CellIndex { i: 0, j: 9 });
        // shared edge goes to the lower index
        assert_eq!(mesh.locate([0.1, 0.35]), CellIndex { i: 0, j: 3 });
        for id in 0..mesh.n_cells() {
            assert_eq!(mesh.id(mesh.locate(mesh.centroid(id))), id);
        }
        assert!(Mesh::new(0).is_err());
    }

    #[test]
    fn neighbors_wrap() {
        let mesh = Mesh::new(4).unwrap();
        assert_eq!(mesh.upper_neighbor(3, 0), 0);
        assert_eq!(mesh.upper_neighbor(13, 1), 1);
        assert_eq!(mesh.upper_neighbor(5, 0), 6);
    }
}

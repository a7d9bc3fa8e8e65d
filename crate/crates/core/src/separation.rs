//! Clustering of captured ray directions into a small separated set.

use std::io::Write;

use crate::medium::{Mesh, Point};
use crate::par;

/// How a new representative is chosen from the ball around the picked point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SeparationVariant {
    /// Centroid of the remaining points within `ε` of the pick.
    #[default]
    Centroid,
    /// The picked point itself.
    Representative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationParams {
    pub epsilon: f64,
    pub defaults: Vec<Point>,
    pub variant: SeparationVariant,
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Covers `raw` by closed `ε`-balls around the defaults and new centers.
///
/// The defaults come first, unchanged; picks follow insertion order.
pub fn separate(raw: &[Point], params: &SeparationParams) -> Vec<Point> {
    assert!(params.epsilon > 0.0, "separation radius must be positive");
    let eps = params.epsilon;
    let mut out = params.defaults.clone();
    let mut alive: Vec<Point> = raw
        .iter()
        .copied()
        .filter(|&q| params.defaults.iter().all(|&d| dist(q, d) > eps))
        .collect();
    while let Some(&p) = alive.first() {
        let center = match params.variant {
            SeparationVariant::Representative => p,
            SeparationVariant::Centroid => {
                let (mut s, mut k) = ([0.0, 0.0], 0usize);
                for &q in alive.iter().filter(|&&q| dist(q, p) <= eps) {
                    s[0] += q[0];
                    s[1] += q[1];
                    k += 1;
                }
                [s[0] / k as f64, s[1] / k as f64]
            }
        };
        out.push(center);
        let before = alive.len();
        alive.retain(|&q| dist(q, center) > eps);
        if alive.len() == before {
            // the centroid lies within ε of the pick, so this cannot happen;
            // guard against floating-point surprises anyway
            alive.remove(0);
        }
    }
    out
}

/// True iff all pairwise distances are at least `delta`.
pub fn check_separable(set: &[Point], delta: f64) -> bool {
    set.iter()
        .enumerate()
        .all(|(i, &a)| set[i + 1..].iter().all(|&b| dist(a, b) >= delta))
}

/// Smallest pairwise distance (`∞` for fewer than two points).
pub fn min_separation(set: &[Point]) -> f64 {
    let mut m = f64::INFINITY;
    for (i, &a) in set.iter().enumerate() {
        for &b in &set[i + 1..] {
            m = m.min(dist(a, b));
        }
    }
    m
}

/// One-sided deviation `sup_{q ∈ b} min_{p ∈ a} |p − q|`.
pub fn deviation(a: &[Point], b: &[Point]) -> f64 {
    b.iter()
        .map(|&q| a.iter().map(|&p| dist(p, q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Applies [`separate`] to every cell.
pub fn separate_all(raw: &[Vec<Point>], params: &SeparationParams) -> Vec<Vec<Point>> {
    par::map(raw, |set| separate(set, params))
}

/// Writes rows `i j count p1 p2 ...`, one per cell.
pub fn dump_directions(mesh: &Mesh, sets: &[Vec<Point>], out: &mut impl Write) -> std::io::Result<()> {
    for (id, set) in sets.iter().enumerate() {
        let c = mesh.index(id);
        write!(out, "{} {} {}", c.i, c.j, set.len())?;
        for p in set {
            write!(out, " {} {}", p[0], p[1])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(eps: f64, defaults: Vec<Point>, variant: SeparationVariant) -> SeparationParams {
        SeparationParams {
            epsilon: eps,
            defaults,
            variant,
        }
    }

    #[test]
    fn examples() {
        let p = params(0.2, vec![], SeparationVariant::Centroid);
        assert_eq!(separate(&[[1.0, 0.0]], &p), vec![[1.0, 0.0]]);
        let out = separate(&[[1.0, 0.0], [1.01, 0.0], [0.99, 0.0]], &p);
        assert_eq!(out.len(), 1);
        assert!((out[0][0] - 1.0).abs() < 1e-15 && out[0][1] == 0.0);
        let p = params(0.2, vec![[1.0, 0.0]], SeparationVariant::Centroid);
        assert_eq!(separate(&[[1.1, 0.0], [0.0, 1.0]], &p), vec![[1.0, 0.0], [0.0, 1.0]]);
        assert!(separate(&[], &p) == vec![[1.0, 0.0]]);
    }

    #[test]
    fn separability_checks() {
        assert!(check_separable(&[[0.0, 0.0], [1.0, 0.0]], 0.5));
        assert!(!check_separable(&[[0.0, 0.0], [0.1, 0.0]], 0.5));
        assert_eq!(deviation(&[[0.0, 0.0]], &[[3.0, 4.0], [0.0, 1.0]]), 5.0);
        assert_eq!(deviation(&[[0.0, 0.0]], &[]), 0.0);
    }

    #[test]
    fn representative_covers_within_epsilon() {
        let raw: Vec<Point> = (0..50).map(|k| [(k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()]).collect();
        let p = params(0.3, vec![], SeparationVariant::Representative);
        let out = separate(&raw, &p);
        assert!(check_separable(&out, 0.3));
        assert!(deviation(&out, &raw) <= 0.3);
    }
}

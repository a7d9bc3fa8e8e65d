//! Precomputed assembly over a predefined direction set and the online
//! snapping of learned directions onto it.
//!
//! The entry kernels are the same on every cell of the uniform mesh; only the
//! weighted mass depends on the cell, through the contraction with its `1/c²`
//! coefficients. The store therefore holds one block set per direction pair.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::kernels::{self, AxisTables, Block4, KernelParams, SelfPair, C, ZERO};
use crate::assembly::PairSource;
use crate::error::{Error, Result};
use crate::medium::{Medium, Point};
use crate::par;
use crate::separation::{self, SeparationParams};

const STORE_MAGIC: &[u8; 8] = b"RDGSTORE";
pub const STORE_VERSION: u32 = 1;
/// Random annulus samples used by the covering check.
pub const COVERING_SAMPLES: usize = 10_000;
/// Largest direction count accepted when reading a store.
const MAX_STORE_DIRECTIONS: usize = 1 << 16;

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn lex_cmp(a: &Point, b: &Point) -> std::cmp::Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
}

fn key(p: Point) -> [u64; 2] {
    [p[0].to_bits(), p[1].to_bits()]
}

/// Finite direction set covering the annulus `inner < |p| < outer` within `δ/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredefinedDirections {
    pub inner: f64,
    pub outer: f64,
    pub delta: f64,
    /// Sorted lexicographically.
    pub directions: Vec<Point>,
}

impl PredefinedDirections {
    /// Polar grid with radial and outer-arc spacing at most `δ/√2`.
    pub fn polar(inner: f64, outer: f64, delta: f64) -> Result<Self> {
        if !(inner > 0.0 && outer > inner && outer.is_finite()) {
            return Err(Error::config("annulus radii must satisfy 0 < inner < outer"));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::config("covering radius must be positive"));
        }
        let step = delta / 2f64.sqrt();
        let n_r = ((outer - inner) / step).ceil() as usize + 1;
        let n_theta = ((2.0 * PI * outer / step).ceil() as usize).max(3);
        let mut directions = Vec::with_capacity(n_r * n_theta);
        for a in 0..n_r {
            let r = inner + (outer - inner) * a as f64 / (n_r - 1) as f64;
            for b in 0..n_theta {
                let phi = 2.0 * PI * b as f64 / n_theta as f64;
                directions.push([r * phi.cos(), r * phi.sin()]);
            }
        }
        Ok(Self::from_directions(inner, outer, delta, directions))
    }

    /// Annulus `(0.9/c_max, 1.1/c_min)` around the slowness range of `medium`.
    pub fn for_medium(medium: &Medium, delta: f64) -> Result<Self> {
        Self::polar(0.9 / medium.max_speed(), 1.1 / medium.min_speed(), delta)
    }

    pub fn from_directions(inner: f64, outer: f64, delta: f64, mut directions: Vec<Point>) -> Self {
        directions.sort_by(lex_cmp);
        directions.dedup();
        PredefinedDirections { inner, outer, delta, directions }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn in_annulus(&self, p: Point) -> bool {
        let r = p[0].hypot(p[1]);
        r > self.inner && r < self.outer
    }

    /// Largest distance from `COVERING_SAMPLES` seeded, area-uniform annulus
    /// points to the set.
    pub fn covering_radius(&self, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (self.inner * self.inner, self.outer * self.outer);
        let samples: Vec<Point> = (0..COVERING_SAMPLES)
            .map(|_| {
                let r = rng.random_range(a..b).sqrt();
                let phi = rng.random_range(0.0..2.0 * PI);
                [r * phi.cos(), r * phi.sin()]
            })
            .collect();
        par::map(&samples, |&q| {
            self.directions.iter().map(|&p| dist(p, q)).fold(f64::INFINITY, f64::min)
        })
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Every sampled annulus point lies within `δ/2` of the set.
    pub fn covers(&self, seed: u64) -> bool {
        self.covering_radius(seed) <= 0.5 * self.delta
    }
}

/// Parameters the stored blocks depend on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StoreMeta {
    pub cells_per_side: usize,
    pub params: KernelParams,
    pub medium_fingerprint: u64,
}

impl StoreMeta {
    /// Configuration error naming the first mismatching field.
    pub fn check(&self, other: &StoreMeta) -> Result<()> {
        let (a, b) = (self, other);
        let mismatch = if a.cells_per_side != b.cells_per_side {
            Some("mesh size")
        } else if a.params.omega != b.params.omega {
            Some("omega")
        } else if a.params.h != b.params.h {
            Some("mesh width")
        } else if a.params.gamma != b.params.gamma {
            Some("gamma")
        } else if a.params.weight_degree != b.params.weight_degree {
            Some("weight degree")
        } else if a.medium_fingerprint != b.medium_fingerprint {
            Some("medium")
        } else {
            None
        };
        match mismatch {
            Some(what) => Err(Error::config(format!("offline store was built for a different {what}"))),
            None => Ok(()),
        }
    }
}

/// Blocks for every pair of predefined directions.
#[derive(Debug)]
pub struct OfflineStore {
    pub meta: StoreMeta,
    pub pre: PredefinedDirections,
    index: HashMap<[u64; 2], usize>,
    /// Packed upper triangle `i ≤ j`, row by row.
    self_pairs: Vec<SelfPair>,
    /// `[axis][i·m + j]`, test direction `i` on the lower cell.
    faces: [Vec<Block4>; 2],
}

fn packed(i: usize, j: usize, m: usize) -> usize {
    debug_assert!(i <= j);
    i * m - i * (i + 1) / 2 + j
}

impl OfflineStore {
    /// Computes all blocks; the cost grows like `|Θ_pre|²`.
    pub fn build(meta: StoreMeta, pre: PredefinedDirections) -> Result<Self> {
        if pre.is_empty() {
            return Err(Error::config("predefined direction set is empty"));
        }
        let m = pre.len();
        let dirs = &pre.directions;
        let params = meta.params;
        let rows = par::map_range(m, |i| {
            let selfs: Vec<SelfPair> = (i..m).map(|j| kernels::self_pair(dirs[i], dirs[j], &params)).collect();
            let f0: Vec<Block4> = (0..m).map(|j| kernels::face_pair(dirs[i], dirs[j], 0, &params)).collect();
            let f1: Vec<Block4> = (0..m).map(|j| kernels::face_pair(dirs[i], dirs[j], 1, &params)).collect();
            (selfs, f0, f1)
        });
        let mut self_pairs = Vec::with_capacity(m * (m + 1) / 2);
        let mut faces = [Vec::with_capacity(m * m), Vec::with_capacity(m * m)];
        for (s, f0, f1) in rows {
            self_pairs.extend(s);
            faces[0].extend(f0);
            faces[1].extend(f1);
        }
        Ok(Self::from_parts(meta, pre, self_pairs, faces))
    }

    fn from_parts(meta: StoreMeta, pre: PredefinedDirections, self_pairs: Vec<SelfPair>, faces: [Vec<Block4>; 2]) -> Self {
        let index = pre.directions.iter().enumerate().map(|(i, &p)| (key(p), i)).collect();
        OfflineStore { meta, pre, index, self_pairs, faces }
    }

    pub fn index_of(&self, p: Point) -> Option<usize> {
        self.index.get(&key(p)).copied()
    }

    /// Stored same-cell blocks for `(p_test, p_trial)`, canonicalized like the fresh kernels.
    pub fn self_pair(&self, p_test: Point, p_trial: Point) -> Option<SelfPair> {
        let (i, j) = (self.index_of(p_test)?, self.index_of(p_trial)?);
        let m = self.pre.len();
        Some(if i <= j {
            self.self_pairs[packed(i, j, m)].clone()
        } else {
            self.self_pairs[packed(j, i, m)].conj_transpose()
        })
    }

    pub fn face_pair(&self, p_lower: Point, p_upper: Point, axis: usize) -> Option<Block4> {
        let (i, j) = (self.index_of(p_lower)?, self.index_of(p_upper)?);
        Some(self.faces[axis][i * self.pre.len() + j])
    }

    /// View for the online stage; pairs touching `defaults` outside the store are computed fresh.
    pub fn online(&self, defaults: &[Point]) -> OnlineSource<'_> {
        OnlineSource {
            store: self,
            defaults: defaults.iter().map(|&p| key(p)).collect(),
            fresh: AtomicUsize::new(0),
        }
    }

    /// Versioned little-endian dump: header, metadata, directions, blocks.
    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        let mut w = LeWriter(out);
        w.bytes(STORE_MAGIC)?;
        w.bytes(&STORE_VERSION.to_le_bytes())?;
        let p = &self.meta.params;
        w.u64(self.meta.cells_per_side as u64)?;
        w.f64(p.omega)?;
        w.f64(p.h)?;
        w.f64(p.gamma)?;
        w.u64(p.weight_degree as u64)?;
        w.u64(self.meta.medium_fingerprint)?;
        w.f64(self.pre.inner)?;
        w.f64(self.pre.outer)?;
        w.f64(self.pre.delta)?;
        w.u64(self.pre.len() as u64)?;
        for d in &self.pre.directions {
            w.f64(d[0])?;
            w.f64(d[1])?;
        }
        for s in &self.self_pairs {
            w.block4(&s.mass)?;
            w.block4(&s.stiffness)?;
            w.tables(&s.x)?;
            w.tables(&s.y)?;
        }
        for axis in &self.faces {
            for b in axis {
                w.block4(b)?;
            }
        }
        Ok(())
    }

    pub fn read_from(input: &mut impl Read) -> Result<Self> {
        let mut r = LeReader(input);
        let mut magic = [0u8; 8];
        r.fill(&mut magic)?;
        if &magic != STORE_MAGIC {
            return Err(Error::Format("not an offline store (bad magic)".into()));
        }
        let mut version = [0u8; 4];
        r.fill(&mut version)?;
        let version = u32::from_le_bytes(version);
        if version != STORE_VERSION {
            return Err(Error::Format(format!("unsupported store version {version}")));
        }
        let cells_per_side = r.u64()? as usize;
        let params = KernelParams {
            omega: r.f64()?,
            h: r.f64()?,
            gamma: r.f64()?,
            weight_degree: r.u64()? as usize,
        };
        if params.weight_degree > 64 {
            return Err(Error::Format(format!("implausible weight degree {}", params.weight_degree)));
        }
        let medium_fingerprint = r.u64()?;
        let (inner, outer, delta) = (r.f64()?, r.f64()?, r.f64()?);
        let m = r.u64()? as usize;
        if m == 0 || m > MAX_STORE_DIRECTIONS {
            return Err(Error::Format(format!("implausible direction count {m}")));
        }
        let mut directions = Vec::with_capacity(m);
        for _ in 0..m {
            directions.push([r.f64()?, r.f64()?]);
        }
        if directions.windows(2).any(|w| lex_cmp(&w[0], &w[1]) != std::cmp::Ordering::Less) {
            return Err(Error::Format("store directions are not strictly sorted".into()));
        }
        let mut self_pairs = Vec::with_capacity(m * (m + 1) / 2);
        for _ in 0..m * (m + 1) / 2 {
            self_pairs.push(SelfPair {
                mass: r.block4()?,
                stiffness: r.block4()?,
                x: r.tables(params.weight_degree)?,
                y: r.tables(params.weight_degree)?,
            });
        }
        let mut faces = [Vec::with_capacity(m * m), Vec::with_capacity(m * m)];
        for axis in faces.iter_mut() {
            for _ in 0..m * m {
                axis.push(r.block4()?);
            }
        }
        let mut probe = [0u8; 1];
        if r.0.read(&mut probe)? != 0 {
            return Err(Error::Format("trailing bytes after store".into()));
        }
        let meta = StoreMeta { cells_per_side, params, medium_fingerprint };
        let pre = PredefinedDirections { inner, outer, delta, directions };
        Ok(Self::from_parts(meta, pre, self_pairs, faces))
    }
}

/// Store lookups with fresh kernels for default directions outside the store.
#[derive(Debug)]
pub struct OnlineSource<'a> {
    store: &'a OfflineStore,
    defaults: Vec<[u64; 2]>,
    fresh: AtomicUsize,
}

impl OnlineSource<'_> {
    /// Number of blocks computed fresh so far.
    pub fn fresh_count(&self) -> usize {
        self.fresh.load(Ordering::Relaxed)
    }

    fn allow_fresh(&self, dirs: &[Point]) -> Result<()> {
        for &p in dirs {
            if self.store.index_of(p).is_none() && !self.defaults.contains(&key(p)) {
                return Err(Error::Integrity(format!(
                    "direction ({}, {}) is neither predefined nor a default",
                    p[0], p[1]
                )));
            }
        }
        self.fresh.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }
}

impl PairSource for OnlineSource<'_> {
    fn self_pair(&self, p_test: Point, p_trial: Point) -> Result<SelfPair> {
        if let Some(s) = self.store.self_pair(p_test, p_trial) {
            return Ok(s);
        }
        self.allow_fresh(&[p_test, p_trial])?;
        Ok(kernels::self_pair(p_test, p_trial, &self.store.meta.params))
    }

    fn face_pair(&self, p_lower: Point, p_upper: Point, axis: usize) -> Result<Block4> {
        if let Some(b) = self.store.face_pair(p_lower, p_upper, axis) {
            return Ok(b);
        }
        self.allow_fresh(&[p_lower, p_upper])?;
        Ok(kernels::face_pair(p_lower, p_upper, axis, &self.store.meta.params))
    }
}

/// Result of snapping learned directions onto the predefined set.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapped {
    pub sets: Vec<Vec<Point>>,
    /// Separated directions outside the annulus; for these the snap distance is unbounded.
    pub annulus_violations: usize,
    pub min_separation: f64,
    /// Largest one-sided deviation of a snapped set from its raw captures.
    pub max_deviation: f64,
}

/// Nearest point of `pre ∪ defaults`; ties go to the lexicographically smaller point.
pub fn nearest(p: Point, pre: &[Point], defaults: &[Point]) -> Point {
    let mut best = p;
    let mut best_d = f64::INFINITY;
    for &q in pre.iter().chain(defaults) {
        let d = dist(p, q);
        if d < best_d || (d == best_d && lex_cmp(&q, &best) == std::cmp::Ordering::Less) {
            best = q;
            best_d = d;
        }
    }
    best
}

/// Separates each cell's captures at radius `ε + 2δ`, snaps the new
/// representatives onto `Θ_pre ∪ defaults` and keeps the defaults first.
///
/// Without annulus violations the output is `ε/2`-separable and deviates from
/// the raw captures by less than `ε + 3δ`; a breach is an integrity error.
pub fn online_snap(raw: &[Vec<Point>], pre: &PredefinedDirections, params: &SeparationParams) -> Result<Snapped> {
    let delta = pre.delta;
    let wide = SeparationParams {
        epsilon: params.epsilon + 2.0 * delta,
        ..params.clone()
    };
    let n_def = params.defaults.len();
    let per_cell = par::map(raw, |captures| {
        let separated = separation::separate(captures, &wide);
        let violations = separated[n_def..].iter().filter(|&&p| !pre.in_annulus(p)).count();
        let mut out = params.defaults.clone();
        for &p in &separated[n_def..] {
            let q = nearest(p, &pre.directions, &params.defaults);
            if !out.contains(&q) {
                out.push(q);
            }
        }
        let deviation = if captures.is_empty() { 0.0 } else { separation::deviation(&out, captures) };
        (out, violations, deviation)
    });
    let mut snapped = Snapped {
        sets: Vec::with_capacity(raw.len()),
        annulus_violations: 0,
        min_separation: f64::INFINITY,
        max_deviation: 0.0,
    };
    for (set, v, d) in per_cell {
        snapped.annulus_violations += v;
        snapped.min_separation = snapped.min_separation.min(separation::min_separation(&set));
        snapped.max_deviation = snapped.max_deviation.max(d);
        snapped.sets.push(set);
    }
    if snapped.annulus_violations == 0 {
        if snapped.min_separation < 0.5 * params.epsilon {
            return Err(Error::Integrity(format!(
                "snapped directions only {:.3e}-separated, below ε/2",
                snapped.min_separation
            )));
        }
        if snapped.max_deviation >= params.epsilon + 3.0 * delta {
            return Err(Error::Integrity(format!(
                "snapped directions deviate by {:.3e} ≥ ε + 3δ",
                snapped.max_deviation
            )));
        }
    }
    Ok(snapped)
}

struct LeWriter<'a, W: Write>(&'a mut W);

impl<W: Write> LeWriter<'_, W> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        Ok(self.0.write_all(b)?)
    }

    fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn c(&mut self, v: C) -> Result<()> {
        self.f64(v.re)?;
        self.f64(v.im)
    }

    fn block4(&mut self, b: &Block4) -> Result<()> {
        b.iter().flatten().try_for_each(|&v| self.c(v))
    }

    fn tables(&mut self, t: &AxisTables) -> Result<()> {
        for g in &t.gram {
            g.iter().flatten().try_for_each(|&v| self.c(v))?;
        }
        self.c(t.single[0])?;
        self.c(t.single[1])?;
        self.c(t.plain)
    }
}

struct LeReader<'a, R: Read>(&'a mut R);

impl<R: Read> LeReader<'_, R> {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.0.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format("offline store is truncated".into()),
            _ => Error::Io(e),
        })
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn c(&mut self) -> Result<C> {
        Ok(C::new(self.f64()?, self.f64()?))
    }

    fn block4(&mut self) -> Result<Block4> {
        let mut b = [[ZERO; 4]; 4];
        for v in b.iter_mut().flatten() {
            *v = self.c()?;
        }
        Ok(b)
    }

    fn tables(&mut self, degree: usize) -> Result<AxisTables> {
        let mut gram = Vec::with_capacity(degree + 1);
        for _ in 0..=degree {
            gram.push([[self.c()?, self.c()?], [self.c()?, self.c()?]]);
        }
        Ok(AxisTables {
            gram,
            single: [self.c()?, self.c()?],
            plain: self.c()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_grid_covers_the_annulus() {
        let pre = PredefinedDirections::polar(0.5, 1.5, 0.05).unwrap();
        assert!(pre.covers(11), "radius {}", pre.covering_radius(11));
        let coarse = PredefinedDirections::from_directions(0.5, 1.5, 0.05, pre.directions[..pre.len() / 2].to_vec());
        assert!(!coarse.covers(11));
    }

    #[test]
    fn packed_upper_triangle_is_dense() {
        let m = 5;
        let mut seen = Vec::new();
        for i in 0..m {
            for j in i..m {
                seen.push(packed(i, j, m));
            }
        }
        assert_eq!(seen, (0..m * (m + 1) / 2).collect::<Vec<_>>());
    }

    #[test]
    fn nearest_breaks_ties_lexicographically() {
        let pre = [[1.0, 1.0], [1.0, -1.0]];
        assert_eq!(nearest([1.0, 0.0], &pre, &[]), [1.0, -1.0]);
        assert_eq!(nearest([1.0, 0.9], &pre, &[[1.0, 0.95]]), [1.0, 0.95]);
    }
}

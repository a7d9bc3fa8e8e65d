//! Enriched interior penalty DG discretization: basis layout, mass and
//! stiffness assembly, and per-cell POD truncation.
//!
//! Global dofs are ordered by cell (row-major, `id = j·N + i`), then by
//! direction in the order of the cell's direction set, then by vertex.

pub mod kernels;
pub mod matrix;
pub mod pod;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::medium::{Medium, Mesh, Point};
use crate::par;
use crate::quadrature::{gauss_legendre, ExpansionRule};

pub use kernels::{Block4, KernelParams, SelfPair, C, ZERO};
pub use matrix::{BlockDiagonal, BlockSparse, DofLayout};
pub use pod::PodTransform;

/// Per-cell direction sets and the resulting dof layout.
#[derive(Clone, Debug, PartialEq)]
pub struct DgSpace {
    pub mesh: Mesh,
    pub omega: f64,
    pub directions: Vec<Vec<Point>>,
    layout: DofLayout,
}

impl DgSpace {
    pub fn new(mesh: Mesh, directions: Vec<Vec<Point>>, omega: f64) -> Result<Self> {
        if directions.len() != mesh.n_cells() {
            return Err(Error::config(format!(
                "expected {} direction sets, got {}",
                mesh.n_cells(),
                directions.len()
            )));
        }
        if let Some(k) = directions.iter().position(Vec::is_empty) {
            return Err(Error::config(format!(
                "cell {k} has no directions; include a default direction"
            )));
        }
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::config("frequency must be finite and nonnegative"));
        }
        let layout = DofLayout::from_sizes(directions.iter().map(|d| 4 * d.len()));
        Ok(DgSpace {
            mesh,
            omega,
            directions,
            layout,
        })
    }

    /// The same directions in every cell.
    pub fn uniform(mesh: Mesh, directions: &[Point], omega: f64) -> Result<Self> {
        DgSpace::new(mesh, vec![directions.to_vec(); mesh.n_cells()], omega)
    }

    pub fn layout(&self) -> &DofLayout {
        &self.layout
    }

    pub fn n_dofs(&self) -> usize {
        self.layout.n_dofs()
    }

    pub fn kernel_params(&self, gamma: f64, weight_degree: usize) -> KernelParams {
        KernelParams {
            omega: self.omega,
            h: self.mesh.h(),
            gamma,
            weight_degree,
        }
    }

    /// Local coordinates of `x` in cell `id`.
    pub fn local(&self, id: usize, x: Point) -> (f64, f64) {
        let c = self.mesh.centroid(id);
        let half = 0.5 * self.mesh.h();
        let wrap = |d: f64| d - d.round();
        (wrap(x[0] - c[0]) / half, wrap(x[1] - c[1]) / half)
    }

    /// Evaluates the field with (unreduced) coefficients `coeffs` at `x`.
    pub fn evaluate(&self, coeffs: &[C], x: Point) -> C {
        let id = self.mesh.id(self.mesh.locate(x));
        let (s, t) = self.local(id, x);
        self.evaluate_local(coeffs, id, s, t)
    }

    pub fn evaluate_local(&self, coeffs: &[C], id: usize, s: f64, t: f64) -> C {
        let params = self.kernel_params(0.0, 0);
        let base = self.layout.offsets()[id];
        let mut acc = ZERO;
        for (d, &p) in self.directions[id].iter().enumerate() {
            for v in 0..4 {
                acc += coeffs[base + 4 * d + v] * kernels::basis_value(p, v, s, t, &params);
            }
        }
        acc
    }

    /// `∫ a e^{iω(g·x + c)} ψ̄_i dx` for every basis function.
    pub fn plane_wave_load(&self, amplitude: C, grad: Point, offset: f64) -> Vec<C> {
        let params = self.kernel_params(0.0, 0);
        let per_cell = par::map_range(self.mesh.n_cells(), |k| {
            let xk = self.mesh.centroid(k);
            let phase = C::from_polar(1.0, self.omega * (grad[0] * xk[0] + grad[1] * xk[1] + offset));
            let a = amplitude * phase;
            self.directions[k]
                .iter()
                .flat_map(|&p| kernels::plane_wave_load(p, grad, &params))
                .map(|v| v * a)
                .collect::<Vec<_>>()
        });
        per_cell.concat()
    }

    /// `∫ f ψ̄_i dx` by a tensor Gauss rule with `order` points per axis.
    pub fn quadrature_load(&self, f: &(dyn Fn(Point) -> C + Sync), order: usize) -> Vec<C> {
        let (nodes, weights) = gauss_legendre(order);
        let params = self.kernel_params(0.0, 0);
        let half = 0.5 * self.mesh.h();
        let per_cell = par::map_range(self.mesh.n_cells(), |k| {
            let xk = self.mesh.centroid(k);
            let mut out = vec![ZERO; 4 * self.directions[k].len()];
            for (a, &s) in nodes.iter().enumerate() {
                for (b, &t) in nodes.iter().enumerate() {
                    let w = weights[a] * weights[b] * half * half;
                    let fx = f([xk[0] + half * s, xk[1] + half * t]) * w;
                    for (d, &p) in self.directions[k].iter().enumerate() {
                        for v in 0..4 {
                            out[4 * d + v] += fx * kernels::basis_value(p, v, s, t, &params).conj();
                        }
                    }
                }
            }
            out
        });
        per_cell.concat()
    }
}

/// Per-cell polynomial model of `1/c²` in local monomials `s^m t^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellWeights {
    pub degree: usize,
    pub coeffs: Vec<Vec<f64>>,
    pub max_residual: f64,
    /// Cells whose expansion residual exceeds the tolerance.
    pub flagged: usize,
}

impl CellWeights {
    pub fn from_medium(medium: &Medium, mesh: &Mesh, degree: usize, tolerance: f64) -> Self {
        let rule = ExpansionRule::new(degree);
        let h = mesh.h();
        let exps = par::map_range(mesh.n_cells(), |k| {
            rule.expand(|x| medium.slowness_squared(x), mesh.centroid(k), h)
        });
        let max_residual = exps.iter().map(|e| e.residual_l1).fold(0.0, f64::max);
        let flagged = exps.iter().filter(|e| e.exceeds(tolerance)).count();
        CellWeights {
            degree,
            coeffs: exps.iter().map(|e| e.to_monomial()).collect(),
            max_residual,
            flagged,
        }
    }
}

/// Supplier of direction-pair blocks: fresh kernels or a precomputed store.
pub trait PairSource: Sync {
    fn self_pair(&self, p_test: Point, p_trial: Point) -> Result<SelfPair>;
    fn face_pair(&self, p_lower: Point, p_upper: Point, axis: usize) -> Result<Block4>;
}

/// Computes every block on demand.
#[derive(Clone, Copy, Debug)]
pub struct DirectKernels(pub KernelParams);

impl PairSource for DirectKernels {
    fn self_pair(&self, p_test: Point, p_trial: Point) -> Result<SelfPair> {
        Ok(kernels::self_pair(p_test, p_trial, &self.0))
    }

    fn face_pair(&self, p_lower: Point, p_upper: Point, axis: usize) -> Result<Block4> {
        Ok(kernels::face_pair(p_lower, p_upper, axis, &self.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssemblyOptions {
    pub gamma: f64,
    pub weight_degree: usize,
    pub weight_tolerance: f64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            gamma: 10.0,
            weight_degree: 12,
            weight_tolerance: 1e-8,
        }
    }
}

/// Mass, weighted mass and stiffness on a common dof layout.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub layout: DofLayout,
    pub mass: BlockDiagonal,
    pub weighted_mass: BlockDiagonal,
    pub stiffness: BlockSparse,
}

impl LinearSystem {
    /// `λ_max / λ_min` over all weighted-mass blocks.
    pub fn weighted_mass_condition(&self) -> f64 {
        let (lo, hi) = self
            .weighted_mass
            .blocks
            .iter()
            .map(|b| {
                let e = SymmetricEigen::new(b.clone()).eigenvalues;
                let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .fold((f64::INFINITY, 0.0f64), |(a, b), (lo, hi)| (a.min(lo), b.max(hi)));
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// Solves `M x = b` block by block.
    pub fn solve_mass(&self, b: &[C]) -> Result<Vec<C>> {
        solve_blocks(&self.mass, &self.layout, b)
    }
}

pub fn solve_blocks(m: &BlockDiagonal, layout: &DofLayout, b: &[C]) -> Result<Vec<C>> {
    let parts = par::map_range(layout.n_cells(), |k| -> Result<Vec<C>> {
        let chol = Cholesky::new(m.blocks[k].clone()).ok_or_else(|| {
            Error::Integrity(format!("mass block of cell {k} is not positive definite"))
        })?;
        Ok(chol
            .solve(&DVector::from_column_slice(&b[layout.range(k)]))
            .as_slice()
            .to_vec())
    });
    let mut out = Vec::with_capacity(b.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assembled {
    pub space: DgSpace,
    pub params: KernelParams,
    pub system: LinearSystem,
    pub weights_max_residual: f64,
    pub weights_flagged: usize,
}

/// Assembles `M`, `M^c` and `A` with fresh kernels.
pub fn assemble(space: &DgSpace, medium: &Medium, opts: &AssemblyOptions) -> Result<Assembled> {
    if !(opts.gamma > 0.0) {
        return Err(Error::config("penalty parameter must be positive"));
    }
    let weights = CellWeights::from_medium(medium, &space.mesh, opts.weight_degree, opts.weight_tolerance);
    let params = space.kernel_params(opts.gamma, opts.weight_degree);
    assemble_with(space, &weights, params, &DirectKernels(params))
}

/// Assembles with blocks taken from `source`.
pub fn assemble_with(
    space: &DgSpace,
    weights: &CellWeights,
    params: KernelParams,
    source: &dyn PairSource,
) -> Result<Assembled> {
    let mesh = space.mesh;
    let h = mesh.h();
    let cells = par::map_range(mesh.n_cells(), |k| -> Result<_> {
        let dirs = &space.directions[k];
        let n = 4 * dirs.len();
        let mut mass = DMatrix::from_element(n, n, ZERO);
        let mut mass_c = mass.clone();
        let mut stiff = mass.clone();
        for i in 0..dirs.len() {
            for j in i..dirs.len() {
                let sp = source.self_pair(dirs[i], dirs[j])?;
                let mc = sp.weighted_mass(&weights.coeffs[k], h);
                matrix::put_block(&mut mass, i, j, &sp.mass);
                matrix::put_block(&mut mass_c, i, j, &mc);
                matrix::put_block(&mut stiff, i, j, &sp.stiffness);
                if i != j {
                    matrix::put_block(&mut mass, j, i, &kernels::conj_t4(&sp.mass));
                    matrix::put_block(&mut mass_c, j, i, &kernels::conj_t4(&mc));
                    matrix::put_block(&mut stiff, j, i, &kernels::conj_t4(&sp.stiffness));
                }
            }
        }
        let mut couplings = Vec::with_capacity(2);
        for axis in 0..2 {
            let nb = mesh.upper_neighbor(k, axis);
            let other = &space.directions[nb];
            let mut b = DMatrix::from_element(n, 4 * other.len(), ZERO);
            for (i, &pi) in dirs.iter().enumerate() {
                for (j, &pj) in other.iter().enumerate() {
                    matrix::put_block(&mut b, i, j, &source.face_pair(pi, pj, axis)?);
                }
            }
            couplings.push(b);
        }
        let up = couplings.pop().unwrap();
        let right = couplings.pop().unwrap();
        Ok((mass, mass_c, stiff, right, up))
    });
    let mut mass = Vec::with_capacity(cells.len());
    let mut mass_c = Vec::with_capacity(cells.len());
    let mut diag = Vec::with_capacity(cells.len());
    let mut right = Vec::with_capacity(cells.len());
    let mut up = Vec::with_capacity(cells.len());
    for c in cells {
        let (m, mc, a, r, u) = c?;
        mass.push(m);
        mass_c.push(mc);
        diag.push(a);
        right.push(r);
        up.push(u);
    }
    Ok(Assembled {
        space: space.clone(),
        params,
        system: LinearSystem {
            layout: space.layout().clone(),
            mass: BlockDiagonal { blocks: mass },
            weighted_mass: BlockDiagonal { blocks: mass_c },
            stiffness: BlockSparse {
                mesh,
                diag,
                right,
                up,
            },
        },
        weights_max_residual: weights.max_residual,
        weights_flagged: weights.flagged,
    })
}

//! Per-cell POD truncation of the local bases.
//!
//! Each weighted-mass block is diagonalized; the leading eigenvectors
//! carrying all but a fraction `η` of the block trace form the new local
//! basis. The stiffness couplings are transformed accordingly.

use nalgebra::{DMatrix, SymmetricEigen};

use super::matrix::{BlockDiagonal, BlockSparse, DofLayout};
use super::{LinearSystem, C, ZERO};
use crate::error::{Error, Result};
use crate::par;

/// Relative eigenvalue floor below which a block is reported as indefinite.
pub const PD_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PodTransform {
    pub eta: f64,
    /// Orthonormal columns spanning the retained local space, per cell.
    pub bases: Vec<DMatrix<C>>,
    /// All eigenvalues of each weighted-mass block, descending.
    pub eigenvalues: Vec<Vec<f64>>,
    pub original: DofLayout,
    pub reduced: DofLayout,
}

impl PodTransform {
    pub fn retained(&self, cell: usize) -> usize {
        self.bases[cell].ncols()
    }

    /// `Vᴴ b` per cell: original-space loads to reduced space.
    pub fn reduce(&self, b: &[C]) -> Vec<C> {
        let parts = par::map_range(self.bases.len(), |k| {
            let v = nalgebra::DVector::from_column_slice(&b[self.original.range(k)]);
            self.bases[k].ad_mul(&v).as_slice().to_vec()
        });
        parts.concat()
    }

    /// `V c` per cell: reduced coefficients to original coefficients.
    pub fn expand(&self, c: &[C]) -> Vec<C> {
        let parts = par::map_range(self.bases.len(), |k| {
            let v = nalgebra::DVector::from_column_slice(&c[self.reduced.range(k)]);
            (&self.bases[k] * v).as_slice().to_vec()
        });
        parts.concat()
    }
}

/// Minimal count `r` with `Σ_{k<r} λ_k ≥ (1−η) Σ λ_k` for descending `λ`.
pub fn retained_count(eigenvalues: &[f64], eta: f64) -> usize {
    let total: f64 = eigenvalues.iter().sum();
    let target = (1.0 - eta) * total;
    let mut acc = 0.0;
    for (k, &l) in eigenvalues.iter().enumerate() {
        acc += l;
        if acc >= target {
            return k + 1;
        }
    }
    eigenvalues.len()
}

fn sandwich(left: &DMatrix<C>, m: &DMatrix<C>, right: &DMatrix<C>) -> DMatrix<C> {
    left.ad_mul(&(m * right))
}

fn hermitian_part(m: DMatrix<C>) -> DMatrix<C> {
    (&m + m.adjoint()) * C::new(0.5, 0.0)
}

/// Truncates every cell basis with threshold `η ∈ (0, 1)`.
pub fn pod_truncate(system: &LinearSystem, eta: f64) -> Result<(LinearSystem, PodTransform)> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::config("POD threshold must lie in (0, 1)"));
    }
    let per_cell = par::map_range(system.layout.n_cells(), |k| -> Result<_> {
        let eig = SymmetricEigen::new(system.weighted_mass.blocks[k].clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let top = values[0];
        let bottom = *values.last().unwrap();
        if !(top > 0.0) || bottom < -PD_SLACK * top {
            return Err(Error::Integrity(format!(
                "weighted mass block of cell {k} is not positive definite (eigenvalues {bottom:e}..{top:e})"
            )));
        }
        let r = retained_count(&values, eta);
        let n = values.len();
        let mut basis = DMatrix::from_element(n, r, ZERO);
        for (c, &i) in order.iter().take(r).enumerate() {
            basis.set_column(c, &eig.eigenvectors.column(i));
        }
        Ok((basis, values))
    });
    let mut bases = Vec::with_capacity(per_cell.len());
    let mut eigenvalues = Vec::with_capacity(per_cell.len());
    for c in per_cell {
        let (b, v) = c?;
        bases.push(b);
        eigenvalues.push(v);
    }
    let reduced = DofLayout::from_sizes(bases.iter().map(|b| b.ncols()));
    let mesh = system.stiffness.mesh;
    let blocks = par::map_range(bases.len(), |k| {
        let v = &bases[k];
        let vr = &bases[mesh.upper_neighbor(k, 0)];
        let vu = &bases[mesh.upper_neighbor(k, 1)];
        (
            hermitian_part(sandwich(v, &system.mass.blocks[k], v)),
            hermitian_part(sandwich(v, &system.weighted_mass.blocks[k], v)),
            hermitian_part(sandwich(v, &system.stiffness.diag[k], v)),
            sandwich(v, &system.stiffness.right[k], vr),
            sandwich(v, &system.stiffness.up[k], vu),
        )
    });
    let mut mass = Vec::new();
    let mut mass_c = Vec::new();
    let mut diag = Vec::new();
    let mut right = Vec::new();
    let mut up = Vec::new();
    for (m, mc, a, r, u) in blocks {
        mass.push(m);
        mass_c.push(mc);
        diag.push(a);
        right.push(r);
        up.push(u);
    }
    let reduced_system = LinearSystem {
        layout: reduced.clone(),
        mass: BlockDiagonal { blocks: mass },
        weighted_mass: BlockDiagonal { blocks: mass_c },
        stiffness: BlockSparse {
            mesh,
            diag,
            right,
            up,
        },
    };
    Ok((
        reduced_system,
        PodTransform {
            eta,
            bases,
            eigenvalues,
            original: system.layout.clone(),
            reduced,
        },
    ))
}

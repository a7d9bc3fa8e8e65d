//! Block storage for the mass and stiffness matrices.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::kernels::{Block4, C, ZERO};
use crate::medium::Mesh;
use crate::par;

/// Start offset of each cell's dofs in the global vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofLayout {
    offsets: Vec<usize>,
}

impl DofLayout {
    pub fn from_sizes(sizes: impl IntoIterator<Item = usize>) -> Self {
        let mut offsets = vec![0];
        for s in sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        DofLayout { offsets }
    }

    pub fn n_cells(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_dofs(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn size(&self, cell: usize) -> usize {
        self.offsets[cell + 1] - self.offsets[cell]
    }

    pub fn range(&self, cell: usize) -> std::ops::Range<usize> {
        self.offsets[cell]..self.offsets[cell + 1]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn max_size(&self) -> usize {
        (0..self.n_cells()).map(|k| self.size(k)).max().unwrap_or(0)
    }
}

/// Places a direction-pair 4×4 block at direction indices `(di, dj)`.
pub(crate) fn put_block(m: &mut DMatrix<C>, di: usize, dj: usize, b: &Block4) {
    for r in 0..4 {
        for c in 0..4 {
            m[(4 * di + r, 4 * dj + c)] = b[r][c];
        }
    }
}

/// Block-diagonal matrix, one dense Hermitian block per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDiagonal {
    pub blocks: Vec<DMatrix<C>>,
}

impl BlockDiagonal {
    pub fn layout(&self) -> DofLayout {
        DofLayout::from_sizes(self.blocks.iter().map(|b| b.nrows()))
    }

    pub fn matvec(&self, layout: &DofLayout, u: &[C]) -> Vec<C> {
        let mut out = vec![ZERO; u.len()];
        par::for_each_segment_mut(&mut out, layout.offsets(), |k, seg| {
            let r = layout.range(k);
            let y = &self.blocks[k] * DVector::from_column_slice(&u[r]);
            seg.copy_from_slice(y.as_slice());
        });
        out
    }

    pub fn to_dense(&self) -> DMatrix<C> {
        let layout = self.layout();
        let n = layout.n_dofs();
        let mut m = DMatrix::from_element(n, n, ZERO);
        for (k, b) in self.blocks.iter().enumerate() {
            let o = layout.offsets()[k];
            m.view_mut((o, o), (b.nrows(), b.ncols())).copy_from(b);
        }
        m
    }
}

/// Face-sparse matrix on the periodic mesh.
///
/// Row block `K` couples to `K` itself, to its right and top neighbors
/// (`right[K]`, `up[K]`) and, through conjugate transposes of the
/// neighbors' blocks, to its left and bottom neighbors.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSparse {
    pub mesh: Mesh,
    pub diag: Vec<DMatrix<C>>,
    /// Test functions on `K`, trial functions on the right neighbor.
    pub right: Vec<DMatrix<C>>,
    /// Test functions on `K`, trial functions on the top neighbor.
    pub up: Vec<DMatrix<C>>,
}

impl BlockSparse {
    pub fn matvec(&self, layout: &DofLayout, u: &[C]) -> Vec<C> {
        let mut out = vec![ZERO; u.len()];
        let mesh = self.mesh;
        let n = mesh.cells_per_side() as i64;
        par::for_each_segment_mut(&mut out, layout.offsets(), |k, seg| {
            let c = mesh.index(k);
            let (i, j) = (c.i as i64, c.j as i64);
            let right = mesh.wrapped_id(i + 1, j);
            let up = mesh.wrapped_id(i, j + 1);
            let left = mesh.wrapped_id(i - 1 + n, j);
            let down = mesh.wrapped_id(i, j - 1 + n);
            let vec = |cell: usize| DVector::from_column_slice(&u[layout.range(cell)]);
            let mut y = &self.diag[k] * vec(k);
            y += &self.right[k] * vec(right);
            y += &self.up[k] * vec(up);
            y += self.right[left].ad_mul(&vec(left));
            y += self.up[down].ad_mul(&vec(down));
            seg.copy_from_slice(y.as_slice());
        });
        out
    }

    pub fn to_dense(&self, layout: &DofLayout) -> DMatrix<C> {
        let n = layout.n_dofs();
        let mut m = DMatrix::from_element(n, n, ZERO);
        let mesh = self.mesh;
        for k in 0..layout.n_cells() {
            let rk = layout.offsets()[k];
            let mut add = |col_cell: usize, b: &DMatrix<C>| {
                let rc = layout.offsets()[col_cell];
                let mut v = m.view_mut((rk, rc), (b.nrows(), b.ncols()));
                v += b;
            };
            add(k, &self.diag[k]);
            add(mesh.upper_neighbor(k, 0), &self.right[k]);
            add(mesh.upper_neighbor(k, 1), &self.up[k]);
        }
        // lower couplings as conjugate transposes
        for k in 0..layout.n_cells() {
            for (axis, blocks) in [(0, &self.right), (1, &self.up)] {
                let nb = mesh.upper_neighbor(k, axis);
                let b = blocks[k].adjoint();
                let (r, c) = (layout.offsets()[nb], layout.offsets()[k]);
                let mut v = m.view_mut((r, c), (b.nrows(), b.ncols()));
                v += &b;
            }
        }
        m
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.right)
            .chain(&self.up)
            .flat_map(|b| b.iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Nonzero entries as rows `i j re im` (global indices, 0-based).
    pub fn dump_coo(&self, layout: &DofLayout, out: &mut impl Write) -> std::io::Result<()> {
        let mesh = self.mesh;
        let mut write_block = |row_cell: usize, col_cell: usize, b: &DMatrix<C>| -> std::io::Result<()> {
            let (r0, c0) = (layout.offsets()[row_cell], layout.offsets()[col_cell]);
            for r in 0..b.nrows() {
                for c in 0..b.ncols() {
                    let v = b[(r, c)];
                    if v != ZERO {
                        writeln!(out, "{} {} {:e} {:e}", r0 + r, c0 + c, v.re, v.im)?;
                    }
                }
            }
            Ok(())
        };
        for k in 0..layout.n_cells() {
            write_block(k, k, &self.diag[k])?;
            for (axis, blocks) in [(0, &self.right), (1, &self.up)] {
                let nb = mesh.upper_neighbor(k, axis);
                write_block(k, nb, &blocks[k])?;
                write_block(nb, k, &blocks[k].adjoint())?;
            }
        }
        Ok(())
    }
}

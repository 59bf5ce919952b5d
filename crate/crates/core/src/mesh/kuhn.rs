use itertools::Itertools;

use super::{degeneracy_threshold, MeshError, Result, Tessellation};
use crate::model::GridImage;

/// Vertex indexing of the Kuhn triangulation of a lattice, without storing
/// the simplices.
#[derive(Debug, Clone)]
pub struct KuhnLattice {
    strides: Vec<usize>,
    cells: Vec<usize>,
    perms: Vec<Vec<usize>>,
}

impl KuhnLattice {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        if let Some(ax) = sizes.iter().position(|&s| s < 2) {
            return Err(MeshError::InvalidInput(format!("axis {ax} has {} samples, need at least 2", sizes[ax])));
        }
        let dim = sizes.len();
        let mut strides = vec![1usize; dim];
        for ax in 1..dim {
            strides[ax] = strides[ax - 1] * sizes[ax - 1];
        }
        let cells = sizes.iter().map(|s| s - 1).collect();
        let perms = (0..dim).permutations(dim).collect();
        Ok(Self { strides, cells, perms })
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn simplices_per_cell(&self) -> usize {
        self.perms.len()
    }

    /// Appends the vertex ids of every simplex of cell `c`.
    pub fn push_cell(&self, c: usize, out: &mut Vec<usize>) {
        let mut rem = c;
        let mut base = 0;
        for (ax, &n) in self.cells.iter().enumerate() {
            base += (rem % n) * self.strides[ax];
            rem /= n;
        }
        for perm in &self.perms {
            let mut v = base;
            out.push(v);
            for &ax in perm {
                v += self.strides[ax];
                out.push(v);
            }
        }
    }
}

/// Kuhn (Freudenthal) triangulation of a lattice: every N-cube cell is cut
/// into N! simplices, one per axis permutation, each following a monotone
/// vertex path from the cell's lower corner to its upper corner. Vertex `i`
/// of the mesh is lattice point `i`, and values are copied from the grid.
pub fn kuhn_triangulate(grid: &GridImage) -> Result<Tessellation> {
    let dim = grid.dim();
    let lattice = KuhnLattice::new(grid.sizes())?;
    let mut coords = Vec::with_capacity(grid.len() * dim);
    for i in 0..grid.len() {
        coords.extend(grid.point(i));
    }
    let count = lattice.cell_count() * lattice.simplices_per_cell();
    let mut simplices = Vec::with_capacity(count * (dim + 1));
    for c in 0..lattice.cell_count() {
        lattice.push_cell(c, &mut simplices);
    }
    let domain = grid.bounds().clone();
    let min_volume = degeneracy_threshold(&domain, count);
    Tessellation::from_simplices(domain, coords, grid.samples().to_vec(), simplices, min_volume)
}

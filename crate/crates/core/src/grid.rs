//! Uniform cell-centered Cartesian grids in one or two dimensions.

use crate::error::{domain, Result};
use crate::scalar::Scalar;

/// Cell-centered uniform mesh on a box. Unused second-axis entries are
/// inert (one cell of unit width) for one-dimensional grids.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    dim: usize,
    min: [T; 2],
    max: [T; 2],
    cells: [usize; 2],
    h: [T; 2],
}

/// Minimum number of cells per axis.
pub const MIN_CELLS: usize = 4;

impl<T: Scalar> Grid<T> {
    pub fn new_1d(min: T, max: T, cells: usize) -> Result<Self> {
        Self::new(1, [min, T::zero()], [max, T::one()], [cells, 1])
    }

    pub fn new_2d(min: [T; 2], max: [T; 2], cells: [usize; 2]) -> Result<Self> {
        Self::new(2, min, max, cells)
    }

    /// Square box `[lo, hi]^dim` with `cells` cells per axis.
    pub fn cube(dim: usize, lo: T, hi: T, cells: usize) -> Result<Self> {
        match dim {
            1 => Self::new_1d(lo, hi, cells),
            2 => Self::new_2d([lo, lo], [hi, hi], [cells, cells]),
            _ => domain(format!("dimension must be 1 or 2, got {dim}")),
        }
    }

    fn new(dim: usize, min: [T; 2], max: [T; 2], cells: [usize; 2]) -> Result<Self> {
        let mut h = [T::one(); 2];
        for axis in 0..dim {
            if cells[axis] < MIN_CELLS {
                return domain(format!(
                    "axis {axis} needs at least {MIN_CELLS} cells, got {}",
                    cells[axis]
                ));
            }
            if !(max[axis] > min[axis]) || !min[axis].is_finite() || !max[axis].is_finite() {
                return domain(format!("axis {axis} has an empty or non-finite extent"));
            }
            h[axis] = (max[axis] - min[axis]) / T::lit(cells[axis] as f64);
        }
        Ok(Self {
            dim,
            min,
            max,
            cells,
            h,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn min(&self) -> [T; 2] {
        self.min
    }

    pub fn max(&self) -> [T; 2] {
        self.max
    }

    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    pub fn h(&self) -> [T; 2] {
        self.h
    }

    /// Smallest spacing over the active axes.
    pub fn h_min(&self) -> T {
        (0..self.dim).map(|a| self.h[a]).fold(T::infinity(), T::min)
    }

    /// Cell measure `h^n`.
    pub fn cell_volume(&self) -> T {
        (0..self.dim).map(|a| self.h[a]).fold(T::one(), |acc, h| acc * h)
    }

    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.cells[0] + ix
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.cells[0], idx / self.cells[0])
    }

    /// Center of cell `idx`; the second component is zero in 1D.
    pub fn center(&self, idx: usize) -> [T; 2] {
        let (ix, iy) = self.coords(idx);
        let half = T::lit(0.5);
        let x = self.min[0] + (T::lit(ix as f64) + half) * self.h[0];
        let y = if self.dim == 2 {
            self.min[1] + (T::lit(iy as f64) + half) * self.h[1]
        } else {
            T::zero()
        };
        [x, y]
    }

    /// Midpoint of face `face` (in `0..=cells[axis]`) normal to `axis`, lying in
    /// row/column `cross` of the other axis.
    pub fn face_midpoint(&self, axis: usize, face: usize, cross: usize) -> [T; 2] {
        let half = T::lit(0.5);
        let along = self.min[axis] + T::lit(face as f64) * self.h[axis];
        let other = 1 - axis;
        let across = if self.dim == 2 {
            self.min[other] + (T::lit(cross as f64) + half) * self.h[other]
        } else {
            T::zero()
        };
        if axis == 0 {
            [along, across]
        } else {
            [across, along]
        }
    }

    /// True for cells in the outermost ring.
    pub fn is_boundary_cell(&self, idx: usize) -> bool {
        let (ix, iy) = self.coords(idx);
        let [nx, ny] = self.cells;
        ix == 0 || ix + 1 == nx || (self.dim == 2 && (iy == 0 || iy + 1 == ny))
    }

    /// Indices of the outermost ring, each listed once.
    pub fn boundary_cells(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_boundary_cell(i)).collect()
    }

    pub fn contains(&self, x: [T; 2]) -> bool {
        (0..self.dim).all(|a| x[a] >= self.min[a] && x[a] <= self.max[a])
    }

    /// Same box with every active axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let mut cells = self.cells;
        for c in cells.iter_mut().take(self.dim) {
            *c *= factor;
        }
        Self::new(self.dim, self.min, self.max, cells)
    }

    /// Same box with the given number of cells on every active axis.
    pub fn with_cells(&self, n: usize) -> Result<Self> {
        let mut cells = self.cells;
        for c in cells.iter_mut().take(self.dim) {
            *c = n;
        }
        Self::new(self.dim, self.min, self.max, cells)
    }
}

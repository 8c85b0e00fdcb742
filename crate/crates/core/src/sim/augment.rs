use alloc::vec::Vec;

use crate::grid::{Cell, Grid2D};

/// One of the eight symmetries of the square: `rot` counter-clockwise
/// quarter turns applied after an optional mirror of the x axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct D4 {
    pub flip: bool,
    pub rot: u8,
}

impl D4 {
    pub const IDENTITY: D4 = D4 { flip: false, rot: 0 };

    pub fn all() -> impl Iterator<Item = D4> {
        (0..8u8).map(|i| D4 { flip: i >= 4, rot: i % 4 })
    }

    /// Destination cell of `cell` in an `n × n` grid.
    pub fn map_cell(self, cell: Cell, n: usize) -> Cell {
        let mut c = cell;
        if self.flip {
            c = Cell::new(c.row, n - 1 - c.col);
        }
        for _ in 0..self.rot % 4 {
            // (x, y) -> (-y, x)
            c = Cell::new(c.col, n - 1 - c.row);
        }
        c
    }

    /// Applies the transform to a row-major `n × n` plane.
    pub fn apply_plane<T: Clone + Default>(self, plane: &[T], n: usize) -> Vec<T> {
        let mut out = alloc::vec![T::default(); plane.len()];
        for row in 0..n {
            for col in 0..n {
                let d = self.map_cell(Cell::new(row, col), n);
                out[d.row * n + d.col] = plane[row * n + col].clone();
            }
        }
        out
    }

    pub fn apply<T: Clone + Default>(self, grid: &Grid2D<T>) -> Grid2D<T> {
        let n = grid.side();
        let cells = self.apply_plane(grid.cells(), n);
        Grid2D::from_vec(*grid.spec(), *grid.origin(), cells).expect("same shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, Pose2D};

    #[test]
    fn group_structure() {
        let n = 8;
        let g = Grid2D::from_fn(GridSpec::new(n, 0.5).unwrap(), Pose2D::default(), |c| c.row * n + c.col);
        for t in D4::all() {
            let img = t.apply(&g);
            let mut seen: Vec<usize> = img.cells().to_vec();
            seen.sort();
            assert_eq!(seen, (0..n * n).collect::<Vec<_>>());
        }
        let r = D4 { flip: false, rot: 1 };
        let four = (0..4).fold(g.clone(), |acc, _| r.apply(&acc));
        assert_eq!(four, g);
        let f = D4 { flip: true, rot: 0 };
        assert_eq!(f.apply(&f.apply(&g)), g);
        assert_eq!(D4::all().map(|t| t.apply(&g).into_cells()).collect::<std::collections::HashSet<_>>().len(), 8);
    }

    #[test]
    fn quarter_turn_matches_point_rotation() {
        let spec = GridSpec::new(8, 0.5).unwrap();
        let r = D4 { flip: false, rot: 1 };
        for cell in spec.cells() {
            let p = spec.cell_center(cell).rot90();
            assert_eq!(spec.local_to_cell(p), Some(r.map_cell(cell, 8)));
        }
    }
}

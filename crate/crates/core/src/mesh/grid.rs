use crate::error::{Error, Result};

/// Minimum number of cells per axis.
pub const MIN_CELLS: usize = 4;

/// Uniform cell-centered box mesh in one or two dimensions.
///
/// A 1D grid is stored as an `nx × 1` grid with unit transverse extent, so
/// every kernel can loop over both axes without special cases. Cells are
/// ordered row-major: `index = j * nx + i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    cells: [usize; 2],
    extent: [f64; 2],
    spacing: [f64; 2],
}

impl Grid {
    /// Builds a grid from per-axis extents and cell counts. `extents` and
    /// `cells` must both have length `dim`.
    pub fn new(dim: usize, extents: &[f64], cells: &[usize]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::config("grid.dim", format!("must be 1 or 2 (got {dim})")));
        }
        if extents.len() != dim {
            return Err(Error::config(
                "grid.extents",
                format!("expected {dim} value(s), got {}", extents.len()),
            ));
        }
        if cells.len() != dim {
            return Err(Error::config(
                "grid.cells",
                format!("expected {dim} value(s), got {}", cells.len()),
            ));
        }
        for &l in extents {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::config(
                    "grid.extents",
                    format!("must be positive and finite (got {l})"),
                ));
            }
        }
        for &n in cells {
            if n < MIN_CELLS {
                return Err(Error::config(
                    "grid.cells",
                    format!("need at least {MIN_CELLS} cells per axis (got {n})"),
                ));
            }
        }
        let mut g = Grid {
            dim,
            cells: [cells[0], 1],
            extent: [extents[0], 1.0],
            spacing: [extents[0] / cells[0] as f64, 1.0],
        };
        if dim == 2 {
            g.cells[1] = cells[1];
            g.extent[1] = extents[1];
            g.spacing[1] = extents[1] / cells[1] as f64;
        }
        Ok(g)
    }

    pub fn line(length: f64, cells: usize) -> Result<Self> {
        Self::new(1, &[length], &[cells])
    }

    pub fn rect(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::new(2, &[lx, ly], &[nx, ny])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nx(&self) -> usize {
        self.cells[0]
    }

    /// Cells along y; 1 for a 1D grid.
    pub fn ny(&self) -> usize {
        self.cells[1]
    }

    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hx(&self) -> f64 {
        self.spacing[0]
    }

    /// Spacing along y; 1 for a 1D grid.
    pub fn hy(&self) -> f64 {
        self.spacing[1]
    }

    /// Per-axis spacing, length `dim`.
    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn extents(&self) -> &[f64] {
        &self.extent[..self.dim]
    }

    pub fn cell_counts(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    /// Smallest spacing over the active axes.
    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1]
    }

    /// |Ω|, the product of the extents.
    pub fn measure(&self) -> f64 {
        self.extent[0] * self.extent[1]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.cells[0] + i
    }

    /// `(i, j)` for a linear index.
    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.cells[0], k / self.cells[0])
    }

    /// Cell-center position. The y entry is 0.5 for a 1D grid.
    pub fn center(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.coords(k);
        [(i as f64 + 0.5) * self.spacing[0], (j as f64 + 0.5) * self.spacing[1]]
    }

    /// Geometric center of the box.
    pub fn domain_center(&self) -> [f64; 2] {
        [0.5 * self.extent[0], 0.5 * self.extent[1]]
    }

    /// Cell containing a point (clamped to the box).
    pub fn locate(&self, x: [f64; 2]) -> usize {
        let clamp = |v: f64, h: f64, n: usize| ((v / h).floor().max(0.0) as usize).min(n - 1);
        let i = clamp(x[0], self.spacing[0], self.cells[0]);
        let j = clamp(x[1], self.spacing[1], self.cells[1]);
        self.index(i, j)
    }

    /// Same grid with every axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let cells: Vec<usize> = self.cell_counts().iter().map(|&n| n * factor).collect();
        Self::new(self.dim, self.extents(), &cells)
    }

    pub(crate) fn check_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Contract(format!("{what}: field lives on a different grid")))
        }
    }
}

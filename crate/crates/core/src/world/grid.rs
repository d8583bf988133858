use crate::geometry::{Bounds, Point, Polygon};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid bounds are degenerate")]
    DegenerateBounds,
    #[error("grid resolution must be positive, got {0}")]
    BadResolution(f64),
}

pub type Cell = (usize, usize);

/// Row-major occupancy raster over the horizontal extent of the world.
/// Cell `(i, j)` covers `[x0 + i·res, x0 + (i+1)·res) × [y0 + j·res, …)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub origin: Point,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub inflation: f64,
    cells: Vec<bool>,
}

/// Rasterize polygons: a cell is occupied iff its center lies inside a
/// polygon or within `inflation` meters of one.
pub fn build_grid(obstacles: &[Polygon], bounds: &Bounds, resolution: f64, inflation: f64) -> Result<OccupancyGrid, GridError> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(GridError::BadResolution(resolution));
    }
    if bounds.is_degenerate() {
        return Err(GridError::DegenerateBounds);
    }
    let width = (bounds.width() / resolution).ceil() as usize;
    let height = (bounds.height() / resolution).ceil() as usize;
    let mut grid = OccupancyGrid {
        origin: Point::new(bounds.min[0], bounds.min[1]),
        resolution,
        width,
        height,
        inflation: inflation.max(0.0),
        cells: vec![false; width * height],
    };
    for polygon in obstacles {
        let reach = grid.inflation;
        grid.stamp(|p| polygon.distance(p) <= reach, polygon.bbox());
    }
    Ok(grid)
}

impl OccupancyGrid {
    /// Grid with explicit occupancy, origin at zero.
    pub fn from_cells(width: usize, height: usize, resolution: f64, cells: Vec<bool>) -> Self {
        assert_eq!(cells.len(), width * height, "cell count must equal width × height");
        Self { origin: Point::origin(), resolution, width, height, inflation: 0.0, cells }
    }

    pub fn free(width: usize, height: usize) -> Self {
        Self::from_cells(width, height, 1.0, vec![false; width * height])
    }

    fn stamp(&mut self, occupied: impl Fn(&Point) -> bool, (lo, hi): (Point, Point)) {
        let pad = self.inflation + self.resolution;
        let range = |lo: f64, hi: f64, origin: f64, n: usize| {
            let a = ((lo - pad - origin) / self.resolution).floor().max(0.0) as usize;
            let b = (((hi + pad - origin) / self.resolution).ceil().max(0.0) as usize).min(n);
            a..b
        };
        for j in range(lo.y, hi.y, self.origin.y, self.height) {
            for i in range(lo.x, hi.x, self.origin.x, self.width) {
                if !self.cells[j * self.width + i] && occupied(&self.cell_center((i, j))) {
                    self.cells[j * self.width + i] = true;
                }
            }
        }
    }

    /// Copy of the grid with discs (center, radius) marked occupied, inflated as the grid is.
    pub fn with_discs(&self, discs: &[(Point, f64)]) -> Self {
        let mut grid = self.clone();
        for &(c, r) in discs {
            let reach = r + grid.inflation;
            let bbox = (Point::new(c.x - r, c.y - r), Point::new(c.x + r, c.y + r));
            grid.stamp(|p| (p - c).norm() <= reach, bbox);
        }
        grid
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn index(&self, (i, j): Cell) -> usize {
        j * self.width + i
    }

    pub fn cell_of(&self, index: usize) -> Cell {
        (index % self.width, index / self.width)
    }

    pub fn in_grid(&self, i: i64, j: i64) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < self.height
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.cells[self.index(cell)]
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn cell_center(&self, (i, j): Cell) -> Point {
        Point::new(
            self.origin.x + (i as f64 + 0.5) * self.resolution,
            self.origin.y + (j as f64 + 0.5) * self.resolution,
        )
    }

    pub fn world_to_cell(&self, p: &Point) -> Option<Cell> {
        let i = ((p.x - self.origin.x) / self.resolution).floor();
        let j = ((p.y - self.origin.y) / self.resolution).floor();
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.width && (j as usize) < self.height)
            .then_some((i as usize, j as usize))
    }

    /// Whether the world point lies in an occupied cell or outside the grid.
    pub fn is_blocked(&self, p: &Point) -> bool {
        self.world_to_cell(p).is_none_or(|c| self.is_occupied(c))
    }

    /// Distance from each cell center to the nearest occupied cell center,
    /// capped at `horizon` meters.
    pub fn clearance_field(&self, horizon: f64) -> Vec<f64> {
        let reach = (horizon / self.resolution).ceil() as i64;
        let mut field = vec![horizon; self.cells.len()];
        for j in 0..self.height as i64 {
            for i in 0..self.width as i64 {
                let idx = self.index((i as usize, j as usize));
                if self.cells[idx] {
                    field[idx] = 0.0;
                    continue;
                }
                let mut best = horizon;
                for dj in -reach..=reach {
                    for di in -reach..=reach {
                        let (ni, nj) = (i + di, j + dj);
                        if self.in_grid(ni, nj) && self.cells[self.index((ni as usize, nj as usize))] {
                            let d = ((di * di + dj * dj) as f64).sqrt() * self.resolution;
                            best = best.min(d);
                        }
                    }
                }
                field[idx] = best;
            }
        }
        field
    }

    /// Binary portable grey map; free cells white, occupied black, `path` cells grey.
    /// Rows are written top (max y) first.
    pub fn to_pgm(&self, path: &[Cell]) -> Vec<u8> {
        let mut pixels: Vec<u8> = self.cells.iter().map(|&c| if c { 0 } else { 255 }).collect();
        for &cell in path {
            let idx = self.index(cell);
            pixels[idx] = 128;
        }
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for j in (0..self.height).rev() {
            out.extend_from_slice(&pixels[j * self.width..(j + 1) * self.width]);
        }
        out
    }
}

use crate::error::{invalid, Error, Result};
use crate::geometry::{Point, Rect, Region};
use serde::{Deserialize, Serialize};

/// Placement of a regular grid of rectangular cells. Cells are indexed
/// row-major from the lower-left corner: `iy * nx + ix`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterGrid {
    pub origin: Point,
    pub cell_w: f64,
    pub cell_h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl RasterGrid {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn cell_rect(&self, idx: usize) -> Rect {
        let (ix, iy) = self.coords(idx);
        Rect {
            min: Point::new(
                self.origin.x + ix as f64 * self.cell_w,
                self.origin.y + iy as f64 * self.cell_h,
            ),
            max: Point::new(
                self.origin.x + (ix + 1) as f64 * self.cell_w,
                self.origin.y + (iy + 1) as f64 * self.cell_h,
            ),
        }
    }

    pub fn cell_center(&self, idx: usize) -> Point {
        let (ix, iy) = self.coords(idx);
        Point::new(
            self.origin.x + (ix as f64 + 0.5) * self.cell_w,
            self.origin.y + (iy as f64 + 0.5) * self.cell_h,
        )
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_w * self.cell_h
    }

    /// Cell containing `p`, if any.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let fx = ((p.x - self.origin.x) / self.cell_w).floor();
        let fy = ((p.y - self.origin.y) / self.cell_h).floor();
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        // Points on the far edge belong to the last cell.
        let ix = (fx as usize).min(self.nx - 1);
        let iy = (fy as usize).min(self.ny - 1);
        if fx as usize > self.nx || fy as usize > self.ny {
            return None;
        }
        Some(self.index(ix, iy))
    }

    /// 4-neighbours of a cell.
    pub fn neighbors4(&self, idx: usize) -> impl Iterator<Item = usize> {
        let (ix, iy) = self.coords(idx);
        let (nx, ny) = (self.nx, self.ny);
        [
            (ix > 0).then(|| idx - 1),
            (ix + 1 < nx).then(|| idx + 1),
            (iy > 0).then(|| idx - nx),
            (iy + 1 < ny).then(|| idx + nx),
        ]
        .into_iter()
        .flatten()
    }
}

/// Grid with the exact area of `cell ∩ A` for every cell.
#[derive(Clone, Debug)]
pub struct Raster {
    pub grid: RasterGrid,
    pub inside_area: Vec<f64>,
}

/// Fractions at or below this are treated as outside.
const MIN_FRACTION: f64 = 1e-12;

impl Raster {
    /// Clip every cell of `grid` against `region`.
    pub fn from_grid(region: &Region, grid: RasterGrid) -> Result<Raster> {
        let ca = grid.cell_area();
        let bbox = region.bbox();
        let inside_area: Vec<f64> = (0..grid.len())
            .map(|i| {
                let r = grid.cell_rect(i);
                if !r.intersects(&bbox) {
                    return 0.0;
                }
                let a = region.clipped_area(&r).min(ca);
                if a <= MIN_FRACTION * ca {
                    0.0
                } else {
                    a
                }
            })
            .collect();
        if inside_area.iter().all(|&a| a == 0.0) {
            return Err(Error::EmptyRaster);
        }
        Ok(Raster { grid, inside_area })
    }

    pub fn fraction(&self, idx: usize) -> f64 {
        self.inside_area[idx] / self.grid.cell_area()
    }

    pub fn is_inside(&self, idx: usize) -> bool {
        self.inside_area[idx] > 0.0
    }

    pub fn is_full(&self, idx: usize) -> bool {
        self.inside_area[idx] >= self.grid.cell_area() * (1.0 - 1e-12)
    }

    pub fn inside_cells(&self) -> usize {
        self.inside_area.iter().filter(|&&a| a > 0.0).count()
    }

    pub fn total_area(&self) -> f64 {
        crate::stats::pairwise_sum(&self.inside_area)
    }
}

/// Square-cell raster over the bounding box of `region`; `resolution` cells
/// span its longer side.
pub fn rasterize(region: &Region, resolution: usize) -> Result<Raster> {
    if resolution < 64 {
        return Err(invalid(
            "resolution",
            format!("must be at least 64, got {resolution}"),
        ));
    }
    let bb = region.bbox();
    let side = bb.width().max(bb.height()) / resolution as f64;
    let nx = ((bb.width() / side).ceil() as usize).max(1);
    let ny = ((bb.height() / side).ceil() as usize).max(1);
    let grid = RasterGrid {
        origin: bb.min,
        cell_w: side,
        cell_h: side,
        nx,
        ny,
    };
    Raster::from_grid(region, grid)
}

//! Partitions of the study region into strata.
//!
//! Strata are unions of raster cells clipped to the region, so areas,
//! sampling and quadrature are exact on the clipped geometry.

mod balanced;
mod io;
mod order;
mod raster;

pub use balanced::{equal_area_compact_partition, PartitionParams};
pub use io::{StratificationFile, SvgOptions};
pub use order::sequential_index;
pub use raster::{rasterize, Raster, RasterGrid};

use crate::error::{invalid, Error, Result};
use crate::geometry::{convex_hull, hull_diameter, max_cross_distance, Point, Rect, Region};
use crate::rng::RandomStream;
use crate::stats::pairwise_sum;
use serde::{Deserialize, Serialize};

/// Size and shape summaries of a partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n: usize,
    /// Largest stratum diameter.
    pub d_n: f64,
    /// Largest distance between points of consecutively indexed strata.
    pub big_d_n: f64,
    pub a_min: f64,
    pub a_max: f64,
    /// `n · d_n²`.
    pub b_hat: f64,
    /// `n · a_min`.
    pub c_hat: f64,
    /// `n · D_n²`.
    pub k_hat: f64,
    /// Number of strata cut by a supplied discontinuity boundary.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub boundary_stratum_count: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Stratum {
    pub cells: Vec<usize>,
    pub area: f64,
    pub centroid: Point,
    pub diameter: f64,
    pub hull: Vec<Point>,
    cum_area: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Stratification {
    region: Region,
    raster: Raster,
    assignment: Vec<Option<u32>>,
    strata: Vec<Stratum>,
    adjacency: Vec<Vec<usize>>,
    order: Vec<usize>,
    diagnostics: Diagnostics,
    objective_history: Vec<f64>,
}

impl Stratification {
    /// Assemble a stratification from a cell assignment. Every inside cell
    /// must be assigned; strata are numbered `0..n` densely.
    pub fn from_assignment(
        region: Region,
        raster: Raster,
        assignment: Vec<Option<u32>>,
        order: Option<Vec<usize>>,
    ) -> Result<Stratification> {
        let grid = raster.grid;
        if assignment.len() != grid.len() {
            return Err(invalid("assignment", "length differs from raster size"));
        }
        let mut n = 0usize;
        for (i, a) in assignment.iter().enumerate() {
            match (raster.is_inside(i), a) {
                (true, None) => {
                    return Err(invalid(
                        "assignment",
                        format!("inside cell {i} is unassigned"),
                    ))
                }
                (false, Some(_)) => {
                    return Err(invalid(
                        "assignment",
                        format!("outside cell {i} is assigned"),
                    ))
                }
                (_, Some(s)) => n = n.max(*s as usize + 1),
                _ => {}
            }
        }
        let mut cells: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, a) in assignment.iter().enumerate() {
            if let Some(s) = a {
                cells[*s as usize].push(i);
            }
        }
        if let Some(k) = cells.iter().position(|c| c.is_empty()) {
            return Err(Error::EmptyStratum(k));
        }

        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, a) in assignment.iter().enumerate() {
            let Some(s) = *a else { continue };
            for j in grid.neighbors4(i) {
                if let Some(t) = assignment[j] {
                    if t != s {
                        adjacency[s as usize].push(t as usize);
                    }
                }
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }

        let strata: Vec<Stratum> = cells
            .into_iter()
            .enumerate()
            .map(|(s, cs)| build_stratum(&region, &raster, &assignment, s as u32, cs))
            .collect();

        let order = match order {
            Some(o) => {
                let mut seen = vec![false; n];
                if o.len() != n
                    || o.iter()
                        .any(|&i| i >= n || std::mem::replace(&mut seen[i], true))
                {
                    return Err(invalid("order", "not a permutation of the strata"));
                }
                o
            }
            None => sequential_index(
                &strata.iter().map(|s| s.centroid).collect::<Vec<_>>(),
                &adjacency,
            ),
        };
        let diagnostics = compute_diagnostics(&strata, &order);
        Ok(Stratification {
            region,
            raster,
            assignment,
            strata,
            adjacency,
            order,
            diagnostics,
            objective_history: Vec::new(),
        })
    }

    pub(crate) fn with_history(mut self, history: Vec<f64>) -> Self {
        self.objective_history = history;
        self
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn raster(&self) -> &Raster {
        &self.raster
    }

    pub fn assignment(&self) -> &[Option<u32>] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    pub fn stratum(&self, i: usize) -> &Stratum {
        &self.strata[i]
    }

    pub fn areas(&self) -> Vec<f64> {
        self.strata.iter().map(|s| s.area).collect()
    }

    pub fn total_area(&self) -> f64 {
        pairwise_sum(&self.areas())
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn are_adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    /// Sequential index: `order[k]` is the stratum visited k-th.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    /// Clustering objective after each accepted refinement iteration.
    pub fn objective_history(&self) -> &[f64] {
        &self.objective_history
    }

    /// Replace the sequential index and recompute `D_n`.
    pub fn set_order(&mut self, order: Vec<usize>) -> Result<()> {
        let n = self.len();
        let mut seen = vec![false; n];
        if order.len() != n
            || order
                .iter()
                .any(|&i| i >= n || std::mem::replace(&mut seen[i], true))
        {
            return Err(invalid("order", "not a permutation of the strata"));
        }
        self.order = order;
        self.diagnostics = compute_diagnostics(&self.strata, &self.order);
        Ok(())
    }

    /// Stratum containing `p`, by raster cell.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let c = self.raster.grid.locate(p)?;
        self.assignment[c].map(|s| s as usize)
    }

    /// Relative spread `(a_max − a_min) / mean area`.
    pub fn area_spread(&self) -> f64 {
        let d = &self.diagnostics;
        (d.a_max - d.a_min) / (self.total_area() / self.len() as f64)
    }

    /// Share of consecutive pairs in the sequential index that share a side.
    pub fn adjacent_pair_fraction(&self) -> f64 {
        if self.order.len() < 2 {
            return 1.0;
        }
        let hits = self
            .order
            .windows(2)
            .filter(|w| self.are_adjacent(w[0], w[1]))
            .count();
        hits as f64 / (self.order.len() - 1) as f64
    }

    /// Whether every stratum is 4-connected on the raster.
    pub fn is_connected(&self) -> bool {
        (0..self.len()).all(|s| self.stratum_components(s) == 1)
    }

    fn stratum_components(&self, s: usize) -> usize {
        let grid = &self.raster.grid;
        let cells = &self.strata[s].cells;
        let mut seen = std::collections::HashSet::with_capacity(cells.len());
        let mut comps = 0;
        for &start in cells {
            if !seen.insert(start) {
                continue;
            }
            comps += 1;
            let mut stack = vec![start];
            while let Some(c) = stack.pop() {
                for nb in grid.neighbors4(c) {
                    if self.assignment[nb] == Some(s as u32) && seen.insert(nb) {
                        stack.push(nb);
                    }
                }
            }
        }
        comps
    }

    /// Uniform point in stratum `i`.
    pub fn sample_in_stratum(&self, i: usize, stream: &mut RandomStream) -> Point {
        let st = &self.strata[i];
        let total = *st.cum_area.last().unwrap();
        let u = stream.next_f64() * total;
        let k = st
            .cum_area
            .partition_point(|&c| c <= u)
            .min(st.cells.len() - 1);
        let cell = st.cells[k];
        let rect = self.raster.grid.cell_rect(cell);
        if self.raster.is_full(cell) {
            return rect.sample(stream);
        }
        loop {
            let p = rect.sample(stream);
            if self.region.contains(p) {
                return p;
            }
        }
    }

    /// Diagnostics including `card(I)` for the boundary of `set`.
    pub fn diagnostics_with_boundary(&self, set: &Region) -> Diagnostics {
        let mut d = self.diagnostics.clone();
        d.boundary_stratum_count = Some(self.boundary_stratum_count(set));
        d
    }

    /// Number of strata whose intersection with `set` is neither empty nor
    /// the whole stratum.
    pub fn boundary_stratum_count(&self, set: &Region) -> usize {
        let grid = &self.raster.grid;
        self.strata
            .iter()
            .filter(|st| {
                let mut inter = 0.0;
                let mut split_cell = false;
                for &c in &st.cells {
                    let rect = grid.cell_rect(c);
                    let in_a = self.raster.inside_area[c];
                    let b = if self.raster.is_full(c) {
                        set.clipped_area(&rect)
                    } else {
                        // Partial cells: count as cut when the boundary of
                        // `set` crosses the cell at all.
                        let b = set.clipped_area(&rect);
                        if b > 0.0 && b < rect.area() {
                            split_cell = true;
                        }
                        b.min(in_a)
                    };
                    inter += b;
                }
                let tol = 1e-9 * st.area;
                split_cell || (inter > tol && inter < st.area - tol)
            })
            .count()
    }
}

fn build_stratum(
    region: &Region,
    raster: &Raster,
    assignment: &[Option<u32>],
    s: u32,
    cells: Vec<usize>,
) -> Stratum {
    let grid = &raster.grid;
    let areas: Vec<f64> = cells.iter().map(|&c| raster.inside_area[c]).collect();
    let area = pairwise_sum(&areas);
    let mut cum_area = Vec::with_capacity(cells.len());
    let mut acc = 0.0;
    for a in &areas {
        acc += a;
        cum_area.push(acc);
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    let mut pts = Vec::new();
    for (&c, &a) in cells.iter().zip(&areas) {
        let p = grid.cell_center(c);
        cx += a * p.x;
        cy += a * p.y;
        if raster.is_full(c) {
            let on_edge = grid.neighbors4(c).count() < 4
                || grid.neighbors4(c).any(|nb| assignment[nb] != Some(s));
            if on_edge {
                pts.extend_from_slice(&grid.cell_rect(c).corners());
            }
        } else {
            pts.extend(region.boundary_points_in_rect(&grid.cell_rect(c)));
        }
    }
    let hull = convex_hull(&pts);
    Stratum {
        diameter: hull_diameter(&hull),
        hull,
        centroid: Point::new(cx / area, cy / area),
        area,
        cells,
        cum_area,
    }
}

fn compute_diagnostics(strata: &[Stratum], order: &[usize]) -> Diagnostics {
    let n = strata.len();
    let d_n = strata.iter().map(|s| s.diameter).fold(0.0, f64::max);
    let big_d_n = order
        .windows(2)
        .map(|w| max_cross_distance(&strata[w[0]].hull, &strata[w[1]].hull))
        .fold(0.0, f64::max);
    let a_min = strata.iter().map(|s| s.area).fold(f64::INFINITY, f64::min);
    let a_max = strata.iter().map(|s| s.area).fold(0.0, f64::max);
    let nf = n as f64;
    Diagnostics {
        n,
        d_n,
        big_d_n,
        a_min,
        a_max,
        b_hat: nf * d_n * d_n,
        c_hat: nf * a_min,
        k_hat: nf * big_d_n * big_d_n,
        boundary_stratum_count: None,
    }
}

/// `k × k` congruent cells over the bounding box of `region`, ordered
/// boustrophedon. Cells missing the region are dropped.
pub fn grid_partition(region: &Region, k: usize) -> Result<Stratification> {
    grid_partition_xy(region, k, k)
}

/// `kx × ky` grid partition of the bounding box.
pub fn grid_partition_xy(region: &Region, kx: usize, ky: usize) -> Result<Stratification> {
    if kx == 0 || ky == 0 {
        return Err(invalid("k_per_side", "must be at least 1"));
    }
    let bb = region.bbox();
    let sub = 64usize.div_ceil(kx.max(ky)).max(1);
    let grid = RasterGrid {
        origin: bb.min,
        cell_w: bb.width() / (kx * sub) as f64,
        cell_h: bb.height() / (ky * sub) as f64,
        nx: kx * sub,
        ny: ky * sub,
    };
    grid_partition_on(region, grid, kx, ky, sub)
}

fn grid_partition_on(
    region: &Region,
    grid: RasterGrid,
    kx: usize,
    ky: usize,
    sub: usize,
) -> Result<Stratification> {
    let raster = Raster::from_grid(region, grid)?;
    // Block label for every raster cell.
    let block = |c: usize| {
        let (ix, iy) = grid.coords(c);
        (iy / sub) * kx + ix / sub
    };
    let mut occupied = vec![false; kx * ky];
    for c in 0..grid.len() {
        if raster.is_inside(c) {
            occupied[block(c)] = true;
        }
    }
    let mut label = vec![u32::MAX; kx * ky];
    let mut next = 0u32;
    let mut order = Vec::new();
    for by in 0..ky {
        for bx in 0..kx {
            let b = by * kx + bx;
            if occupied[b] {
                label[b] = next;
                next += 1;
            }
        }
    }
    for by in 0..ky {
        let row: Vec<usize> = if by % 2 == 0 {
            (0..kx).collect()
        } else {
            (0..kx).rev().collect()
        };
        for bx in row {
            let l = label[by * kx + bx];
            if l != u32::MAX {
                order.push(l as usize);
            }
        }
    }
    let assignment = (0..grid.len())
        .map(|c| raster.is_inside(c).then(|| label[block(c)]))
        .collect();
    Stratification::from_assignment(region.clone(), raster, assignment, Some(order))
}

/// Rectangle-aligned helper used by tests and the harness: `k × k` grid over
/// an explicit rectangle `r ⊇ A`.
pub fn grid_partition_over(region: &Region, r: Rect, k: usize) -> Result<Stratification> {
    if k == 0 {
        return Err(invalid("k_per_side", "must be at least 1"));
    }
    let sub = 64usize.div_ceil(k).max(1);
    let grid = RasterGrid {
        origin: r.min,
        cell_w: r.width() / (k * sub) as f64,
        cell_h: r.height() / (k * sub) as f64,
        nx: k * sub,
        ny: k * sub,
    };
    grid_partition_on(region, grid, k, k, sub)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_grid() {
        let s = grid_partition(&Region::unit_square(), 2).unwrap();
        assert_eq!(s.len(), 4);
        for st in s.strata() {
            assert!((st.area - 0.25).abs() < 1e-15);
        }
        let d = s.diagnostics();
        assert!((d.d_n - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((d.b_hat - 2.0).abs() < 1e-14);
        assert!((d.c_hat - 1.0).abs() < 1e-14);
        // serpentine: (0,0) → (1,0) → (1,1) → (0,1)
        assert_eq!(s.order(), &[0, 1, 3, 2]);
        assert_eq!(s.adjacent_pair_fraction(), 1.0);
    }

    #[test]
    fn rectangle_grid_cells() {
        let r = Region::rectangle(0.0, 0.0, 2.0, 1.0).unwrap();
        let s = grid_partition(&r, 2).unwrap();
        for st in s.strata() {
            assert!((st.area - 0.5).abs() < 1e-14);
            assert!((st.diameter - 1.25f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn four_by_four_boustrophedon() {
        let s = grid_partition(&Region::unit_square(), 4).unwrap();
        assert!((s.diagnostics().big_d_n - 5f64.sqrt() / 4.0).abs() < 1e-14);
        assert_eq!(&s.order()[..8], &[0, 1, 2, 3, 7, 6, 5, 4]);
    }

    #[test]
    fn grid_invariants_across_k() {
        for k in [1, 3, 4, 8, 16, 32] {
            let s = grid_partition(&Region::unit_square(), k).unwrap();
            let n = (k * k) as f64;
            let d = s.diagnostics();
            assert!((d.b_hat - 2.0).abs() < 1e-12, "k={k}");
            assert!((d.c_hat - 1.0).abs() < 1e-12, "k={k}");
            assert!((s.total_area() - 1.0).abs() < 1e-12);
            assert!(s.is_connected());
            assert!((d.a_max * n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_stratum_has_zero_big_d() {
        let s = grid_partition(&Region::unit_square(), 1).unwrap();
        assert_eq!(s.order(), &[0]);
        assert_eq!(s.diagnostics().big_d_n, 0.0);
    }

    #[test]
    fn disk_boundary_cuts_twelve_cells() {
        // Brute-force oracle: a cell is cut when its closest point lies
        // strictly inside the circle and its farthest corner strictly outside.
        let s = grid_partition(&Region::unit_square(), 4).unwrap();
        let (c, r) = (Point::new(0.5, 0.5), 0.3);
        let mut oracle = 0;
        for iy in 0..4 {
            for ix in 0..4 {
                let rect = Rect::new(
                    ix as f64 / 4.0,
                    iy as f64 / 4.0,
                    (ix + 1) as f64 / 4.0,
                    (iy + 1) as f64 / 4.0,
                );
                let near = Point::new(
                    c.x.clamp(rect.min.x, rect.max.x),
                    c.y.clamp(rect.min.y, rect.max.y),
                );
                let far = rect.corners().iter().map(|p| p.dist(c)).fold(0.0, f64::max);
                if near.dist(c) < r && far > r {
                    oracle += 1;
                }
            }
        }
        let disk = Region::disk(c, r).unwrap();
        assert_eq!(s.boundary_stratum_count(&disk), oracle);
        assert_eq!(oracle, 12);
    }

    #[test]
    fn sampling_stays_in_stratum() {
        let d = Region::disk(Point::new(0.0, 0.0), 1.0).unwrap();
        let s = grid_partition(&d, 3).unwrap();
        let root = RandomStream::new(4);
        for i in 0..s.len() {
            let mut st = root.child(i as u64);
            for _ in 0..200 {
                let p = s.sample_in_stratum(i, &mut st);
                assert!(d.contains(p));
                assert_eq!(s.locate(p), Some(i));
            }
        }
    }

    #[test]
    fn partial_strata_areas_sum_to_region() {
        let d = Region::disk(Point::new(0.3, -0.2), 1.3).unwrap();
        let s = grid_partition(&d, 5).unwrap();
        assert!((s.total_area() / d.area() - 1.0).abs() < 1e-9);
        for st in s.strata() {
            assert!(st.area <= st.diameter * st.diameter + 1e-12);
        }
    }
}

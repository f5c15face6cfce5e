//! Equal-area compact partition: balanced k-means on raster cells.

use super::raster::{rasterize, Raster, RasterGrid};
use super::Stratification;
use crate::error::{invalid, Error, Result};
use crate::geometry::{Point, Region};
use crate::rng::RandomStream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PartitionParams {
    /// Raster cells along the longer side of the bounding box.
    pub resolution: usize,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PartitionParams {
    fn default() -> Self {
        Self {
            resolution: 256,
            max_iter: 200,
            restarts: 4,
            seed: 1,
        }
    }
}

/// Rounds of balanced fill and re-centring before refinement.
const LLOYD_ROUNDS: usize = 8;
/// Candidate centres examined per cell during the balanced fill.
const NEAREST: usize = 6;
/// Refinement stops once an iteration gains less than this fraction.
const MIN_GAIN: f64 = 1e-6;

/// Partition `region` into `n` connected strata of equal area (within one
/// raster cell), minimising the mean squared distance of cells to their
/// stratum centroid.
pub fn equal_area_compact_partition(
    region: &Region,
    n: usize,
    params: &PartitionParams,
) -> Result<Stratification> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if params.restarts == 0 {
        return Err(invalid("restarts", "must be at least 1"));
    }
    let raster = rasterize(region, params.resolution)?;
    let cells = Cells::new(&raster);
    if cells.len() < 20 * n {
        return Err(Error::TooFew {
            needed: 20 * n,
            got: cells.len(),
        });
    }

    let root = RandomStream::new(params.seed);
    let runs: Vec<std::result::Result<Run, Run>> = (0..params.restarts)
        .into_par_iter()
        .map(|r| {
            let mut stream = root.child(r as u64);
            run_once(&cells, n, params.max_iter, &mut stream)
        })
        .collect();

    let mut best: Option<Run> = None;
    let mut best_failed: Option<Run> = None;
    for run in runs {
        match run {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.objective() < b.objective()) {
                    best = Some(r);
                }
            }
            Err(r) => {
                if best_failed
                    .as_ref()
                    .is_none_or(|b| r.objective() < b.objective())
                {
                    best_failed = Some(r);
                }
            }
        }
    }
    match best {
        Some(run) => {
            let history = run.history.clone();
            Ok(run
                .into_stratification(region, raster, &cells)?
                .with_history(history))
        }
        None => {
            let run = best_failed.expect("at least one restart");
            let history = run.history.clone();
            let s = run
                .into_stratification(region, raster, &cells)?
                .with_history(history);
            Err(Error::Connectivity {
                message: format!("could not make all {n} strata 4-connected"),
                best: Box::new(s),
            })
        }
    }
}

/// Inside cells in compact numbering.
struct Cells {
    grid: RasterGrid,
    raster_index: Vec<usize>,
    /// Compact index of each raster cell, `usize::MAX` outside.
    compact: Vec<usize>,
    pos: Vec<Point>,
    weight: Vec<f64>,
}

const NONE: usize = usize::MAX;

impl Cells {
    fn new(raster: &Raster) -> Cells {
        let grid = raster.grid;
        let ca = grid.cell_area();
        let mut compact = vec![NONE; grid.len()];
        let mut raster_index = Vec::new();
        let mut pos = Vec::new();
        let mut weight = Vec::new();
        for i in 0..grid.len() {
            if raster.is_inside(i) {
                compact[i] = raster_index.len();
                raster_index.push(i);
                pos.push(grid.cell_center(i));
                // Full cells get weight exactly 1.
                weight.push(if raster.is_full(i) {
                    1.0
                } else {
                    raster.inside_area[i] / ca
                });
            }
        }
        Cells {
            grid,
            raster_index,
            compact,
            pos,
            weight,
        }
    }

    fn len(&self) -> usize {
        self.pos.len()
    }

    fn neighbors(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.grid
            .neighbors4(self.raster_index[c])
            .map(|r| self.compact[r])
            .filter(|&k| k != NONE)
    }

    /// The eight surrounding cells in ring order N, NE, E, SE, S, SW, W, NW
    /// (compact indices, `NONE` when outside).
    fn ring(&self, c: usize) -> [usize; 8] {
        let (ix, iy) = self.grid.coords(self.raster_index[c]);
        let (ix, iy) = (ix as isize, iy as isize);
        let offs = [
            (0, 1),
            (1, 1),
            (1, 0),
            (1, -1),
            (0, -1),
            (-1, -1),
            (-1, 0),
            (-1, 1),
        ];
        let mut out = [NONE; 8];
        for (k, (dx, dy)) in offs.iter().enumerate() {
            let (x, y) = (ix + dx, iy + dy);
            if x >= 0 && y >= 0 && (x as usize) < self.grid.nx && (y as usize) < self.grid.ny {
                out[k] = self.compact[self.grid.index(x as usize, y as usize)];
            }
        }
        out
    }
}

/// Mutable partition state.
#[derive(Clone)]
struct State {
    n: usize,
    label: Vec<usize>,
    load: Vec<f64>,
    sx: Vec<f64>,
    sy: Vec<f64>,
}

impl State {
    fn from_labels(cells: &Cells, n: usize, label: Vec<usize>) -> State {
        let mut s = State {
            n,
            label,
            load: vec![0.0; n],
            sx: vec![0.0; n],
            sy: vec![0.0; n],
        };
        for c in 0..cells.len() {
            s.add(cells, c, s.label[c]);
        }
        s
    }

    fn add(&mut self, cells: &Cells, c: usize, t: usize) {
        let w = cells.weight[c];
        self.load[t] += w;
        self.sx[t] += w * cells.pos[c].x;
        self.sy[t] += w * cells.pos[c].y;
    }

    fn remove(&mut self, cells: &Cells, c: usize, s: usize) {
        let w = cells.weight[c];
        self.load[s] -= w;
        self.sx[s] -= w * cells.pos[c].x;
        self.sy[s] -= w * cells.pos[c].y;
    }

    fn mv(&mut self, cells: &Cells, c: usize, t: usize) {
        let s = self.label[c];
        self.remove(cells, c, s);
        self.label[c] = t;
        self.add(cells, c, t);
    }

    fn centroids(&self) -> Vec<Point> {
        (0..self.n)
            .map(|s| Point::new(self.sx[s] / self.load[s], self.sy[s] / self.load[s]))
            .collect()
    }

    /// Mean squared distance of cells to their stratum centroid.
    fn objective(&self, cells: &Cells) -> f64 {
        let g = self.centroids();
        let mut acc = vec![0.0; self.n];
        for c in 0..cells.len() {
            acc[self.label[c]] += cells.weight[c] * cells.pos[c].dist2(g[self.label[c]]);
        }
        let total: f64 = self.load.iter().sum();
        crate::stats::pairwise_sum(&acc) / total
    }

    /// Whether `c` can leave its stratum without disconnecting it: the
    /// stratum cells among its eight neighbours form a single run that
    /// touches a side.
    fn is_simple(&self, cells: &Cells, c: usize) -> bool {
        let s = self.label[c];
        let ring = cells.ring(c);
        let inside: Vec<bool> = ring
            .iter()
            .map(|&k| k != NONE && self.label[k] == s)
            .collect();
        if !inside.iter().step_by(2).any(|&b| b) {
            // Isolated cell; removing it empties the stratum only if it is
            // the last one, which `load` guards against.
            return false;
        }
        let mut runs = 0;
        for k in 0..8 {
            let prev = inside[(k + 7) % 8];
            if inside[k] && !prev {
                // A run starts here; count it if it contains a side cell.
                let mut j = k;
                let mut touches = false;
                while inside[j % 8] && j < k + 8 {
                    touches |= j % 2 == 0;
                    j += 1;
                }
                if touches {
                    runs += 1;
                }
            }
        }
        if inside.iter().all(|&b| b) {
            runs = 1;
        }
        runs == 1
    }
}

struct Run {
    state: State,
    history: Vec<f64>,
    connected: bool,
}

impl Run {
    fn objective(&self) -> f64 {
        *self.history.last().unwrap_or(&f64::INFINITY)
    }

    fn into_stratification(
        self,
        region: &Region,
        raster: Raster,
        cells: &Cells,
    ) -> Result<Stratification> {
        let mut assignment = vec![None; raster.grid.len()];
        for c in 0..cells.len() {
            assignment[cells.raster_index[c]] = Some(self.state.label[c] as u32);
        }
        Stratification::from_assignment(region.clone(), raster, assignment, None)
    }
}

fn run_once(
    cells: &Cells,
    n: usize,
    max_iter: usize,
    stream: &mut RandomStream,
) -> std::result::Result<Run, Run> {
    if n == 1 {
        let state = State::from_labels(cells, 1, vec![0; cells.len()]);
        let obj = state.objective(cells);
        return Ok(Run {
            state,
            history: vec![obj],
            connected: true,
        });
    }
    let mut centers = kmeans_pp(cells, n, stream);
    let mut label = balanced_fill(cells, &centers);
    for _ in 0..LLOYD_ROUNDS {
        let st = State::from_labels(cells, n, label.clone());
        centers = st.centroids();
        label = balanced_fill(cells, &centers);
    }
    let mut state = State::from_labels(cells, n, label);
    let connected = repair_connectivity(cells, &mut state);
    rebalance(cells, &mut state);

    let mut history = vec![state.objective(cells)];
    for _ in 0..max_iter {
        let mut trial = state.clone();
        let swaps = refine_swaps(cells, &mut trial);
        if swaps == 0 {
            break;
        }
        let obj = trial.objective(cells);
        let last = *history.last().unwrap();
        if obj < last {
            state = trial;
            history.push(obj);
        }
        if !(obj < last * (1.0 - MIN_GAIN)) {
            break;
        }
    }
    let run = Run {
        state,
        history,
        connected,
    };
    if run.connected {
        Ok(run)
    } else {
        Err(run)
    }
}

fn kmeans_pp(cells: &Cells, n: usize, stream: &mut RandomStream) -> Vec<Point> {
    let m = cells.len();
    let pick = |u: f64, cum: &[f64]| cum.partition_point(|&c| c <= u).min(m - 1);
    let mut cum = Vec::with_capacity(m);
    let mut acc = 0.0;
    for &w in &cells.weight {
        acc += w;
        cum.push(acc);
    }
    let first = pick(stream.next_f64() * acc, &cum);
    let mut centers = vec![cells.pos[first]];
    let mut d2: Vec<f64> = cells
        .pos
        .iter()
        .map(|p| p.dist2(cells.pos[first]))
        .collect();
    while centers.len() < n {
        cum.clear();
        let mut acc = 0.0;
        for c in 0..m {
            acc += cells.weight[c] * d2[c];
            cum.push(acc);
        }
        let k = if acc > 0.0 {
            pick(stream.next_f64() * acc, &cum)
        } else {
            (stream.next_f64() * m as f64) as usize % m
        };
        let p = cells.pos[k];
        centers.push(p);
        for c in 0..m {
            d2[c] = d2[c].min(cells.pos[c].dist2(p));
        }
    }
    centers
}

/// Assign cells in order of increasing distance to their nearest centres,
/// capping every centre at an equal share of the total weight.
fn balanced_fill(cells: &Cells, centers: &[Point]) -> Vec<usize> {
    let m = cells.len();
    let n = centers.len();
    let k = NEAREST.min(n);
    let total: f64 = cells.weight.iter().sum();
    let cap = total / n as f64 + 0.5;

    // Squared distances are non-negative, so their bit patterns sort like
    // the values; ties fall back to cell then centre index.
    let mut pairs: Vec<u128> = Vec::with_capacity(m * k);
    let mut buf: Vec<(f64, usize)> = Vec::with_capacity(n);
    for c in 0..m {
        buf.clear();
        buf.extend(
            centers
                .iter()
                .enumerate()
                .map(|(j, g)| (cells.pos[c].dist2(*g), j)),
        );
        buf.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(d, j) in &buf[..k] {
            pairs.push(((d.to_bits() as u128) << 64) | ((c as u128) << 32) | j as u128);
        }
    }
    pairs.sort_unstable();

    let mut label = vec![NONE; m];
    let mut load = vec![0.0; n];
    for &key in &pairs {
        let c = ((key >> 32) & 0xFFFF_FFFF) as usize;
        let j = (key & 0xFFFF_FFFF) as usize;
        if label[c] == NONE && load[j] + cells.weight[c] <= cap {
            label[c] = j;
            load[j] += cells.weight[c];
        }
    }
    for c in 0..m {
        if label[c] != NONE {
            continue;
        }
        let j = (0..n)
            .filter(|&j| load[j] + cells.weight[c] <= cap)
            .min_by(|&a, &b| {
                cells.pos[c]
                    .dist2(centers[a])
                    .total_cmp(&cells.pos[c].dist2(centers[b]))
                    .then(a.cmp(&b))
            })
            .unwrap_or_else(|| {
                (0..n)
                    .min_by(|&a, &b| load[a].total_cmp(&load[b]).then(a.cmp(&b)))
                    .unwrap()
            });
        label[c] = j;
        load[j] += cells.weight[c];
    }
    // A centre that attracted nothing takes its nearest cell from the
    // heaviest stratum.
    for j in 0..n {
        if load[j] > 0.0 {
            continue;
        }
        let heavy = (0..n)
            .max_by(|&a, &b| load[a].total_cmp(&load[b]).then(b.cmp(&a)))
            .unwrap();
        let c = (0..m)
            .filter(|&c| label[c] == heavy)
            .min_by(|&a, &b| {
                cells.pos[a]
                    .dist2(centers[j])
                    .total_cmp(&cells.pos[b].dist2(centers[j]))
                    .then(a.cmp(&b))
            })
            .unwrap();
        load[heavy] -= cells.weight[c];
        load[j] += cells.weight[c];
        label[c] = j;
    }
    label
}

/// Components of stratum `s`, largest first.
fn components(cells: &Cells, state: &State, members: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = std::collections::HashSet::with_capacity(members.len());
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for &start in members {
        if !seen.insert(start) {
            continue;
        }
        let s = state.label[start];
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(c) = stack.pop() {
            for nb in cells.neighbors(c) {
                if state.label[nb] == s && seen.insert(nb) {
                    comp.push(nb);
                    stack.push(nb);
                }
            }
        }
        comps.push(comp);
    }
    let wsum = |v: &Vec<usize>| v.iter().map(|&c| cells.weight[c]).sum::<f64>();
    comps.sort_by(|a, b| {
        wsum(b)
            .total_cmp(&wsum(a))
            .then(a.iter().min().cmp(&b.iter().min()))
    });
    comps
}

fn members(state: &State) -> Vec<Vec<usize>> {
    let mut m = vec![Vec::new(); state.n];
    for (c, &s) in state.label.iter().enumerate() {
        m[s].push(c);
    }
    m
}

/// Merge every detached component into the neighbouring stratum it touches
/// most. Returns false if some component touches no other stratum.
fn repair_connectivity(cells: &Cells, state: &mut State) -> bool {
    let mut ok = true;
    for _pass in 0..4 {
        let mut changed = false;
        let mem = members(state);
        for s in 0..state.n {
            let comps = components(cells, state, &mem[s]);
            for comp in comps.into_iter().skip(1) {
                let mut contact = vec![0usize; state.n];
                for &c in &comp {
                    for nb in cells.neighbors(c) {
                        let t = state.label[nb];
                        if t != s {
                            contact[t] += 1;
                        }
                    }
                }
                let best = (0..state.n)
                    .filter(|&t| contact[t] > 0)
                    .max_by(|&a, &b| contact[a].cmp(&contact[b]).then(b.cmp(&a)));
                match best {
                    Some(t) => {
                        for &c in &comp {
                            state.mv(cells, c, t);
                        }
                        changed = true;
                    }
                    None => ok = false,
                }
            }
        }
        if !changed {
            break;
        }
    }
    ok
}

/// Move single full-weight cells along stratum paths from the heaviest to
/// the lightest stratum until loads differ by at most one cell.
fn rebalance(cells: &Cells, state: &mut State) {
    let n = state.n;
    let limit = 4 * cells.len();
    for _ in 0..limit {
        let heavy = (0..n)
            .max_by(|&a, &b| state.load[a].total_cmp(&state.load[b]).then(b.cmp(&a)))
            .unwrap();
        let light = (0..n)
            .min_by(|&a, &b| state.load[a].total_cmp(&state.load[b]).then(a.cmp(&b)))
            .unwrap();
        if state.load[heavy] - state.load[light] <= 1.0 + 1e-9 {
            return;
        }
        if !shift_along_path(cells, state, heavy, light) {
            return;
        }
    }
}

/// Best movable cell from `s` into neighbouring stratum `t`.
fn best_mover(
    cells: &Cells,
    state: &State,
    mem_s: &[usize],
    s: usize,
    t: usize,
    g: &[Point],
) -> Option<usize> {
    if mem_s.len() <= 1 {
        return None;
    }
    mem_s
        .iter()
        .copied()
        .filter(|&c| cells.weight[c] == 1.0 && state.label[c] == s)
        .filter(|&c| cells.neighbors(c).any(|nb| state.label[nb] == t))
        .filter(|&c| state.is_simple(cells, c))
        .min_by(|&a, &b| {
            let da = cells.pos[a].dist2(g[t]) - cells.pos[a].dist2(g[s]);
            let db = cells.pos[b].dist2(g[t]) - cells.pos[b].dist2(g[s]);
            da.total_cmp(&db).then(a.cmp(&b))
        })
}

/// Returns false when no unit could be moved.
fn shift_along_path(cells: &Cells, state: &mut State, from: usize, to: usize) -> bool {
    let n = state.n;
    let g = state.centroids();
    let mem = members(state);
    // BFS over strata; an edge s→t exists when s can hand a cell to t.
    let mut prev = vec![NONE; n];
    let mut mover = vec![NONE; n];
    prev[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(s) = queue.pop_front() {
        if s == to {
            break;
        }
        let mut nbrs: Vec<usize> = mem[s]
            .iter()
            .flat_map(|&c| cells.neighbors(c).map(|nb| state.label[nb]))
            .filter(|&t| t != s)
            .collect();
        nbrs.sort_unstable();
        nbrs.dedup();
        for t in nbrs {
            if prev[t] != NONE {
                continue;
            }
            if let Some(c) = best_mover(cells, state, &mem[s], s, t, &g) {
                prev[t] = s;
                mover[t] = c;
                queue.push_back(t);
            }
        }
    }
    if prev[to] == NONE {
        return false;
    }
    let mut hops = Vec::new();
    let mut t = to;
    while t != from {
        hops.push((prev[t], t, mover[t]));
        t = prev[t];
    }
    // Push as many cells as the imbalance allows through the same path,
    // applying hops from the end so earlier choices stay valid.
    let units = ((state.load[from] - state.load[to]) / 2.0).floor().max(1.0) as usize;
    let mut mem = mem;
    let mut moved_any = false;
    for rep in 0..units {
        for &(s, t, first) in &hops {
            let c = if rep == 0 {
                Some(first).filter(|&c| {
                    state.label[c] == s
                        && cells.neighbors(c).any(|nb| state.label[nb] == t)
                        && state.is_simple(cells, c)
                })
            } else {
                best_mover(cells, state, &mem[s], s, t, &g)
            };
            let Some(c) = c else {
                return moved_any;
            };
            state.mv(cells, c, t);
            mem[t].push(c);
        }
        moved_any = true;
    }
    true
}

/// Balance-preserving pairwise exchanges between adjacent strata that reduce
/// the within-stratum sum of squares for fixed centroids.
fn refine_swaps(cells: &Cells, state: &mut State) -> usize {
    let g = state.centroids();
    let n = state.n;
    // Candidate moves per ordered pair (s, t), with their gain.
    let mut cand: std::collections::BTreeMap<(usize, usize), Vec<(f64, usize)>> =
        Default::default();
    for c in 0..cells.len() {
        if cells.weight[c] != 1.0 {
            continue;
        }
        let s = state.label[c];
        let mut seen = [NONE; 4];
        for (k, nb) in cells.neighbors(c).enumerate() {
            let t = state.label[nb];
            if t == s || seen.contains(&t) {
                continue;
            }
            seen[k] = t;
            let delta = cells.pos[c].dist2(g[t]) - cells.pos[c].dist2(g[s]);
            cand.entry((s, t)).or_default().push((delta, c));
        }
    }
    for v in cand.values_mut() {
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
    let mut swaps = 0;
    for s in 0..n {
        for t in s + 1..n {
            let (Some(ab), Some(ba)) = (cand.get(&(s, t)), cand.get(&(t, s))) else {
                continue;
            };
            let (mut i, mut j) = (0, 0);
            while i < ab.len() && j < ba.len() {
                let (da, a) = ab[i];
                let (db, b) = ba[j];
                if da + db >= -1e-15 {
                    break;
                }
                let a_ok = state.label[a] == s
                    && cells.neighbors(a).any(|nb| state.label[nb] == t)
                    && state.is_simple(cells, a);
                if !a_ok {
                    i += 1;
                    continue;
                }
                state.mv(cells, a, t);
                let b_ok = state.label[b] == t
                    && cells.neighbors(b).any(|nb| state.label[nb] == s)
                    && state.is_simple(cells, b);
                if !b_ok {
                    state.mv(cells, a, s);
                    j += 1;
                    continue;
                }
                state.mv(cells, b, s);
                swaps += 1;
                i += 1;
                j += 1;
            }
        }
    }
    swaps
}

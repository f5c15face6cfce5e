use crate::geometry::Point;

/// Order strata so that consecutive ones share a side where possible.
///
/// Tries, in turn: a serpentine sweep over centroid rows, a depth-first
/// Hamiltonian path search on the adjacency graph, and finally a greedy path
/// improved by 2-opt. The first candidate with every consecutive pair
/// adjacent wins; otherwise the one with the most adjacent pairs.
pub fn sequential_index(centroids: &[Point], adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = centroids.len();
    if n <= 1 {
        return (0..n).collect();
    }
    let adjacent = |a: usize, b: usize| adjacency[a].binary_search(&b).is_ok();
    let score = |o: &[usize]| o.windows(2).filter(|w| adjacent(w[0], w[1])).count();

    let serp = serpentine(centroids);
    if score(&serp) == n - 1 {
        return serp;
    }
    if let Some(path) = hamiltonian_path(centroids, adjacency) {
        return path;
    }
    let greedy = greedy_two_opt(centroids, adjacency);
    if score(&greedy) >= score(&serp) {
        greedy
    } else {
        serp
    }
}

/// Rows by centroid y (exact levels when few, otherwise √n bands), sweeping
/// alternately left-to-right and right-to-left.
fn serpentine(c: &[Point]) -> Vec<usize> {
    let n = c.len();
    let mut ys: Vec<f64> = c.iter().map(|p| p.y).collect();
    ys.sort_by(f64::total_cmp);
    let span = (ys[n - 1] - ys[0]).max(f64::MIN_POSITIVE);
    let mut levels: Vec<f64> = Vec::new();
    for &y in &ys {
        if levels.last().is_none_or(|&l| y - l > 1e-9 * span) {
            levels.push(y);
        }
    }
    let band_of: Vec<usize> = if levels.len() * levels.len() <= 4 * n {
        c.iter()
            .map(|p| levels.partition_point(|&l| l < p.y - 1e-9 * span))
            .collect()
    } else {
        let bands = (n as f64).sqrt().round().max(1.0) as usize;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| c[a].y.total_cmp(&c[b].y).then(a.cmp(&b)));
        let mut band = vec![0; n];
        for (rank, &i) in idx.iter().enumerate() {
            band[i] = rank * bands / n;
        }
        band
    };
    let nb = band_of.iter().max().unwrap() + 1;
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for i in 0..n {
        rows[band_of[i]].push(i);
    }
    let mut out = Vec::with_capacity(n);
    for (r, row) in rows.iter_mut().enumerate() {
        row.sort_by(|&a, &b| c[a].x.total_cmp(&c[b].x).then(a.cmp(&b)));
        if r % 2 == 1 {
            row.reverse();
        }
        out.extend_from_slice(row);
    }
    out
}

const DFS_BUDGET: usize = 200_000;

/// Warnsdorff-ordered depth-first search with a step budget.
fn hamiltonian_path(c: &[Point], adjacency: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = c.len();
    // Start from low-degree strata near the extremes of the region.
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by(|&a, &b| {
        adjacency[a]
            .len()
            .cmp(&adjacency[b].len())
            .then(c[a].x.total_cmp(&c[b].x))
            .then(c[a].y.total_cmp(&c[b].y))
            .then(a.cmp(&b))
    });
    let mut budget = DFS_BUDGET;
    for &s in starts.iter().take(8) {
        let mut visited = vec![false; n];
        let mut path = vec![s];
        visited[s] = true;
        if dfs(adjacency, c, &mut visited, &mut path, &mut budget) {
            return Some(path);
        }
        if budget == 0 {
            break;
        }
    }
    None
}

fn dfs(
    adj: &[Vec<usize>],
    c: &[Point],
    visited: &mut [bool],
    path: &mut Vec<usize>,
    budget: &mut usize,
) -> bool {
    if path.len() == visited.len() {
        return true;
    }
    if *budget == 0 {
        return false;
    }
    *budget -= 1;
    let cur = *path.last().unwrap();
    let free = |v: usize, visited: &[bool]| adj[v].iter().filter(|&&w| !visited[w]).count();
    let mut next: Vec<usize> = adj[cur].iter().copied().filter(|&v| !visited[v]).collect();
    next.sort_by(|&a, &b| {
        free(a, visited)
            .cmp(&free(b, visited))
            .then(c[cur].dist2(c[a]).total_cmp(&c[cur].dist2(c[b])))
            .then(a.cmp(&b))
    });
    for v in next {
        visited[v] = true;
        path.push(v);
        if dfs(adj, c, visited, path, budget) {
            return true;
        }
        path.pop();
        visited[v] = false;
        if *budget == 0 {
            return false;
        }
    }
    false
}

fn greedy_two_opt(c: &[Point], adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = c.len();
    let adjacent = |a: usize, b: usize| adjacency[a].binary_search(&b).is_ok();
    let span = c
        .iter()
        .flat_map(|p| c.iter().map(move |q| p.dist(*q)))
        .fold(0.0, f64::max)
        .max(1.0);
    let cost =
        |a: usize, b: usize| c[a].dist(c[b]) + if adjacent(a, b) { 0.0 } else { 10.0 * span };

    let start = (0..n)
        .min_by(|&a, &b| c[a].x.total_cmp(&c[b].x).then(a.cmp(&b)))
        .unwrap();
    let mut visited = vec![false; n];
    let mut path = vec![start];
    visited[start] = true;
    while path.len() < n {
        let cur = *path.last().unwrap();
        let next = (0..n)
            .filter(|&v| !visited[v])
            .min_by(|&a, &b| cost(cur, a).total_cmp(&cost(cur, b)).then(a.cmp(&b)))
            .unwrap();
        visited[next] = true;
        path.push(next);
    }
    // 2-opt on an open path.
    let mut improved = true;
    let mut rounds = 0;
    while improved && rounds < 50 {
        improved = false;
        rounds += 1;
        for i in 0..n - 1 {
            for j in i + 2..n {
                let a = path[i];
                let b = path[i + 1];
                let cj = path[j];
                let before = cost(a, b)
                    + if j + 1 < n {
                        cost(cj, path[j + 1])
                    } else {
                        0.0
                    };
                let after = cost(a, cj) + if j + 1 < n { cost(b, path[j + 1]) } else { 0.0 };
                if after + 1e-12 < before {
                    path[i + 1..=j].reverse();
                    improved = true;
                }
            }
        }
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(k: usize) -> (Vec<Point>, Vec<Vec<usize>>) {
        let mut c = Vec::new();
        let mut adj = vec![Vec::new(); k * k];
        for iy in 0..k {
            for ix in 0..k {
                c.push(Point::new(ix as f64, iy as f64));
                let i = iy * k + ix;
                if ix + 1 < k {
                    adj[i].push(i + 1);
                    adj[i + 1].push(i);
                }
                if iy + 1 < k {
                    adj[i].push(i + k);
                    adj[i + k].push(i);
                }
            }
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        (c, adj)
    }

    #[test]
    fn grid_gets_serpentine() {
        let (c, adj) = grid(2);
        assert_eq!(sequential_index(&c, &adj), vec![0, 1, 3, 2]);
    }

    #[test]
    fn irregular_graph_gets_hamiltonian_path() {
        // A 3×3 grid with jittered centroids defeats the row sweep.
        let (mut c, adj) = grid(3);
        c[4].y += 0.6;
        c[5].y -= 0.6;
        let o = sequential_index(&c, &adj);
        assert_eq!(o.len(), 9);
        assert!(o.windows(2).all(|w| adj[w[0]].contains(&w[1])));
    }

    #[test]
    fn star_graph_falls_back() {
        let c = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(-1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        let adj = vec![vec![1, 2, 3], vec![0], vec![0], vec![0]];
        let o = sequential_index(&c, &adj);
        let mut sorted = o.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }
}

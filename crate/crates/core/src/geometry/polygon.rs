use super::{segment_intersection, Point, Rect};
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Simple polygon with optional holes. Exterior is stored counter-clockwise,
/// holes clockwise.
#[derive(Clone, Debug)]
pub struct Polygon {
    exterior: Vec<Point>,
    holes: Vec<Vec<Point>>,
    area: f64,
    bbox: Rect,
    triangles: Vec<[Point; 3]>,
    tri_cum: Vec<f64>,
}

fn normalize_ring(mut ring: Vec<Point>, what: &str) -> Result<Vec<Point>> {
    if ring.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidGeometry(format!(
            "{what} has non-finite coordinates"
        )));
    }
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    ring.dedup();
    while ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(Error::InvalidGeometry(format!(
            "{what} needs at least 3 distinct vertices"
        )));
    }
    Ok(ring)
}

pub(crate) fn signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    let mut s = 0.0;
    for i in 0..n {
        s += ring[i].cross(ring[(i + 1) % n]);
    }
    0.5 * s
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let len2 = a.dist2(b);
    let tol = 1e-12 * len2.max(f64::MIN_POSITIVE);
    if orient(a, b, p).powi(2) > tol * len2.max(1e-300) {
        return false;
    }
    let d = (p - a).dot(b - a);
    d >= -tol && d <= len2 + tol
}

/// Closed segment intersection test.
fn segments_touch(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p1, q1, q2))
        || (d2 == 0.0 && on_segment(p2, q1, q2))
        || (d3 == 0.0 && on_segment(q1, p1, p2))
        || (d4 == 0.0 && on_segment(q2, p1, p2))
}

fn ring_edges(ring: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    (0..ring.len()).map(move |i| (ring[i], ring[(i + 1) % ring.len()]))
}

fn check_simple(ring: &[Point], what: &str) -> Result<()> {
    let n = ring.len();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        for j in (i + 1)..n {
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Shared vertex is fine; collinear backtracking is not.
                let shared = if j == i + 1 { b } else { a };
                let (u, v) = if j == i + 1 { (a, d) } else { (c, b) };
                if orient(u, shared, v) == 0.0 && (u - shared).dot(v - shared) > 0.0 {
                    return Err(Error::InvalidGeometry(format!(
                        "{what} folds back on itself"
                    )));
                }
                continue;
            }
            if segments_touch(a, b, c, d) {
                return Err(Error::InvalidGeometry(format!(
                    "{what} is self-intersecting (edges {i} and {j})"
                )));
            }
        }
    }
    Ok(())
}

fn rings_touch(r1: &[Point], r2: &[Point]) -> bool {
    ring_edges(r1).any(|(a, b)| ring_edges(r2).any(|(c, d)| segments_touch(a, b, c, d)))
}

/// Even-odd test, boundary excluded from the guarantee.
fn ring_contains(ring: &[Point], p: Point) -> bool {
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn ring_on_boundary(ring: &[Point], p: Point) -> bool {
    ring_edges(ring).any(|(a, b)| on_segment(p, a, b))
}

/// Sutherland–Hodgman clip of `ring` against `rect`.
pub(crate) fn clip_ring(ring: &[Point], rect: &Rect) -> Vec<Point> {
    let mut out: Vec<Point> = ring.to_vec();
    // (axis, bound, keep_greater)
    let planes = [
        (0, rect.min.x, true),
        (0, rect.max.x, false),
        (1, rect.min.y, true),
        (1, rect.max.y, false),
    ];
    for &(axis, bound, keep_ge) in &planes {
        if out.is_empty() {
            break;
        }
        let coord = |p: &Point| if axis == 0 { p.x } else { p.y };
        let inside = |p: &Point| {
            if keep_ge {
                coord(p) >= bound
            } else {
                coord(p) <= bound
            }
        };
        let input = std::mem::take(&mut out);
        let n = input.len();
        for i in 0..n {
            let cur = input[i];
            let prev = input[(i + n - 1) % n];
            let (ci, pi) = (inside(&cur), inside(&prev));
            if ci {
                if !pi {
                    out.push(cross_plane(prev, cur, axis, bound));
                }
                out.push(cur);
            } else if pi {
                out.push(cross_plane(prev, cur, axis, bound));
            }
        }
    }
    out
}

fn cross_plane(a: Point, b: Point, axis: usize, bound: f64) -> Point {
    if axis == 0 {
        let t = (bound - a.x) / (b.x - a.x);
        Point::new(bound, a.y + t * (b.y - a.y))
    } else {
        let t = (bound - a.y) / (b.y - a.y);
        Point::new(a.x + t * (b.x - a.x), bound)
    }
}

impl Polygon {
    pub fn new(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Polygon> {
        let mut exterior = normalize_ring(exterior, "exterior ring")?;
        check_simple(&exterior, "exterior ring")?;
        let ext_area = signed_area(&exterior);
        if ext_area == 0.0 {
            return Err(Error::DegenerateRegion);
        }
        if ext_area < 0.0 {
            exterior.reverse();
        }

        let mut hs = Vec::with_capacity(holes.len());
        for (k, h) in holes.into_iter().enumerate() {
            let mut h = normalize_ring(h, "hole ring")?;
            let a = signed_area(&h);
            if a == 0.0 {
                return Err(Error::InvalidGeometry(format!("hole {k} has zero area")));
            }
            if a > 0.0 {
                h.reverse();
            }
            check_simple(&h, "hole ring")?;
            if rings_touch(&h, &exterior) || h.iter().any(|&p| !ring_contains(&exterior, p)) {
                return Err(Error::InvalidGeometry(format!(
                    "hole {k} is not strictly inside the exterior ring"
                )));
            }
            for (j, other) in hs.iter().enumerate() {
                let other: &Vec<Point> = other;
                if rings_touch(&h, other)
                    || ring_contains(other, h[0])
                    || ring_contains(&h, other[0])
                {
                    return Err(Error::InvalidGeometry(format!("holes {j} and {k} overlap")));
                }
            }
            hs.push(h);
        }

        let area = signed_area(&exterior) - hs.iter().map(|h| -signed_area(h)).sum::<f64>();
        if area <= 0.0 {
            return Err(Error::DegenerateRegion);
        }
        let bbox = exterior.iter().fold(
            Rect {
                min: exterior[0],
                max: exterior[0],
            },
            |r, &p| r.union(&Rect { min: p, max: p }),
        );
        let triangles = triangulate(&exterior, &hs);
        let mut tri_cum = Vec::with_capacity(triangles.len());
        let mut acc = 0.0;
        for t in &triangles {
            acc += 0.5 * orient(t[0], t[1], t[2]).abs();
            tri_cum.push(acc);
        }
        Ok(Polygon {
            exterior,
            holes: hs,
            area,
            bbox,
            triangles,
            tri_cum,
        })
    }

    pub fn exterior(&self) -> &[Point] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<Point>] {
        &self.holes
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn bbox(&self) -> Rect {
        self.bbox
    }

    fn rings(&self) -> impl Iterator<Item = &Vec<Point>> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    pub fn contains(&self, p: Point) -> bool {
        if self.rings().any(|r| ring_on_boundary(r, p)) {
            return true;
        }
        ring_contains(&self.exterior, p) && !self.holes.iter().any(|h| ring_contains(h, p))
    }

    pub fn clipped_area(&self, rect: &Rect) -> f64 {
        let outer = signed_area(&clip_ring(&self.exterior, rect)).abs();
        let holes: f64 = self
            .holes
            .iter()
            .map(|h| signed_area(&clip_ring(h, rect)).abs())
            .sum();
        (outer - holes).max(0.0)
    }

    /// Fraction of segment `a→b` lying in the polygon.
    pub fn intersection_fraction(&self, a: Point, b: Point) -> f64 {
        let mut ts = vec![0.0, 1.0];
        for ring in self.rings() {
            for (c, d) in ring_edges(ring) {
                if let Some((t, _)) = segment_intersection(a, b, c, d) {
                    ts.push(t);
                }
            }
        }
        ts.sort_by(|x, y| x.total_cmp(y));
        let mut frac = 0.0;
        for w in ts.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            if t1 - t0 <= 0.0 {
                continue;
            }
            let mid = a + (b - a) * (0.5 * (t0 + t1));
            if self.contains(mid) {
                frac += t1 - t0;
            }
        }
        frac
    }

    pub fn push_boundary_points(&self, rect: &Rect, out: &mut Vec<Point>) {
        let rc = rect.corners();
        for ring in self.rings() {
            for (a, b) in ring_edges(ring) {
                if rect.contains(a) {
                    out.push(a);
                }
                let ebox = Rect::new(a.x, a.y, b.x, b.y);
                if !ebox.intersects(rect) {
                    continue;
                }
                for k in 0..4 {
                    if let Some((t, _)) = segment_intersection(a, b, rc[k], rc[(k + 1) % 4]) {
                        out.push(a + (b - a) * t);
                    }
                }
            }
        }
    }

    pub fn uniform_point(&self, stream: &mut RandomStream) -> Point {
        let total = *self.tri_cum.last().unwrap();
        let u = stream.next_f64() * total;
        let i = self
            .tri_cum
            .partition_point(|&c| c <= u)
            .min(self.triangles.len() - 1);
        let [a, b, c] = self.triangles[i];
        let mut s = stream.next_f64();
        let mut t = stream.next_f64();
        if s + t > 1.0 {
            s = 1.0 - s;
            t = 1.0 - t;
        }
        a + (b - a) * s + (c - a) * t
    }

    pub fn triangulated_area(&self) -> f64 {
        *self.tri_cum.last().unwrap()
    }
}

/// Ear clipping; holes are first bridged into the exterior ring.
fn triangulate(exterior: &[Point], holes: &[Vec<Point>]) -> Vec<[Point; 3]> {
    let mut ring = exterior.to_vec();
    let mut order: Vec<usize> = (0..holes.len()).collect();
    let max_x = |h: &Vec<Point>| h.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    order.sort_by(|&a, &b| max_x(&holes[b]).total_cmp(&max_x(&holes[a])));

    for (pos, &hi) in order.iter().enumerate() {
        let hole = &holes[hi];
        let (hv, hp) = hole
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.x.total_cmp(&b.1.x).then(a.1.y.total_cmp(&b.1.y)))
            .unwrap();
        let pending: Vec<&Vec<Point>> = order[pos..].iter().map(|&k| &holes[k]).collect();
        let mut cands: Vec<usize> = (0..ring.len()).collect();
        cands.sort_by(|&a, &b| hp.dist2(ring[a]).total_cmp(&hp.dist2(ring[b])));
        let vi = cands
            .into_iter()
            .find(|&vi| bridge_visible(hp, ring[vi], &ring, &pending, exterior, holes))
            .unwrap_or(0);
        let v = ring[vi];
        let mut merged = Vec::with_capacity(ring.len() + hole.len() + 2);
        merged.extend_from_slice(&ring[..=vi]);
        for k in 0..=hole.len() {
            merged.push(hole[(hv + k) % hole.len()]);
        }
        merged.push(v);
        merged.extend_from_slice(&ring[vi + 1..]);
        ring = merged;
    }
    ear_clip(&ring)
}

fn bridge_visible(
    p: Point,
    v: Point,
    ring: &[Point],
    pending: &[&Vec<Point>],
    exterior: &[Point],
    holes: &[Vec<Point>],
) -> bool {
    let blocked = |a: Point, b: Point| {
        if a == p || b == p || a == v || b == v {
            return false;
        }
        segments_touch(p, v, a, b)
    };
    if ring_edges(ring).any(|(a, b)| blocked(a, b)) {
        return false;
    }
    if pending
        .iter()
        .any(|h| ring_edges(h).any(|(a, b)| blocked(a, b)))
    {
        return false;
    }
    let mid = (p + v) * 0.5;
    ring_contains(exterior, mid) && !holes.iter().any(|h| ring_contains(h, mid))
}

fn ear_clip(pts: &[Point]) -> Vec<[Point; 3]> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    let mut tris = Vec::with_capacity(pts.len());
    let mut k = 0usize;
    let mut misses = 0usize;
    while idx.len() > 3 {
        let m = idx.len();
        k %= m;
        let (i0, i1, i2) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
        let (a, b, c) = (pts[i0], pts[i1], pts[i2]);
        let turn = orient(a, b, c);
        let is_ear = if turn == 0.0 {
            // Collinear or spike vertex: drop it without a triangle.
            idx.remove(k);
            misses = 0;
            continue;
        } else if turn < 0.0 {
            false
        } else {
            !idx.iter().any(|&j| {
                let q = pts[j];
                if q == a || q == b || q == c {
                    return false;
                }
                orient(a, b, q) >= 0.0 && orient(b, c, q) >= 0.0 && orient(c, a, q) >= 0.0
            })
        };
        if is_ear || misses > m {
            tris.push([a, b, c]);
            idx.remove(k);
            misses = 0;
            k = k.saturating_sub(1);
        } else {
            k += 1;
            misses += 1;
        }
    }
    if idx.len() == 3 {
        let (a, b, c) = (pts[idx[0]], pts[idx[1]], pts[idx[2]]);
        if orient(a, b, c) != 0.0 {
            tris.push([a, b, c]);
        }
    }
    tris
}

use super::Point;

/// Convex hull by monotone chain, counter-clockwise, no collinear points.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.iter().copied().filter(|p| p.is_finite()).collect();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: Point, a: Point, b: Point| (a - o).cross(b - o);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Diameter of a convex polygon given counter-clockwise (rotating calipers).
pub fn hull_diameter(hull: &[Point]) -> f64 {
    let m = hull.len();
    match m {
        0 | 1 => return 0.0,
        2 => return hull[0].dist(hull[1]),
        _ => {}
    }
    let area2 = |a: Point, b: Point, c: Point| (b - a).cross(c - a).abs();
    let mut best = 0.0f64;
    let mut j = 1;
    for i in 0..m {
        let ni = (i + 1) % m;
        let mut steps = 0;
        while steps < m
            && area2(hull[i], hull[ni], hull[(j + 1) % m]) > area2(hull[i], hull[ni], hull[j])
        {
            j = (j + 1) % m;
            steps += 1;
        }
        best = best.max(hull[i].dist(hull[j])).max(hull[ni].dist(hull[j]));
    }
    best
}

/// Largest distance between a point of `a` and a point of `b`.
pub fn max_cross_distance(a: &[Point], b: &[Point]) -> f64 {
    let ha = convex_hull(a);
    let hb = convex_hull(b);
    let mut best = 0.0f64;
    for p in &ha {
        for q in &hb {
            best = best.max(p.dist2(*q));
        }
    }
    best.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;

    fn brute_diameter(pts: &[Point]) -> f64 {
        let mut best = 0.0f64;
        for p in pts {
            for q in pts {
                best = best.max(p.dist(*q));
            }
        }
        best
    }

    #[test]
    fn hull_of_square_with_interior_points() {
        let pts = vec![
            Point::new(0., 0.),
            Point::new(1., 0.),
            Point::new(0.5, 0.5),
            Point::new(1., 1.),
            Point::new(0., 1.),
            Point::new(0.5, 0.),
        ];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!((hull_diameter(&h) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn calipers_match_brute_force() {
        let mut s = RandomStream::new(5);
        for _ in 0..200 {
            let k = 3 + (s.next_f64() * 40.0) as usize;
            let pts: Vec<Point> = (0..k)
                .map(|_| Point::new(s.next_f64() * 3.0, s.next_f64()))
                .collect();
            let d = hull_diameter(&convex_hull(&pts));
            assert!((d - brute_diameter(&pts)).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_distance() {
        let a = [Point::new(0., 0.), Point::new(1., 0.)];
        let b = [Point::new(3., 0.), Point::new(3., 4.)];
        assert!((max_cross_distance(&a, &b) - 5.0).abs() < 1e-15);
    }
}

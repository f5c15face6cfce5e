use proptest::prelude::*;
use strata::estimate::{naive_variance, neighbor_variance};
use strata::field::{line_intercept_field, CoverSpec};
use strata::geometry::convex_hull;
use strata::oracle::{bias_naive, bias_neighbor, moments};
use strata::schemes::{draw_ss1, draw_ss2, draw_tss, draw_urs};
use strata::stratify::{grid_partition, rasterize};
use strata::{Point, RandomStream, Region, SamplePlan, Segment, Tessellation};

fn rigid(p: Point, angle: f64, shift: Point) -> Point {
    let r = p.rotate(angle);
    Point::new(r.x + shift.x, r.y + shift.y)
}

/// Convex polygon from random points, or `None` when degenerate.
fn convex_polygon(pts: &[(f64, f64)]) -> Option<Region> {
    let pts: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
    let hull = convex_hull(&pts);
    if hull.len() < 3 {
        return None;
    }
    Region::polygon(hull, vec![])
        .ok()
        .filter(|r| r.area() > 1e-3)
}

fn point() -> impl Strategy<Value = (f64, f64)> {
    (-5.0..5.0f64, -5.0..5.0f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polygon_intercepts_survive_rigid_motions(
        pts in prop::collection::vec(point(), 3..9),
        mid in point(),
        len in 0.1..8.0f64,
        theta in 0.0..std::f64::consts::PI,
        angle in -3.2..3.2f64,
        shift in point(),
    ) {
        let Some(region) = convex_polygon(&pts) else { return Ok(()) };
        let seg = Segment::new(Point::new(mid.0, mid.1), len, theta).unwrap();
        let before = region.intersection_length(&seg);

        let shift = Point::new(shift.0, shift.1);
        let moved: Vec<Point> = match region.to_spec() {
            strata::RegionSpec::Polygon { exterior, .. } => exterior
                .iter()
                .map(|&[x, y]| rigid(Point::new(x, y), angle, shift))
                .collect(),
            _ => unreachable!(),
        };
        let moved_region = Region::polygon(moved, vec![]).unwrap();
        let moved_seg = Segment::new(rigid(seg.midpoint, angle, shift), len, theta + angle).unwrap();
        let after = moved_region.intersection_length(&moved_seg);
        prop_assert!((before - after).abs() <= 1e-9 * (1.0 + len), "{before} vs {after}");
    }

    #[test]
    fn disk_intercepts_survive_rigid_motions(
        c in point(),
        r in 0.1..4.0f64,
        mid in point(),
        len in 0.1..8.0f64,
        theta in 0.0..std::f64::consts::PI,
        angle in -3.2..3.2f64,
        shift in point(),
    ) {
        let shift = Point::new(shift.0, shift.1);
        let d = Region::disk(Point::new(c.0, c.1), r).unwrap();
        let seg = Segment::new(Point::new(mid.0, mid.1), len, theta).unwrap();
        let d2 = Region::disk(rigid(Point::new(c.0, c.1), angle, shift), r).unwrap();
        let seg2 = Segment::new(rigid(seg.midpoint, angle, shift), len, theta + angle).unwrap();
        let (a, b) = (d.intersection_length(&seg), d2.intersection_length(&seg2));
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + len));
    }

    #[test]
    fn area_never_exceeds_squared_diameter(pts in prop::collection::vec(point(), 3..9), a in 0.1..3.0f64, b in 0.1..3.0f64, rot in 0.0..3.0f64) {
        if let Some(p) = convex_polygon(&pts) {
            prop_assert!(p.area() <= p.diameter().powi(2));
        }
        let e = Region::ellipse(Point::new(0.0, 0.0), a, b, rot).unwrap();
        prop_assert!(e.area() <= e.diameter().powi(2));
    }

    #[test]
    fn raster_cells_add_up_to_region_area(pts in prop::collection::vec(point(), 3..9), res in 64usize..160) {
        let Some(p) = convex_polygon(&pts) else { return Ok(()) };
        let r = rasterize(&p, res).unwrap();
        prop_assert!((r.total_area() / p.area() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn plans_round_trip_bit_exactly(seed in any::<u64>(), k in 1usize..6) {
        let sq = Region::unit_square();
        let s = grid_partition(&sq, k).unwrap();
        let root = RandomStream::new(seed);
        let t = Tessellation::new(sq.bbox(), k).unwrap();
        let plans = [
            draw_urs(&sq, k * k, &root).unwrap(),
            draw_ss1(&s, &root).unwrap(),
            draw_ss2(&s, &root).unwrap(),
            draw_tss(&sq, &t, &root, true).unwrap(),
        ];
        for p in plans {
            let back = SamplePlan::from_json(&p.to_json().unwrap()).unwrap();
            for (a, b) in p.sites.iter().zip(&back.sites) {
                prop_assert_eq!(a.location.x.to_bits(), b.location.x.to_bits());
                prop_assert_eq!(a.location.y.to_bits(), b.location.y.to_bits());
            }
            prop_assert_eq!(p, back);
        }
    }

    #[test]
    fn variance_estimates_are_non_negative(ys in prop::collection::vec(-10.0..10.0f64, 2..40)) {
        let areas = vec![1.0 / ys.len() as f64; ys.len()];
        prop_assert!(naive_variance(&areas, &ys).unwrap() >= 0.0);
        prop_assert!(neighbor_variance(1.0, &ys).unwrap() >= 0.0);
    }

    #[test]
    fn oracle_biases_are_non_negative(gx in -3.0..3.0f64, gy in -3.0..3.0f64, c in -1.0..1.0f64, k in 2usize..6) {
        let f = strata::AttributeField::from_spec(
            &strata::FieldSpec::Linear { gradient: [gx, gy], offset: c },
            Region::unit_square(),
        ).unwrap();
        let s = grid_partition(&Region::unit_square(), k).unwrap();
        let m = moments(&f, &s, 256).unwrap();
        prop_assert!(bias_naive(&m).unwrap() >= 0.0);
        prop_assert!(bias_neighbor(&m, s.order()).unwrap() >= 0.0);
    }

    #[test]
    fn line_intercept_density_stays_in_unit_interval(
        mid in point(),
        len in 0.1..5.0f64,
        theta in 0.0..3.2f64,
    ) {
        let cover = Region::union(vec![
            Region::disk(Point::new(-1.0, 0.0), 1.5).unwrap(),
            Region::rectangle(1.0, -1.0, 3.0, 2.0).unwrap(),
        ]).unwrap();
        let domain = Region::rectangle(-6.0, -6.0, 6.0, 6.0).unwrap();
        let f = line_intercept_field(CoverSpec { cover: Some(cover), length: len, orientation: theta }, domain).unwrap();
        let v = f.eval(Point::new(mid.0, mid.1));
        prop_assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn stratum_draws_do_not_depend_on_order() {
    let s = grid_partition(&Region::unit_square(), 4).unwrap();
    let root = RandomStream::new(99).child(5);
    let plan = draw_ss1(&s, &root).unwrap();
    // Draw the strata back to front from their own substreams.
    for i in (0..s.len()).rev() {
        let p = s.sample_in_stratum(i, &mut root.child(i as u64));
        assert_eq!(p, plan.sites[i].location);
    }
}

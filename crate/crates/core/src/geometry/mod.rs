//! Planar geometry: regions, exact areas, diameters, containment, uniform
//! points and segment intersection lengths.
//!
//! All coordinates are planar meters. Boundary points count as inside.

mod conic;
mod geojson;
mod hull;
mod polygon;

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

pub use conic::Conic;
pub use geojson::{region_from_geojson, region_from_geojson_str};
pub use hull::{convex_hull, hull_diameter, max_cross_distance};
pub use polygon::Polygon;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist2(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn rotate(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl From<[f64; 2]> for Point {
    fn from(a: [f64; 2]) -> Self {
        Point::new(a[0], a[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned rectangle `[min.x, max.x] × [min.y, max.y]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            min: Point::new(x0.min(x1), y0.min(y1)),
            max: Point::new(x0.max(x1), y0.max(y1)),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Corners in counter-clockwise order starting at `min`.
    pub fn corners(&self) -> [Point; 4] {
        [
            self.min,
            Point::new(self.max.x, self.min.y),
            self.max,
            Point::new(self.min.x, self.max.y),
        ]
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect {
            min: Point::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            max: Point::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        }
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub(crate) fn sample(&self, stream: &mut RandomStream) -> Point {
        let u = stream.next_f64();
        let v = stream.next_f64();
        Point::new(
            self.min.x + u * self.width(),
            self.min.y + v * self.height(),
        )
    }
}

/// A transect of length `length` centred at `midpoint`, oriented at
/// `orientation` radians from the x axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub midpoint: Point,
    pub length: f64,
    pub orientation: f64,
}

impl Segment {
    pub fn new(midpoint: Point, length: f64, orientation: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(crate::error::invalid(
                "length",
                "segment length must be positive",
            ));
        }
        if !midpoint.is_finite() || !orientation.is_finite() {
            return Err(Error::InvalidGeometry("non-finite segment".into()));
        }
        Ok(Self {
            midpoint,
            length,
            orientation,
        })
    }

    pub fn direction(&self) -> Point {
        let (s, c) = self.orientation.sin_cos();
        Point::new(c, s)
    }

    pub fn endpoints(&self) -> (Point, Point) {
        let half = self.direction() * (0.5 * self.length);
        (self.midpoint - half, self.midpoint + half)
    }
}

/// Serializable description of a region. Used by configs and exports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionSpec {
    Rectangle {
        min: [f64; 2],
        max: [f64; 2],
    },
    Polygon {
        exterior: Vec<[f64; 2]>,
        #[serde(default)]
        holes: Vec<Vec<[f64; 2]>>,
    },
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
        #[serde(default)]
        rotation: f64,
    },
    Union {
        members: Vec<RegionSpec>,
    },
}

#[derive(Clone, Debug)]
enum Shape {
    Polygon(Polygon),
    Conic(Conic),
    Union(Vec<Region>),
}

/// A validated planar study region.
#[derive(Clone, Debug)]
pub struct Region {
    shape: Shape,
    area: f64,
    bbox: Rect,
    /// Cumulative member areas, for unions.
    member_cum: Vec<f64>,
}

const UNION_OVERLAP_GRID: usize = 256;

impl Region {
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Region> {
        let r = Rect::new(x0, y0, x1, y1);
        Region::polygon(r.corners().to_vec(), Vec::new())
    }

    pub fn unit_square() -> Region {
        Region::rectangle(0.0, 0.0, 1.0, 1.0).expect("unit square is valid")
    }

    pub fn polygon(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Region> {
        let poly = Polygon::new(exterior, holes)?;
        Ok(Region::from_shape(Shape::Polygon(poly)))
    }

    pub fn disk(center: Point, radius: f64) -> Result<Region> {
        Ok(Region::from_shape(Shape::Conic(Conic::disk(
            center, radius,
        )?)))
    }

    pub fn ellipse(center: Point, semi_a: f64, semi_b: f64, rotation: f64) -> Result<Region> {
        Ok(Region::from_shape(Shape::Conic(Conic::ellipse(
            center, semi_a, semi_b, rotation,
        )?)))
    }

    /// Disjoint union; overlap is rejected by a raster double-coverage check.
    pub fn union(members: Vec<Region>) -> Result<Region> {
        if members.is_empty() {
            return Err(Error::DegenerateRegion);
        }
        if members.len() == 1 {
            return Ok(members.into_iter().next().unwrap());
        }
        let bbox = members
            .iter()
            .map(|m| m.bbox)
            .reduce(|a, b| a.union(&b))
            .unwrap();
        let (w, h) = (bbox.width(), bbox.height());
        for iy in 0..UNION_OVERLAP_GRID {
            for ix in 0..UNION_OVERLAP_GRID {
                let p = Point::new(
                    bbox.min.x + (ix as f64 + 0.5) * w / UNION_OVERLAP_GRID as f64,
                    bbox.min.y + (iy as f64 + 0.5) * h / UNION_OVERLAP_GRID as f64,
                );
                let hits = members.iter().filter(|m| m.contains(p)).count();
                if hits > 1 {
                    return Err(Error::InvalidGeometry(format!(
                        "union members overlap near ({:.6}, {:.6})",
                        p.x, p.y
                    )));
                }
            }
        }
        Ok(Region::from_shape(Shape::Union(members)))
    }

    fn from_shape(shape: Shape) -> Region {
        let (area, bbox, member_cum) = match &shape {
            Shape::Polygon(p) => (p.area(), p.bbox(), Vec::new()),
            Shape::Conic(c) => (c.area(), c.bbox(), Vec::new()),
            Shape::Union(ms) => {
                let mut cum = Vec::with_capacity(ms.len());
                let mut acc = 0.0;
                for m in ms {
                    acc += m.area;
                    cum.push(acc);
                }
                let bbox = ms
                    .iter()
                    .map(|m| m.bbox)
                    .reduce(|a, b| a.union(&b))
                    .unwrap();
                (acc, bbox, cum)
            }
        };
        Region {
            shape,
            area,
            bbox,
            member_cum,
        }
    }

    pub fn from_spec(spec: &RegionSpec) -> Result<Region> {
        let pts = |v: &Vec<[f64; 2]>| v.iter().map(|&a| Point::from(a)).collect::<Vec<_>>();
        match spec {
            RegionSpec::Rectangle { min, max } => Region::rectangle(min[0], min[1], max[0], max[1]),
            RegionSpec::Polygon { exterior, holes } => {
                Region::polygon(pts(exterior), holes.iter().map(pts).collect())
            }
            RegionSpec::Disk { center, radius } => Region::disk((*center).into(), *radius),
            RegionSpec::Ellipse {
                center,
                semi_axes,
                rotation,
            } => Region::ellipse((*center).into(), semi_axes[0], semi_axes[1], *rotation),
            RegionSpec::Union { members } => Region::union(
                members
                    .iter()
                    .map(Region::from_spec)
                    .collect::<Result<_>>()?,
            ),
        }
    }

    pub fn to_spec(&self) -> RegionSpec {
        let arr = |v: &[Point]| v.iter().map(|&p| p.into()).collect::<Vec<[f64; 2]>>();
        match &self.shape {
            Shape::Polygon(p) => RegionSpec::Polygon {
                exterior: arr(p.exterior()),
                holes: p.holes().iter().map(|h| arr(h)).collect(),
            },
            Shape::Conic(c) => c.to_spec(),
            Shape::Union(ms) => RegionSpec::Union {
                members: ms.iter().map(Region::to_spec).collect(),
            },
        }
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn bbox(&self) -> Rect {
        self.bbox
    }

    /// Number of top-level union members (1 for a single shape).
    pub fn members(&self) -> Vec<&Region> {
        match &self.shape {
            Shape::Union(ms) => ms.iter().collect(),
            _ => vec![self],
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        if !self.bbox.contains(p) {
            return false;
        }
        match &self.shape {
            Shape::Polygon(poly) => poly.contains(p),
            Shape::Conic(c) => c.contains(p),
            Shape::Union(ms) => ms.iter().any(|m| m.contains(p)),
        }
    }

    /// Largest distance between two points of the region.
    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Polygon(p) => hull_diameter(&convex_hull(p.exterior())),
            Shape::Conic(c) => c.diameter(),
            Shape::Union(ms) => {
                let conics: Option<Vec<&Conic>> = ms
                    .iter()
                    .map(|m| match &m.shape {
                        Shape::Conic(c) if c.is_disk() => Some(c),
                        _ => None,
                    })
                    .collect();
                if let Some(disks) = conics {
                    let mut best = 0.0f64;
                    for a in &disks {
                        for b in &disks {
                            best = best.max(a.center().dist(b.center()) + a.radius() + b.radius());
                        }
                    }
                    best
                } else {
                    hull_diameter(&convex_hull(&self.hull_points()))
                }
            }
        }
    }

    /// Points whose convex hull equals (or, for curved boundaries, closely
    /// approximates from inside) the region's convex hull.
    pub fn hull_points(&self) -> Vec<Point> {
        match &self.shape {
            Shape::Polygon(p) => p.exterior().to_vec(),
            Shape::Conic(c) => c.boundary_samples(conic::HULL_SAMPLES),
            Shape::Union(ms) => ms.iter().flat_map(|m| m.hull_points()).collect(),
        }
    }

    /// Uniform point on the region.
    ///
    /// Polygons sample a triangle by area then draw barycentric coordinates,
    /// disks use the square-root radius transform and ellipses map a disk draw.
    pub fn uniform_point(&self, stream: &mut RandomStream) -> Point {
        match &self.shape {
            Shape::Polygon(p) => p.uniform_point(stream),
            Shape::Conic(c) => c.uniform_point(stream),
            Shape::Union(ms) => {
                let u = stream.next_f64() * self.area;
                let i = self
                    .member_cum
                    .partition_point(|&c| c <= u)
                    .min(ms.len() - 1);
                ms[i].uniform_point(stream)
            }
        }
    }

    /// Total length of `s ∩ region`.
    pub fn intersection_length(&self, s: &Segment) -> f64 {
        let (a, b) = s.endpoints();
        let seg_box = Rect::new(a.x, a.y, b.x, b.y);
        if !seg_box.intersects(&self.bbox) {
            return 0.0;
        }
        match &self.shape {
            Shape::Polygon(p) => p.intersection_fraction(a, b) * s.length,
            Shape::Conic(c) => c.chord_fraction(a, b) * s.length,
            Shape::Union(ms) => ms.iter().map(|m| m.intersection_length(s)).sum(),
        }
    }

    /// Exact area of `rect ∩ region`.
    pub fn clipped_area(&self, rect: &Rect) -> f64 {
        if !rect.intersects(&self.bbox) {
            return 0.0;
        }
        match &self.shape {
            Shape::Polygon(p) => p.clipped_area(rect),
            Shape::Conic(c) => c.clipped_area(rect),
            Shape::Union(ms) => ms.iter().map(|m| m.clipped_area(rect)).sum(),
        }
    }

    /// Candidate extreme points of `rect ∩ region`: corners inside the
    /// region, boundary vertices inside the rectangle and boundary/edge
    /// crossings (curved boundaries are sampled).
    pub fn boundary_points_in_rect(&self, rect: &Rect) -> Vec<Point> {
        let mut out: Vec<Point> = rect
            .corners()
            .into_iter()
            .filter(|&c| self.contains(c))
            .collect();
        self.push_boundary_points(rect, &mut out);
        out
    }

    fn push_boundary_points(&self, rect: &Rect, out: &mut Vec<Point>) {
        if !rect.intersects(&self.bbox) {
            return;
        }
        match &self.shape {
            Shape::Polygon(p) => p.push_boundary_points(rect, out),
            Shape::Conic(c) => c.push_boundary_points(rect, out),
            Shape::Union(ms) => ms.iter().for_each(|m| m.push_boundary_points(rect, out)),
        }
    }

    /// Triangulation area, for consistency checks (polygons only).
    pub fn triangulated_area(&self) -> Option<f64> {
        match &self.shape {
            Shape::Polygon(p) => Some(p.triangulated_area()),
            _ => None,
        }
    }
}

impl Serialize for Region {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_spec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Region {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = RegionSpec::deserialize(d)?;
        Region::from_spec(&spec).map_err(serde::de::Error::custom)
    }
}

/// Intersection parameters of segments `p + t(q-p)` and `a + s(b-a)`.
pub(crate) fn segment_intersection(p: Point, q: Point, a: Point, b: Point) -> Option<(f64, f64)> {
    let r = q - p;
    let s = b - a;
    let denom = r.cross(s);
    if denom == 0.0 {
        return None;
    }
    let ap = a - p;
    let t = ap.cross(s) / denom;
    let u = ap.cross(r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, u))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn square_with_hole() -> Region {
        let outer = Rect::new(0.0, 0.0, 1.0, 1.0).corners().to_vec();
        let hole = Rect::new(0.25, 0.25, 0.75, 0.75).corners().to_vec();
        Region::polygon(outer, vec![hole]).unwrap()
    }

    #[test]
    fn areas() {
        assert!((Region::unit_square().area() - 1.0).abs() < 1e-15);
        assert!((square_with_hole().area() - 0.75).abs() < 1e-15);
        let d = Region::disk(Point::new(0.0, 0.0), 2.0).unwrap();
        assert!((d.area() - 4.0 * PI).abs() < 1e-12);
        let e = Region::ellipse(Point::new(1.0, 1.0), 3.0, 0.5, 0.3).unwrap();
        assert!((e.area() - 1.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn union_area_is_additive() {
        let a = Region::disk(Point::new(0.0, 0.0), 1.0).unwrap();
        let b = Region::rectangle(2.0, 0.0, 3.0, 2.0).unwrap();
        let u = Region::union(vec![a.clone(), b.clone()]).unwrap();
        assert!((u.area() - a.area() - b.area()).abs() < 1e-12);
    }

    #[test]
    fn overlapping_union_rejected() {
        let a = Region::disk(Point::new(0.0, 0.0), 1.0).unwrap();
        let b = Region::disk(Point::new(1.0, 0.0), 1.0).unwrap();
        assert!(matches!(
            Region::union(vec![a, b]),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn diameters() {
        assert!((Region::unit_square().diameter() - 2f64.sqrt()).abs() < 1e-15);
        let d = Region::disk(Point::new(3.0, 1.0), 1.0).unwrap();
        assert_eq!(d.diameter(), 2.0);
        let tri = Region::polygon(
            vec![
                Point::new(0.0, 0.0),
                Point::new(3.0, 0.0),
                Point::new(0.0, 4.0),
            ],
            vec![],
        )
        .unwrap();
        // brute force over vertex pairs
        let v = [
            Point::new(0.0, 0.0),
            Point::new(3.0, 0.0),
            Point::new(0.0, 4.0),
        ];
        let brute = v
            .iter()
            .flat_map(|a| v.iter().map(move |b| a.dist(*b)))
            .fold(0.0, f64::max);
        assert_eq!(brute, 5.0);
        assert!((tri.diameter() - brute).abs() < 1e-15);
        let e = Region::ellipse(Point::new(0.0, 0.0), 1.0, 2.5, 0.7).unwrap();
        assert_eq!(e.diameter(), 5.0);
        let two = Region::union(vec![
            Region::disk(Point::new(0.0, 0.0), 1.0).unwrap(),
            Region::disk(Point::new(5.0, 0.0), 0.5).unwrap(),
        ])
        .unwrap();
        assert!((two.diameter() - 6.5).abs() < 1e-12);
    }

    #[test]
    fn containment_examples() {
        let sq = Region::unit_square();
        assert!(sq.contains(Point::new(0.5, 0.5)));
        assert!(!sq.contains(Point::new(1.5, 0.5)));
        assert!(sq.contains(Point::new(1.0, 0.3)));
        let d = Region::disk(Point::new(0.0, 0.0), 1.0).unwrap();
        assert!(d.contains(Point::new(0.6, 0.8)));
        let h = square_with_hole();
        assert!(!h.contains(Point::new(0.5, 0.5)));
        assert!(h.contains(Point::new(0.25, 0.5)));
        assert!(h.contains(Point::new(0.1, 0.5)));
    }

    #[test]
    fn disk_chords() {
        let d = Region::disk(Point::new(0.0, 0.0), 1.0).unwrap();
        let s = |x: f64, y: f64| Segment::new(Point::new(x, y), 4.0, 0.0).unwrap();
        assert!((d.intersection_length(&s(0.0, 0.0)) - 2.0).abs() < 1e-12);
        assert!((d.intersection_length(&s(1.5, 0.0)) - 1.5).abs() < 1e-12);
        assert_eq!(d.intersection_length(&s(0.0, 5.0)), 0.0);
    }

    #[test]
    fn polygon_chords_with_hole() {
        let h = square_with_hole();
        let s = Segment::new(Point::new(0.5, 0.5), 2.0, 0.0).unwrap();
        assert!((h.intersection_length(&s) - 0.5).abs() < 1e-12);
        let v = Segment::new(Point::new(0.1, 0.5), 0.4, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((h.intersection_length(&v) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn clipped_area_of_disk_quadrant() {
        let d = Region::disk(Point::new(0.0, 0.0), 1.0).unwrap();
        let q = Rect::new(0.0, 0.0, 2.0, 2.0);
        assert!((d.clipped_area(&q) - PI / 4.0).abs() < 1e-12);
        let e = Region::ellipse(Point::new(0.0, 0.0), 2.0, 1.0, 0.0).unwrap();
        assert!((e.clipped_area(&q) - PI / 2.0).abs() < 1e-12);
        let h = square_with_hole();
        assert!((h.clipped_area(&Rect::new(0.0, 0.0, 0.5, 0.5)) - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn spec_round_trip() {
        let h = square_with_hole();
        let json = serde_json::to_string(&h).unwrap();
        let back: Region = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_spec(), h.to_spec());
        assert_eq!(back.area(), h.area());
    }

    #[test]
    fn degenerate_regions_rejected() {
        assert!(Region::disk(Point::new(0.0, 0.0), 0.0).is_err());
        assert!(Region::rectangle(0.0, 0.0, 1.0, 0.0).is_err());
        let bowtie = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ];
        assert!(matches!(
            Region::polygon(bowtie, vec![]),
            Err(Error::InvalidGeometry(_))
        ));
    }
}

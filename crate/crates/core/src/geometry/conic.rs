use super::{Point, Rect, RegionSpec};
use crate::error::{invalid, Result};
use crate::rng::RandomStream;
use std::f64::consts::PI;

/// Boundary samples used when a curved region's hull is needed.
pub const HULL_SAMPLES: usize = 256;

/// Disk or rotated ellipse. Computations map the shape to the unit disk.
#[derive(Clone, Debug)]
pub struct Conic {
    center: Point,
    a: f64,
    b: f64,
    rotation: f64,
    disk: bool,
}

impl Conic {
    pub fn disk(center: Point, radius: f64) -> Result<Conic> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(invalid("radius", "disk radius must be positive and finite"));
        }
        Ok(Conic {
            center,
            a: radius,
            b: radius,
            rotation: 0.0,
            disk: true,
        })
    }

    pub fn ellipse(center: Point, a: f64, b: f64, rotation: f64) -> Result<Conic> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(invalid(
                "semi_axes",
                "semi-axes must be positive and finite",
            ));
        }
        if !center.is_finite() || !rotation.is_finite() {
            return Err(invalid("center", "ellipse parameters must be finite"));
        }
        Ok(Conic {
            center,
            a,
            b,
            rotation,
            disk: false,
        })
    }

    pub fn is_disk(&self) -> bool {
        self.a == self.b
    }

    pub fn center(&self) -> Point {
        self.center
    }

    /// Radius of a disk; the larger semi-axis otherwise.
    pub fn radius(&self) -> f64 {
        self.a.max(self.b)
    }

    pub fn area(&self) -> f64 {
        PI * self.a * self.b
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.a.max(self.b)
    }

    pub fn bbox(&self) -> Rect {
        let (s, c) = self.rotation.sin_cos();
        let hx = (self.a * self.a * c * c + self.b * self.b * s * s).sqrt();
        let hy = (self.a * self.a * s * s + self.b * self.b * c * c).sqrt();
        Rect::new(
            self.center.x - hx,
            self.center.y - hy,
            self.center.x + hx,
            self.center.y + hy,
        )
    }

    pub fn to_spec(&self) -> RegionSpec {
        if self.disk {
            RegionSpec::Disk {
                center: self.center.into(),
                radius: self.a,
            }
        } else {
            RegionSpec::Ellipse {
                center: self.center.into(),
                semi_axes: [self.a, self.b],
                rotation: self.rotation,
            }
        }
    }

    fn to_unit(&self, p: Point) -> Point {
        let q = (p - self.center).rotate(-self.rotation);
        Point::new(q.x / self.a, q.y / self.b)
    }

    fn unit_to_plane(&self, q: Point) -> Point {
        Point::new(q.x * self.a, q.y * self.b).rotate(self.rotation) + self.center
    }

    pub fn contains(&self, p: Point) -> bool {
        let q = self.to_unit(p);
        q.dot(q) <= 1.0 + 1e-12
    }

    pub fn boundary_samples(&self, n: usize) -> Vec<Point> {
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                self.unit_to_plane(Point::new(t.cos(), t.sin()))
            })
            .collect()
    }

    pub fn uniform_point(&self, stream: &mut RandomStream) -> Point {
        let r = stream.next_f64().sqrt();
        let phi = 2.0 * PI * stream.next_f64();
        self.unit_to_plane(Point::new(r * phi.cos(), r * phi.sin()))
    }

    /// Fraction of the segment `p→q` inside the conic.
    pub fn chord_fraction(&self, p: Point, q: Point) -> f64 {
        match unit_disk_params(self.to_unit(p), self.to_unit(q)) {
            Some((t1, t2)) => (t2.min(1.0) - t1.max(0.0)).max(0.0),
            None => 0.0,
        }
    }

    pub fn clipped_area(&self, rect: &Rect) -> f64 {
        let bb = self.bbox();
        if !bb.intersects(rect) {
            return 0.0;
        }
        let corners = rect.corners().map(|c| self.to_unit(c));
        let mut s = 0.0;
        for k in 0..4 {
            s += triangle_disk_area(corners[k], corners[(k + 1) % 4]);
        }
        (self.a * self.b * s.abs()).min(rect.area())
    }

    pub fn push_boundary_points(&self, rect: &Rect, out: &mut Vec<Point>) {
        if !self.bbox().intersects(rect) {
            return;
        }
        let rc = rect.corners();
        for k in 0..4 {
            let (p, q) = (rc[k], rc[(k + 1) % 4]);
            if let Some((t1, t2)) = unit_disk_params(self.to_unit(p), self.to_unit(q)) {
                for t in [t1, t2] {
                    if (0.0..=1.0).contains(&t) {
                        out.push(p + (q - p) * t);
                    }
                }
            }
        }
        out.extend(
            self.boundary_samples(HULL_SAMPLES)
                .into_iter()
                .filter(|b| rect.contains(*b)),
        );
    }
}

/// Line parameters where `p + t(q-p)` crosses the unit circle.
fn unit_disk_params(p: Point, q: Point) -> Option<(f64, f64)> {
    let d = q - p;
    let a = d.dot(d);
    if a == 0.0 {
        return None;
    }
    let b = 2.0 * p.dot(d);
    let c = p.dot(p) - 1.0;
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // Numerically stable roots.
    let qq = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = if qq == 0.0 {
        (-sq / (2.0 * a), sq / (2.0 * a))
    } else {
        let x1 = qq / a;
        let x2 = c / qq;
        (x1.min(x2), x1.max(x2))
    };
    Some((r1, r2))
}

fn sector(u: Point, v: Point) -> f64 {
    0.5 * u.cross(v).atan2(u.dot(v))
}

/// Signed area of triangle `(0, p, q)` intersected with the unit disk.
fn triangle_disk_area(p: Point, q: Point) -> f64 {
    if p.dot(p) <= 1.0 && q.dot(q) <= 1.0 {
        return 0.5 * p.cross(q);
    }
    let Some((t1, t2)) = unit_disk_params(p, q) else {
        return sector(p, q);
    };
    if t2 <= 0.0 || t1 >= 1.0 {
        return sector(p, q);
    }
    let d = q - p;
    let p1 = p + d * t1.max(0.0);
    let p2 = p + d * t2.min(1.0);
    sector(p, p1) + 0.5 * p1.cross(p2) + sector(p2, q)
}

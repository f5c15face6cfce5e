//! Attribute functions `y` on the study region.

use crate::error::{invalid, Error, Result};
use crate::geometry::{Point, Rect, Region, RegionSpec, Segment};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn unit_x() -> [f64; 2] {
    [1.0, 0.0]
}

/// Catalog entry, as written in configs: `{ id = "holder_cusp", alpha = 0.5 }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    /// `y = g·u + offset`; the default is the x-coordinate.
    Linear {
        #[serde(default = "unit_x")]
        gradient: [f64; 2],
        #[serde(default)]
        offset: f64,
    },
    /// `y = amplitude · sin(2πf x) · sin(2πf y)`.
    SmoothSine {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
    },
    /// `y = ‖u − center‖^alpha`.
    HolderCusp {
        #[serde(default)]
        center: [f64; 2],
        #[serde(default = "half")]
        alpha: f64,
    },
    DiskIndicator {
        center: [f64; 2],
        radius: f64,
    },
    PolygonIndicator {
        exterior: Vec<[f64; 2]>,
        #[serde(default)]
        holes: Vec<Vec<[f64; 2]>>,
    },
}

impl FieldSpec {
    pub fn id(&self) -> &'static str {
        match self {
            FieldSpec::Constant { .. } => "constant",
            FieldSpec::Linear { .. } => "linear",
            FieldSpec::SmoothSine { .. } => "smooth_sine",
            FieldSpec::HolderCusp { .. } => "holder_cusp",
            FieldSpec::DiskIndicator { .. } => "disk_indicator",
            FieldSpec::PolygonIndicator { .. } => "polygon_indicator",
        }
    }
}

pub const FIELD_IDS: [&str; 6] = [
    "constant",
    "linear",
    "smooth_sine",
    "holder_cusp",
    "disk_indicator",
    "polygon_indicator",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessClass {
    Holder,
    Lipschitz,
    PiecewiseHolder,
    Indicator,
    LineIntercept,
}

/// Line-intercept survey geometry. `cover = None` means no vegetation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverSpec {
    pub cover: Option<Region>,
    pub length: f64,
    pub orientation: f64,
}

#[derive(Clone, Debug)]
enum Kind {
    Constant(f64),
    Linear { g: Point, c: f64 },
    Sine { amp: f64, freq: f64 },
    Cusp { center: Point, alpha: f64 },
    Indicator(Region),
    LineIntercept(CoverSpec),
}

/// A fixed attribute function on `domain` with smoothness metadata.
#[derive(Clone, Debug)]
pub struct AttributeField {
    kind: Kind,
    spec: Option<FieldSpec>,
    domain: Region,
    class: SmoothnessClass,
    alpha: f64,
    holder_h: Option<f64>,
    sup_bound: f64,
}

/// Build a catalog field from its identifier and a JSON object of parameters.
pub fn builtin_field(
    id: &str,
    params: &serde_json::Value,
    domain: Region,
) -> Result<AttributeField> {
    if !FIELD_IDS.contains(&id) {
        return Err(Error::UnknownField(id.to_string()));
    }
    let mut obj = match params {
        serde_json::Value::Object(m) => m.clone(),
        serde_json::Value::Null => serde_json::Map::new(),
        _ => return Err(invalid("params", "field parameters must be an object")),
    };
    obj.insert("id".into(), serde_json::Value::String(id.into()));
    let spec: FieldSpec = serde_json::from_value(serde_json::Value::Object(obj))
        .map_err(|e| invalid("params", e.to_string()))?;
    AttributeField::from_spec(&spec, domain)
}

/// `y(u) = l(C ∩ t(u)) / L`, with `t(u)` the transect centred at `u`.
pub fn line_intercept_field(spec: CoverSpec, domain: Region) -> Result<AttributeField> {
    if !(spec.length > 0.0 && spec.length.is_finite()) {
        return Err(invalid("length", "transect length must be positive"));
    }
    if !spec.orientation.is_finite() {
        return Err(invalid("orientation", "must be finite"));
    }
    Ok(AttributeField {
        kind: Kind::LineIntercept(spec),
        spec: None,
        domain,
        class: SmoothnessClass::LineIntercept,
        alpha: 1.0,
        holder_h: None,
        sup_bound: 1.0,
    })
}

fn corners_max(bbox: &Rect, f: impl Fn(Point) -> f64) -> f64 {
    bbox.corners().iter().map(|&p| f(p)).fold(0.0, f64::max)
}

impl AttributeField {
    pub fn from_spec(spec: &FieldSpec, domain: Region) -> Result<AttributeField> {
        let bbox = domain.bbox();
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(invalid(name, "must be finite"))
            }
        };
        let (kind, class, alpha, h, m) = match spec {
            FieldSpec::Constant { value } => {
                let v = finite("value", *value)?;
                (
                    Kind::Constant(v),
                    SmoothnessClass::Lipschitz,
                    1.0,
                    Some(0.0),
                    v.abs(),
                )
            }
            FieldSpec::Linear { gradient, offset } => {
                let g = Point::new(
                    finite("gradient", gradient[0])?,
                    finite("gradient", gradient[1])?,
                );
                let c = finite("offset", *offset)?;
                let m = corners_max(&bbox, |p| (g.dot(p) + c).abs());
                (
                    Kind::Linear { g, c },
                    SmoothnessClass::Lipschitz,
                    1.0,
                    Some(g.norm()),
                    m,
                )
            }
            FieldSpec::SmoothSine {
                amplitude,
                frequency,
            } => {
                let amp = finite("amplitude", *amplitude)?;
                let freq = finite("frequency", *frequency)?;
                (
                    Kind::Sine { amp, freq },
                    SmoothnessClass::Lipschitz,
                    1.0,
                    Some(2.0 * PI * freq.abs() * amp.abs()),
                    amp.abs(),
                )
            }
            FieldSpec::HolderCusp { center, alpha } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
                }
                let c = Point::from(*center);
                if !c.is_finite() {
                    return Err(invalid("center", "must be finite"));
                }
                let m = corners_max(&bbox, |p| p.dist(c).powf(*alpha));
                let class = if *alpha == 1.0 {
                    SmoothnessClass::Lipschitz
                } else {
                    SmoothnessClass::Holder
                };
                (
                    Kind::Cusp {
                        center: c,
                        alpha: *alpha,
                    },
                    class,
                    *alpha,
                    Some(1.0),
                    m,
                )
            }
            FieldSpec::DiskIndicator { center, radius } => {
                let r = Region::disk(Point::from(*center), *radius)?;
                (
                    Kind::Indicator(r),
                    SmoothnessClass::PiecewiseHolder,
                    1.0,
                    None,
                    1.0,
                )
            }
            FieldSpec::PolygonIndicator { exterior, holes } => {
                let r = Region::from_spec(&RegionSpec::Polygon {
                    exterior: exterior.clone(),
                    holes: holes.clone(),
                })?;
                (
                    Kind::Indicator(r),
                    SmoothnessClass::PiecewiseHolder,
                    1.0,
                    None,
                    1.0,
                )
            }
        };
        Ok(AttributeField {
            kind,
            spec: Some(spec.clone()),
            domain,
            class,
            alpha,
            holder_h: h,
            sup_bound: m,
        })
    }

    /// Indicator of an arbitrary region.
    pub fn indicator(set: Region, domain: Region) -> AttributeField {
        AttributeField {
            kind: Kind::Indicator(set),
            spec: None,
            domain,
            class: SmoothnessClass::PiecewiseHolder,
            alpha: 1.0,
            holder_h: None,
            sup_bound: 1.0,
        }
    }

    pub fn spec(&self) -> Option<&FieldSpec> {
        self.spec.as_ref()
    }

    pub fn domain(&self) -> &Region {
        &self.domain
    }

    pub fn class(&self) -> SmoothnessClass {
        self.class
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn holder_h(&self) -> Option<f64> {
        self.holder_h
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// Set whose boundary carries the field's discontinuities, if any.
    pub fn discontinuity_set(&self) -> Option<&Region> {
        match &self.kind {
            Kind::Indicator(r) => Some(r),
            _ => None,
        }
    }

    pub fn cover(&self) -> Option<&CoverSpec> {
        match &self.kind {
            Kind::LineIntercept(c) => Some(c),
            _ => None,
        }
    }

    pub fn eval(&self, p: Point) -> f64 {
        match &self.kind {
            Kind::Constant(v) => *v,
            Kind::Linear { g, c } => g.dot(p) + c,
            Kind::Sine { amp, freq } => {
                let w = 2.0 * PI * freq;
                amp * (w * p.x).sin() * (w * p.y).sin()
            }
            Kind::Cusp { center, alpha } => p.dist(*center).powf(*alpha),
            Kind::Indicator(r) => r.contains(p) as u8 as f64,
            Kind::LineIntercept(spec) => match &spec.cover {
                None => 0.0,
                Some(c) => {
                    let seg = Segment {
                        midpoint: p,
                        length: spec.length,
                        orientation: spec.orientation,
                    };
                    (c.intersection_length(&seg) / spec.length).clamp(0.0, 1.0)
                }
            },
        }
    }

    /// Zero extension: `y(p)` on the domain, 0 elsewhere.
    pub fn extended_eval(&self, p: Point) -> f64 {
        if self.domain.contains(p) {
            self.eval(p)
        } else {
            0.0
        }
    }

    fn rect_moments(&self, rect: &Rect) -> Option<(f64, f64)> {
        let a = rect.area();
        match &self.kind {
            Kind::Constant(v) => Some((v * a, v * v * a)),
            Kind::Linear { g, c } => {
                let m = g.dot(rect.center()) + c;
                let (w, h) = (rect.width(), rect.height());
                Some((
                    m * a,
                    a * (m * m + (g.x * w).powi(2) / 12.0 + (g.y * h).powi(2) / 12.0),
                ))
            }
            Kind::Sine { amp, freq } => {
                if *freq == 0.0 {
                    return Some((0.0, 0.0));
                }
                let w = 2.0 * PI * freq;
                let s1 = |lo: f64, hi: f64| ((w * lo).cos() - (w * hi).cos()) / w;
                let s2 = |lo: f64, hi: f64| {
                    0.5 * (hi - lo) - ((2.0 * w * hi).sin() - (2.0 * w * lo).sin()) / (4.0 * w)
                };
                let (x0, x1, y0, y1) = (rect.min.x, rect.max.x, rect.min.y, rect.max.y);
                Some((
                    amp * s1(x0, x1) * s1(y0, y1),
                    amp * amp * s2(x0, x1) * s2(y0, y1),
                ))
            }
            Kind::Indicator(r) => {
                let c = r.clipped_area(rect);
                Some((c, c))
            }
            Kind::Cusp { .. } | Kind::LineIntercept(_) => None,
        }
    }
}

/// Something that can be integrated over raster cells.
pub trait Integrand: Sync {
    fn value(&self, p: Point) -> f64;

    /// `(∫_R y, ∫_R y²)` over a rectangle, when known in closed form.
    fn exact_rect_moments(&self, _rect: &Rect) -> Option<(f64, f64)> {
        None
    }

    /// True when `y` takes only the values 0 and 1.
    fn is_binary(&self) -> bool {
        false
    }

    /// Relative error the oracle should reach for this integrand.
    fn quadrature_tolerance(&self) -> f64 {
        1e-6
    }
}

impl Integrand for AttributeField {
    fn value(&self, p: Point) -> f64 {
        self.eval(p)
    }

    fn exact_rect_moments(&self, rect: &Rect) -> Option<(f64, f64)> {
        self.rect_moments(rect)
    }

    fn is_binary(&self) -> bool {
        matches!(self.kind, Kind::Indicator(_))
    }

    fn quadrature_tolerance(&self) -> f64 {
        match self.kind {
            Kind::Indicator(_) | Kind::LineIntercept(_) => 1e-4,
            _ => 1e-6,
        }
    }
}

/// The zero extension `y_e` viewed as an integrand on the plane.
pub struct Extended<'a>(pub &'a AttributeField);

impl Integrand for Extended<'_> {
    fn value(&self, p: Point) -> f64 {
        self.0.extended_eval(p)
    }

    fn exact_rect_moments(&self, rect: &Rect) -> Option<(f64, f64)> {
        let inside = self.0.domain.clipped_area(rect);
        if inside == 0.0 {
            Some((0.0, 0.0))
        } else if inside == rect.area() {
            self.0.rect_moments(rect)
        } else {
            None
        }
    }

    fn is_binary(&self) -> bool {
        self.0.is_binary()
    }

    fn quadrature_tolerance(&self) -> f64 {
        self.0.quadrature_tolerance()
    }
}

/// Integrand from a plain function.
pub struct FnIntegrand<F>(pub F);

impl<F: Fn(Point) -> f64 + Sync> Integrand for FnIntegrand<F> {
    fn value(&self, p: Point) -> f64 {
        (self.0)(p)
    }
}

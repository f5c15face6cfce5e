//! Sample-site placement schemes.
//!
//! Every random quantity comes from a child of the caller's stream, labelled
//! by stratum, cell or site index, so plans do not depend on drawing order.

use crate::error::{invalid, Error, Result};
use crate::geometry::{Point, Rect, Region};
use crate::rng::{RandomStream, StreamProvenance};
use crate::stratify::Stratification;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Urs,
    Ss1,
    Ss2,
    Tss,
    Sgs,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Urs,
        Scheme::Ss1,
        Scheme::Ss2,
        Scheme::Tss,
        Scheme::Sgs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Urs => "urs",
            Scheme::Ss1 => "ss1",
            Scheme::Ss2 => "ss2",
            Scheme::Tss => "tss",
            Scheme::Sgs => "sgs",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Scheme> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid("scheme", format!("unknown scheme `{s}`")))
    }
}

/// Regular `k × k` tessellation of a rectangle `R ⊇ A`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tessellation {
    pub bounds: Rect,
    pub k: usize,
}

impl Tessellation {
    pub fn new(bounds: Rect, k: usize) -> Result<Tessellation> {
        if k == 0 {
            return Err(invalid("k_per_side", "must be at least 1"));
        }
        if !(bounds.area() > 0.0) {
            return Err(Error::DegenerateRegion);
        }
        Ok(Tessellation { bounds, k })
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (
            self.bounds.width() / self.k as f64,
            self.bounds.height() / self.k as f64,
        )
    }

    pub fn cell_area(&self) -> f64 {
        let (w, h) = self.cell_size();
        w * h
    }

    pub fn len(&self) -> usize {
        self.k * self.k
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lower-left corner of cell `(ix, iy)` shifted by `offset`.
    pub fn corner(&self, ix: usize, iy: usize, offset: Point) -> Point {
        let (w, h) = self.cell_size();
        Point::new(
            self.bounds.min.x + ix as f64 * w + offset.x,
            self.bounds.min.y + iy as f64 * h + offset.y,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub location: Point,
    /// Stratum (SS) or tessellation cell (TSS/SGS); `None` under URS.
    pub stratum: Option<usize>,
    pub in_region: bool,
}

/// Realized sample with everything needed to reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub scheme: Scheme,
    pub sites: Vec<Site>,
    pub nominal_n: usize,
    pub realized_in_region: usize,
    pub provenance: StreamProvenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tessellation: Option<Tessellation>,
    /// Area attached to every site under TSS/SGS.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_area: Option<f64>,
    /// Lattice shift (randomized TSS) or systematic offset (SGS).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Point>,
}

impl SamplePlan {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn locations(&self) -> Vec<Point> {
        self.sites.iter().map(|s| s.location).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("site_id,x,y,stratum,in_A\n");
        for (i, s) in self.sites.iter().enumerate() {
            let st = s.stratum.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{:?},{:?},{},{}\n",
                i, s.location.x, s.location.y, st, s.in_region as u8
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<SamplePlan> {
        Ok(serde_json::from_str(text)?)
    }
}

fn plan(
    scheme: Scheme,
    sites: Vec<Site>,
    nominal_n: usize,
    provenance: StreamProvenance,
) -> SamplePlan {
    SamplePlan {
        scheme,
        realized_in_region: sites.iter().filter(|s| s.in_region).count(),
        sites,
        nominal_n,
        provenance,
        tessellation: None,
        cell_area: None,
        offset: None,
    }
}

/// `n` independent uniform sites on `region`.
pub fn draw_urs(region: &Region, n: usize, stream: &RandomStream) -> Result<SamplePlan> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let sites = (0..n)
        .map(|i| Site {
            location: region.uniform_point(&mut stream.child(i as u64)),
            stratum: None,
            in_region: true,
        })
        .collect();
    Ok(plan(Scheme::Urs, sites, n, stream.provenance()))
}

/// One uniform site per stratum.
pub fn draw_ss1(s: &Stratification, stream: &RandomStream) -> Result<SamplePlan> {
    draw_per_stratum(s, 1, Scheme::Ss1, stream)
}

/// Two independent uniform sites per stratum.
pub fn draw_ss2(s: &Stratification, stream: &RandomStream) -> Result<SamplePlan> {
    draw_per_stratum(s, 2, Scheme::Ss2, stream)
}

fn draw_per_stratum(
    s: &Stratification,
    per: usize,
    scheme: Scheme,
    stream: &RandomStream,
) -> Result<SamplePlan> {
    let mut sites = Vec::with_capacity(per * s.len());
    for i in 0..s.len() {
        if !(s.stratum(i).area > 0.0) {
            return Err(Error::EmptyStratum(i));
        }
        let mut sub = stream.child(i as u64);
        for _ in 0..per {
            sites.push(Site {
                location: s.sample_in_stratum(i, &mut sub),
                stratum: Some(i),
                in_region: true,
            });
        }
    }
    Ok(plan(scheme, sites, per * s.len(), stream.provenance()))
}

/// Stream label reserved for the random lattice shift.
const SHIFT_LABEL: u64 = u64::MAX;

/// One uniform site in each tessellation cell. With `random_shift`, the
/// lattice is first translated by a uniform vector within one cell, and a
/// `(k+1) × (k+1)` lattice is used so the shifted cells still cover `R`.
pub fn draw_tss(
    region: &Region,
    tess: &Tessellation,
    stream: &RandomStream,
    random_shift: bool,
) -> Result<SamplePlan> {
    let (w, h) = tess.cell_size();
    let (offset, m) = if random_shift {
        let mut s = stream.child(SHIFT_LABEL);
        let o = Point::new(s.next_f64() * w - w, s.next_f64() * h - h);
        (Some(o), tess.k + 1)
    } else {
        (None, tess.k)
    };
    let off = offset.unwrap_or(Point::new(0.0, 0.0));
    let mut sites = Vec::with_capacity(m * m);
    for iy in 0..m {
        for ix in 0..m {
            let cell = iy * m + ix;
            let mut s = stream.child(cell as u64);
            let c = tess.corner(ix, iy, off);
            let p = Point::new(c.x + s.next_f64() * w, c.y + s.next_f64() * h);
            sites.push(Site {
                location: p,
                stratum: Some(cell),
                in_region: region.contains(p),
            });
        }
    }
    let mut out = plan(Scheme::Tss, sites, tess.len(), stream.provenance());
    out.tessellation = Some(*tess);
    out.cell_area = Some(tess.cell_area());
    out.offset = offset;
    Ok(out)
}

/// One uniform offset in the reference cell, repeated in every cell.
pub fn draw_sgs(region: &Region, tess: &Tessellation, stream: &RandomStream) -> Result<SamplePlan> {
    let (w, h) = tess.cell_size();
    let mut s = stream.child(0);
    let u = Point::new(s.next_f64() * w, s.next_f64() * h);
    let mut out = sgs_plan_with_offset(region, tess, u)?;
    out.provenance = stream.provenance();
    Ok(out)
}

/// Systematic grid with a fixed offset inside the reference cell.
pub fn sgs_plan_with_offset(
    region: &Region,
    tess: &Tessellation,
    offset: Point,
) -> Result<SamplePlan> {
    let (w, h) = tess.cell_size();
    if !(offset.x >= 0.0 && offset.x <= w && offset.y >= 0.0 && offset.y <= h) {
        return Err(invalid("offset", "must lie in the reference cell"));
    }
    let k = tess.k;
    let mut sites = Vec::with_capacity(k * k);
    for iy in 0..k {
        for ix in 0..k {
            let p = tess.corner(ix, iy, offset);
            sites.push(Site {
                location: p,
                stratum: Some(iy * k + ix),
                in_region: region.contains(p),
            });
        }
    }
    // Deterministic plans carry an empty provenance.
    let provenance = StreamProvenance {
        root_seed: 0,
        path: Vec::new(),
    };
    let mut out = plan(Scheme::Sgs, sites, k * k, provenance);
    out.tessellation = Some(*tess);
    out.cell_area = Some(tess.cell_area());
    out.offset = Some(offset);
    Ok(out)
}

use super::raster::{Raster, RasterGrid};
use super::Stratification;
use crate::error::{invalid, Result};
use crate::geometry::{Point, Region, RegionSpec};
use crate::SCHEMA_VERSION;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// On-disk form of a stratification: raster header, per-cell stratum labels
/// (`-1` outside the region) and the sequential index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratificationFile {
    pub schema_version: u32,
    pub region: RegionSpec,
    pub raster: RasterGrid,
    pub assignment: Vec<i64>,
    pub order: Vec<usize>,
}

impl Stratification {
    pub fn to_file(&self) -> StratificationFile {
        StratificationFile {
            schema_version: SCHEMA_VERSION,
            region: self.region.to_spec(),
            raster: self.raster.grid,
            assignment: self
                .assignment
                .iter()
                .map(|a| a.map_or(-1, |s| s as i64))
                .collect(),
            order: self.order.clone(),
        }
    }

    pub fn from_file(f: &StratificationFile) -> Result<Stratification> {
        if f.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", f.schema_version),
            ));
        }
        let region = Region::from_spec(&f.region)?;
        let raster = Raster::from_grid(&region, f.raster)?;
        let assignment = f
            .assignment
            .iter()
            .map(|&a| match a {
                -1 => Ok(None),
                a if a >= 0 && a <= u32::MAX as i64 => Ok(Some(a as u32)),
                _ => Err(invalid("assignment", format!("bad stratum label {a}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Stratification::from_assignment(region, raster, assignment, Some(f.order.clone()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Stratification> {
        let f: StratificationFile = serde_json::from_str(text)?;
        Stratification::from_file(&f)
    }

    /// SVG map of the strata with optional sample sites.
    pub fn to_svg(&self, sites: &[Point], opts: &SvgOptions) -> String {
        let g = &self.raster.grid;
        let (w, h) = (g.nx as f64 * g.cell_w, g.ny as f64 * g.cell_h);
        let scale = opts.width / w;
        let height = h * scale;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.3} {:.3}">"#,
            opts.width, height, opts.width, height
        );
        // One rectangle per horizontal run of equally labelled cells.
        for iy in 0..g.ny {
            let mut ix = 0;
            while ix < g.nx {
                let lab = self.assignment[g.index(ix, iy)];
                let start = ix;
                while ix < g.nx && self.assignment[g.index(ix, iy)] == lab {
                    ix += 1;
                }
                let Some(s) = lab else { continue };
                let x = start as f64 * g.cell_w * scale;
                let y = height - (iy + 1) as f64 * g.cell_h * scale;
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                    x,
                    y,
                    (ix - start) as f64 * g.cell_w * scale,
                    g.cell_h * scale,
                    color(s as usize)
                );
            }
        }
        if opts.label_order {
            for (k, &s) in self.order.iter().enumerate() {
                let c = self.strata[s].centroid;
                let _ = writeln!(
                    out,
                    r#"<text x="{:.3}" y="{:.3}" font-size="{:.1}" text-anchor="middle">{}</text>"#,
                    (c.x - g.origin.x) * scale,
                    height - (c.y - g.origin.y) * scale,
                    opts.site_radius * 4.0,
                    k + 1
                );
            }
        }
        for p in sites {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.3}" cy="{:.3}" r="{:.2}" fill="black"/>"#,
                (p.x - g.origin.x) * scale,
                height - (p.y - g.origin.y) * scale,
                opts.site_radius
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

#[derive(Clone, Debug)]
pub struct SvgOptions {
    /// Image width in pixels; height follows the raster aspect ratio.
    pub width: f64,
    pub site_radius: f64,
    pub label_order: bool,
}

impl Default for SvgOptions {
    fn default() -> Self {
        Self {
            width: 800.0,
            site_radius: 3.0,
            label_order: false,
        }
    }
}

/// Well-spread pastel colour for stratum `s`.
fn color(s: usize) -> String {
    let hue = (s as f64 * 137.507_764) % 360.0;
    format!("hsl({hue:.1},55%,72%)")
}

#[cfg(test)]
mod tests {
    use super::super::grid_partition;
    use super::*;

    #[test]
    fn json_round_trip_keeps_diagnostics() {
        let d = Region::disk(Point::new(0.0, 0.0), 1.0).unwrap();
        let s = grid_partition(&d, 4).unwrap();
        let back = Stratification::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back.diagnostics(), s.diagnostics());
        assert_eq!(back.order(), s.order());
        assert_eq!(back.areas(), s.areas());
    }

    #[test]
    fn svg_has_sites() {
        let s = grid_partition(&Region::unit_square(), 2).unwrap();
        let svg = s.to_svg(&[Point::new(0.5, 0.5)], &SvgOptions::default());
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 1);
    }
}

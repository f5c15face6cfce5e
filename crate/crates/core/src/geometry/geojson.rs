use super::{Point, Region};
use crate::error::{Error, Result};
use geojson::{GeoJson, Geometry, GeometryValue};
use std::path::Path;

/// Read a study region from a GeoJSON file. Coordinates are taken as planar
/// metres; Polygon and MultiPolygon geometries are accepted.
pub fn region_from_geojson(path: impl AsRef<Path>) -> Result<Region> {
    let text = std::fs::read_to_string(path.as_ref())?;
    region_from_geojson_str(&text)
}

pub fn region_from_geojson_str(text: &str) -> Result<Region> {
    let gj: GeoJson = text.parse().map_err(|e| Error::GeoJson(format!("{e}")))?;
    let mut members = Vec::new();
    match gj {
        GeoJson::Geometry(g) => collect(&g, &mut members)?,
        GeoJson::Feature(f) => {
            let g = f
                .geometry
                .ok_or_else(|| Error::GeoJson("feature has no geometry".into()))?;
            collect(&g, &mut members)?;
        }
        GeoJson::FeatureCollection(fc) => {
            for f in fc.features {
                if let Some(g) = f.geometry {
                    collect(&g, &mut members)?;
                }
            }
        }
    }
    if members.is_empty() {
        return Err(Error::GeoJson("no polygon geometry found".into()));
    }
    Region::union(members)
}

fn collect(g: &Geometry, out: &mut Vec<Region>) -> Result<()> {
    match &g.value {
        GeometryValue::Polygon { coordinates } => out.push(polygon(coordinates)?),
        GeometryValue::MultiPolygon { coordinates } => {
            for p in coordinates {
                out.push(polygon(p)?);
            }
        }
        GeometryValue::GeometryCollection { geometries } => {
            for g in geometries {
                collect(g, out)?;
            }
        }
        other => {
            return Err(Error::GeoJson(format!(
                "unsupported geometry type {}",
                other.type_name()
            )))
        }
    }
    Ok(())
}

fn polygon(rings: &[Vec<geojson::Position>]) -> Result<Region> {
    let conv = |ring: &Vec<geojson::Position>| -> Result<Vec<Point>> {
        ring.iter()
            .map(|p| {
                if p.len() < 2 {
                    Err(Error::GeoJson(
                        "position with fewer than 2 coordinates".into(),
                    ))
                } else {
                    Ok(Point::new(p[0], p[1]))
                }
            })
            .collect()
    };
    let (first, rest) = rings
        .split_first()
        .ok_or_else(|| Error::GeoJson("polygon without rings".into()))?;
    let holes = rest.iter().map(conv).collect::<Result<Vec<_>>>()?;
    Region::polygon(conv(first)?, holes)
}

//! Line-intercept coverage survey: one transect per equal-area stratum.

use crate::error::Result;
use crate::estimate::{build_report, confidence_interval, EstimateReport};
use crate::field::{line_intercept_field, AttributeField, CoverSpec};
use crate::geometry::{Point, Region};
use crate::oracle::{moments, MIN_RESOLUTION};
use crate::rng::RandomStream;
use crate::schemes::draw_ss1;
use crate::stats::pairwise_sum;
use crate::stratify::{
    equal_area_compact_partition, grid_partition, PartitionParams, Stratification,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A stratified transect survey of cover `C` within region `A`.
#[derive(Clone, Debug)]
pub struct CanopySurvey {
    strata: Stratification,
    field: AttributeField,
    level: f64,
    edge_warning: Option<String>,
}

impl CanopySurvey {
    pub fn new(
        region: &Region,
        cover: Option<&Region>,
        n: usize,
        length: f64,
        orientation: f64,
        params: &PartitionParams,
    ) -> Result<CanopySurvey> {
        let strata = equal_area_compact_partition(region, n, params)?;
        Self::with_strata(strata, cover, length, orientation)
    }

    pub fn with_strata(
        strata: Stratification,
        cover: Option<&Region>,
        length: f64,
        orientation: f64,
    ) -> Result<CanopySurvey> {
        let spec = CoverSpec {
            cover: cover.cloned(),
            length,
            orientation,
        };
        let field = line_intercept_field(spec, strata.region().clone())?;
        let edge_warning = match cover {
            Some(c) if !has_clearance(strata.region(), c, length, orientation) => {
                let whole = grid_partition(strata.region(), 1)?;
                let bias = moments(&field, &whole, MIN_RESOLUTION)?.total - c.area();
                Some(format!(
                    "transects through the cover can leave the region; quadrature edge bias {:.6e} ({:.3}% of the cover area)",
                    bias,
                    100.0 * bias / c.area()
                ))
            }
            _ => None,
        };
        Ok(CanopySurvey {
            strata,
            field,
            level: 0.95,
            edge_warning,
        })
    }

    pub fn with_level(mut self, level: f64) -> CanopySurvey {
        self.level = level;
        self
    }

    pub fn stratification(&self) -> &Stratification {
        &self.strata
    }

    /// `y(u) = l(C ∩ t(u)) / L`.
    pub fn field(&self) -> &AttributeField {
        &self.field
    }

    /// One survey: transect midpoints drawn from `stream`.
    pub fn run(&self, stream: &RandomStream) -> Result<EstimateReport> {
        let plan = draw_ss1(&self.strata, stream)?;
        let mut r = build_report(
            &plan,
            &self.field,
            self.strata.region(),
            Some(&self.strata),
            self.level,
        )?;
        r.percent_of_region = Some(100.0 * r.estimate / r.region_area);
        r.warnings.extend(self.edge_warning.clone());
        Ok(r)
    }

    /// `reps` surveys; survey `r` uses `RandomStream::new(seed).child(r)`.
    pub fn replicate(&self, reps: usize, seed: u64) -> Result<CanopyReplicates> {
        let root = RandomStream::new(seed);
        let out: Vec<(f64, f64)> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let rep = self.run(&root.child(r as u64))?;
                let v = rep
                    .variance_used
                    .as_ref()
                    .map_or(f64::NAN, |k| rep.variance_estimates[k]);
                Ok((rep.estimate, v))
            })
            .collect::<Result<_>>()?;
        let (estimates, variances) = out.into_iter().unzip();
        Ok(CanopyReplicates {
            estimates,
            variances,
            level: self.level,
        })
    }
}

/// True when every transect of length `length` at `orientation` that meets
/// the cover stays inside the region, tested along the cover's hull.
fn has_clearance(region: &Region, cover: &Region, length: f64, orientation: f64) -> bool {
    let (dx, dy) = (orientation.cos(), orientation.sin());
    cover.hull_points().iter().all(|p| {
        (0..=8).all(|k| {
            let t = length * (k as f64 / 8.0 - 0.5);
            region.contains(Point::new(p.x + t * dx, p.y + t * dy))
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanopyReplicates {
    pub estimates: Vec<f64>,
    pub variances: Vec<f64>,
    pub level: f64,
}

impl CanopyReplicates {
    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.estimates) / self.estimates.len() as f64
    }

    /// Fraction of intervals containing `truth`.
    pub fn coverage(&self, truth: f64) -> Result<f64> {
        let mut hit = 0usize;
        for (t, v) in self.estimates.iter().zip(&self.variances) {
            let ci = confidence_interval(*t, *v, self.level)?;
            if ci.lower <= truth && truth <= ci.upper {
                hit += 1;
            }
        }
        Ok(hit as f64 / self.estimates.len() as f64)
    }
}

/// Stratify `region` into `n` equal-area strata, place one transect of
/// length `length` per stratum and estimate the area covered by `cover`.
pub fn canopy_pipeline(
    region: &Region,
    cover: Option<&Region>,
    n: usize,
    length: f64,
    orientation: f64,
    seed: u64,
) -> Result<EstimateReport> {
    let params = PartitionParams {
        seed,
        ..PartitionParams::default()
    };
    CanopySurvey::new(region, cover, n, length, orientation, &params)?
        .run(&RandomStream::new(seed).child(0))
}

/// A 10 km × 1.045 km reserve with disjoint circular crowns kept at least
/// 150 m from its edge. Returns `(A, C, a(C))`.
pub fn synthetic_scene() -> Result<(Region, Region, f64)> {
    let a = Region::rectangle(0.0, 0.0, 10_000.0, 1_045.0)?;
    let mut disks = Vec::new();
    let mut area = 0.0;
    for i in 0..24 {
        let col = i % 12;
        let row = i / 12;
        let r = 60.0 + 25.0 * ((i * 7) % 5) as f64;
        let x = 450.0 + 800.0 * col as f64 + 90.0 * (row as f64);
        let y = 330.0 + 385.0 * row as f64;
        disks.push(Region::disk(Point::new(x, y), r)?);
        area += std::f64::consts::PI * r * r;
    }
    Ok((a, Region::union(disks)?, area))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Region {
        Region::rectangle(0.0, 0.0, 1000.0, 500.0).unwrap()
    }

    fn params() -> PartitionParams {
        PartitionParams {
            restarts: 1,
            ..PartitionParams::default()
        }
    }

    #[test]
    fn empty_cover_gives_zero() {
        let s = CanopySurvey::new(&small(), None, 8, 50.0, 0.0, &params()).unwrap();
        let r = s.run(&RandomStream::new(3)).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert_eq!(r.variance_estimates["neighbor"], 0.0);
        assert_eq!(r.percent_of_region, Some(0.0));
    }

    #[test]
    fn full_cover_gives_region_area() {
        // Pad the cover by half a transect so every intercept is complete.
        let pad = Region::rectangle(-25.0, -25.0, 1025.0, 525.0).unwrap();
        let s = CanopySurvey::new(&small(), Some(&pad), 8, 50.0, 0.0, &params()).unwrap();
        let r = s.run(&RandomStream::new(3)).unwrap();
        assert!((r.estimate / 500_000.0 - 1.0).abs() < 1e-12);
        assert!((r.percent_of_region.unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn edge_cover_warns() {
        let c = Region::disk(Point::new(990.0, 250.0), 40.0).unwrap();
        let s = CanopySurvey::new(&small(), Some(&c), 8, 50.0, 0.0, &params()).unwrap();
        let r = s.run(&RandomStream::new(3)).unwrap();
        assert!(
            r.warnings.iter().any(|w| w.contains("edge bias")),
            "{:?}",
            r.warnings
        );

        let inner = Region::disk(Point::new(500.0, 250.0), 40.0).unwrap();
        let s = CanopySurvey::new(&small(), Some(&inner), 8, 50.0, 0.0, &params()).unwrap();
        let r = s.run(&RandomStream::new(3)).unwrap();
        assert!(!r.warnings.iter().any(|w| w.contains("edge bias")));
    }

    #[test]
    fn scene_is_disjoint_and_interior() {
        let (a, c, area) = synthetic_scene().unwrap();
        assert!((c.area() - area).abs() < 1e-6 * area);
        let b = c.bbox();
        let ab = a.bbox();
        assert!(b.min.x - ab.min.x >= 150.0 && ab.max.x - b.max.x >= 150.0);
        assert!(b.min.y - ab.min.y >= 150.0 && ab.max.y - b.max.y >= 150.0);
        let members = c.members();
        for (i, p) in members.iter().enumerate() {
            for q in &members[i + 1..] {
                assert!(!p.bbox().intersects(&q.bbox()));
            }
        }
    }
}

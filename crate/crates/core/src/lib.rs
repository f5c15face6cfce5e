//! Design-based estimation of spatial totals `T = ∫_A y(u) du`.
//!
//! The crate covers the full pipeline for comparing sample-site placement
//! schemes on a planar study region:
//!
//! - [`geometry`]: regions (polygons with holes, disks, ellipses, disjoint
//!   unions), exact areas, diameters, uniform points and transect
//!   intersection lengths.
//! - [`field`]: the fixed attribute function `y`, its zero extension and the
//!   line-intercept attribute density.
//! - [`stratify`]: rasterization, grid and equal-area compact partitions,
//!   sequential stratum indexing and partition diagnostics.
//! - [`schemes`]: uniform, one/two-per-stratum, tessellation and systematic
//!   grid placement driven by reproducible random substreams.
//! - [`estimate`]: Horvitz–Thompson type estimators, variance estimators and
//!   normal confidence intervals.
//! - [`oracle`]: quadrature ground truth for totals, variances, biases and
//!   the Lyapunov ratio.
//! - [`harness`]: Monte Carlo replication, rate fitting, normality checks,
//!   scheme comparison and the canopy-coverage pipeline.

#![forbid(unsafe_code)]

pub mod error;
pub mod estimate;
pub mod field;
pub mod geometry;
pub mod harness;
pub mod oracle;
pub mod rng;
pub mod schemes;
pub mod stats;
pub mod stratify;

pub use error::{Error, Result};
pub use field::{AttributeField, CoverSpec, FieldSpec, Integrand};
pub use geometry::{Point, Rect, Region, RegionSpec, Segment};
pub use rng::RandomStream;
pub use schemes::{SamplePlan, Scheme, Tessellation};
pub use stratify::{Diagnostics, Stratification};

/// Version tag embedded in every JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;

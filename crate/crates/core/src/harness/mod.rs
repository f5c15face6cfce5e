//! Monte Carlo experiments: replications, rate fits, normality checks and
//! scheme comparisons.

mod canopy;

pub use canopy::{canopy_pipeline, synthetic_scene, CanopyReplicates, CanopySurvey};

use crate::error::{invalid, Error, Result};
use crate::estimate::{
    est_tss, ht_total, naive_variance, neighbor_variance, two_per_stratum_variance,
};
use crate::field::{AttributeField, Extended, FieldSpec};
use crate::geometry::{Region, RegionSpec};
use crate::oracle::{exact_var_sgs, exact_var_ss, exact_var_tss, exact_var_urs, moments};
use crate::rng::RandomStream;
use crate::schemes::{
    draw_sgs, draw_ss1, draw_ss2, draw_tss, draw_urs, SamplePlan, Scheme, Tessellation,
};
use crate::stats::{least_squares, normal_cdf, normal_quantile, pairwise_sum, sample_variance};
use crate::stratify::{
    equal_area_compact_partition, grid_partition, grid_partition_xy, PartitionParams,
    Stratification,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// How strata are built for the stratified schemes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrataKind {
    /// Near-square `kx × ky` blocks of the bounding box.
    #[default]
    Grid,
    Balanced,
}

fn unit_square_spec() -> RegionSpec {
    Region::unit_square().to_spec()
}

fn all_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

fn default_reps() -> usize {
    10_000
}

fn default_resolution() -> usize {
    crate::oracle::DEFAULT_RESOLUTION
}

fn default_level() -> f64 {
    0.95
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub field: FieldSpec,
    #[serde(default = "unit_square_spec")]
    pub region: RegionSpec,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<Scheme>,
    pub n: Vec<usize>,
    #[serde(default = "default_reps")]
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub strata: StrataKind,
    #[serde(default)]
    pub partition: PartitionParams,
    /// Oracle quadrature resolution.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Randomly translate the lattice under TSS.
    #[serde(default)]
    pub random_shift: bool,
    #[serde(default = "default_level")]
    pub level: f64,
}

impl ExperimentConfig {
    pub fn new(field: FieldSpec, n: Vec<usize>, seed: u64) -> Self {
        Self {
            field,
            region: unit_square_spec(),
            schemes: all_schemes(),
            n,
            replications: default_reps(),
            seed,
            strata: StrataKind::Grid,
            partition: PartitionParams::default(),
            resolution: default_resolution(),
            random_shift: false,
            level: default_level(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() {
            return Err(invalid("n", "at least one sample size is required"));
        }
        if self.n.contains(&0) {
            return Err(invalid("n", "sample sizes must be positive"));
        }
        if self.n.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("n", "sample sizes must be strictly increasing"));
        }
        if self.schemes.is_empty() {
            return Err(invalid("schemes", "at least one scheme is required"));
        }
        if self.resolution < crate::oracle::MIN_RESOLUTION {
            return Err(invalid(
                "resolution",
                format!("must be at least {}", crate::oracle::MIN_RESOLUTION),
            ));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(invalid("level", "must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn region(&self) -> Result<Region> {
        Region::from_spec(&self.region)
    }

    pub fn field(&self) -> Result<AttributeField> {
        AttributeField::from_spec(&self.field, self.region()?)
    }
}

/// `(kx, ky)` with `kx · ky = n`, `kx ≥ ky` and `ky` as large as possible.
pub fn near_square(n: usize) -> (usize, usize) {
    let mut ky = (n as f64).sqrt().floor() as usize;
    while ky > 1 && !n.is_multiple_of(ky) {
        ky -= 1;
    }
    let ky = ky.max(1);
    (n / ky, ky)
}

pub fn build_strata(
    region: &Region,
    n: usize,
    kind: StrataKind,
    params: &PartitionParams,
) -> Result<Stratification> {
    match kind {
        StrataKind::Grid => {
            let (kx, ky) = near_square(n);
            grid_partition_xy(region, kx, ky)
        }
        StrataKind::Balanced => equal_area_compact_partition(region, n, params),
    }
}

fn square_side(n: usize) -> Result<usize> {
    let k = (n as f64).sqrt().round() as usize;
    if k * k != n {
        return Err(invalid(
            "n",
            format!("tessellation schemes need a perfect square, got {n}"),
        ));
    }
    Ok(k)
}

/// A scheme at a fixed sample size, with its strata or lattice prepared.
#[derive(Clone, Debug)]
pub struct Design {
    pub scheme: Scheme,
    pub n: usize,
    region: Region,
    strata: Option<Stratification>,
    tess: Option<Tessellation>,
    random_shift: bool,
}

impl Design {
    pub fn new(
        region: &Region,
        scheme: Scheme,
        n: usize,
        kind: StrataKind,
        params: &PartitionParams,
    ) -> Result<Design> {
        let mut d = Design {
            scheme,
            n,
            region: region.clone(),
            strata: None,
            tess: None,
            random_shift: false,
        };
        match scheme {
            Scheme::Urs => {}
            Scheme::Ss1 => d.strata = Some(build_strata(region, n, kind, params)?),
            Scheme::Ss2 => {
                if n < 2 || !n.is_multiple_of(2) {
                    return Err(invalid(
                        "n",
                        format!("two sites per stratum need an even n, got {n}"),
                    ));
                }
                d.strata = Some(build_strata(region, n / 2, kind, params)?);
            }
            Scheme::Tss | Scheme::Sgs => {
                d.tess = Some(Tessellation::new(region.bbox(), square_side(n)?)?);
            }
        }
        Ok(d)
    }

    pub fn from_stratification(scheme: Scheme, s: Stratification) -> Result<Design> {
        let n = match scheme {
            Scheme::Ss1 => s.len(),
            Scheme::Ss2 => 2 * s.len(),
            _ => {
                return Err(invalid(
                    "scheme",
                    "only stratified schemes take a stratification",
                ))
            }
        };
        Ok(Design {
            scheme,
            n,
            region: s.region().clone(),
            strata: Some(s),
            tess: None,
            random_shift: false,
        })
    }

    pub fn with_random_shift(mut self, on: bool) -> Design {
        self.random_shift = on;
        self
    }

    pub fn stratification(&self) -> Option<&Stratification> {
        self.strata.as_ref()
    }

    pub fn tessellation(&self) -> Option<&Tessellation> {
        self.tess.as_ref()
    }

    /// Names of the variance estimators recorded for this scheme.
    pub fn variance_names(&self) -> Vec<&'static str> {
        match self.scheme {
            Scheme::Urs => vec!["urs_sample"],
            Scheme::Ss1 => {
                let equal = self
                    .strata
                    .as_ref()
                    .is_some_and(|s| crate::estimate::check_equal_areas(s).is_ok());
                if equal {
                    vec!["naive", "neighbor"]
                } else {
                    vec!["naive"]
                }
            }
            Scheme::Ss2 => vec!["two_per_stratum"],
            Scheme::Tss | Scheme::Sgs => vec![],
        }
    }

    pub fn draw(&self, stream: &RandomStream) -> Result<SamplePlan> {
        match self.scheme {
            Scheme::Urs => draw_urs(&self.region, self.n, stream),
            Scheme::Ss1 => draw_ss1(self.strata.as_ref().unwrap(), stream),
            Scheme::Ss2 => draw_ss2(self.strata.as_ref().unwrap(), stream),
            Scheme::Tss => draw_tss(
                &self.region,
                self.tess.as_ref().unwrap(),
                stream,
                self.random_shift,
            ),
            Scheme::Sgs => draw_sgs(&self.region, self.tess.as_ref().unwrap(), stream),
        }
    }

    /// Estimate and the variance estimates named by [`Design::variance_names`].
    pub fn evaluate(&self, plan: &SamplePlan, y: &AttributeField) -> Result<(f64, Vec<f64>)> {
        let ys: Vec<f64> = plan.sites.iter().map(|s| y.eval(s.location)).collect();
        match self.scheme {
            Scheme::Urs => {
                let a = self.region.area();
                let t = a * pairwise_sum(&ys) / ys.len() as f64;
                let v = if ys.len() >= 2 {
                    a * a * sample_variance(&ys)? / ys.len() as f64
                } else {
                    f64::NAN
                };
                Ok((t, vec![v]))
            }
            Scheme::Ss1 => {
                let s = self.strata.as_ref().unwrap();
                let areas = s.areas();
                let t = ht_total(&areas, &ys);
                let naive = if ys.len() >= 2 {
                    naive_variance(&areas, &ys)?
                } else {
                    f64::NAN
                };
                let mut vars = vec![naive];
                if self.variance_names().len() == 2 {
                    let ordered: Vec<f64> = s.order().iter().map(|&i| ys[i]).collect();
                    vars.push(neighbor_variance(s.total_area(), &ordered)?);
                }
                Ok((t, vars))
            }
            Scheme::Ss2 => {
                let areas = self.strata.as_ref().unwrap().areas();
                let pairs: Vec<(f64, f64)> = ys.chunks_exact(2).map(|p| (p[0], p[1])).collect();
                let terms: Vec<f64> = areas
                    .iter()
                    .zip(&pairs)
                    .map(|(a, (y1, y2))| 0.5 * a * (y1 + y2))
                    .collect();
                Ok((
                    pairwise_sum(&terms),
                    vec![two_per_stratum_variance(&areas, &pairs)],
                ))
            }
            Scheme::Tss | Scheme::Sgs => Ok((est_tss(plan, y)?, vec![])),
        }
    }

    /// Exact variance of the design's estimator by quadrature; `None` for
    /// the randomly shifted lattice, which has no oracle here.
    pub fn oracle_variance(&self, y: &AttributeField, resolution: usize) -> Result<Option<f64>> {
        Ok(match self.scheme {
            Scheme::Urs => {
                let whole = grid_partition(&self.region, 1)?;
                Some(exact_var_urs(&moments(y, &whole, resolution)?, self.n)?)
            }
            Scheme::Ss1 => Some(exact_var_ss(&moments(
                y,
                self.strata.as_ref().unwrap(),
                resolution,
            )?)),
            Scheme::Ss2 => {
                Some(0.5 * exact_var_ss(&moments(y, self.strata.as_ref().unwrap(), resolution)?))
            }
            Scheme::Tss if self.random_shift => None,
            Scheme::Tss => Some(exact_var_tss(
                &Extended(y),
                self.tess.as_ref().unwrap(),
                resolution,
            )?),
            Scheme::Sgs => {
                let t = self.tess.as_ref().unwrap();
                let m = (resolution / t.k).clamp(8, 64);
                Some(exact_var_sgs(&Extended(y), t, m)?)
            }
        })
    }
}

/// Stream label of a design, so every `(scheme, n)` gets its own subtree.
pub fn design_label(scheme: Scheme, n: usize) -> u64 {
    let idx = Scheme::ALL.iter().position(|&s| s == scheme).unwrap() as u64;
    (idx << 48) | n as u64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replicates {
    pub scheme: Scheme,
    pub n: usize,
    pub estimates: Vec<f64>,
    pub variance_estimates: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub scheme: Scheme,
    pub n: usize,
    pub replications: usize,
    pub mean: f64,
    pub variance: f64,
    pub sd: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub variance_estimates: BTreeMap<String, MeanSe>,
}

fn mean_se(xs: &[f64]) -> Result<MeanSe> {
    let mean = pairwise_sum(xs) / xs.len() as f64;
    let se = (sample_variance(xs)? / xs.len() as f64).sqrt();
    Ok(MeanSe { mean, se })
}

impl Replicates {
    pub fn summary(&self) -> Result<ReplicateSummary> {
        let ms = mean_se(&self.estimates)?;
        let variance = sample_variance(&self.estimates)?;
        let variance_estimates = self
            .variance_estimates
            .iter()
            .map(|(k, v)| Ok((k.clone(), mean_se(v)?)))
            .collect::<Result<_>>()?;
        Ok(ReplicateSummary {
            scheme: self.scheme,
            n: self.n,
            replications: self.estimates.len(),
            mean: ms.mean,
            variance,
            sd: variance.sqrt(),
            se: ms.se,
            variance_estimates,
        })
    }

    /// `(T̂ − T)/σ` for every replication.
    pub fn standardized(&self, total: f64, sigma: f64) -> Vec<f64> {
        self.estimates.iter().map(|t| (t - total) / sigma).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rep,estimate");
        for k in self.variance_estimates.keys() {
            out.push(',');
            out.push_str(k);
        }
        out.push('\n');
        for (i, t) in self.estimates.iter().enumerate() {
            let _ = write!(out, "{i},{t:?}");
            for v in self.variance_estimates.values() {
                let _ = write!(out, ",{:?}", v[i]);
            }
            out.push('\n');
        }
        out
    }
}

/// `reps` independent draws of `design`; replication `r` uses the stream
/// `root.child(design_label).child(r)`.
pub fn replicate_design(
    design: &Design,
    y: &AttributeField,
    reps: usize,
    root: &RandomStream,
) -> Result<Replicates> {
    if reps == 0 {
        return Err(invalid("replications", "must be at least 1"));
    }
    let base = root.child(design_label(design.scheme, design.n));
    let outcomes: Vec<(f64, Vec<f64>)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let plan = design.draw(&base.child(r as u64))?;
            design.evaluate(&plan, y)
        })
        .collect::<Result<_>>()?;
    let names = design.variance_names();
    let mut variance_estimates: BTreeMap<String, Vec<f64>> = names
        .iter()
        .map(|k| (k.to_string(), Vec::with_capacity(reps)))
        .collect();
    let mut estimates = Vec::with_capacity(reps);
    for (t, vars) in outcomes {
        estimates.push(t);
        for (k, v) in names.iter().zip(vars) {
            variance_estimates.get_mut(*k).unwrap().push(v);
        }
    }
    Ok(Replicates {
        scheme: design.scheme,
        n: design.n,
        estimates,
        variance_estimates,
    })
}

/// Replications for every `(scheme, n)` of the config, schemes outermost.
pub fn replicate(cfg: &ExperimentConfig) -> Result<Vec<Replicates>> {
    cfg.validate()?;
    let region = cfg.region()?;
    let y = cfg.field()?;
    let root = RandomStream::new(cfg.seed);
    let mut out = Vec::new();
    for &scheme in &cfg.schemes {
        for &n in &cfg.n {
            let d = Design::new(&region, scheme, n, cfg.strata, &cfg.partition)?
                .with_random_shift(cfg.random_shift);
            out.push(replicate_design(&d, &y, cfg.replications, &root)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub n: Vec<usize>,
    pub variance: Vec<f64>,
    /// Slope of log variance on log n.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_rate(ns: &[usize], variances: &[f64]) -> Result<RateFit> {
    if ns.len() != variances.len() {
        return Err(invalid(
            "variance",
            "one variance per sample size is required",
        ));
    }
    if ns.len() < 4 {
        return Err(Error::TooFew {
            needed: 4,
            got: ns.len(),
        });
    }
    if let Some(v) = variances.iter().find(|v| !(**v > 0.0)) {
        return Err(invalid(
            "variance",
            format!("rate fits need positive variances, got {v}"),
        ));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = variances.iter().map(|v| v.ln()).collect();
    let f = least_squares(&xs, &ys)?;
    Ok(RateFit {
        n: ns.to_vec(),
        variance: variances.to_vec(),
        slope: f.slope,
        intercept: f.intercept,
        r_squared: f.r_squared,
    })
}

pub const MIN_CLT_DRAWS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltCheck {
    pub draws: usize,
    /// Fraction of draws inside `±z_{0.975}`.
    pub coverage: f64,
    /// Kolmogorov–Smirnov distance to the standard normal.
    pub ks: f64,
}

pub fn clt_check(z: &[f64]) -> Result<CltCheck> {
    if z.len() < MIN_CLT_DRAWS {
        return Err(Error::TooFew {
            needed: MIN_CLT_DRAWS,
            got: z.len(),
        });
    }
    let q = normal_quantile(0.975);
    let inside = z.iter().filter(|v| v.abs() <= q).count();
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let ks = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal_cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(CltCheck {
        draws: z.len(),
        coverage: inside as f64 / n,
        ks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub scheme: Scheme,
    pub oracle_variance: Option<f64>,
    pub empirical_mean: Option<f64>,
    pub empirical_variance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub total: f64,
    pub rows: Vec<ComparisonRow>,
    /// Oracle rate fit per scheme, when at least four sample sizes were run.
    pub fits: BTreeMap<Scheme, RateFit>,
    /// Sample sizes where the equal-strata SS1 variance exceeds URS.
    pub violations: Vec<usize>,
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
        let mut out = String::from("n,scheme,oracle_variance,empirical_mean,empirical_variance\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.n,
                r.scheme,
                opt(r.oracle_variance),
                opt(r.empirical_mean),
                opt(r.empirical_variance)
            );
        }
        out
    }

    pub fn oracle(&self, scheme: Scheme, n: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.scheme == scheme && r.n == n)
            .and_then(|r| r.oracle_variance)
    }
}

/// Oracle (and, when `empirical`, Monte Carlo) variances for every scheme
/// and sample size in the config.
pub fn compare_schemes(cfg: &ExperimentConfig, empirical: bool) -> Result<Comparison> {
    cfg.validate()?;
    let region = cfg.region()?;
    let y = cfg.field()?;
    let root = RandomStream::new(cfg.seed);
    let total = moments(&y, &grid_partition(&region, 1)?, cfg.resolution)?.total;
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for &n in &cfg.n {
        let mut urs = None;
        let mut ss1 = None;
        for &scheme in &cfg.schemes {
            let d = Design::new(&region, scheme, n, cfg.strata, &cfg.partition)?
                .with_random_shift(cfg.random_shift);
            let oracle = d.oracle_variance(&y, cfg.resolution)?;
            let (empirical_mean, empirical_variance) = if empirical {
                let s = replicate_design(&d, &y, cfg.replications, &root)?.summary()?;
                (Some(s.mean), Some(s.variance))
            } else {
                (None, None)
            };
            match scheme {
                Scheme::Urs => urs = oracle,
                Scheme::Ss1
                    if d.strata
                        .as_ref()
                        .is_some_and(|s| crate::estimate::check_equal_areas(s).is_ok()) =>
                {
                    ss1 = oracle
                }
                _ => {}
            }
            rows.push(ComparisonRow {
                n,
                scheme,
                oracle_variance: oracle,
                empirical_mean,
                empirical_variance,
            });
        }
        if let (Some(u), Some(s)) = (urs, ss1) {
            // Tolerate quadrature noise when both vanish.
            if s > u + 1e-12 * total.abs().max(1e-300).powi(2) {
                violations.push(n);
            }
        }
    }
    let mut fits = BTreeMap::new();
    if cfg.n.len() >= 4 {
        for &scheme in &cfg.schemes {
            let vs: Option<Vec<f64>> = cfg
                .n
                .iter()
                .map(|&n| {
                    rows.iter()
                        .find(|r| r.n == n && r.scheme == scheme)?
                        .oracle_variance
                })
                .collect();
            if let Some(vs) = vs {
                if let Ok(f) = fit_rate(&cfg.n, &vs) {
                    fits.insert(scheme, f);
                }
            }
        }
    }
    Ok(Comparison {
        total,
        rows,
        fits,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> FieldSpec {
        FieldSpec::Linear {
            gradient: [1.0, 0.0],
            offset: 0.0,
        }
    }

    #[test]
    fn exact_power_laws() {
        let ns = [4, 16, 64, 256];
        let v: Vec<f64> = ns.iter().map(|&n| 1.0 / (12.0 * (n * n) as f64)).collect();
        let f = fit_rate(&ns, &v).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let v: Vec<f64> = ns.iter().map(|&n| 0.3 / n as f64).collect();
        assert!((fit_rate(&ns, &v).unwrap().slope + 1.0).abs() < 1e-12);
        assert!(matches!(fit_rate(&[4], &[0.1]), Err(Error::TooFew { .. })));
        assert!(fit_rate(&ns, &[1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn clt_on_degenerate_draws() {
        let c = clt_check(&vec![0.0; MIN_CLT_DRAWS]).unwrap();
        assert_eq!(c.coverage, 1.0);
        assert!((c.ks - 0.5).abs() < 1e-15);
        assert!(clt_check(&[0.0; 10]).is_err());
    }

    #[test]
    fn clt_on_normal_draws() {
        // Normal quantiles of a stratified uniform grid are as normal as it gets.
        let n = 100_000;
        let z: Vec<f64> = (0..n)
            .map(|i| normal_quantile((i as f64 + 0.5) / n as f64))
            .collect();
        let c = clt_check(&z).unwrap();
        assert!((0.945..=0.955).contains(&c.coverage));
        assert!(c.ks < 1e-4);
    }

    #[test]
    fn zero_replications_rejected() {
        let mut cfg = ExperimentConfig::new(linear(), vec![4], 1);
        cfg.replications = 0;
        assert!(replicate(&cfg).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::new(linear(), vec![16, 4], 1);
        assert!(cfg.validate().is_err());
        cfg.n = vec![4, 16];
        assert!(cfg.validate().is_ok());
        cfg.level = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn replication_is_deterministic_and_unbiased() {
        let mut cfg = ExperimentConfig::new(linear(), vec![4], 7);
        cfg.schemes = vec![Scheme::Ss1];
        cfg.replications = 4000;
        let a = replicate(&cfg).unwrap();
        let b = replicate(&cfg).unwrap();
        assert_eq!(a, b);
        let s = a[0].summary().unwrap();
        assert!((s.mean - 0.5).abs() <= 3.0 * s.se);
        assert_eq!(s.variance_estimates.len(), 2);
    }

    #[test]
    fn comparison_on_linear_field() {
        let mut cfg = ExperimentConfig::new(linear(), vec![4], 1);
        cfg.resolution = 256;
        let c = compare_schemes(&cfg, false).unwrap();
        let urs = c.oracle(Scheme::Urs, 4).unwrap();
        let ss = c.oracle(Scheme::Ss1, 4).unwrap();
        assert!((urs - 1.0 / 48.0).abs() < 1e-12);
        assert!((ss - 1.0 / 192.0).abs() < 1e-12);
        assert!((urs / ss - 4.0).abs() < 1e-9);
        assert!(c.violations.is_empty());
    }

    #[test]
    fn comparison_on_constant_field_is_zero() {
        let mut cfg = ExperimentConfig::new(FieldSpec::Constant { value: 1.0 }, vec![4], 1);
        cfg.resolution = 256;
        let c = compare_schemes(&cfg, false).unwrap();
        for r in &c.rows {
            assert!(r.oracle_variance.unwrap().abs() < 1e-14, "{r:?}");
        }
    }

    #[test]
    fn near_square_factors() {
        assert_eq!(near_square(16), (4, 4));
        assert_eq!(near_square(8), (4, 2));
        assert_eq!(near_square(7), (7, 1));
        assert_eq!(near_square(50), (10, 5));
    }
}

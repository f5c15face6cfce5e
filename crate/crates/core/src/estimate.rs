//! Estimators of the total, their variance estimators and normal intervals.

use crate::error::{invalid, Error, Result};
use crate::field::Integrand;
use crate::geometry::Region;
use crate::rng::StreamProvenance;
use crate::schemes::{SamplePlan, Scheme};
use crate::stats::{normal_quantile, pairwise_sum, sample_variance};
use crate::stratify::{Diagnostics, Stratification};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Relative area spread tolerated by the neighbour-difference estimator.
pub const EQUAL_AREA_TOLERANCE: f64 = 0.01;

fn expect_scheme(plan: &SamplePlan, ok: &[Scheme]) -> Result<()> {
    if ok.contains(&plan.scheme) {
        Ok(())
    } else {
        Err(Error::SchemeMismatch {
            expected: ok.iter().map(|s| s.name()).collect::<Vec<_>>().join("|"),
            found: plan.scheme.name().into(),
        })
    }
}

/// Values `y(V_i)` for a one-per-stratum plan, checking site `i` belongs to
/// stratum `i`.
fn ss1_values(plan: &SamplePlan, s: &Stratification, y: &impl Integrand) -> Result<Vec<f64>> {
    expect_scheme(plan, &[Scheme::Ss1])?;
    if plan.sites.len() != s.len() {
        return Err(Error::SiteMismatch(format!(
            "{} sites for {} strata",
            plan.sites.len(),
            s.len()
        )));
    }
    plan.sites
        .iter()
        .enumerate()
        .map(|(i, site)| {
            if site.stratum != Some(i) {
                return Err(Error::SiteMismatch(format!(
                    "site {i} is not tagged with stratum {i}"
                )));
            }
            Ok(y.value(site.location))
        })
        .collect()
}

/// Pairs `(y(V_1j), y(V_2j))` for a two-per-stratum plan.
fn ss2_values(
    plan: &SamplePlan,
    s: &Stratification,
    y: &impl Integrand,
) -> Result<Vec<(f64, f64)>> {
    expect_scheme(plan, &[Scheme::Ss2])?;
    if plan.sites.len() != 2 * s.len() {
        return Err(Error::SiteMismatch(format!(
            "{} sites for {} strata, expected two per stratum",
            plan.sites.len(),
            s.len()
        )));
    }
    plan.sites
        .chunks_exact(2)
        .enumerate()
        .map(|(j, pair)| {
            if pair.iter().any(|p| p.stratum != Some(j)) {
                return Err(Error::SiteMismatch(format!(
                    "sites {} and {} are not in stratum {j}",
                    2 * j,
                    2 * j + 1
                )));
            }
            Ok((y.value(pair[0].location), y.value(pair[1].location)))
        })
        .collect()
}

/// `(a(A)/n) Σ y(U_i)`.
pub fn est_urs(plan: &SamplePlan, y: &impl Integrand, region: &Region) -> Result<f64> {
    expect_scheme(plan, &[Scheme::Urs])?;
    if plan.sites.is_empty() {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    let ys: Vec<f64> = plan.sites.iter().map(|s| y.value(s.location)).collect();
    Ok(region.area() * pairwise_sum(&ys) / ys.len() as f64)
}

/// `Σ a(A_i) y(V_i)`.
pub fn est_ss1(plan: &SamplePlan, s: &Stratification, y: &impl Integrand) -> Result<f64> {
    Ok(ht_total(&s.areas(), &ss1_values(plan, s, y)?))
}

/// `½ Σ a(A_j)(y(V_1j) + y(V_2j))`.
pub fn est_ss2(plan: &SamplePlan, s: &Stratification, y: &impl Integrand) -> Result<f64> {
    let pairs = ss2_values(plan, s, y)?;
    let terms: Vec<f64> = s
        .areas()
        .iter()
        .zip(&pairs)
        .map(|(a, (y1, y2))| 0.5 * a * (y1 + y2))
        .collect();
    Ok(pairwise_sum(&terms))
}

/// `Σ a(cell) y_e(site)` over a tessellation plan; sites flagged outside the
/// region contribute zero.
pub fn est_tss(plan: &SamplePlan, y: &impl Integrand) -> Result<f64> {
    expect_scheme(plan, &[Scheme::Tss, Scheme::Sgs])?;
    let a = plan
        .cell_area
        .ok_or_else(|| invalid("cell_area", "tessellation plan without cell area"))?;
    let terms: Vec<f64> = plan
        .sites
        .iter()
        .map(|s| {
            if s.in_region {
                a * y.value(s.location)
            } else {
                0.0
            }
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Naive estimator `n/(n−1) Σ (a_i y_i − T̂/n)²`, treating the stratified
/// sample as if it were uniform.
pub fn var_naive(plan: &SamplePlan, s: &Stratification, y: &impl Integrand) -> Result<f64> {
    naive_variance(&s.areas(), &ss1_values(plan, s, y)?)
}

/// Neighbour-difference estimator for equal-size strata, using the
/// stratification's sequential index.
pub fn var_neighbor(plan: &SamplePlan, s: &Stratification, y: &impl Integrand) -> Result<f64> {
    check_equal_areas(s)?;
    let ys = ss1_values(plan, s, y)?;
    let ordered: Vec<f64> = s.order().iter().map(|&i| ys[i]).collect();
    neighbor_variance(s.total_area(), &ordered)
}

/// `¼ Σ a_j² (y_1j − y_2j)²`.
pub fn var_ss2(plan: &SamplePlan, s: &Stratification, y: &impl Integrand) -> Result<f64> {
    let pairs = ss2_values(plan, s, y)?;
    Ok(two_per_stratum_variance(&s.areas(), &pairs))
}

/// `a(A)² s²_y / n` for a uniform sample.
pub fn var_urs_sample(plan: &SamplePlan, y: &impl Integrand, region: &Region) -> Result<f64> {
    expect_scheme(plan, &[Scheme::Urs])?;
    let ys: Vec<f64> = plan.sites.iter().map(|s| y.value(s.location)).collect();
    let a = region.area();
    Ok(a * a * sample_variance(&ys)? / ys.len() as f64)
}

pub fn check_equal_areas(s: &Stratification) -> Result<()> {
    let spread = s.area_spread();
    if spread > EQUAL_AREA_TOLERANCE {
        return Err(Error::UnequalStrata {
            spread,
            tolerance: EQUAL_AREA_TOLERANCE,
        });
    }
    Ok(())
}

/// `Σ a_i y_i`.
pub fn ht_total(areas: &[f64], ys: &[f64]) -> f64 {
    let t: Vec<f64> = areas.iter().zip(ys).map(|(a, y)| a * y).collect();
    pairwise_sum(&t)
}

pub fn naive_variance(areas: &[f64], ys: &[f64]) -> Result<f64> {
    let n = ys.len();
    if n < 2 {
        return Err(Error::TooFew { needed: 2, got: n });
    }
    let t = ht_total(areas, ys);
    let nf = n as f64;
    let sq: Vec<f64> = areas
        .iter()
        .zip(ys)
        .map(|(a, y)| (a * y - t / nf).powi(2))
        .collect();
    Ok(nf / (nf - 1.0) * pairwise_sum(&sq))
}

/// `(a²/2n²)(y_1² + Σ (y_i − y_{i+1})² + y_n²)` for values in sequential order.
pub fn neighbor_variance(total_area: f64, ordered: &[f64]) -> Result<f64> {
    let n = ordered.len();
    if n < 1 {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    let mut sq = Vec::with_capacity(n + 1);
    sq.push(ordered[0] * ordered[0]);
    sq.extend(ordered.windows(2).map(|w| (w[0] - w[1]).powi(2)));
    sq.push(ordered[n - 1] * ordered[n - 1]);
    let nf = n as f64;
    Ok(total_area * total_area / (2.0 * nf * nf) * pairwise_sum(&sq))
}

pub fn two_per_stratum_variance(areas: &[f64], pairs: &[(f64, f64)]) -> f64 {
    let sq: Vec<f64> = areas
        .iter()
        .zip(pairs)
        .map(|(a, (y1, y2))| a * a * (y1 - y2).powi(2))
        .collect();
    0.25 * pairwise_sum(&sq)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

/// `T̂ ± z_{(1+level)/2} √var`.
pub fn confidence_interval(estimate: f64, variance: f64, level: f64) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid("level", format!("must lie in (0, 1), got {level}")));
    }
    if !(variance >= 0.0) {
        return Err(invalid("variance", "must be non-negative"));
    }
    let half = normal_quantile(0.5 * (1.0 + level)) * variance.sqrt();
    Ok(ConfidenceInterval {
        lower: estimate - half,
        upper: estimate + half,
        level,
    })
}

/// Everything known about one realized estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub scheme: Scheme,
    pub n: usize,
    pub estimate: f64,
    pub region_area: f64,
    pub variance_estimates: BTreeMap<String, f64>,
    pub variance_used: Option<String>,
    pub std_error: Option<f64>,
    pub ci: Option<ConfidenceInterval>,
    /// `100 · T̂ / a(A)`, for attributes that measure covered area.
    pub percent_of_region: Option<f64>,
    pub diagnostics: Option<Diagnostics>,
    pub provenance: StreamProvenance,
    pub warnings: Vec<String>,
}

/// Estimate, all applicable variance estimates and an interval from the
/// preferred one (neighbour for SS1 when strata are equal, naive otherwise).
pub fn build_report(
    plan: &SamplePlan,
    y: &impl Integrand,
    region: &Region,
    strata: Option<&Stratification>,
    level: f64,
) -> Result<EstimateReport> {
    let mut vars = BTreeMap::new();
    let mut warnings = Vec::new();
    fn need(s: Option<&Stratification>) -> Result<&Stratification> {
        s.ok_or_else(|| invalid("stratification", "required for stratified schemes"))
    }
    let (estimate, used) = match plan.scheme {
        Scheme::Urs => {
            let t = est_urs(plan, y, region)?;
            match var_urs_sample(plan, y, region) {
                Ok(v) => {
                    vars.insert("urs_sample".to_string(), v);
                }
                Err(e) => warnings.push(format!("no variance estimate: {e}")),
            }
            (t, Some("urs_sample"))
        }
        Scheme::Ss1 => {
            let s = need(strata)?;
            let t = est_ss1(plan, s, y)?;
            match var_naive(plan, s, y) {
                Ok(v) => {
                    vars.insert("naive".to_string(), v);
                }
                Err(e) => warnings.push(format!("naive variance unavailable: {e}")),
            }
            match var_neighbor(plan, s, y) {
                Ok(v) => {
                    vars.insert("neighbor".to_string(), v);
                }
                Err(e) => warnings.push(format!("neighbor variance unavailable: {e}")),
            }
            let used = if vars.contains_key("neighbor") {
                Some("neighbor")
            } else {
                Some("naive")
            };
            (t, used)
        }
        Scheme::Ss2 => {
            let s = need(strata)?;
            let t = est_ss2(plan, s, y)?;
            vars.insert("two_per_stratum".to_string(), var_ss2(plan, s, y)?);
            (t, Some("two_per_stratum"))
        }
        Scheme::Tss | Scheme::Sgs => {
            warnings.push(format!(
                "no design-based variance estimator is implemented for {}",
                plan.scheme
            ));
            (est_tss(plan, y)?, None)
        }
    };
    let used = used.filter(|u| vars.contains_key(*u)).map(str::to_string);
    let (std_error, ci) = match used.as_ref().map(|u| vars[u]) {
        Some(v) => (
            Some(v.sqrt()),
            Some(confidence_interval(estimate, v, level)?),
        ),
        None => (None, None),
    };
    Ok(EstimateReport {
        schema_version: crate::SCHEMA_VERSION,
        scheme: plan.scheme,
        n: plan.sites.len(),
        estimate,
        region_area: region.area(),
        variance_estimates: vars,
        variance_used: used,
        std_error,
        ci,
        percent_of_region: None,
        diagnostics: strata.map(|s| s.diagnostics().clone()),
        provenance: plan.provenance.clone(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{builtin_field, FnIntegrand};
    use crate::geometry::Point;
    use crate::schemes::{sgs_plan_with_offset, Site, Tessellation};
    use crate::stratify::{grid_partition, grid_partition_xy};
    use serde_json::json;

    fn lin() -> crate::AttributeField {
        builtin_field("linear", &json!({}), Region::unit_square()).unwrap()
    }

    fn fixed_plan(scheme: Scheme, pts: &[(f64, f64, Option<usize>)]) -> SamplePlan {
        SamplePlan {
            scheme,
            sites: pts
                .iter()
                .map(|&(x, y, s)| Site {
                    location: Point::new(x, y),
                    stratum: s,
                    in_region: true,
                })
                .collect(),
            nominal_n: pts.len(),
            realized_in_region: pts.len(),
            provenance: StreamProvenance {
                root_seed: 0,
                path: vec![],
            },
            tessellation: None,
            cell_area: None,
            offset: None,
        }
    }

    /// Cell-centre SS1 plan on the 2×2 grid.
    fn centers() -> (Stratification, SamplePlan) {
        let s = grid_partition(&Region::unit_square(), 2).unwrap();
        let pts: Vec<(f64, f64, Option<usize>)> = (0..4)
            .map(|i| {
                let c = s.stratum(i).centroid;
                (c.x, c.y, Some(i))
            })
            .collect();
        (s, fixed_plan(Scheme::Ss1, &pts))
    }

    #[test]
    fn urs_examples() {
        let sq = Region::unit_square();
        let p = fixed_plan(Scheme::Urs, &[(0.2, 0.1, None), (0.6, 0.9, None)]);
        assert!((est_urs(&p, &lin(), &sq).unwrap() - 0.4).abs() < 1e-15);
        let one = builtin_field("constant", &json!({}), sq.clone()).unwrap();
        assert_eq!(est_urs(&p, &one, &sq).unwrap(), 1.0);
        let zero = builtin_field("constant", &json!({"value": 0.0}), sq.clone()).unwrap();
        assert_eq!(est_urs(&p, &zero, &sq).unwrap(), 0.0);
        let vals = FnIntegrand(|q: Point| if q.x < 0.5 { 0.0 } else { 1.0 });
        assert!((var_urs_sample(&p, &vals, &sq).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(var_urs_sample(&p, &one, &sq).unwrap(), 0.0);
    }

    #[test]
    fn ss1_examples() {
        let (s, p) = centers();
        assert!((est_ss1(&p, &s, &lin()).unwrap() - 0.5).abs() < 1e-15);
        let one = builtin_field("constant", &json!({}), Region::unit_square()).unwrap();
        assert_eq!(est_ss1(&p, &s, &one).unwrap(), 1.0);

        let halves = grid_partition_xy(&Region::unit_square(), 2, 1).unwrap();
        let p2 = fixed_plan(Scheme::Ss1, &[(0.25, 0.3, Some(0)), (0.75, 0.3, Some(1))]);
        assert!((est_ss1(&p2, &halves, &lin()).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ss1_rejects_mismatched_plans() {
        let (s, mut p) = centers();
        p.sites[1].stratum = Some(2);
        assert!(matches!(
            est_ss1(&p, &s, &lin()),
            Err(Error::SiteMismatch(_))
        ));
        p.scheme = Scheme::Urs;
        assert!(matches!(
            est_ss1(&p, &s, &lin()),
            Err(Error::SchemeMismatch { .. })
        ));
    }

    #[test]
    fn naive_and_neighbor_examples() {
        let (s, p) = centers();
        let naive = var_naive(&p, &s, &lin()).unwrap();
        assert!((naive - 4.0 / 3.0 * 0.015625).abs() < 1e-15);
        let nb = var_neighbor(&p, &s, &lin()).unwrap();
        assert!((nb - 0.019_531_25).abs() < 1e-15);

        let mut rev = s.clone();
        let mut o = s.order().to_vec();
        o.reverse();
        rev.set_order(o).unwrap();
        assert_eq!(var_neighbor(&p, &rev, &lin()).unwrap(), nb);

        let zero =
            builtin_field("constant", &json!({"value": 0.0}), Region::unit_square()).unwrap();
        assert_eq!(var_neighbor(&p, &s, &zero).unwrap(), 0.0);
        let one = builtin_field("constant", &json!({}), Region::unit_square()).unwrap();
        assert_eq!(var_naive(&p, &s, &one).unwrap(), 0.0);
    }

    #[test]
    fn naive_needs_two_sites() {
        let s = grid_partition(&Region::unit_square(), 1).unwrap();
        let p = fixed_plan(Scheme::Ss1, &[(0.5, 0.5, Some(0))]);
        assert!(matches!(
            var_naive(&p, &s, &lin()),
            Err(Error::TooFew { .. })
        ));
    }

    #[test]
    fn neighbor_rejects_unequal_strata() {
        let r = Region::rectangle(0.0, 0.0, 3.0, 1.0).unwrap();
        let s = grid_partition(&Region::disk(Point::new(0.0, 0.0), 1.0).unwrap(), 3).unwrap();
        let pts: Vec<_> = (0..s.len())
            .map(|i| {
                let c = s.stratum(i).centroid;
                (c.x, c.y, Some(i))
            })
            .collect();
        let p = fixed_plan(Scheme::Ss1, &pts);
        let f = builtin_field("linear", &json!({}), r).unwrap();
        assert!(matches!(
            var_neighbor(&p, &s, &f),
            Err(Error::UnequalStrata { .. })
        ));
    }

    #[test]
    fn ss2_examples() {
        let s = grid_partition(&Region::unit_square(), 1).unwrap();
        let p = fixed_plan(Scheme::Ss2, &[(0.2, 0.5, Some(0)), (0.6, 0.5, Some(0))]);
        assert!((est_ss2(&p, &s, &lin()).unwrap() - 0.4).abs() < 1e-15);
        assert!((var_ss2(&p, &s, &lin()).unwrap() - 0.04).abs() < 1e-15);
        let swapped = fixed_plan(Scheme::Ss2, &[(0.6, 0.5, Some(0)), (0.2, 0.5, Some(0))]);
        assert_eq!(
            est_ss2(&swapped, &s, &lin()).unwrap(),
            est_ss2(&p, &s, &lin()).unwrap()
        );
        let one = builtin_field("constant", &json!({}), Region::unit_square()).unwrap();
        assert_eq!(est_ss2(&p, &s, &one).unwrap(), 1.0);
        let same = fixed_plan(Scheme::Ss2, &[(0.3, 0.1, Some(0)), (0.3, 0.9, Some(0))]);
        assert_eq!(var_ss2(&same, &s, &lin()).unwrap(), 0.0);
    }

    #[test]
    fn sgs_centered_grid_is_exact_for_linear() {
        let sq = Region::unit_square();
        let k = 4;
        let t = Tessellation::new(sq.bbox(), k).unwrap();
        let off = 0.5 / k as f64;
        let p = sgs_plan_with_offset(&sq, &t, Point::new(off, off)).unwrap();
        assert!((est_tss(&p, &lin()).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn intervals() {
        let ci = confidence_interval(0.0, 1.0, 0.95).unwrap();
        assert!((ci.upper - 1.959_964).abs() < 1e-6 && (ci.lower + 1.959_964).abs() < 1e-6);
        let ci = confidence_interval(0.0, 1.0, 0.5).unwrap();
        assert!((ci.upper - 0.674_490).abs() < 1e-6);
        let ci = confidence_interval(3.0, 0.0, 0.95).unwrap();
        assert_eq!((ci.lower, ci.upper), (3.0, 3.0));
        assert!(confidence_interval(0.0, 1.0, 1.0).is_err());
        assert!(confidence_interval(0.0, -1.0, 0.9).is_err());
    }

    #[test]
    fn linearity_in_the_field() {
        let (s, p) = centers();
        let sq = Region::unit_square();
        let y1 = builtin_field("linear", &json!({"gradient": [0.3, 1.0]}), sq.clone()).unwrap();
        let y2 = builtin_field("smooth_sine", &json!({}), sq.clone()).unwrap();
        let (c1, c2) = (2.5, -0.75);
        let mix = FnIntegrand(|q: Point| c1 * y1.eval(q) + c2 * y2.eval(q));
        let lhs = est_ss1(&p, &s, &mix).unwrap();
        let rhs = c1 * est_ss1(&p, &s, &y1).unwrap() + c2 * est_ss1(&p, &s, &y2).unwrap();
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn report_for_ss1_uses_neighbor() {
        let (s, p) = centers();
        let r = build_report(&p, &lin(), &Region::unit_square(), Some(&s), 0.95).unwrap();
        assert_eq!(r.variance_used.as_deref(), Some("neighbor"));
        assert_eq!(r.variance_estimates.len(), 2);
        let ci = r.ci.unwrap();
        assert!(ci.lower <= r.estimate && r.estimate <= ci.upper);
    }
}

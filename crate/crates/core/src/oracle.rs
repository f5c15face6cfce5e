//! Quadrature ground truth for totals, exact variances and biases.
//!
//! Integrals over each raster cell use the midpoint rule at two subcell
//! resolutions followed by Richardson extrapolation. Cells cut by the
//! region boundary are weighted by the exact clipped area of each subcell,
//! and integrands with closed-form rectangle moments skip quadrature.

use crate::error::{invalid, Result};
use crate::field::{AttributeField, Integrand};
use crate::geometry::{Point, Rect, Region};
use crate::schemes::Tessellation;
use crate::stats::pairwise_sum;
use crate::stratify::Stratification;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const DEFAULT_RESOLUTION: usize = 512;
pub const MIN_RESOLUTION: usize = 256;

/// Per-stratum first and second moments of `y`, plus third absolute central
/// moments `E|y(V_i) − E y(V_i)|³`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    /// `T = ∫_A y`.
    pub total: f64,
    /// `S = ∫_A y²`.
    pub second: f64,
    pub region_area: f64,
    pub areas: Vec<f64>,
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub third: Vec<f64>,
    /// Coarse and fine subcell counts across the region bounding box.
    pub resolution: (usize, usize),
    /// Relative error estimate of `T` and `S`.
    pub error_estimate: f64,
    pub tolerance: f64,
    /// Set when the error estimate exceeds the tolerance.
    pub flagged: bool,
}

impl MomentTable {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `a(A_i) S_i − T_i² = a(A_i)² Var[y(V_i)]`, clamped at zero.
    pub fn stratum_variances(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| (self.areas[i] * self.s[i] - self.t[i] * self.t[i]).max(0.0))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stratum,area,t,s,third_abs_central\n");
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?},{:?}",
                i, self.areas[i], self.t[i], self.s[i], self.third[i]
            );
        }
        out
    }
}

/// Integrals over one cell at the coarse and fine subdivision.
#[derive(Clone, Copy, Default)]
struct CellQuad {
    t: [f64; 2],
    s: [f64; 2],
}

impl CellQuad {
    fn extrapolated(&self) -> (f64, f64) {
        (
            (4.0 * self.t[1] - self.t[0]) / 3.0,
            (4.0 * self.s[1] - self.s[0]) / 3.0,
        )
    }
}

fn subrect(r: &Rect, m: usize, ix: usize, iy: usize) -> Rect {
    let (w, h) = (r.width() / m as f64, r.height() / m as f64);
    Rect::new(
        r.min.x + ix as f64 * w,
        r.min.y + iy as f64 * h,
        r.min.x + (ix + 1) as f64 * w,
        r.min.y + (iy + 1) as f64 * h,
    )
}

/// `(∫ y, ∫ y²)` over `rect ∩ clip` (all of `rect` when `clip` is `None`)
/// with an `m × m` midpoint rule. The second moment is accumulated about
/// `c = y(centre)` so quadrature acts on the small deviation only.
fn midpoint(y: &impl Integrand, rect: &Rect, clip: Option<&Region>, m: usize) -> (f64, f64) {
    let c = y.value(rect.center());
    let (mut t, mut s_exact, mut s_dev, mut t_q, mut w_q) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for iy in 0..m {
        for ix in 0..m {
            let sub = subrect(rect, m, ix, iy);
            let a = sub.area();
            let w = match clip {
                None => a,
                Some(r) => r.clipped_area(&sub),
            };
            if w <= 0.0 {
                continue;
            }
            if let Some((e1, e2)) = y.exact_rect_moments(&sub) {
                t += e1 * w / a;
                s_exact += e2 * w / a;
            } else {
                let v = y.value(sub.center());
                t += w * v;
                t_q += w * v;
                w_q += w;
                s_dev += w * (v - c) * (v - c);
            }
        }
    }
    (t, s_exact + s_dev + 2.0 * c * t_q - c * c * w_q)
}

fn quad_cell(y: &impl Integrand, rect: &Rect, clip: Option<&Region>, m: usize) -> CellQuad {
    if clip.is_none() {
        if let Some((e1, e2)) = y.exact_rect_moments(rect) {
            return CellQuad {
                t: [e1; 2],
                s: [e2; 2],
            };
        }
    }
    let (t0, s0) = midpoint(y, rect, clip, m);
    let (t1, s1) = midpoint(y, rect, clip, 2 * m);
    CellQuad {
        t: [t0, t1],
        s: [s0, s1],
    }
}

/// `∫ |y − μ|³` over `rect ∩ clip` by the midpoint rule.
fn third_abs(y: &impl Integrand, rect: &Rect, clip: Option<&Region>, m: usize, mu: f64) -> f64 {
    let mut acc = 0.0;
    for iy in 0..m {
        for ix in 0..m {
            let sub = subrect(rect, m, ix, iy);
            let w = match clip {
                None => sub.area(),
                Some(r) => r.clipped_area(&sub),
            };
            if w > 0.0 {
                acc += w * (y.value(sub.center()) - mu).abs().powi(3);
            }
        }
    }
    acc
}

/// Relative error of the extrapolated sums from the coarse/fine spread.
fn relative_error(cells: &[CellQuad], total: f64, second: f64, area: f64) -> f64 {
    let dt: Vec<f64> = cells
        .iter()
        .map(|c| (c.t[1] - c.t[0]).abs() / 3.0)
        .collect();
    let ds: Vec<f64> = cells
        .iter()
        .map(|c| (c.s[1] - c.s[0]).abs() / 3.0)
        .collect();
    let (et, es) = (pairwise_sum(&dt), pairwise_sum(&ds));
    // T may vanish for signed fields; measure it against the L² scale.
    let scale_t = total.abs().max((area * second).sqrt());
    let rt = if scale_t > 0.0 { et / scale_t } else { 0.0 };
    let rs = if second.abs() > 0.0 {
        es / second.abs()
    } else {
        0.0
    };
    rt.max(rs)
}

/// Moments at the default resolution.
pub fn moments_default(y: &impl Integrand, s: &Stratification) -> Result<MomentTable> {
    moments(y, s, DEFAULT_RESOLUTION)
}

/// Moments of `y` over each stratum of `s`, with `resolution` midpoint
/// subcells across the raster's longer side and twice that for the
/// Richardson partner.
pub fn moments(y: &impl Integrand, s: &Stratification, resolution: usize) -> Result<MomentTable> {
    if resolution < MIN_RESOLUTION {
        return Err(invalid(
            "resolution",
            format!("must be at least {MIN_RESOLUTION}, got {resolution}"),
        ));
    }
    let raster = s.raster();
    let g = raster.grid;
    let m = resolution.div_ceil(g.nx.max(g.ny)).max(1);
    let region = s.region();
    let assignment = s.assignment();

    let cells: Vec<CellQuad> = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            if assignment[idx].is_none() {
                return CellQuad::default();
            }
            let clip = (!raster.is_full(idx)).then_some(region);
            quad_cell(y, &g.cell_rect(idx), clip, m)
        })
        .collect();

    let n = s.len();
    let mut ts = vec![Vec::new(); n];
    let mut ss = vec![Vec::new(); n];
    for (idx, c) in cells.iter().enumerate() {
        if let Some(k) = assignment[idx] {
            let (t, s2) = c.extrapolated();
            ts[k as usize].push(t);
            ss[k as usize].push(s2);
        }
    }
    let t: Vec<f64> = ts.iter().map(|v| pairwise_sum(v)).collect();
    let s2: Vec<f64> = ss.iter().map(|v| pairwise_sum(v)).collect();
    let areas = s.areas();
    let total = pairwise_sum(&t);
    let second = pairwise_sum(&s2);
    let region_area = s.total_area();

    let third = if y.is_binary() {
        t.iter()
            .zip(&areas)
            .map(|(ti, ai)| {
                let p = (ti / ai).clamp(0.0, 1.0);
                p * (1.0 - p).powi(3) + (1.0 - p) * p.powi(3)
            })
            .collect()
    } else {
        let mu: Vec<f64> = t.iter().zip(&areas).map(|(ti, ai)| ti / ai).collect();
        let parts: Vec<f64> = (0..g.len())
            .into_par_iter()
            .map(|idx| match assignment[idx] {
                None => 0.0,
                Some(k) => {
                    let clip = (!raster.is_full(idx)).then_some(region);
                    third_abs(y, &g.cell_rect(idx), clip, 2 * m, mu[k as usize])
                }
            })
            .collect();
        let mut per = vec![Vec::new(); n];
        for (idx, v) in parts.into_iter().enumerate() {
            if let Some(k) = assignment[idx] {
                per[k as usize].push(v);
            }
        }
        per.iter()
            .zip(&areas)
            .map(|(v, a)| pairwise_sum(v) / a)
            .collect()
    };

    let error_estimate = relative_error(&cells, total, second, region_area);
    let tolerance = y.quadrature_tolerance();
    let side = m * g.nx.max(g.ny);
    Ok(MomentTable {
        total,
        second,
        region_area,
        areas,
        t,
        s: s2,
        third,
        resolution: (side, 2 * side),
        error_estimate,
        tolerance,
        flagged: error_estimate > tolerance,
    })
}

/// `Var[T̃_n] = (a(A) S − T²)/n` under uniform sampling.
pub fn exact_var_urs(m: &MomentTable, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    Ok((m.region_area * m.second - m.total * m.total) / n as f64)
}

/// `σ_n² = Σ a(A_i) S_i − Σ T_i²` under one site per stratum.
pub fn exact_var_ss(m: &MomentTable) -> f64 {
    pairwise_sum(&m.stratum_variances())
}

/// Variance with two independent sites per stratum: half the one-site value.
pub fn exact_var_ss2(m: &MomentTable) -> f64 {
    0.5 * exact_var_ss(m)
}

/// Expected excess of the naive estimator: `n/(n−1) Σ (T_i − T/n)²`.
pub fn bias_naive(m: &MomentTable) -> Result<f64> {
    let n = m.len();
    if n < 2 {
        return Err(invalid(
            "n",
            "bias of the naive estimator needs at least two strata",
        ));
    }
    let nf = n as f64;
    let mean = m.total / nf;
    let sq: Vec<f64> = m.t.iter().map(|ti| (ti - mean).powi(2)).collect();
    Ok(nf / (nf - 1.0) * pairwise_sum(&sq))
}

/// Expected excess of the neighbour estimator:
/// `½ (T_1² + Σ (T_i − T_{i+1})² + T_n²)` in sequential order.
pub fn bias_neighbor(m: &MomentTable, order: &[usize]) -> Result<f64> {
    if order.len() != m.len() || order.is_empty() {
        return Err(invalid("order", "must list every stratum once"));
    }
    let t: Vec<f64> = order.iter().map(|&i| m.t[i]).collect();
    let mut sq = vec![t[0] * t[0]];
    sq.extend(t.windows(2).map(|w| (w[0] - w[1]).powi(2)));
    sq.push(t[t.len() - 1].powi(2));
    Ok(0.5 * pairwise_sum(&sq))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderCheck {
    pub bound: f64,
    pub sigma2: f64,
    pub satisfied: bool,
}

/// Compare `σ_n²` with `H² d_n^{2+2α} a(A)`. `None` when the field has no
/// declared Hölder constant.
pub fn holder_bound_check(
    f: &AttributeField,
    s: &Stratification,
    m: &MomentTable,
) -> Option<HolderCheck> {
    let h = f.holder_h()?;
    let d = s.diagnostics().d_n;
    let bound = h * h * d.powf(2.0 + 2.0 * f.alpha()) * m.region_area;
    let sigma2 = exact_var_ss(m);
    Some(HolderCheck {
        bound,
        sigma2,
        // Absorb quadrature noise when both sides vanish.
        satisfied: sigma2 <= bound + 1e-12 * m.region_area * m.second.abs(),
    })
}

/// `v_n / σ_n³` with `v_n = Σ a(A_i)³ E|y(V_i) − E y(V_i)|³`; `None` when
/// `σ_n = 0`.
pub fn lyapunov_ratio(m: &MomentTable) -> Option<f64> {
    let sigma2 = exact_var_ss(m);
    if sigma2 <= 0.0 {
        return None;
    }
    let v: Vec<f64> = m
        .areas
        .iter()
        .zip(&m.third)
        .map(|(a, e3)| a.powi(3) * e3)
        .collect();
    Some(pairwise_sum(&v) / sigma2.powf(1.5))
}

/// Variance of the tessellation estimator: one uniform site per cell of the
/// unshifted lattice, `y` being the zero-extended field.
pub fn exact_var_tss(y: &impl Integrand, tess: &Tessellation, resolution: usize) -> Result<f64> {
    if resolution < 1 {
        return Err(invalid("resolution", "must be positive"));
    }
    let k = tess.k;
    let m = resolution.div_ceil(k).max(1);
    let (w, h) = tess.cell_size();
    let a = tess.cell_area();
    let parts: Vec<f64> = (0..k * k)
        .into_par_iter()
        .map(|c| {
            let p = tess.corner(c % k, c / k, Point::new(0.0, 0.0));
            let r = Rect::new(p.x, p.y, p.x + w, p.y + h);
            let (t, s) = quad_cell(y, &r, None, m).extrapolated();
            (a * s - t * t).max(0.0)
        })
        .collect();
    Ok(pairwise_sum(&parts))
}

/// Variance of the systematic grid estimator over an `m × m` midpoint grid
/// of offsets in the reference cell.
pub fn exact_var_sgs(y: &impl Integrand, tess: &Tessellation, m: usize) -> Result<f64> {
    if m < 1 {
        return Err(invalid("m", "must be positive"));
    }
    let k = tess.k;
    let (w, h) = tess.cell_size();
    let a = tess.cell_area();
    let totals: Vec<f64> = (0..m * m)
        .into_par_iter()
        .map(|j| {
            let o = Point::new(
                ((j % m) as f64 + 0.5) * w / m as f64,
                ((j / m) as f64 + 0.5) * h / m as f64,
            );
            let v: Vec<f64> = (0..k * k)
                .map(|c| y.value(tess.corner(c % k, c / k, o)))
                .collect();
            a * pairwise_sum(&v)
        })
        .collect();
    let mean = pairwise_sum(&totals) / totals.len() as f64;
    let dev: Vec<f64> = totals.iter().map(|t| (t - mean).powi(2)).collect();
    Ok(pairwise_sum(&dev) / totals.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{builtin_field, Extended, FnIntegrand};
    use crate::stratify::grid_partition;
    use serde_json::json;

    fn sq() -> Region {
        Region::unit_square()
    }

    fn field(id: &str, p: serde_json::Value) -> AttributeField {
        builtin_field(id, &p, sq()).unwrap()
    }

    #[test]
    fn linear_field_moments() {
        let s = grid_partition(&sq(), 2).unwrap();
        let m = moments(&field("linear", json!({})), &s, 256).unwrap();
        assert!((m.total - 0.5).abs() < 1e-14);
        assert!((m.second - 1.0 / 3.0).abs() < 1e-14);
        let mut t = m.t.clone();
        t.sort_by(f64::total_cmp);
        for (a, b) in t
            .iter()
            .zip([1.0 / 16.0, 1.0 / 16.0, 3.0 / 16.0, 3.0 / 16.0])
        {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(!m.flagged);
    }

    #[test]
    fn quadrature_agrees_with_closed_form() {
        // Same linear field, but hidden behind a plain function.
        let s = grid_partition(&sq(), 4).unwrap();
        let lin = FnIntegrand(|p: Point| p.x);
        let m = moments(&lin, &s, 256).unwrap();
        assert!((m.total - 0.5).abs() < 1e-12);
        assert!((m.second - 1.0 / 3.0).abs() < 1e-9);
        assert!((exact_var_ss(&m) - 1.0 / 3072.0).abs() < 1e-9);
    }

    #[test]
    fn constant_on_disk_gives_pi() {
        let d = Region::disk(Point::new(0.0, 0.0), 1.0).unwrap();
        let f = builtin_field("constant", &json!({}), d.clone()).unwrap();
        let s = grid_partition(&d, 3).unwrap();
        let m = moments(&f, &s, 256).unwrap();
        assert!((m.total / std::f64::consts::PI - 1.0).abs() < 1e-4);
        assert!(exact_var_ss(&m) < 1e-12);
    }

    #[test]
    fn sums_of_strata_match_totals() {
        let s = grid_partition(&sq(), 3).unwrap();
        let m = moments(&field("smooth_sine", json!({})), &s, 256).unwrap();
        assert!((m.t.iter().sum::<f64>() - m.total).abs() < 1e-12);
        assert!((m.s.iter().sum::<f64>() - m.second).abs() < 1e-12);
        assert!((m.second - 0.25).abs() < 1e-12);
    }

    #[test]
    fn variance_examples() {
        let lin = field("linear", json!({}));
        let s = grid_partition(&sq(), 2).unwrap();
        let m = moments(&lin, &s, 256).unwrap();
        assert!((exact_var_urs(&m, 4).unwrap() - 1.0 / 48.0).abs() < 1e-14);
        assert_eq!(
            exact_var_urs(&m, 8).unwrap(),
            exact_var_urs(&m, 4).unwrap() / 2.0
        );
        assert!((exact_var_ss(&m) - 1.0 / 192.0).abs() < 1e-14);
        assert!((bias_naive(&m).unwrap() - 1.0 / 48.0).abs() < 1e-14);
        assert!((bias_neighbor(&m, s.order()).unwrap() - 5.0 / 256.0).abs() < 1e-14);

        let c = field("constant", json!({}));
        let mc = moments(&c, &s, 256).unwrap();
        assert_eq!(exact_var_urs(&mc, 4).unwrap(), 0.0);
        assert_eq!(exact_var_ss(&mc), 0.0);
        assert_eq!(bias_naive(&mc).unwrap(), 0.0);
        assert!((bias_neighbor(&mc, s.order()).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert!(lyapunov_ratio(&mc).is_none());
    }

    #[test]
    fn two_per_stratum_is_half() {
        let s = grid_partition(&sq(), 2).unwrap();
        let m = moments(&field("linear", json!({})), &s, 256).unwrap();
        assert_eq!(exact_var_ss2(&m), exact_var_ss(&m) / 2.0);
    }

    #[test]
    fn holder_bounds() {
        let s = grid_partition(&sq(), 2).unwrap();
        let lin = field("linear", json!({}));
        let m = moments(&lin, &s, 256).unwrap();
        let h = holder_bound_check(&lin, &s, &m).unwrap();
        assert!((h.bound - 0.25).abs() < 1e-12 && h.satisfied);

        let c = field("constant", json!({}));
        let hc = holder_bound_check(&c, &s, &moments(&c, &s, 256).unwrap()).unwrap();
        assert_eq!(hc.bound, 0.0);
        assert!(hc.satisfied);

        let s4 = grid_partition(&sq(), 4).unwrap();
        let cusp = field("holder_cusp", json!({"alpha": 0.5}));
        let hk = holder_bound_check(&cusp, &s4, &moments(&cusp, &s4, 256).unwrap()).unwrap();
        assert!(hk.satisfied, "{hk:?}");
    }

    #[test]
    fn lyapunov_ratio_decreases_for_linear_field() {
        let lin = field("linear", json!({}));
        let r: Vec<f64> = [2, 4, 8, 16]
            .iter()
            .map(|&k| {
                let s = grid_partition(&sq(), k).unwrap();
                lyapunov_ratio(&moments(&lin, &s, 256).unwrap()).unwrap()
            })
            .collect();
        assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
    }

    #[test]
    fn binary_third_moment() {
        let d = Region::disk(Point::new(0.5, 0.5), 0.3).unwrap();
        let f = AttributeField::indicator(d, sq());
        let s = grid_partition(&sq(), 1).unwrap();
        let m = moments(&f, &s, 256).unwrap();
        let p = 0.09 * std::f64::consts::PI;
        assert!((m.total - p).abs() < 1e-10);
        let want = p * (1.0 - p).powi(3) + (1.0 - p) * p.powi(3);
        assert!((m.third[0] - want).abs() < 1e-9);
    }

    #[test]
    fn tessellation_oracles_on_square() {
        let lin = field("linear", json!({}));
        let t = Tessellation::new(sq().bbox(), 2).unwrap();
        let v = exact_var_tss(&Extended(&lin), &t, 64).unwrap();
        assert!((v - 1.0 / 192.0).abs() < 1e-14);
        // Systematic grid on a linear field: T̂(o) = 4·¼·Σ(x_i) is linear in o_x.
        let g = exact_var_sgs(&Extended(&lin), &t, 64).unwrap();
        let want = 0.25 / 12.0 * (1.0 - 1.0 / 4096.0);
        assert!((g - want).abs() < 1e-12, "{g} vs {want}");
    }

    #[test]
    fn low_resolution_is_rejected() {
        let s = grid_partition(&sq(), 2).unwrap();
        assert!(moments(&field("linear", json!({})), &s, 64).is_err());
    }
}

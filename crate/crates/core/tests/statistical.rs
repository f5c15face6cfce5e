//! Distributional checks on samplers, estimators and oracles.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use strata::harness::{replicate_design, Design, StrataKind};
use strata::oracle::{bias_naive, bias_neighbor, exact_var_ss2, exact_var_urs, moments};
use strata::stats::{least_squares, mean, sample_variance};
use strata::stratify::{grid_partition, PartitionParams};
use strata::{AttributeField, FieldSpec, Point, RandomStream, Region, Scheme};

const BINS: usize = 8;

fn field(spec: FieldSpec) -> AttributeField {
    AttributeField::from_spec(&spec, Region::unit_square()).unwrap()
}

fn linear() -> AttributeField {
    field(FieldSpec::Linear {
        gradient: [1.0, 0.0],
        offset: 0.0,
    })
}

fn sine() -> AttributeField {
    field(FieldSpec::SmoothSine {
        amplitude: 1.0,
        frequency: 1.0,
    })
}

fn within_3se(xs: &[f64], target: f64) -> bool {
    let se = (sample_variance(xs).unwrap() / xs.len() as f64).sqrt();
    (mean(xs).unwrap() - target).abs() <= 3.0 * se
}

/// Upper-tail probability of Pearson's statistic for `counts` against a
/// uniform expectation.
fn chi_square_p(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    ChiSquared::new((counts.len() - 1) as f64).unwrap().sf(stat)
}

fn bin(p: Point) -> usize {
    let ix = ((p.x * BINS as f64) as usize).min(BINS - 1);
    let iy = ((p.y * BINS as f64) as usize).min(BINS - 1);
    iy * BINS + ix
}

#[test]
fn triangle_draws_center_on_the_centroid() {
    let tri = Region::polygon(
        vec![
            Point::new(0.0, 0.0),
            Point::new(3.0, 0.0),
            Point::new(0.0, 2.0),
        ],
        vec![],
    )
    .unwrap();
    let root = RandomStream::new(17);
    let pts: Vec<Point> = (0..100_000)
        .map(|i| tri.uniform_point(&mut root.child(i)))
        .collect();
    assert!(pts.iter().all(|&p| tri.contains(p)));
    let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
    assert!(within_3se(&xs, 1.0), "x mean {}", mean(&xs).unwrap());
    assert!(within_3se(&ys, 2.0 / 3.0), "y mean {}", mean(&ys).unwrap());
}

#[test]
fn uniform_draws_pass_chi_square() {
    let sq = Region::unit_square();
    let root = RandomStream::new(23);
    let mut counts = vec![0usize; BINS * BINS];
    for i in 0..64_000 {
        counts[bin(sq.uniform_point(&mut root.child(i)))] += 1;
    }
    let p = chi_square_p(&counts);
    assert!(p > 1e-3, "p = {p}");
}

/// A site picked uniformly at random from each plan has a uniform marginal
/// on the region under every scheme.
#[test]
fn inclusion_density_is_uniform_for_every_scheme() {
    let sq = Region::unit_square();
    let params = PartitionParams::default();
    for scheme in Scheme::ALL {
        for shift in [false, true] {
            if shift && scheme != Scheme::Tss {
                continue;
            }
            let d = Design::new(&sq, scheme, 16, StrataKind::Grid, &params)
                .unwrap()
                .with_random_shift(shift);
            let root = RandomStream::new(31);
            let mut counts = vec![0usize; BINS * BINS];
            let mut r = 0u64;
            let mut kept = 0;
            while kept < 32_000 {
                let plan = d.draw(&root.child(r)).unwrap();
                let site = &plan.sites[(r as usize * 7 + 3) % plan.sites.len()];
                r += 1;
                if site.in_region {
                    counts[bin(site.location)] += 1;
                    kept += 1;
                }
            }
            let p = chi_square_p(&counts);
            assert!(p > 1e-3, "{scheme} shift={shift}: p = {p}");
        }
    }
}

#[test]
fn boundary_strata_grow_like_root_n() {
    let sq = Region::unit_square();
    let disk = Region::disk(Point::new(0.5, 0.5), 0.31).unwrap();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in [4usize, 8, 16, 32] {
        let s = grid_partition(&sq, k).unwrap();
        let c = s.boundary_stratum_count(&disk);
        assert!(c > 0);
        xs.push(((k * k) as f64).ln());
        ys.push((c as f64).ln());
    }
    let fit = least_squares(&xs, &ys).unwrap();
    assert!((0.35..=0.65).contains(&fit.slope), "slope {}", fit.slope);
}

#[test]
fn two_per_stratum_variance_is_unbiased() {
    let y = sine();
    let d = Design::new(
        &Region::unit_square(),
        Scheme::Ss2,
        32,
        StrataKind::Grid,
        &PartitionParams::default(),
    )
    .unwrap();
    let reps = replicate_design(&d, &y, 40_000, &RandomStream::new(5)).unwrap();
    let m = moments(&y, d.stratification().unwrap(), 512).unwrap();
    let v = exact_var_ss2(&m);
    assert!(within_3se(&reps.variance_estimates["two_per_stratum"], v));
}

#[test]
fn urs_sample_variance_is_unbiased() {
    let y = sine();
    let sq = Region::unit_square();
    let d = Design::new(
        &sq,
        Scheme::Urs,
        16,
        StrataKind::Grid,
        &PartitionParams::default(),
    )
    .unwrap();
    let reps = replicate_design(&d, &y, 40_000, &RandomStream::new(6)).unwrap();
    let m = moments(&y, &grid_partition(&sq, 1).unwrap(), 512).unwrap();
    let v = exact_var_urs(&m, 16).unwrap();
    assert!(within_3se(&reps.variance_estimates["urs_sample"], v));
}

#[test]
fn one_per_stratum_estimators_are_biased_upwards_as_predicted() {
    let y = linear();
    let d = Design::new(
        &Region::unit_square(),
        Scheme::Ss1,
        16,
        StrataKind::Grid,
        &PartitionParams::default(),
    )
    .unwrap();
    let s = d.stratification().unwrap();
    let m = moments(&y, s, 512).unwrap();
    let v = strata::oracle::exact_var_ss(&m);
    let reps = replicate_design(&d, &y, 40_000, &RandomStream::new(8)).unwrap();
    for (name, bias) in [
        ("naive", bias_naive(&m).unwrap()),
        ("neighbor", bias_neighbor(&m, s.order()).unwrap()),
    ] {
        assert!(bias > 0.0, "{name}");
        assert!(
            within_3se(&reps.variance_estimates[name], v + bias),
            "{name}: mean {} vs {}",
            mean(&reps.variance_estimates[name]).unwrap(),
            v + bias
        );
    }
}

#[test]
fn monte_carlo_variance_matches_oracle() {
    // Frequency 1 is commensurate with the lattice and gives SGS zero variance.
    let y = field(FieldSpec::SmoothSine {
        amplitude: 1.0,
        frequency: 0.7,
    });
    let sq = Region::unit_square();
    for scheme in [
        Scheme::Urs,
        Scheme::Ss1,
        Scheme::Ss2,
        Scheme::Tss,
        Scheme::Sgs,
    ] {
        let d = Design::new(
            &sq,
            scheme,
            16,
            StrataKind::Grid,
            &PartitionParams::default(),
        )
        .unwrap();
        let oracle = d.oracle_variance(&y, 512).unwrap().unwrap();
        let reps = replicate_design(&d, &y, 50_000, &RandomStream::new(9)).unwrap();
        let mc = sample_variance(&reps.estimates).unwrap();
        assert!(
            (mc / oracle - 1.0).abs() < 0.03,
            "{scheme}: {mc} vs {oracle}"
        );
    }
}

#[test]
fn linear_field_four_strata_replicates() {
    // y = x on four unit-square quadrants: each stratum contributes
    // (1/4)² · (1/2)²/12, so Var = 4/768.
    let d = Design::new(
        &Region::unit_square(),
        Scheme::Ss1,
        4,
        StrataKind::Grid,
        &PartitionParams::default(),
    )
    .unwrap();
    let reps = replicate_design(&d, &linear(), 100_000, &RandomStream::new(2024)).unwrap();
    assert!(within_3se(&reps.estimates, 0.5));
    let v = sample_variance(&reps.estimates).unwrap();
    assert!((v * 192.0 - 1.0).abs() < 0.03, "variance {v}");
}

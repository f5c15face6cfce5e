use crate::config::{Command, RunConfig, Units};
use crate::error::CliError;
use crate::report::format_report;
use serde::Serialize;
use serde_json::json;
use std::path::Path;
use strata::estimate::build_report;
use strata::geometry::region_from_geojson;
use strata::harness::{
    build_strata, clt_check, compare_schemes, design_label, replicate_design, synthetic_scene,
    CanopySurvey, Design, ExperimentConfig,
};
use strata::oracle::{
    bias_naive, bias_neighbor, exact_var_ss, exact_var_urs, holder_bound_check, lyapunov_ratio,
    moments,
};
use strata::stratify::{grid_partition, SvgOptions};
use strata::{AttributeField, RandomStream, Region, SamplePlan, Scheme, Stratification};

type Res<T> = Result<T, CliError>;

fn write(out: &Path, name: &str, contents: &str) -> Res<()> {
    let p = out.join(name);
    std::fs::write(&p, contents).map_err(|e| CliError::io(&p, e))
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Res<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(strata::Error::from)?;
    text.push('\n');
    write(out, name, &text)
}

fn load_region(cfg: &RunConfig) -> Res<Region> {
    match &cfg.region {
        None => Ok(Region::unit_square()),
        Some(p) => region_from_geojson(p).map_err(|e| match e {
            strata::Error::Io(source) => CliError::io(p, source),
            e => CliError::config("region", format!("{}: {e}", p.display())),
        }),
    }
}

fn load_stratification(cfg: &RunConfig, region: &Region, n: usize) -> Res<Stratification> {
    match &cfg.stratification {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Stratification::from_json(&text)
                .map_err(|e| CliError::config("stratification", format!("{}: {e}", p.display())))
        }
        None => Ok(build_strata(region, n, cfg.strata, &cfg.partition)?),
    }
}

fn field(cfg: &RunConfig, region: &Region) -> Res<AttributeField> {
    Ok(AttributeField::from_spec(&cfg.field, region.clone())?)
}

fn experiment(cfg: &RunConfig, region: &Region) -> ExperimentConfig {
    ExperimentConfig {
        field: cfg.field.clone(),
        region: region.to_spec(),
        schemes: cfg.schemes.clone(),
        n: cfg.n.clone(),
        replications: cfg.reps,
        seed: cfg.seed,
        strata: cfg.strata,
        partition: cfg.partition,
        resolution: cfg.resolution,
        random_shift: cfg.random_shift,
        level: cfg.level,
    }
}

/// Design for the configured scheme, reusing an exported stratification
/// when one is given.
fn design(cfg: &RunConfig, region: &Region, n: usize) -> Res<Design> {
    let d = match (cfg.scheme, &cfg.stratification) {
        (Scheme::Ss1 | Scheme::Ss2, Some(_)) => {
            Design::from_stratification(cfg.scheme, load_stratification(cfg, region, n)?)?
        }
        _ => Design::new(region, cfg.scheme, n, cfg.strata, &cfg.partition)?,
    };
    Ok(d.with_random_shift(cfg.random_shift))
}

fn draw(cfg: &RunConfig, d: &Design) -> Res<SamplePlan> {
    let stream = RandomStream::new(cfg.seed)
        .child(design_label(d.scheme, d.n))
        .child(0);
    Ok(d.draw(&stream)?)
}

fn svg(d: &Design, region: &Region, plan: &SamplePlan) -> Res<String> {
    let opts = SvgOptions {
        label_order: d.stratification().is_some(),
        ..SvgOptions::default()
    };
    let inside: Vec<_> = plan
        .sites
        .iter()
        .filter(|s| s.in_region)
        .map(|s| s.location)
        .collect();
    Ok(match d.stratification() {
        Some(s) => s.to_svg(&inside, &opts),
        None => grid_partition(region, 1)?.to_svg(&inside, &opts),
    })
}

pub fn execute(cfg: &RunConfig) -> Res<String> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    match cfg.command {
        Command::Stratify => stratify(cfg),
        Command::Sample => sample(cfg),
        Command::Estimate => estimate(cfg),
        Command::Oracle => oracle(cfg),
        Command::Rates => rates(cfg),
        Command::Clt => clt(cfg),
        Command::Compare => compare(cfg),
        Command::Canopy => canopy(cfg),
    }
}

fn stratify(cfg: &RunConfig) -> Res<String> {
    let region = load_region(cfg)?;
    let n = cfg.n[0];
    let s = match build_strata(&region, n, cfg.strata, &cfg.partition) {
        Ok(s) => s,
        Err(strata::Error::Connectivity { message, best }) => {
            // Keep the best attempt for inspection before failing.
            write(&cfg.out, "strata.json", &best.to_json()?)?;
            return Err(strata::Error::Connectivity { message, best }.into());
        }
        Err(e) => return Err(e.into()),
    };
    write(&cfg.out, "strata.json", &s.to_json()?)?;
    let opts = SvgOptions {
        label_order: true,
        ..SvgOptions::default()
    };
    write(&cfg.out, "strata.svg", &s.to_svg(&[], &opts))?;
    let d = s.diagnostics();
    write_json(
        &cfg.out,
        "diagnostics.json",
        &json!({
            "schema_version": strata::SCHEMA_VERSION,
            "config": cfg,
            "diagnostics": d,
            "area_spread": s.area_spread(),
            "connected": s.is_connected(),
            "adjacent_pair_fraction": s.adjacent_pair_fraction(),
            "order": s.order(),
            "objective_history": s.objective_history(),
        }),
    )?;
    Ok(format!(
        "{} strata, area spread {:.4}%, adjacent consecutive pairs {:.1}%, n·d_n² = {:.4}\n",
        s.len(),
        100.0 * s.area_spread(),
        100.0 * s.adjacent_pair_fraction(),
        d.b_hat
    ))
}

fn sample(cfg: &RunConfig) -> Res<String> {
    let region = load_region(cfg)?;
    let d = design(cfg, &region, cfg.n[0])?;
    let plan = draw(cfg, &d)?;
    write(&cfg.out, "plan.csv", &plan.to_csv())?;
    write(&cfg.out, "plan.json", &(plan.to_json()? + "\n"))?;
    write(&cfg.out, "plan.svg", &svg(&d, &region, &plan)?)?;
    Ok(format!(
        "{} plan with {} sites ({} inside the region)\n",
        plan.scheme,
        plan.len(),
        plan.realized_in_region
    ))
}

fn estimate(cfg: &RunConfig) -> Res<String> {
    let region = load_region(cfg)?;
    let y = field(cfg, &region)?;
    let d = design(cfg, &region, cfg.n[0])?;
    let plan = draw(cfg, &d)?;
    let report = build_report(&plan, &y, &region, d.stratification(), cfg.level)?;
    write(&cfg.out, "plan.csv", &plan.to_csv())?;
    write_json(
        &cfg.out,
        "report.json",
        &json!({ "config": cfg, "report": report }),
    )?;
    Ok(format_report(&report, cfg.units))
}

fn oracle(cfg: &RunConfig) -> Res<String> {
    let region = load_region(cfg)?;
    let y = field(cfg, &region)?;
    let s = load_stratification(cfg, &region, cfg.n[0])?;
    let m = moments(&y, &s, cfg.resolution)?;
    let sigma2 = exact_var_ss(&m);
    let var_urs = exact_var_urs(&m, s.len())?;
    let naive = if s.len() >= 2 {
        Some(bias_naive(&m)?)
    } else {
        None
    };
    let neighbor = strata::estimate::check_equal_areas(&s)
        .ok()
        .map(|_| bias_neighbor(&m, s.order()))
        .transpose()?;
    let holder = holder_bound_check(&y, &s, &m);
    let lyapunov = lyapunov_ratio(&m);
    write(&cfg.out, "moments.csv", &m.to_csv())?;
    write_json(
        &cfg.out,
        "oracle.json",
        &json!({
            "schema_version": strata::SCHEMA_VERSION,
            "config": cfg,
            "total": m.total,
            "second_moment": m.second,
            "region_area": m.region_area,
            "var_ss": sigma2,
            "var_urs": var_urs,
            "bias_naive": naive,
            "bias_neighbor": neighbor,
            "holder": holder,
            "lyapunov_ratio": lyapunov,
            "quadrature": {
                "resolution": m.resolution,
                "error_estimate": m.error_estimate,
                "tolerance": m.tolerance,
                "flagged": m.flagged,
            },
        }),
    )?;
    let mut text = format!(
        "T = {:.10}\nS = {:.10}\nstrata = {}\nvar (one per stratum) = {:.6e}\nvar (uniform) = {:.6e}\n",
        m.total,
        m.second,
        s.len(),
        sigma2,
        var_urs
    );
    if m.flagged {
        text.push_str(&format!(
            "warning: quadrature error estimate {:.2e} exceeds {:.0e}\n",
            m.error_estimate, m.tolerance
        ));
    }
    Ok(text)
}

fn rates(cfg: &RunConfig) -> Res<String> {
    let region = load_region(cfg)?;
    let c = compare_schemes(&experiment(cfg, &region), false)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err =
        |e: csv::Error| CliError::io(&cfg.out.join("rates.csv"), std::io::Error::other(e));
    w.write_record(["n", "scheme", "oracle_variance"])
        .map_err(csv_err)?;
    for r in &c.rows {
        let v = r
            .oracle_variance
            .map_or(String::new(), |v| format!("{v:?}"));
        w.write_record([r.n.to_string(), r.scheme.to_string(), v])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| csv_err(e.into_error().into()))?;
    write(&cfg.out, "rates.csv", &String::from_utf8_lossy(&bytes))?;
    write_json(
        &cfg.out,
        "rates.json",
        &json!({ "schema_version": strata::SCHEMA_VERSION, "config": cfg, "fits": c.fits }),
    )?;
    let mut text = String::new();
    for (scheme, f) in &c.fits {
        text.push_str(&format!(
            "{scheme:<6} slope {:+.4}  R² {:.6}\n",
            f.slope, f.r_squared
        ));
    }
    Ok(text)
}

fn clt(cfg: &RunConfig) -> Res<String> {
    let region = load_region(cfg)?;
    let y = field(cfg, &region)?;
    let n = cfg.n[0];
    let d = match &cfg.stratification {
        Some(_) => Design::from_stratification(Scheme::Ss1, load_stratification(cfg, &region, n)?)?,
        None => Design::new(&region, Scheme::Ss1, n, cfg.strata, &cfg.partition)?,
    };
    let m = moments(&y, d.stratification().unwrap(), cfg.resolution)?;
    let sigma2 = exact_var_ss(&m);
    if !(sigma2 > 0.0) {
        return Err(CliError::config(
            "field",
            "the field has zero variance under this design",
        ));
    }
    let reps = replicate_design(&d, &y, cfg.reps, &RandomStream::new(cfg.seed))?;
    let z = reps.standardized(m.total, sigma2.sqrt());
    let check = clt_check(&z)?;
    write(&cfg.out, "replicates.csv", &reps.to_csv())?;
    write_json(
        &cfg.out,
        "clt.json",
        &json!({
            "schema_version": strata::SCHEMA_VERSION,
            "config": cfg,
            "total": m.total,
            "sigma": sigma2.sqrt(),
            "check": check,
            "lyapunov_ratio": lyapunov_ratio(&m),
        }),
    )?;
    Ok(format!(
        "{} draws: coverage {:.4}, KS distance {:.4}\n",
        check.draws, check.coverage, check.ks
    ))
}

fn compare(cfg: &RunConfig) -> Res<String> {
    let region = load_region(cfg)?;
    let c = compare_schemes(&experiment(cfg, &region), cfg.reps > 0)?;
    write(&cfg.out, "compare.csv", &c.to_csv())?;
    write_json(
        &cfg.out,
        "compare.json",
        &json!({ "schema_version": strata::SCHEMA_VERSION, "config": cfg, "comparison": c }),
    )?;
    let mut text = c.to_csv();
    if !c.violations.is_empty() {
        text.push_str(&format!(
            "uniform variance below stratified at n = {:?}\n",
            c.violations
        ));
    }
    Ok(text)
}

fn canopy(cfg: &RunConfig) -> Res<String> {
    let (region, cover, truth) = match &cfg.region {
        None => {
            let (a, c, area) = synthetic_scene()?;
            (a, Some(c), Some(area))
        }
        Some(_) => {
            let a = load_region(cfg)?;
            let c = match &cfg.cover {
                None => None,
                Some(p) => Some(region_from_geojson(p).map_err(|e| match e {
                    strata::Error::Io(source) => CliError::io(p, source),
                    e => CliError::config("cover", format!("{}: {e}", p.display())),
                })?),
            };
            (a, c, None)
        }
    };
    let n = cfg.n[0];
    let strata = load_stratification(cfg, &region, n)?;
    let survey =
        CanopySurvey::with_strata(strata, cover.as_ref(), cfg.transect_length, cfg.orientation)?
            .with_level(cfg.level);
    let stream = RandomStream::new(cfg.seed).child(0);
    let report = survey.run(&stream)?;
    let plan = strata::schemes::draw_ss1(survey.stratification(), &stream)?;
    let opts = SvgOptions {
        label_order: true,
        ..SvgOptions::default()
    };
    write(
        &cfg.out,
        "canopy.svg",
        &survey.stratification().to_svg(&plan.locations(), &opts),
    )?;
    write(&cfg.out, "plan.csv", &plan.to_csv())?;
    let mut summary = json!({
        "schema_version": strata::SCHEMA_VERSION,
        "config": cfg,
        "report": report,
        "cover_area": truth,
    });
    let mut text = format_report(&report, cfg.units);
    if cfg.reps > 1 {
        let reps = survey.replicate(cfg.reps, cfg.seed)?;
        let mean = reps.mean();
        let sd = strata::stats::sample_variance(&reps.estimates)?.sqrt();
        let coverage = truth.map(|t| reps.coverage(t)).transpose()?;
        summary["replicates"] = json!({
            "count": cfg.reps,
            "mean": mean,
            "sd": sd,
            "interval_coverage": coverage,
        });
        let mut w = String::from("rep,estimate,variance\n");
        for (i, (t, v)) in reps.estimates.iter().zip(&reps.variances).enumerate() {
            w.push_str(&format!("{i},{t:?},{v:?}\n"));
        }
        write(&cfg.out, "canopy_replicates.csv", &w)?;
        let q = |v: f64| match cfg.units {
            Units::M2 => format!("{:.2} ha", v / 10_000.0),
            Units::None => format!("{v:.6}"),
        };
        text.push_str(&format!("{:<24}{}\n", "replicate mean", q(mean)));
        text.push_str(&format!("{:<24}{}\n", "replicate sd", q(sd)));
        if let Some(c) = coverage {
            text.push_str(&format!("{:<24}{:.4}\n", "interval coverage", c));
        }
    }
    write_json(&cfg.out, "canopy.json", &summary)?;
    Ok(text)
}

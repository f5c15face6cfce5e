//! Run configuration: a flat TOML file, overridden by command-line flags.

use crate::error::CliError;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use strata::harness::StrataKind;
use strata::stratify::PartitionParams;
use strata::{FieldSpec, Scheme};

/// `n = 16` or `n = [16, 64]`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum NList {
    One(usize),
    Many(Vec<usize>),
}

impl NList {
    fn into_vec(self) -> Vec<usize> {
        match self {
            NList::One(n) => vec![n],
            NList::Many(v) => v,
        }
    }
}

/// Keys accepted in the configuration file. All are optional except
/// `seed`, which may instead come from `--seed`.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// GeoJSON study region; the unit square when absent.
    pub region: Option<PathBuf>,
    /// GeoJSON cover for the canopy survey.
    pub cover: Option<PathBuf>,
    /// Catalog field identifier.
    pub field: Option<String>,
    pub field_params: Option<toml::Table>,
    pub scheme: Option<String>,
    pub schemes: Option<Vec<String>>,
    pub n: Option<NList>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub level: Option<f64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    /// `grid` or `balanced`.
    pub strata: Option<String>,
    /// Previously exported stratification to reuse.
    pub stratification: Option<PathBuf>,
    /// Oracle quadrature resolution.
    pub resolution: Option<usize>,
    pub partition_resolution: Option<usize>,
    pub restarts: Option<usize>,
    pub max_iter: Option<usize>,
    pub transect_length: Option<f64>,
    pub orientation: Option<f64>,
    pub random_shift: Option<bool>,
    /// `none` or `m2`.
    pub units: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        if !path.exists() {
            return Err(CliError::config(
                "config",
                format!("file not found: {}", path.display()),
            ));
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: FileConfig = toml::from_str(&text).map_err(|e| {
            CliError::config("config", format!("{}: {}", path.display(), e.message()))
        })?;
        // Relative paths are relative to the config file.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.region,
            &mut cfg.cover,
            &mut cfg.stratification,
            &mut cfg.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    None,
    /// Square metres, reported in hectares.
    M2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Stratify,
    Sample,
    Estimate,
    Oracle,
    Rates,
    Clt,
    Compare,
    Canopy,
}

/// Fully resolved settings. Serialized into every report; the output
/// directory and thread count are left out so they cannot change results.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub region: Option<PathBuf>,
    pub cover: Option<PathBuf>,
    pub field: FieldSpec,
    pub scheme: Scheme,
    pub schemes: Vec<Scheme>,
    pub n: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub level: f64,
    pub strata: StrataKind,
    pub stratification: Option<PathBuf>,
    pub resolution: usize,
    pub partition: PartitionParams,
    pub transect_length: f64,
    pub orientation: f64,
    pub random_shift: bool,
    pub units: Units,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: usize,
}

/// Flag values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub n: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub level: Option<f64>,
}

fn field_spec(id: &str, params: Option<toml::Table>) -> Result<FieldSpec, CliError> {
    let mut obj = match params {
        None => serde_json::Map::new(),
        Some(t) => match serde_json::to_value(t) {
            Ok(serde_json::Value::Object(m)) => m,
            _ => return Err(CliError::config("field_params", "must be a table")),
        },
    };
    if !strata::field::FIELD_IDS.contains(&id) {
        return Err(CliError::config(
            "field",
            format!(
                "unknown field `{id}`; expected one of {}",
                strata::field::FIELD_IDS.join(", ")
            ),
        ));
    }
    obj.insert("id".into(), serde_json::Value::String(id.into()));
    serde_json::from_value(serde_json::Value::Object(obj))
        .map_err(|e| CliError::config("field_params", e.to_string()))
}

fn scheme(key: &'static str, s: &str) -> Result<Scheme, CliError> {
    s.parse().map_err(|_| {
        CliError::config(
            key,
            format!("unknown scheme `{s}`; expected urs, ss1, ss2, tss or sgs"),
        )
    })
}

impl RunConfig {
    pub fn resolve(
        command: Command,
        file: FileConfig,
        o: Overrides,
    ) -> Result<RunConfig, CliError> {
        let seed = o.seed.or(file.seed).ok_or_else(|| {
            CliError::config("seed", "a seed is required (config key `seed` or --seed)")
        })?;
        let field = field_spec(file.field.as_deref().unwrap_or("linear"), file.field_params)?;
        let scheme = scheme("scheme", file.scheme.as_deref().unwrap_or("ss1"))?;
        let schemes = match file.schemes {
            None => Scheme::ALL.to_vec(),
            Some(v) => v.iter().map(|s| scheme_list(s)).collect::<Result<_, _>>()?,
        };
        let default_n = match command {
            Command::Rates | Command::Compare => vec![16, 64, 256, 1024],
            Command::Clt => vec![64],
            Command::Canopy => vec![50],
            _ => vec![16],
        };
        let n = o.n.or(file.n.map(NList::into_vec)).unwrap_or(default_n);
        if n.is_empty() || n.contains(&0) {
            return Err(CliError::config("n", "sample sizes must be positive"));
        }
        if matches!(command, Command::Rates | Command::Compare)
            && n.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(CliError::config(
                "n",
                "sample sizes must be strictly increasing",
            ));
        }
        let level = o.level.or(file.level).unwrap_or(0.95);
        if !(level > 0.0 && level < 1.0) {
            return Err(CliError::config(
                "level",
                format!("must lie in (0, 1), got {level}"),
            ));
        }
        let strata = match file.strata.as_deref() {
            None if matches!(command, Command::Stratify | Command::Canopy) => StrataKind::Balanced,
            None | Some("grid") => StrataKind::Grid,
            Some("balanced") => StrataKind::Balanced,
            Some(other) => {
                return Err(CliError::config(
                    "strata",
                    format!("expected `grid` or `balanced`, got `{other}`"),
                ))
            }
        };
        let default_partition = PartitionParams::default();
        let partition = PartitionParams {
            resolution: file
                .partition_resolution
                .unwrap_or(default_partition.resolution),
            max_iter: file.max_iter.unwrap_or(default_partition.max_iter),
            restarts: file.restarts.unwrap_or(default_partition.restarts),
            seed,
        };
        let units = match file.units.as_deref() {
            None if command == Command::Canopy => Units::M2,
            None | Some("none") => Units::None,
            Some("m2") => Units::M2,
            Some(other) => {
                return Err(CliError::config(
                    "units",
                    format!("expected `none` or `m2`, got `{other}`"),
                ))
            }
        };
        for (key, p) in [
            ("region", &file.region),
            ("cover", &file.cover),
            ("stratification", &file.stratification),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(CliError::config(
                        key,
                        format!("file not found: {}", p.display()),
                    ));
                }
            }
        }
        let transect_length = file.transect_length.unwrap_or(200.0);
        if !(transect_length > 0.0) {
            return Err(CliError::config("transect_length", "must be positive"));
        }
        Ok(RunConfig {
            command,
            region: file.region,
            cover: file.cover,
            field,
            scheme,
            schemes,
            n,
            reps: o.reps.or(file.reps).unwrap_or(match command {
                Command::Canopy => 1,
                _ => 10_000,
            }),
            seed,
            level,
            strata,
            stratification: file.stratification,
            resolution: file
                .resolution
                .unwrap_or(strata::oracle::DEFAULT_RESOLUTION),
            partition,
            transect_length,
            orientation: file.orientation.unwrap_or(0.0),
            random_shift: file.random_shift.unwrap_or(false),
            units,
            out: o.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            threads: o.threads.or(file.threads).unwrap_or(0),
        })
    }
}

fn scheme_list(s: &str) -> Result<Scheme, CliError> {
    scheme("schemes", s)
}

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] strata::Error),

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> CliError {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 for anything the user can fix in the config, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        use strata::Error as E;
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                E::InvalidGeometry(_)
                | E::DegenerateRegion
                | E::UnknownField(_)
                | E::InvalidParameter { .. }
                | E::SchemeMismatch { .. }
                | E::SiteMismatch(_)
                | E::UnequalStrata { .. }
                | E::TooFew { .. }
                | E::GeoJson(_) => 2,
                _ => 1,
            },
        }
    }
}

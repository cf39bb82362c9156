use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: row {row}, column `{column}`: {message}", path.display())]
    Parse { path: PathBuf, row: u64, column: String, message: String },
    #[error("{}: missing column `{column}`", path.display())]
    MissingColumn { path: PathBuf, column: String },
    #[error("{}: {source}", path.display())]
    Panel {
        path: PathBuf,
        #[source]
        source: twfe_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("analysis `{name}`: {source}")]
    Analysis {
        name: String,
        #[source]
        source: twfe_core::Error,
    },
    #[error("simulation `{name}`: {source}")]
    Simulation {
        name: String,
        #[source]
        source: twfe_core::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("impedance singularity at C = {capacitance:e} F, theta = {theta_deg} deg")]
    Singularity { capacitance: f64, theta_deg: f64 },

    #[error("protocol infeasible: time overhead {overhead:e} s >= coherence time {coherence:e} s for M = {codebook_size}")]
    Infeasible {
        codebook_size: usize,
        overhead: f64,
        coherence: f64,
    },

    #[error("learning diverged: {0}")]
    Divergence(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Configuration-class errors map to exit code 2 in the CLI; everything
    /// else is a runtime abort.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Json(_) | Error::Dimension(_) | Error::Infeasible { .. }
        )
    }
}

use thiserror::Error;

/// Errors raised across the crate.
///
/// The variants map onto the distinct failure classes the CLI translates
/// into exit codes: configuration problems, parameter/domain violations,
/// numeric failures, and structural misuse (mixing grids).
#[derive(Debug, Error)]
pub enum PragmaError {
    /// A parameter or outcome lies outside its declared space.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration (degenerate bounds, bad spec fields, ...).
    #[error("config error: {0}")]
    Config(String),

    /// A numeric procedure failed. `achieved` carries the tolerance the
    /// procedure actually reached when that is meaningful (e.g. quadrature
    /// that stopped short of its target).
    #[error("numeric error: {what}{}", fmt_achieved(.achieved))]
    Numeric {
        what: String,
        achieved: Option<f64>,
    },

    /// Region/posterior operations invoked across two different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The requested combination is outside what the method covers
    /// (e.g. shrinkage sequences for the BP dissimilarity).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Posterior weights were identically zero on the grid.
    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),
}

fn fmt_achieved(achieved: &Option<f64>) -> String {
    match achieved {
        Some(a) => format!(" (achieved tolerance {a:e})"),
        None => String::new(),
    }
}

impl PragmaError {
    pub fn numeric(what: impl Into<String>) -> Self {
        PragmaError::Numeric {
            what: what.into(),
            achieved: None,
        }
    }

    pub fn numeric_with_tol(what: impl Into<String>, achieved: f64) -> Self {
        PragmaError::Numeric {
            what: what.into(),
            achieved: Some(achieved),
        }
    }
}

pub type Result<T> = std::result::Result<T, PragmaError>;

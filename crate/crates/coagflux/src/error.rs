use thiserror::Error;

#[derive(Debug, Error)]
pub enum FluxError {
    #[error("no constant-flux regime: gamma + 2p = {0} >= 1")]
    NoConstantFluxRegime(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("evaluation outside domain: {0}")]
    Domain(String),
    #[error("quadrature did not converge: {panels} panels, err_est {err_est:e} > tol {tol:e}")]
    QuadratureNonConvergence { panels: usize, err_est: f64, tol: f64 },
    #[error("non-finite integrand sample at z = {0}")]
    NonFinite(f64),
    #[error("no zero of the symbol found in [{lo}, {hi}]")]
    NoZero { lo: f64, hi: f64 },
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("near-zero symbol at mode {mode}: |psi| = {value:e} below margin {margin:e}")]
    NearZeroSymbol { mode: i64, value: f64, margin: f64 },
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("truncation mismatch: {0}")]
    Truncation(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FluxError>;

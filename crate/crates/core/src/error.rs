//! Error taxonomy shared by all modules.

use alloc::string::String;

/// Errors raised by the classical, semiclassical and quantum operations.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Requested energy lies at or below the potential minimum: the level set
    /// is empty and no classical motion exists.
    NoClassicalMotion { energy: f64, v_min: f64 },
    /// The level set never reaches the wall, so wall angle and wall action
    /// are undefined.
    NoImpact { energy: f64, v_wall: f64 },
    /// Trajectory hit the step corner (both wall coordinates within
    /// tolerance); the reflection is undefined on this measure-zero set.
    CornerCollision { t: f64 },
    /// Input violates a documented precondition.
    Domain(String),
    /// Grid sizing exceeds the configured memory budget.
    Sizing { required_bytes: u64, budget_bytes: u64, hint: String },
    /// Eigensolver failed to converge within its iteration budget. Partial
    /// results (converged pairs so far) are carried along.
    Convergence { converged: usize, requested: usize, detail: String },
    /// Root finding or quadrature failed to reach tolerance.
    Numerics(String),
}

impl core::fmt::Display for CoreError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CoreError::NoClassicalMotion { energy, v_min } => write!(
                f,
                "no classical motion: E = {energy} does not exceed min V = {v_min}"
            ),
            CoreError::NoImpact { energy, v_wall } => write!(
                f,
                "level set does not reach the wall: E = {energy} <= V(q_wall) = {v_wall}"
            ),
            CoreError::CornerCollision { t } => {
                write!(f, "corner collision at t = {t}: reflection undefined")
            }
            CoreError::Domain(msg) => write!(f, "domain error: {msg}"),
            CoreError::Sizing { required_bytes, budget_bytes, hint } => write!(
                f,
                "grid sizing needs {required_bytes} bytes, budget is {budget_bytes}: {hint}"
            ),
            CoreError::Convergence { converged, requested, detail } => write!(
                f,
                "eigensolver converged {converged}/{requested} pairs: {detail}"
            ),
            CoreError::Numerics(msg) => write!(f, "numerics error: {msg}"),
        }
    }
}

impl core::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;

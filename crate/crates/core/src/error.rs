//! Error type shared by all solver stages.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The Bernoulli/entropy pair admits no positive density (B - |u|^2/2 <= 0).
    #[error("cavitation: B - |u|^2/2 = {0} is not positive")]
    Cavitation(f64),

    /// Local flux density exceeds the sonic maximum for the given (B, S).
    #[error("choked flow: flux density {flux} exceeds sonic maximum {max}")]
    Choked { flux: f64, max: f64 },

    #[error("no admissible shock: {0}")]
    NoAdmissibleShock(String),

    #[error("exit pressure {pe} outside admissible range ({p_lo}, {p_hi})")]
    NoShockPosition { pe: f64, p_lo: f64, p_hi: f64 },

    /// A positivity requirement on the linearization coefficients failed.
    #[error("coefficient inconsistency: {0}")]
    Inconsistency(String),

    #[error("supersonic march: {0}")]
    March(String),

    /// Coefficient matrix of the radial marching became ill-conditioned.
    #[error("regime loss during march at r = {r}: condition estimate {cond:.3e}")]
    RegimeLoss { r: f64, cond: f64 },

    #[error("trust region violated: {0}")]
    TrustRegion(String),

    #[error("front determinant too small: |f| = {0:.3e}")]
    FrontDegeneracy(f64),

    /// Transport denominator U + V1 approached zero.
    #[error("stagnation: |U + V1| = {0:.3e} below threshold")]
    Stagnation(f64),

    /// A characteristic foot point left the transverse cross-section.
    #[error("characteristic foot outside domain by {0:.3e}")]
    Geometry(f64),

    /// Curl sources violate their algebraic consistency relation.
    #[error("div-curl consistency: {0}")]
    Consistency(String),

    /// The rank-one closure of the nonlocal potential problem is singular.
    #[error("nonlocal resonance: closure scalar {0:.3e}")]
    NonlocalResonance(f64),

    #[error("fixed point diverging: update ratios {0:?}")]
    Divergence(Vec<f64>),

    #[error("range error: {0}")]
    Range(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

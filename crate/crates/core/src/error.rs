use thiserror::Error;

/// Errors raised by the numerical kernels and validators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument {arg} outside the supported range of the Bessel evaluator")]
    BesselRange { arg: String },

    #[error("resonance singularity: {0}")]
    ResonanceSingularity(String),

    #[error("resonance proximity: distance {dist:e} to the Dirichlet spectrum is below guard {guard:e}")]
    ResonanceProximity { dist: f64, guard: f64 },

    #[error("admissibility margin violated: {0}")]
    MarginViolation(String),

    #[error("permittivity law has support with negative imaginary part ({0})")]
    NegativeImaginaryPermittivity(f64),

    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("declared singularity at {at} lies inside the support and no subdivision budget was given")]
    SingularityOverlap { at: f64 },

    #[error("spectrum table has {have} modes but {need} are required")]
    TableTooSmall { have: usize, need: usize },

    #[error("function has no declared Lipschitz constant")]
    MissingLipschitz,

    #[error("iterative solver did not converge: {0}")]
    NoConvergence(String),

    #[error("ensemble standard error {stderr:e} exceeds tolerance {tol:e}")]
    EnsembleVariance { stderr: f64, tol: f64 },

    #[error("singular matching system: {0}")]
    SingularMatching(String),

    #[error("anisotropic effective tensor rejected by the homogenized solver: {0}")]
    Anisotropic(String),

    #[error("linear system too large: {unknowns} unknowns exceeds cap {cap}")]
    TooLarge { unknowns: usize, cap: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised while validating a model definition.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("metric on {space} is not positive definite at a sampled point (Cholesky failed)")]
    NonPositiveDefiniteMetric { space: &'static str },
    #[error("group action is not isometric: max residual {residual:.3e} exceeds {tol:.1e} in `{relation}`")]
    ActionNotIsometric {
        relation: &'static str,
        residual: f64,
        tol: f64,
    },
    #[error("model file error: {0}")]
    BadDefinition(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
}

/// Errors raised while assembling the geometric frame at a point.
#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("Faddeev-Popov matrix is singular at the evaluation point (cond > {cond:.1e}); the gauge surface is not transversal to the orbit there")]
    SingularFaddeevPopov { cond: f64 },
    #[error("orbit metric d is not positive definite at the evaluation point")]
    NonPositiveOrbitMetric,
    #[error("point violates the gauge surface condition: max |chi| = {chi_max:.3e} > {tol:.1e}")]
    OffSurface { chi_max: f64, tol: f64 },
}

/// Errors raised by the stochastic steppers and the path engine.
#[derive(Debug, Error)]
pub enum SdeError {
    #[error("path left the model chart at step {step}")]
    ChartExit { step: usize },
    #[error("surface re-projection failed at step {step}: |chi| = {chi_max:.3e}")]
    SurfaceDrift { step: usize, chi_max: f64 },
    #[error("diffusion block is not positive definite")]
    NonPositiveDefinite,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{failed} of {total} paths failed (threshold {threshold})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        threshold: f64,
    },
}

/// Errors raised by the reduction estimators.
#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("trajectory carries no Wiener increments; rerun with increment recording enabled")]
    MissingIncrements,
    #[error("kernel-density effective sample count {n_eff:.1} is below {min}")]
    InsufficientSamples { n_eff: f64, min: f64 },
    #[error("irrep `{0}` is not available for this model's group")]
    IncompatibleIrrep(String),
    #[error(transparent)]
    Sde(#[from] SdeError),
}

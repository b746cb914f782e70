use std::fmt;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum WalkError {
    /// A series hit its term cap before meeting the relative tolerance.
    NonConvergence { context: &'static str },
    /// Operation requires at least one absorbing endpoint.
    InvalidBoundary(&'static str),
    /// Conditioning on an exit side the start point already sits on.
    DegenerateStart,
    /// Eigenvalue search could not bracket the requested number of roots.
    RootBracketFailure { mu: f64, found: usize, wanted: usize },
    /// Inverse-CDF table input was not monotone, or failed its round-trip check.
    NonMonotoneInput(String),
    /// A proposal assigns zero probability to a reachable side.
    AbsoluteContinuityViolation(String),
    /// A weight factor left the representable log range.
    NumericalUnderflow,
    /// Point not inside the domain.
    PointOutsideDomain([f64; 3]),
    /// Domain decomposition has no box covering the point.
    NoCoveringBox([f64; 3]),
    /// Diffusion matrix not symmetric positive definite.
    NotPositiveDefinite,
    /// A path exceeded the configured step cap.
    StepLimitExceeded(usize),
    /// All particles in a population carry zero weight.
    AllParticlesZeroWeight,
    /// Bad configuration (files, schema, parameters).
    Config(String),
}

impl fmt::Display for WalkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WalkError::NonConvergence { context } => {
                write!(f, "series did not converge within term cap ({context})")
            }
            WalkError::InvalidBoundary(m) => write!(f, "invalid boundary conditions: {m}"),
            WalkError::DegenerateStart => {
                write!(f, "start point lies on the conditioned-away boundary")
            }
            WalkError::RootBracketFailure { mu, found, wanted } => write!(
                f,
                "bracketed {found} of {wanted} eigenvalues for mu={mu}; regime may be degenerate"
            ),
            WalkError::NonMonotoneInput(m) => write!(f, "non-monotone CDF input: {m}"),
            WalkError::AbsoluteContinuityViolation(m) => {
                write!(f, "proposal violates absolute continuity: {m}")
            }
            WalkError::NumericalUnderflow => write!(f, "weight factor underflowed log range"),
            WalkError::PointOutsideDomain(p) => {
                write!(f, "point ({}, {}, {}) outside domain", p[0], p[1], p[2])
            }
            WalkError::NoCoveringBox(p) => {
                write!(f, "no box covers point ({}, {}, {})", p[0], p[1], p[2])
            }
            WalkError::NotPositiveDefinite => {
                write!(f, "diffusion matrix is not symmetric positive definite")
            }
            WalkError::StepLimitExceeded(n) => write!(f, "path exceeded step limit {n}"),
            WalkError::AllParticlesZeroWeight => write!(f, "all particles have zero weight"),
            WalkError::Config(m) => write!(f, "configuration error: {m}"),
        }
    }
}

impl std::error::Error for WalkError {}

pub type Result<T> = std::result::Result<T, WalkError>;

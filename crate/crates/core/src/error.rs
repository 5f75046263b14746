use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("point {0} is outside the family's domain")]
    Domain(f64),
    #[error("a side must be given when evaluating at the discontinuity {0}")]
    SideRequired(f64),
    #[error("map is not differentiable at {0}")]
    NonDifferentiable(f64),
    #[error("deformation is degenerate: {0}")]
    DegenerateDeformation(String),
    #[error("orbit left the invariant region at step {step} (x = {x})")]
    OrbitEscaped { step: usize, x: f64 },
    #[error("orbit left the domain at step {step} (x = {x})")]
    OrbitLeftDomain { step: usize, x: f64 },
    #[error("no root found: {0}")]
    NoRoot(String),
    #[error("root has minimal period {found}, not {wanted}")]
    PeriodCollision { wanted: usize, found: usize },
    #[error("word {0} is not realized in the bracket")]
    NotRealized(String),
    #[error("kneading sequences are not monotone in the bracket: {0}")]
    MonotonicityViolation(String),
    #[error("Newton iteration diverged: {0}")]
    Diverged(String),
    #[error("Jacobian is singular (condition estimate {0:e})")]
    SingularJacobian(f64),
    #[error("critical orbit {index} is not finite within {cap} steps")]
    OrbitNotFinite { index: usize, cap: usize },
    #[error("derivative vanishes at orbit point {x} (critical orbit {index})")]
    TangentOrbit { index: usize, x: f64 },
    #[error("shape mismatch: {0}")]
    WrongShape(String),
    #[error("determinant quotient {0:e} is too close to zero")]
    ZeroDeterminant(f64),
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("motion is not injective at a sample (min distance {0:e})")]
    InjectivityLost(f64),
    #[error("continuation jumped branches near lambda = {0}")]
    BranchJump(String),
    #[error("lift is singular at point {0}")]
    SingularLift(f64),
    #[error("lift target hits a singular value at point {0}")]
    TargetHitSingularValue(f64),
    #[error("iterated lifts diverge (d_k = {0:e})")]
    DivergenceDetected(f64),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("no root in bracket: {0}")]
    NoRootInBracket(String),
    #[error("separation geometry failed: {0}")]
    GeometryFailed(String),
    #[error("invalid value vector: {0}")]
    InvalidValueVector(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

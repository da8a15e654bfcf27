use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: expected one of {}", expected.join(", "))]
    Syntax { offset: usize, expected: Vec<String> },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("point ({u}, {v}) lies outside the patch domain")]
    OutOfDomain { u: f64, v: f64 },
    #[error("metric form is not definite at ({u}, {v}) (det G = {det})")]
    NotPositiveDefinite { u: f64, v: f64, det: f64 },
    #[error("transversal plane is not transversal to the tangent plane (|det| = {det:e})")]
    NotTransversal { det: f64 },
    #[error("degenerate normalization: {0}")]
    DegenerateNormalization(String),
    #[error("basis is singular")]
    SingularBasis,
    #[error("normal vector (a, b) must be nonzero")]
    ZeroNormalVector,
    #[error("gradient and plane-membership criteria disagree near the tolerance (|grad| = {grad:e}, residual = {residual:e})")]
    ToleranceAmbiguity { grad: f64, residual: f64 },
    #[error("point is not critical (|grad| = {grad:e})")]
    NotCritical { grad: f64 },
    #[error("(t, l) = (0, 0) reported as singular")]
    OriginPlanePoint,
    #[error("finite-difference stencil leaves the domain")]
    StencilOutOfDomain,
    #[error("jet order {available} is too low; {needed} required")]
    InsufficientOrder { needed: usize, available: usize },
    #[error("invalid surface document: {0}")]
    Document(String),
}

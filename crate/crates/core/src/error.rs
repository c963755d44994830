use thiserror::Error;

use crate::expr::ExprError;
use crate::system::{Field, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("z_bound {bound} is exceeded: |Z| = {observed} at {at:?}")]
    ZBoundViolated { bound: f64, observed: f64, at: Point },
    #[error("0 is not a regular value of h: |grad h| = {grad_norm} at {at:?}")]
    SingularSwitching { grad_norm: f64, at: Point },
    #[error("point is not on the switching manifold (h = {h_value})")]
    NotOnSigma { h_value: f64 },
    #[error("point is not a sliding point (denominator {denominator})")]
    NotSliding { denominator: f64 },
    #[error("point is not a tangency of the {field:?} field (first Lie derivative {value})")]
    NotTangency { field: Field, value: f64 },
    #[error("infinite multiplicity suspected: Lie derivatives vanish up to order {max_order}")]
    InfiniteMultiplicity { max_order: usize },
    #[error("Lie derivative order {k} exceeds the cap {max}")]
    LieOrderExceeded { k: usize, max: usize },
    #[error("non-isolated tangency set detected ({0}); the tangency set must be finite")]
    TangencyContinuum(String),
    #[error("non-isolated pseudo-equilibria detected on the sliding region")]
    PseudoEquilibriumContinuum,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("choice {requested} is not among the options {options} at t = {time}")]
    ChoiceIncompatible { requested: String, options: String, time: f64 },
    #[error("chattering: {events} switching events within the horizon")]
    Chattering { events: usize },
    #[error("event localisation reached the step-size floor at t = {time}")]
    BisectionFloor { time: f64 },
    #[error("branch tree exceeds the node cap {cap}")]
    TreeCapExceeded { cap: usize },
    #[error("no tangency connection from {from:?} to {to:?}")]
    NoConnection { from: Point, to: Point },
    #[error("orbit does not return to the tangency set: {0}")]
    NoRecurrence(String),
    #[error("glue verification failed: achieved ({alpha}, {beta}) against eps {eps}")]
    GlueVerification { alpha: f64, beta: f64, eps: f64 },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Expr(_)
            | Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::ZBoundViolated { .. }
            | Error::SingularSwitching { .. }
            | Error::Unsupported(_) => 2,
            Error::TangencyContinuum(_)
            | Error::PseudoEquilibriumContinuum
            | Error::NoConnection { .. }
            | Error::NoRecurrence(_)
            | Error::GlueVerification { .. } => 4,
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

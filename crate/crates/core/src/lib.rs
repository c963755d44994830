//! Filippov vector fields, their orbit space and transitivity checks.
//!
//! A system is a pair of smooth fields `Z+`, `Z-` separated by the zero set
//! of a switching function `h`. Solutions follow the Filippov convention and
//! are not unique through escaping regions and tangencies, so the crate works
//! with [`orbit::Orbit`] values (one concrete solution each) and measures them
//! with the weighted integral and supremum orbit distances in [`metric`].

pub mod builtin;
pub mod config;
pub mod error;
pub mod expr;
pub mod integrate;
pub mod metric;
pub mod orbit;
pub mod system;
pub mod transitivity;

pub use error::{Error, Result};
pub use expr::{ExprError, ExprTree, VectorExpr};
pub use builtin::{builtin, NamedSystem};
pub use config::SystemConfig;
pub use integrate::{
    enumerate_branches, enumerate_until, flow_smooth, integrate_orbit, step_from_sigma, BranchPolicy,
    BranchTree, Choice, Direction, SigmaAction, SigmaEvent,
};
pub use metric::{DistanceKind, DistanceReport};
pub use orbit::{Arc, Orbit, Regime, SigmaSequence, Termination};
pub use system::{Domain, Field, NsvfSystem, Point, RegionClass, RegionKind, Tolerances};
pub use transitivity::{CertificateStatus, GlueResult, TangencyGraph, TransitivityCertificate};

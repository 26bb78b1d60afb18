//! Rolling maps of pseudo-Riemannian manifolds embedded in semi-Euclidean
//! spaces, with a generic engine for homogeneous spaces and concrete models.

pub mod error;
pub mod homogeneous;
pub mod integrate;
pub mod linalg_semi;
pub mod models;
pub mod rolling;
pub mod util;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use homogeneous::{CartanModel, ControlCurve, CurveInput, GroupPath, Lift, ModelDescription, NormalStrategy};
pub use integrate::{OperatorPath, Side, TimeGrid};
pub use linalg_semi::{Isometry, RigidMotion, SignatureForm};
pub use rolling::{ResidualReport, RollingMapPath, RollingTriple, TangentFramePath};

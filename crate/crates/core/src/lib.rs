//! Degree-theoretic shooting for radial semilinear elliptic systems
//! `-Δu_i = f_i(u)` whose source terms may change sign.
//!
//! The pieces, bottom-up:
//!
//! * [`system`] and [`expr`]: the vector field, built-in or from expressions;
//!   [`assumptions`] samples the structural hypotheses on it.
//! * [`integrator`]: the singular radial initial value problem and first wall hit.
//! * [`target`]: the target map on the simplex of initial values, the
//!   retraction back to the simplex, and numerical checks of the dynamic
//!   estimate and of transversal wall crossings.
//! * [`degree`]: Brouwer degree of simplex self-maps; [`search`] hunts for
//!   ground states and preimages.
//! * [`quadrature`], [`pohozaev`] and [`dirichlet`]: Dirichlet ball
//!   solutions and the Rellich–Pohožaev identities that rule them out.
//! * [`export`]: CSV writers shared by the command-line front end.
// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assumptions;
pub mod degree;
pub mod dirichlet;
pub mod error;
pub mod export;
pub mod expr;
pub mod integrator;
pub mod pohozaev;
pub mod quadrature;
pub mod sampling;
pub mod search;
pub mod system;
pub mod target;

pub use error::{Error, Result};
pub use expr::{Expr, Params};
pub use integrator::{integrate, ShotConfig, ShotOutcome, Trajectory};
pub use system::SystemSpec;

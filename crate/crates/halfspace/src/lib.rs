//! Numerical laboratory for quasilinear boundary-reaction problems posed on a
//! truncated half-space `[-Y, Y]^n × [0, X]` with `n ∈ {1, 2}`.
//!
//! The interior operator is `-div(a(x, |∇u|) ∇u) + g(x, u)` with a degenerate
//! weight `a(x, t) = x^α · A(t)`, and the reaction enters through the flux
//! condition `-a(x, |∇u|) ∂ₓu = f(u)` on the bottom face `{x = 0}`.
//!
//! The crate is organised around that problem:
//!
//! * [`weights`]: coefficient models, their linearisation matrices and the
//!   structural checks (growth ratio, Muckenhoupt constant, ellipticity),
//! * [`grid`] / [`field`]: graded tensor grids and nodal scalar fields,
//! * [`solver`]: damped Newton iteration on the weak form,
//! * [`geometry`]: level-set quantities of `y ↦ u(y, x)` and the pointwise
//!   identities relating them,
//! * [`stability`]: second-variation forms and spectral scans,
//! * [`verify`]: weighted Poincaré checks, capacity scans, growth fits and
//!   symmetry detection.

pub mod error;
pub mod exec;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod numeric;
pub mod scenario;
pub mod solver;
pub mod sparse;
pub mod stability;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};

//! Maximum-likelihood estimation for the Grassmannian distribution.
//!
//! The Grassmannian distribution `G_σ` on `Gr(m, r)` is the law of the span of
//! `r` i.i.d. central normal vectors with covariance `σ`. The parameter lives on
//! `Pos(m)`, the unimodular positive-definite matrices, which this crate treats
//! as a Riemannian manifold. The negative log-likelihood is geodesically convex
//! there, so the estimate is the unique zero of its Riemannian gradient when it
//! exists.
//!
//! Modules, bottom-up:
//!
//! * [`scalar`]: the real/complex scalar abstraction.
//! * [`manifold`]: geometry of `Pos(m)`.
//! * [`grassmann`]: subspaces, intersection dimensions, σ-orthogonal projectors.
//! * [`model`]: sampling from `G_σ` and its density.
//! * [`likelihood`]: the objective, its gradient and Hessian.
//! * [`solver`]: fixed-point and Newton iterations for the likelihood equation.
//! * [`existence`]: existence/uniqueness diagnostics and the sample-size bound.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod existence;
pub mod grassmann;
pub mod likelihood;
pub mod manifold;
pub mod model;
pub mod scalar;
pub mod solver;

mod summation;

pub use error::{Error, Result};
pub use existence::{UniquenessVerdict, VerdictMethod, VerdictStatus, Witness};
pub use grassmann::Subspace;
pub use likelihood::EmpiricalMeasure;
pub use manifold::{CovarianceParameter, TangentVector};
pub use scalar::{Field, ScalarField};
pub use solver::{DivergenceFlag, FitOptions, FitReport};

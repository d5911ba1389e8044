//! States and KMS states on C*-algebras of saturated Fell bundles over
//! finite groupoids.
//!
//! Fibres are realised as subspaces of ambient matrix spaces, so bundle
//! multiplication is the matrix product and the involution is the adjoint.
//! Every construction is exact finite-dimensional linear algebra.

pub mod conv;
pub mod crossed;
pub mod fellbundle;
pub mod groupoid;
pub mod induction;
pub mod kms;
pub mod linalg;
pub mod models;
pub mod report;
pub mod samples;
pub mod states;

pub use conv::{AlgebraModel, Section};
pub use fellbundle::{FellBundle, Fiber, GroupoidAction, MatrixAlgebra};
pub use groupoid::{Cocycle, FiniteGroupoid, UnitMeasure};
pub use linalg::{CMat, C64, DEFAULT_TOL};
pub use report::{Axiom, ValidationReport};

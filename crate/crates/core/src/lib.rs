//! Lagrangian mechanics and 1+1 field theories with nonholonomic constraints.
//!
//! The crate is organised bottom-up: [`jet`] holds the jet-space data model
//! and differentiation of Lagrangians, [`constraints`] the constraint sets,
//! [`mechanics`] the multiplier solve and time integration for one base
//! dimension, [`cauchy`] the reduction of field theories on a Cauchy grid to
//! mechanics, and [`models`] the built-in systems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cauchy;
pub mod constraints;
pub mod error;
pub mod jet;
pub mod linalg;
pub mod mechanics;
pub mod models;

pub use cauchy::{
    dedonder_residual_20, evolve_field, semidiscretize, theta_tilde, Boundary, CauchyGrid, CauchyState, CauchySystem,
    FieldTrajectory, FieldVariation,
};
pub use constraints::{
    affine_constraints, constraint_regularity, jacobian_z, AffineFormCoefficients, Coefficient, ConstraintRegularity,
    ConstraintSet,
};
pub use error::{Degeneracy, Error, Result};
pub use jet::{
    check_derivatives, eval_derivatives, hessian_regularity, Coord, DerivativeBundle, DerivativeCheck, FiberedSpace,
    HessianRegularity, JetPoint, LagrangianModel, Partial,
};
pub use mechanics::{
    assemble_kkt, integrate, multiplier_solve, project_state, project_state_weighted, step_rk4, IntegrateOptions,
    KktSystem, MechState, MultiplierSolution, SampleDiagnostics, Trajectory,
};
pub use models::{builtin, Builtin, TireParams};

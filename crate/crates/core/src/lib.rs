//! Perturbed cyclic and simultaneous subgradient projection methods for
//! convex feasibility problems, wrapped in a level-set scheme for
//! constrained convex minimization.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod constraint;
pub mod error;
pub mod experiments;
pub mod kv;
pub mod levelset;
pub mod perturbations;
pub mod problems;
pub mod projections;
pub mod solver;
pub mod vector;

pub use constraint::{
    eval_constraint, residual_sup_norm, violation_sup_norm, AffineConstraint, Constraint,
    ConvexConstraint, FeasibilityProblem, FnConstraint, LevelBound, OptimizationProblem,
    SumConstraint,
};
pub use error::{Error, Result};
pub use vector::Vector;

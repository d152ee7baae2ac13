//! Concrete problem builders: small linear feasibility systems and an IMRT
//! model over a synthetic phantom.

pub mod dose;
pub mod linear;
pub mod phantom;

pub use dose::{build_imrt_problem, dose_function_eval, DoseFunction, DoseFunctionSpec, DoseRole};
pub use linear::{build_linear_problem, extend_linear_problem, LinearSystem};
pub use phantom::{build_phantom, DoseModel, PhantomConfig, Structure};

//! Collision kernels and the linearized and nonlinear collision operators.

mod geometry;
pub mod kernel;
pub mod linearized;
pub mod nonlinear;

pub use kernel::{angular_rule, post_collision, AngularRule, CollisionKernel, KernelKind};
pub use linearized::{assemble_linearized, spectral_gap, GapReport, LinearizedOperator};
pub use nonlinear::{dual_gamma_norm, NonlinearOperator};

//! Nonlocal semilinear equations `u − k⋆u = f(u)` on rectangular grids:
//! kernels, the operator and its Dirichlet form, solvers that manufacture
//! monotone solutions, and numerical diagnostics for one-dimensional
//! symmetry of those solutions.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
mod fft;
pub mod grid;
pub mod kernel;
pub mod nonlinearity;
pub mod operator;
pub mod rigidity;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use grid::{
    partial_derivative, read_field, write_field, Axis, Boundary, DerivativeScheme, Field, Grid,
};
pub use kernel::{
    build_kernel, validate_kernel, DiscreteKernel, Family, KernelSpec, ValidationReport,
};
pub use nonlinearity::Nonlinearity;
pub use operator::{
    apply_l, check_commutation, check_r1, dirichlet_form, Method, OperatorContext, PairMask,
};
pub use rigidity::{verify_bundle, RigidityReport, VerifyOptions};
pub use scalar::Real;

pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type Field64 = Field<f64>;
pub type Field32 = Field<f32>;
pub type DiscreteKernel64 = DiscreteKernel<f64>;
pub type DiscreteKernel32 = DiscreteKernel<f32>;
pub type OperatorContext64 = OperatorContext<f64>;
pub type OperatorContext32 = OperatorContext<f32>;
pub type SolutionBundle64 = solvers::SolutionBundle<f64>;
pub type SolutionBundle32 = solvers::SolutionBundle<f32>;

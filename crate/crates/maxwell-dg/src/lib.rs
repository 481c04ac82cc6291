//! Discontinuous Galerkin solver for the 1D Maxwell system in nonlinear
//! optical media (linear Lorentz dispersion, instantaneous Kerr response and
//! delayed Raman response), with energy-stable leap-frog and fully implicit
//! time integrators.

pub mod basis;
pub mod config;
pub mod diagnostics;
pub mod field;
pub mod flux;
pub mod kink;
pub mod mesh;
pub mod model;
pub mod operators;
pub mod output;
pub mod scheme;
pub mod soliton;
pub mod solver;

pub use basis::Basis;
pub use field::DgField;
pub use flux::{BoundaryKind, FluxKind};
pub use mesh::Mesh;
pub use model::{ModelParams, SimState};
pub use scheme::SchemeKind;
pub use solver::{NewtonConfig, StepReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("Newton iteration did not converge: residual {residual:.3e} after {iters} iterations")]
    NewtonNonConvergence { iters: usize, residual: f64 },
    #[error("Krylov iteration stagnated: residual {0:.3e}")]
    KrylovStagnation(f64),
    #[error("singular Jacobian in local Newton solve (element {0})")]
    SingularJacobian(usize),
    #[error("solution diverged (non-finite values) at t = {0}")]
    Diverged(f64),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

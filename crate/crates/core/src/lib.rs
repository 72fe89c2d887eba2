//! Grid-based laboratory for van der Waals interaction energies of model atoms.
//!
//! The crate discretizes few-electron Born–Oppenheimer Hamiltonians on tensor
//! product grids and provides matrix-free eigen/resolvent solvers, the
//! dispersion coefficient, Feshbach fixed points, variational upper bounds,
//! ion-ladder stability checks and power-law fits of the interaction energy.
//!
//! Units: charge `e = 1`, electron mass `1/2`, so `h = -Δ - Z/|x|`.

pub mod acceptance;
pub mod asymptotics;
pub mod dispersion;
mod error;
pub mod exec;
pub mod feshbach;
pub mod fit;
pub mod grid;
pub mod hamiltonian;
pub mod model;
pub mod operator;
pub mod quadrature;
pub mod spectral;
pub mod stability;
pub mod symmetry;
pub mod variational;
pub mod wave;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use exec::Exec;
pub use grid::{Geometry, GridSpec};
pub use model::{AtomSpec, Decomposition, PairInteraction, PotentialKind, SystemConfig};
pub use operator::LinearOperator;
pub use spectral::{EigenResult, SolverSettings};
pub use wave::WaveFunction;

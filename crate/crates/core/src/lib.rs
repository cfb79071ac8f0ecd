//! Regionally-additive domain decomposition schemes for the 2D parabolic
//! problem `du/dt + A u = f` on a rectangle with homogeneous Dirichlet data.
//!
//! The operator `A = D + C` (diffusion plus skew convection) is split over a
//! partition of unity into nonnegative parts `A_a`, which drive the
//! regularized additive, regularized multiplicative and vector additive
//! schemes. Everything numerical is generic over [`Real`] (`f32`, `f64`);
//! partition weights are exact rationals.

mod scalar;

pub mod analysis;
pub mod decomposition;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod linsolve;
pub mod operators;
pub mod schemes;
pub mod sparse;

pub use decomposition::{
    build_partition, decompose, interface_exchange_volume, Decomposition, DecompositionSpec, OperatorParts,
    OverlapVariant, PartitionOfUnity, Rational,
};
pub use error::{Error, Result};
pub use grid::{sample_exact, Axis, Edge, Grid, GridFunction};
pub use linsolve::{Method, SolverConfig};
pub use operators::{LinearGridOperator, Symmetry};
pub use scalar::Real;
pub use schemes::{SchemeConfig, SchemeKind, SchemeState, SourceTerm};

pub type Grid64 = Grid<f64>;
pub type GridFunction64 = GridFunction<f64>;
pub type Operator64 = LinearGridOperator<f64>;
pub type Partition64 = PartitionOfUnity<f64>;

pub type Grid32 = Grid<f32>;
pub type GridFunction32 = GridFunction<f32>;
pub type Operator32 = LinearGridOperator<f32>;
pub type Partition32 = PartitionOfUnity<f32>;

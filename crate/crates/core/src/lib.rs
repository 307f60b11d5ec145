//! Multi-factor Cox–Ingersoll–Ross short-rate models.
//!
//! * [`model`]: parameters, admissibility, the three-factor USV family, vol normalization
//! * [`riccati`]: the quadratic map `H`, bond-price Riccati solver, extended transform
//! * [`kernel`]: term-structure kernel and the maps `S`, `L`, `Q`
//! * [`usv`]: exact decision of unspanned stochastic volatility
//! * [`pricing`]: bonds, exponential claims, volatility decomposition
//! * [`montecarlo`]: full-truncation Euler simulation and estimators
//! * [`cli`]: the `cir-usv` command-line tool

// Negated comparisons reject NaN; index loops mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod kernel;
pub mod model;
pub mod montecarlo;
pub mod ode;
pub mod pricing;
pub mod riccati;
pub mod usv;

pub use kernel::{KernelDecomposition, KernelError};
pub use model::{CirModel, ModelError, UsvFamilyParams, ValidationReport};
pub use montecarlo::{McEstimate, PathSet, SimConfig};
pub use riccati::{RiccatiSolution, TransformSolution};
pub use usv::UsvCertificate;

//! Stabilized symmetric interior penalty discontinuous Galerkin methods in
//! one space dimension, analysed in mesh-dependent norms.
//!
//! The crate assembles the interior penalty form and the Gram matrices of the
//! L²-, H¹- and H²-like mesh-dependent norms on the broken space `P_k(T)`,
//! builds C¹ averaging and Ritz reconstructions into a conforming space of
//! degree `k + 2`, computes discrete inf-sup constants by whitened SVD, and
//! runs convergence studies for smooth data and for point sources
//! `c₀ δ + c₁ δ'`.

pub mod analysis;
pub mod cli;
pub mod dgspace;
pub mod error;
pub mod forms;
mod legendre;
pub mod linalg;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod reconstruct;

pub use dgspace::{project_l2, Broken, DgFunction, DgSpace, Side, TraceData};
pub use error::{Error, Result};
pub use forms::{assemble_ip, assemble_norm_grams, AssembledForms, NormTriple, PenaltyParams};
pub use mesh::Mesh1D;
pub use quadrature::{gauss_rule, QuadratureRule};
pub use reconstruct::{C1Function, C1Space};

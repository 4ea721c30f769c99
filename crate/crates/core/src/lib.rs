//! Combinatorial Gaussian field theory on metrized simplicial complexes.
//!
//! The crate is layered bottom-up:
//!
//! - [`simplicial`]: oriented complexes, boundary subcomplexes, the double
//!   `D(K)`, gluing, closed doubles and standard subdivision.
//! - [`metric`]: weight systems (Riemannian norms on cochains), Gram
//!   operators, locality and the Mayer–Vietoris check.
//! - [`bundle`]: flat Hermitian bundles, parallel transports, curvature and
//!   the covariant derivative with its adjoint.
//! - [`hodge`]: combinatorial Laplacians, Dirichlet restriction,
//!   pseudodeterminants and the discrete Green formula.
//! - [`gaussian`]: actions, Poisson and Dirichlet-to-Neumann operators,
//!   partition functions and the gluing identities.
//! - [`approx`]: Whitney and de Rham maps and the refinement experiments.
//!
//! [`instances`] generates seeded gluing problems and [`format`] reads the
//! line-oriented complex description files.

pub mod approx;
pub mod bundle;
pub mod error;
pub mod format;
pub mod gaussian;
pub mod hodge;
pub mod instances;
pub mod linalg;
pub mod metric;
pub mod simplicial;

pub use error::{Error, Result};

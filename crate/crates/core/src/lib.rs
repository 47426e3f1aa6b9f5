//! Hybrid finite element exterior calculus (FEEC) for canonical Hamiltonian
//! PDE systems of Hodge–Dirac type, together with numerical verification of
//! the multisymplectic conservation law satisfied by hybrid numerical traces.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! exterior  ->  mesh  ->  polyforms  ->  spaces  ->  hybrid  ->  verify
//! ```
//!
//! * [`exterior`] — exact exterior algebra on `Alt R^n` (wedge, Hodge star,
//!   inner product, canonical multisymplectic 2-form) for `n <= 3`.
//! * [`mesh`] — conforming simplicial meshes with facet adjacency, boundary
//!   detection and induced orientations.
//! * [`polyforms`] — polynomial differential forms on physical simplices:
//!   `P_r Λ^k` / `P_r⁻ Λ^k` bases, `d`, `δ`, tangential/normal traces,
//!   simplex quadrature and L² pairings.
//! * [`spaces`] — broken spaces, facet trace spaces, jump/average calculus
//!   and the boundary bracket.
//! * [`problems`] — canonical problem catalog (Hodge–Dirac sources,
//!   semilinear Hodge–Laplace, vorticity–velocity–pressure, 1D Hamiltonian).
//! * [`hybrid`] — assembly and solution of hybrid variational systems for
//!   the AFW-H, LDG-H, IP-H, XG and reduced-space (NC-H) method families.
//! * [`verify`] — discrete first variations and the multisymplecticity,
//!   conservativity, jump-identity, reciprocity and equivalence checks.
//! * [`suites`] — named end-to-end check suites used by the CLI and the
//!   acceptance tests.

pub mod error;
pub mod exterior;
pub mod hybrid;
pub mod mesh;
pub mod polyforms;
pub mod problems;
pub mod spaces;
pub mod suites;
pub mod verify;

pub use error::{Error, Result};
pub use exterior::{GradedAltValue, MultiIndex};

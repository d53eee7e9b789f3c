//! Mixed finite element method for the Dirichlet problem of the elliptic
//! Monge-Ampère equation `det D²u = f` in two dimensions.
//!
//! The unknowns are a Lagrange scalar field `u_h` and a symmetric
//! matrix field `σ_h` standing for its Hessian. The crate is `no_std` and only
//! needs `alloc`; file formats and the command line live in a separate crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assembly;
pub mod element;
pub mod error;
pub mod harness;
pub mod mesh;
pub mod problems;
pub mod solver;
pub mod sparse;
pub mod spaces;
pub mod sym;

pub use error::{Error, Result};
pub use sym::Sym2;

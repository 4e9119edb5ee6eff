//! Exact diagonalization tools for the spin-3/2 valence-bond model on the
//! honeycomb lattice, and the finite-size criterion that turns a gap on a
//! small patch into a bound on the infinite-lattice gap.

pub mod constants;
pub mod criterion;
pub mod eigensolver;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod report;
pub mod sector;
pub mod spectrum;
pub mod spin;
pub mod vbs;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/lattice.md")]
    mod lattice {}
    #[doc = include_str!("../../../book/src/projector.md")]
    mod projector {}
    #[doc = include_str!("../../../book/src/sectors.md")]
    mod sectors {}
    #[doc = include_str!("../../../book/src/vbs.md")]
    mod vbs {}
    #[doc = include_str!("../../../book/src/eigensolver.md")]
    mod eigensolver {}
    #[doc = include_str!("../../../book/src/gaps.md")]
    mod gaps {}
    #[doc = include_str!("../../../book/src/criterion.md")]
    mod criterion {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

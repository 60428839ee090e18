//! One-dimensional atomistic-to-continuum coupling.
//!
//! A periodic chain with a finite-range pair potential serves as the
//! reference model. Cauchy-Born and higher-order Cauchy-Born continuum
//! models are discretized with P1 and C² quintic Hermite elements, and four
//! blended couplings join them to the chain:
//!
//! * B-QCE and B-QCF blend atomistic and Cauchy-Born energies or forces on
//!   the lattice;
//! * B-QHOCE and B-QHOCF blend atomistic and higher-order Cauchy-Born
//!   energies or forces on a mixed P1/quintic space.
//!
//! The [`harness`] module reruns the convergence, coarsening and
//! ghost-force studies.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod atomistic;
pub mod continuum;
pub mod coupling;
pub mod error;
pub mod exec;
pub mod fem;
pub mod harness;
pub mod lattice;
pub mod potential;
pub mod solver;

pub use error::{Error, Result};
pub use exec::Execution;

//! Kinetically constrained spin models with a tagged tracer.
//!
//! The crate is `no_std` (it needs `alloc`). It covers:
//!
//! * [`lattice`]: finite configurations, the Bernoulli product measure and the
//!   elementary transformations (flip, exchange, shift, zero clusters);
//! * [`constraints`]: the k-zeros and East kernels, flip rates, axiom checks
//!   and a bounded reachability search;
//! * [`dynamics`]: an event-driven graphical construction for the
//!   environment, the joint environment/tracer process and the environment
//!   seen from the tracer, plus the distinguished zero and hitting times;
//! * [`exact`]: sparse generators on communicating classes, spectral gaps,
//!   the variational objective for the diffusion coefficient and the
//!   Dirichlet-form functionals;
//! * [`estimate`]: MSD fits, power-law exponents, bound checks;
//! * [`auxiliary`]: the three-move swap dynamics and its random-walk labelling.
//!
//! IO, configuration files, the CLI and parallel ensembles live in the
//! companion `kcsm` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod auxiliary;
pub mod constraints;
pub mod dynamics;
mod error;
pub mod estimate;
pub mod exact;
pub mod lattice;
pub mod math;
pub mod rng;

pub use error::{Error, Result};

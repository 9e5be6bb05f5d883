//! Joint pilot and payload power allocation for uplink massive-MIMO links
//! operating in the finite-blocklength (URLLC) regime.
//!
//! The crate is organised bottom-up:
//!
//! - [`scenario`]: problem instances and link-budget conversion
//! - [`chanmodel`]: MMSE estimation statistics and channel sampling
//! - [`fbl`]: normal-approximation rate, the `f`/`g` helpers and SINR lower bounds
//! - [`approx`]: local log/monomial bounds used to convexify each round
//! - [`gp`]: geometric programs and a barrier interior-point solver
//! - [`receiver`]: MRC and ZF detectors behind a common trait
//! - [`allocator`]: successive-GP allocation and the baseline schemes
//! - [`mc`] and [`sweep`]: Monte Carlo validation and experiment sweeps

pub mod allocator;
pub mod approx;
pub mod chanmodel;
pub mod error;
pub mod fbl;
pub mod gp;
pub mod mc;
pub mod receiver;
pub mod rng;
pub mod scenario;
pub mod sweep;

pub use error::{Error, Result};

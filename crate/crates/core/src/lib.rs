#![no_std]
extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod additive;
pub mod classification;
pub mod closed_loop;
pub mod error;
pub mod factorization;
pub mod gap;
pub mod linalg;
pub mod lti;
pub mod parity;
pub mod projection;
pub mod random;
pub mod riccati;
pub mod thresholds;
pub mod uncertainty;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use factorization::{normalized_gains, BezoutSet, CoprimeFactorization, NormalizedRepresentation};
pub use lti::{FrequencyGrid, SignalWindow, StateSpaceModel};

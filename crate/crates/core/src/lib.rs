//! Individual-machine transient stability assessment.
//!
//! Simulates classical multi-machine swing dynamics through a fault and its
//! clearing, expresses every machine relative to the system centre of
//! inertia, and judges stability machine by machine from each machine's own
//! kinetic/potential energy exchange.

pub mod assessment;
pub mod case;
pub mod cct;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod export;
pub mod surface;

pub use error::{Error, Result};

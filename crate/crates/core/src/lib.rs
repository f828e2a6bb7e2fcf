//! Simulation of energy- and sampling-constrained asynchronous communication
//! over discrete memoryless channels.
//!
//! * [`prob`]: distributions, entropies, divergences and the method of types.
//! * [`channel`]: channels with an idle input and input costs.
//! * [`capacity`]: full-sampling asynchronous capacity per unit cost and the
//!   minimal-delay codeword length.
//! * [`codec`]: constant-composition codebooks with typicality and MMI decoders.
//! * [`sampling`]: transmitter schedules and receiver sampling state machines.
//! * [`sim`]: lazy trial simulator, eager reference, and the Monte Carlo harness.

// `!(x > 0.0)` style checks are used to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod channel;
pub mod codec;
pub mod prob;
pub mod sampling;
pub mod sim;

#[cfg(test)]
mod testutil;

pub use capacity::{capacity_full_sampling, min_delay_length, rate_objective, CapacityResult};
pub use channel::{ChannelSpec, Dmc, Violation};
pub use prob::{Dist, EmpiricalType};

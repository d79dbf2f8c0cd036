//! Simulation core for an integrated microtransit operator.
//!
//! The operator runs a shared-ride fleet that offers two services per
//! request: a door-to-door ride (`R`) and a ride to a transit station
//! followed by transit and a walk (`RT`). Customers pick among those two
//! offers and five outside modes according to a nested-logit model. The
//! operator prices each request with a willingness-to-pay chance
//! constraint and re-estimates the choice model at the end of every day.
//!
//! The crate is `no_std` + `alloc`. All IO, configuration files and the
//! command-line runner live in the `mms-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod choice;
pub mod demand;
pub mod dispatch;
pub mod error;
pub mod math;
pub mod network;
pub mod pricing;
pub mod rng;
pub mod sim;

pub use choice::{Mode, Nest, NlParams, Observation};
pub use demand::{FareSchedule, ModeAttributes, Request, WtpModel};
pub use error::{Error, Result};
pub use network::{Network, NetworkConfig, Point};
pub use pricing::{PricingConfig, PricingMode};
pub use sim::{DayMetrics, ExperimentReport, Scenario};

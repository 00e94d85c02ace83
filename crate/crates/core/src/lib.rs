//! Slot-level simulator of NR V2X sidelink resource allocation.
//!
//! Two allocation schemes share one resource pool:
//!
//! - **Mode 2** ([`sps`]): every UE senses the channel, excludes resources
//!   reserved by its neighbours and picks a semi-persistent grant at random
//!   from what is left.
//! - **Mode 2d** ([`mrd`]): a group leader hands out resources to the members
//!   of its platoon with the Maximum Reuse Distance rule, i.e. the resource
//!   whose closest same-resource holder is farthest away.
//!
//! The [`engine`] advances every UE slot by slot (1 ms at numerology 0),
//! resolves co-channel interference with a threshold capture model
//! ([`radio`]) and feeds a [`metrics::MetricsStore`] from which packet
//! reception ratio and packet inter-reception time are derived.
//!
//! The runnable programs under `examples/` walk through each capability:
//!
//! ```bash
//! cargo run -p sidelink-sim --example link_budget
//! cargo run -p sidelink-sim --example mrd_allocation
//! cargo run -p sidelink-sim --example sensing_selection
//! cargo run -p sidelink-sim --example single_run
//! cargo run -p sidelink-sim --release --example scenario_sweep
//! cargo run -p sidelink-sim --example percentiles
//! cargo run -p sidelink-sim --example config_presets
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engine;
pub mod error;
pub mod export;
pub mod grid;
pub mod ledger;
pub mod metrics;
pub mod mrd;
pub mod radio;
pub mod rng;
pub mod scenario;
pub mod sps;

pub use config::{Provenance, ResolvedConfig, SimConfig};
pub use engine::{run, sweep, RunKey};
pub use error::{Error, Result};
pub use grid::{PoolConfig, SlResource};
pub use metrics::MetricsStore;
pub use scenario::{GroupId, Position, Scenario, Topology, UeId};

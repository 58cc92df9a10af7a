//! Capacitated facility location with per-unit penalties.
//!
//! Every client `j` has an integral demand `d_j`; each unit of demand is either
//! routed to an open facility `i` at cost `c_ij` or rejected at the client's
//! penalty rate `p_j`. Facilities carry an opening cost and a hard capacity.
//! Given an open set, the cheapest assignment is a min-cost flow on a network
//! with an extra penalty source ([`flow::assign`]); the hard part is choosing
//! the open set, which is done by local search:
//!
//! * [`search::uniform`] for equal capacities (add / delete / swap),
//! * [`search::nonuniform`] for arbitrary capacities (add / delete /
//!   open(t, T) / close(s, T) with penalty rerouting).
//!
//! [`oracle`] enumerates every open set and is the ground truth for tests and
//! the benchmark harness in [`bench`].
//!
//! All money is fixed-point `i64` in micro-units and all demand is integral,
//! so flows and comparisons are exact.

pub mod bench;
pub mod cli;
pub mod flow;
pub mod instance;
pub mod oracle;
pub mod par;
pub mod search;

/// Money in micro-units.
pub type Money = i64;
/// Demand and capacity units.
pub type Units = i64;

/// Micro-units per whole money unit.
pub const MICROS: Money = 1_000_000;

pub use flow::{assign, Assignment};
pub use instance::{CapacityMode, Client, Facility, Instance, OpenSet};
pub use oracle::{exact_optimum, OracleResult};
pub use par::Execution;
pub use search::{local_search, scaled_search, SearchParams, Solution, Variant};

//! Flux-model traffic networks, equilibria, and the Braess paradox.

pub mod braess;
pub mod control;
pub mod equilibria;
pub mod error;
pub mod flux;
pub mod network;
pub mod numeric;
pub mod report;
pub mod scenario;
pub mod simplex;
pub mod sweep;

pub use error::{Error, Result};
pub use flux::FluxModel;
pub use network::{Demand, FlowPartition, Network, Road, RoadBehavior, Route};

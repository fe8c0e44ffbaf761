//! Byzantine consensus under the local broadcast model.

pub mod graph;
pub(crate) mod flow;
pub mod packing;
pub mod feasibility;
pub mod message;
pub mod netsim;
pub mod protocols;
pub mod adversaries;
pub mod indistinguishability;
pub mod harness;

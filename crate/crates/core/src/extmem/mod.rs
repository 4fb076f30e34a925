//! Simulated external-memory substrate (block store, external sort,
//! I/O-efficient priority queue) and the two I/O-efficient terrain-flow
//! algorithms with measured I/O counts.
//!
//! The store is a simulation: items live in ordinary vectors, but every
//! block-granular transfer is counted, so I/O costs are deterministic and
//! testable at desk scale. An "item" is one unit of weight; a forwarded
//! step function weighs `1 + breakpoints`, which ties measured I/O volume to
//! the total flow-rate complexity.

mod block_store;
mod io_flow;
mod pqueue;
mod sort;

pub use block_store::{BlockStore, ExtMemError, ExtVec, IoCounters, ItemWeight, StreamReader};
pub use io_flow::{preprocess_io, terrain_flow_io_v1, terrain_flow_io_v2, IoFlowError};
pub use pqueue::ExtPriorityQueue;
pub use sort::ext_sort;

//! Flow routing on triangulated terrains.
//!
//! Given a terrain (a triangulated surface with distinct vertex heights) and
//! a rain distribution that varies piecewise-constantly in time, this crate
//! computes time-varying flow rates on all terrain edges under the SFD and
//! MFD flow models, including depression filling and spilling. It provides:
//!
//! * an internal-memory sweep and an output-sensitive variant over the merge
//!   tree ([`flow`]),
//! * two I/O-efficient variants running over a simulated block store with
//!   measured I/O counts ([`extmem`]),
//! * fast SFD edge-flow queries via tributary trees ([`sfd`]),
//! * 2D river-channel extraction along a flow path by inverting Manning's
//!   equation ([`channel`]).
//!
//! All core math is generic over the scalar type via [`scalar::Real`]; the
//! aliases at the crate root fix `f64`, which is what the CLI uses.

pub mod channel;
pub mod extmem;
pub mod fixtures;
pub mod flow;
pub mod geom;
pub mod index;
pub mod mergetree;
pub mod scalar;
pub mod sfd;
pub mod stepfn;
pub mod terrain;
pub mod validate;

/// Double-precision aliases for the main types.
pub type Terrain = terrain::Terrain<f64>;
pub type FlowGraph = terrain::FlowGraph<f64>;
pub type FlowModel = terrain::FlowModel<f64>;
pub type MergeTree = mergetree::MergeTree<f64>;
pub type VertexAnnotation = mergetree::VertexAnnotation<f64>;
pub type StepFn = stepfn::StepFn<f64>;
pub type CumFn = stepfn::CumFn<f64>;
pub type TerrainIndex = index::TerrainIndex<f64>;
pub type RainDistribution = flow::RainDistribution<f64>;
pub type FlowRateMap = flow::FlowRateMap<f64>;

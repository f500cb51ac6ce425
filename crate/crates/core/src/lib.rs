//! Exact coverage, complexity and optimistic-exploration experiments on
//! finite layered episodic MDPs.

pub mod complexity;
pub mod constructions;
pub mod coverage;
pub mod error;
pub mod family;
pub mod golf;
pub mod harness;
pub mod lp;
pub mod mdp;
pub mod offline;
pub mod random;
pub mod reward_free;
pub mod table;

pub use error::{Error, Result};
pub use family::ValueFunctionFamily;
pub use mdp::{LayeredMdp, OccupancyMeasure, Policy, Trajectory};
pub use table::LayerTable;

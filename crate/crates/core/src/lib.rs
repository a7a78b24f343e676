//! Real-time path replanning for a circular holonomic robot among static and
//! moving circular obstacles.
//!
//! The engine keeps a goal-rooted search tree over the whole workspace. When a
//! moving obstacle invalidates the current path, the tree is pruned locally
//! around the risk region (splitting it into disjoint subtrees), repaired by
//! reconnecting subtrees at hot-spot cells ranked by a shortest-path utility,
//! re-optimized with a rewiring cascade, and the pruned structure is then
//! reintegrated. A deterministic discrete-time simulator and benchmark
//! harness drive the planner for evaluation.

pub mod geometry;
pub mod planner;
pub mod pruning;
pub mod repair;
pub mod sim;
pub mod tree;
pub mod world;

pub use geometry::{Disc, Point2, Segment2};
pub use planner::{plan_initial, Planner, PlannerConfig, TickOutcome, Trajectory};
pub use pruning::{compute_risk, prune, validate_path, ObstacleState, RiskModel};
pub use repair::{repair, RepairOutcome, RepairParams};
pub use sim::{run_trial, Scenario, ScenarioConfig, TrialResult};
pub use tree::{build_initial_tree, Forest, NodeId};
pub use world::{CellIndex, StaticMap, Tiling};

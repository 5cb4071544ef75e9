//! Serial-arm model, reachability, canvas sizing and joint-space planning.

mod chain;
mod ik;
mod plan;
mod workspace;

use thiserror::Error;

pub use chain::{preset_names, ChainSpec, FrameSpec, Joint, JointSpec, KinematicChain, ToolPose, JACOBIAN_STEP};
pub use ik::{ik, IkOutcome, IkParams};
pub use plan::{pathwise_ik, JointTrajectory, PenState, PlanParams, Stroke};
pub use workspace::{
    clip_to_tiles, fit_canvas, project_to_canvas, reachability_map, tile_canvas, CanvasSpec, ImageFrame, LatticeSpec,
    Plane, ReachabilityMap, Tile,
};

#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    #[error("expected {expected} joint values, got {got}")]
    JointCount { expected: usize, got: usize },
    #[error("joint {joint} value {value} outside limits [{min}, {max}]")]
    OutOfLimits { joint: usize, value: f64, min: f64, max: f64 },
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("invalid chain config: {0}")]
    Config(String),
    #[error("unknown chain preset: {0}")]
    UnknownPreset(String),
    #[error("invalid kinematics parameters: {0}")]
    InvalidParams(String),
    #[error("reachability maps use different lattices")]
    LatticeMismatch,
    #[error("canvas infeasible")]
    CanvasInfeasible,
    #[error("no poses to plan")]
    EmptyPath,
    #[error("pose {index} unreachable")]
    Unreachable { index: usize },
    #[error("joint discontinuity at pose {index}: deltas {deltas:?}")]
    Discontinuity { index: usize, deltas: Vec<f64> },
}

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{ik, IkParams, KinematicChain, KinematicsError, ToolPose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanParams {
    pub ik: IkParams,
    /// Largest per-joint change (rad) between consecutive pen-down waypoints.
    pub jump_threshold: f64,
    /// Pen-up clearance above the plane (mm).
    pub hover_height: f64,
}

impl Default for PlanParams {
    fn default() -> Self {
        Self {
            ik: IkParams::default(),
            jump_threshold: 0.1,
            hover_height: 5.0,
        }
    }
}

impl PlanParams {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        self.ik.validate()?;
        if !(self.jump_threshold > 0.0 && self.hover_height >= 0.0) {
            return Err(KinematicsError::InvalidParams(format!(
                "jump_threshold must be positive and hover_height non-negative (got {}, {})",
                self.jump_threshold, self.hover_height
            )));
        }
        Ok(())
    }
}

/// One continuous pen-down pass drawn with pen `tool`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    pub poses: Vec<ToolPose>,
    pub tool: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenState {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct JointTrajectory {
    pub waypoints: Vec<DVector<f64>>,
    pub pen_state: Vec<PenState>,
    pub tool_index: Vec<usize>,
}

impl JointTrajectory {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    fn push(&mut self, q: DVector<f64>, pen: PenState, tool: usize) {
        self.waypoints.push(q);
        self.pen_state.push(pen);
        self.tool_index.push(tool);
    }

    /// Largest per-joint change between consecutive pen-down waypoints.
    pub fn max_pen_down_jump(&self) -> f64 {
        (1..self.len())
            .filter(|&i| self.pen_state[i] == PenState::Down && self.pen_state[i - 1] == PenState::Down)
            .map(|i| (&self.waypoints[i] - &self.waypoints[i - 1]).amax())
            .fold(0.0, f64::max)
    }

    pub fn append(&mut self, other: JointTrajectory) {
        self.waypoints.extend(other.waypoints);
        self.pen_state.extend(other.pen_state);
        self.tool_index.extend(other.tool_index);
    }

    /// `tool,pen,q0,...` with one row per waypoint.
    pub fn to_csv(&self) -> String {
        let dof = self.waypoints.first().map_or(0, |q| q.len());
        let mut out = String::from("tool,pen");
        for j in 0..dof {
            let _ = write!(out, ",q{j}");
        }
        out.push('\n');
        for ((q, pen), tool) in self.waypoints.iter().zip(&self.pen_state).zip(&self.tool_index) {
            let _ = write!(out, "{tool},{}", if *pen == PenState::Down { "down" } else { "up" });
            for v in q.iter() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn hover(pose: &ToolPose, height: f64) -> ToolPose {
    ToolPose::new(pose.position - pose.pen_axis() * height, pose.orientation)
}

/// Solves IK along the strokes, each pen-down solve seeded with the
/// previous solution. Every stroke is framed by pen-up hover poses above its
/// first and last points (on the surface for chains with a tool lift).
///
/// A stroke that cannot be followed from the current configuration is
/// retried from the aimed branch seeds: the approach is pen-up travel and
/// has no continuity requirement. The first failure is reported when no
/// seed works.
pub fn pathwise_ik(
    chain: &KinematicChain,
    strokes: &[Stroke],
    q_start: &DVector<f64>,
    params: &PlanParams,
) -> Result<JointTrajectory, KinematicsError> {
    params.validate()?;
    chain.check_limits(q_start)?;
    if strokes.iter().all(|s| s.poses.is_empty()) {
        return Err(KinematicsError::EmptyPath);
    }
    let lift = if chain.tool_lift { 0.0 } else { params.hover_height };
    let mut traj = JointTrajectory::default();
    let mut q = q_start.clone();
    let mut index = 0;
    for stroke in strokes.iter().filter(|s| !s.poses.is_empty()) {
        let approach = hover(&stroke.poses[0], lift);
        let mut first_err = None;
        let mut done = None;
        for seed in std::iter::once(q.clone()).chain(chain.branch_seeds(&approach.position)) {
            match follow_stroke(chain, stroke, &seed, index, lift, params) {
                Ok(w) => {
                    done = Some(w);
                    break;
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        let Some(waypoints) = done else {
            return Err(first_err.expect("at least one seed tried"));
        };
        for (w, pen) in waypoints {
            q = w.clone();
            traj.push(w, pen, stroke.tool);
        }
        index += stroke.poses.len();
    }
    Ok(traj)
}

/// Approach hover, pen-down poses and retreat hover for one stroke.
fn follow_stroke(
    chain: &KinematicChain,
    stroke: &Stroke,
    seed: &DVector<f64>,
    first_index: usize,
    lift: f64,
    params: &PlanParams,
) -> Result<Vec<(DVector<f64>, PenState)>, KinematicsError> {
    let solve = |target: &ToolPose, seed: &DVector<f64>, index: usize| {
        ik(chain, target, seed, &params.ik)?
            .solution()
            .cloned()
            .ok_or(KinematicsError::Unreachable { index })
    };
    let mut out = Vec::with_capacity(stroke.poses.len() + 2);
    let mut q = solve(&hover(&stroke.poses[0], lift), seed, first_index)?;
    out.push((q.clone(), PenState::Up));
    let mut prev: Option<DVector<f64>> = None;
    for (i, pose) in stroke.poses.iter().enumerate() {
        let index = first_index + i;
        q = solve(pose, &q, index)?;
        if let Some(p) = &prev {
            let deltas: Vec<f64> = (&q - p).iter().map(|d| d.abs()).collect();
            if deltas.iter().any(|&d| d >= params.jump_threshold) {
                return Err(KinematicsError::Discontinuity { index, deltas });
            }
        }
        prev = Some(q.clone());
        out.push((q.clone(), PenState::Down));
    }
    let last = stroke.poses.last().expect("non-empty stroke");
    q = solve(&hover(last, lift), &q, first_index + stroke.poses.len() - 1)?;
    out.push((q, PenState::Up));
    Ok(out)
}

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{KinematicChain, KinematicsError, ToolPose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkParams {
    /// mm
    pub position_tol: f64,
    /// rad, measured between pen axes
    pub orientation_tol: f64,
    pub damping: f64,
    pub max_iterations: usize,
    /// Largest joint change per iteration (rad).
    pub max_step: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            position_tol: 0.1,
            orientation_tol: 0.01,
            damping: 0.01,
            max_iterations: 200,
            max_step: 0.5,
        }
    }
}

impl IkParams {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.position_tol > 0.0 && self.orientation_tol > 0.0 && self.damping >= 0.0 && self.max_step > 0.0) {
            return Err(KinematicsError::InvalidParams(format!(
                "ik tolerances and step must be positive (position_tol {}, orientation_tol {}, damping {}, max_step {})",
                self.position_tol, self.orientation_tol, self.damping, self.max_step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IkOutcome {
    Solved {
        q: DVector<f64>,
        iterations: usize,
    },
    Unreachable {
        q_best: DVector<f64>,
        position_error: f64,
        orientation_error: f64,
    },
}

impl IkOutcome {
    pub fn solution(&self) -> Option<&DVector<f64>> {
        match self {
            IkOutcome::Solved { q, .. } => Some(q),
            IkOutcome::Unreachable { .. } => None,
        }
    }

    pub fn is_solved(&self) -> bool {
        matches!(self, IkOutcome::Solved { .. })
    }
}

struct Residual {
    task: DVector<f64>,
    position: f64,
    orientation: f64,
    pen_axis: Vector3<f64>,
}

impl Residual {
    fn norm(&self) -> f64 {
        self.task.norm()
    }
}

fn residual(chain: &KinematicChain, q: &[f64], target: &ToolPose) -> Residual {
    let pose = ToolPose::from_isometry(&chain.fk_iso(q));
    let dp = target.position - pose.position;
    let (z, zt) = (pose.pen_axis(), target.pen_axis());
    let angle = z.dot(&zt).clamp(-1.0, 1.0).acos();
    let rot = match z.cross(&zt).try_normalize(1e-15) {
        Some(axis) => axis * angle,
        // Antiparallel axes: any perpendicular rotation works.
        None if angle > 1.0 => z.cross(&Vector3::x()).try_normalize(1e-9).unwrap_or_else(Vector3::y) * angle,
        None => Vector3::zeros(),
    };
    Residual {
        task: DVector::from_iterator(6, dp.iter().chain(rot.iter()).copied()),
        position: dp.norm(),
        orientation: angle,
        pen_axis: z,
    }
}

/// Damped least-squares IK from `seed`.
///
/// Only the pen axis is constrained; rotation about it is left free. Steps
/// are clamped to the joint limits and halved while they increase the
/// residual.
pub fn ik(
    chain: &KinematicChain,
    target: &ToolPose,
    seed: &DVector<f64>,
    params: &IkParams,
) -> Result<IkOutcome, KinematicsError> {
    params.validate()?;
    if seed.len() != chain.dof() {
        return Err(KinematicsError::JointCount {
            expected: chain.dof(),
            got: seed.len(),
        });
    }
    let n = chain.dof();
    let mut q = chain.clamp(seed);
    let mut res = residual(chain, q.as_slice(), target);
    let lambda_sq = params.damping * params.damping;
    for iteration in 0..=params.max_iterations {
        if res.position < params.position_tol && res.orientation < params.orientation_tol {
            return Ok(IkOutcome::Solved { q, iterations: iteration });
        }
        if iteration == params.max_iterations {
            break;
        }
        let mut jac = chain.jacobian(&q);
        let z = res.pen_axis;
        let proj = Matrix3::identity() - z * z.transpose();
        let ang = proj * jac.rows(3, 3);
        jac.rows_mut(3, 3).copy_from(&ang);
        let jjt = &jac * jac.transpose() + DMatrix::identity(6, 6) * lambda_sq;
        let Some(y) = jjt.cholesky().map(|c| c.solve(&res.task)) else {
            break;
        };
        let mut dq = jac.transpose() * y;
        let largest = dq.amax();
        if largest > params.max_step {
            dq *= params.max_step / largest;
        }
        let mut improved = false;
        for _ in 0..8 {
            let cand = chain.clamp(&(&q + &dq));
            let cand_res = residual(chain, cand.as_slice(), target);
            if cand_res.norm() < res.norm() {
                q = cand;
                res = cand_res;
                improved = true;
                break;
            }
            dq *= 0.5;
        }
        if !improved {
            break;
        }
    }
    debug_assert_eq!(q.len(), n);
    Ok(IkOutcome::Unreachable {
        q_best: q,
        position_error: res.position,
        orientation_error: res.orientation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn down() -> nalgebra::UnitQuaternion<f64> {
        nalgebra::UnitQuaternion::from_euler_angles(PI, 0.0, 0.0)
    }

    #[test]
    fn fixed_point_needs_no_iterations() {
        let arm = KinematicChain::preset("ur5e-like").unwrap();
        let q0 = DVector::from_vec(vec![0.2, -1.3, 1.4, -1.6, -1.5, 0.3]);
        let target = arm.fk(&q0).unwrap();
        let out = ik(&arm, &target, &q0, &IkParams::default()).unwrap();
        assert_eq!(out, IkOutcome::Solved { q: q0, iterations: 0 });
    }

    #[test]
    fn outside_workspace_is_unreachable() {
        let arm = KinematicChain::planar(&[1.0, 1.0]).unwrap();
        let target = ToolPose::new(Point3::new(2.0 + 1e-2, 0.0, 0.0), down());
        let params = IkParams {
            position_tol: 1e-4,
            ..IkParams::default()
        };
        let out = ik(&arm, &target, &DVector::from_vec(vec![0.1, 0.5]), &params).unwrap();
        assert!(!out.is_solved());
    }

    #[test]
    fn planar_targets_converge() {
        let arm = KinematicChain::preset("planar-2r").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = IkParams::default();
        let mut solved = 0;
        for _ in 0..50 {
            let r = rng.random_range(60.0..540.0);
            let a = rng.random_range(-PI..PI);
            let target = ToolPose::new(Point3::new(r * a.cos(), r * a.sin(), 0.0), down());
            let seed = arm.aimed_seed(&target.position);
            if let IkOutcome::Solved { q, .. } = ik(&arm, &target, &seed, &params).unwrap() {
                let p = arm.fk(&q).unwrap().position;
                assert!((p - target.position).norm() < params.position_tol);
                solved += 1;
            }
        }
        assert!(solved >= 48, "{solved}");
    }

    #[test]
    fn six_axis_reaches_pen_down_targets() {
        let arm = KinematicChain::preset("ur5e-like").unwrap();
        let params = IkParams::default();
        for (x, y) in [(400.0, 0.0), (300.0, 250.0), (-200.0, 450.0), (500.0, -300.0)] {
            let target = ToolPose::new(Point3::new(x, y, 0.0), down());
            let out = ik(&arm, &target, &arm.aimed_seed(&target.position), &params).unwrap();
            let q = out.solution().expect("reachable");
            let pose = arm.fk(q).unwrap();
            assert!((pose.position - target.position).norm() < params.position_tol);
            assert!(pose.pen_angle_to(&target) < params.orientation_tol);
        }
    }

    #[test]
    fn bad_inputs_rejected() {
        let arm = KinematicChain::planar(&[1.0, 1.0]).unwrap();
        let target = ToolPose::new(Point3::new(1.0, 0.0, 0.0), down());
        let params = IkParams {
            position_tol: 0.0,
            ..IkParams::default()
        };
        assert!(matches!(ik(&arm, &target, &arm.home, &params), Err(KinematicsError::InvalidParams(_))));
        assert!(matches!(
            ik(&arm, &target, &DVector::zeros(3), &IkParams::default()),
            Err(KinematicsError::JointCount { .. })
        ));
    }
}

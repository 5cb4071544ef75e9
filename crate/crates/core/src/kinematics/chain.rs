use nalgebra::{DMatrix, DVector, Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::KinematicsError;

/// Central-difference step (rad) for the numerical Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-5;

/// End-effector pose in world coordinates (mm). The tool z axis is the pen
/// axis, pointing from the holder toward the paper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolPose {
    pub position: Point3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl ToolPose {
    pub fn new(position: Point3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation }
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self {
            position: Point3::from(iso.translation.vector),
            orientation: iso.rotation,
        }
    }

    pub fn pen_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::z()
    }

    /// Angle (rad) between the pen axes of two poses. Rotation about the pen
    /// axis is ignored.
    pub fn pen_angle_to(&self, other: &ToolPose) -> f64 {
        self.pen_axis().dot(&other.pen_axis()).clamp(-1.0, 1.0).acos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    /// Fixed transform from the previous link frame to this joint frame.
    pub origin: Isometry3<f64>,
    pub axis: Unit<Vector3<f64>>,
    pub limits: (f64, f64),
}

/// Serial chain of revolute joints.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    pub name: String,
    pub base_pose: Isometry3<f64>,
    pub joints: Vec<Joint>,
    /// Flange-to-pen-tip transform.
    pub tool: Isometry3<f64>,
    pub home: DVector<f64>,
    /// The tool raises the pen itself, so pen-up poses stay on the surface.
    pub tool_lift: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameSpec {
    pub xyz: [f64; 3],
    pub rpy: [f64; 3],
}

impl FrameSpec {
    fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::new(self.xyz[0], self.xyz[1], self.xyz[2]),
            UnitQuaternion::from_euler_angles(self.rpy[0], self.rpy[1], self.rpy[2]),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
    pub axis: [f64; 3],
    pub limits: [f64; 2],
}

/// On-disk chain description: per-joint offset, rotation and axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub name: String,
    #[serde(default)]
    pub base: FrameSpec,
    pub joints: Vec<JointSpec>,
    #[serde(default)]
    pub tool: FrameSpec,
    #[serde(default)]
    pub home: Option<Vec<f64>>,
    #[serde(default)]
    pub tool_lift: bool,
}

const PRESETS: &[(&str, &str)] = &[
    ("planar-2r", include_str!("../../presets/planar-2r.toml")),
    ("ur5e-like", include_str!("../../presets/ur5e-like.toml")),
];

/// Names of the bundled chain presets.
pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

impl KinematicChain {
    pub fn from_spec(spec: &ChainSpec) -> Result<Self, KinematicsError> {
        let mut joints = Vec::with_capacity(spec.joints.len());
        for (i, j) in spec.joints.iter().enumerate() {
            let axis = Vector3::from(j.axis);
            let axis = Unit::try_new(axis, 1e-12)
                .ok_or_else(|| KinematicsError::InvalidChain(format!("joint {i}: zero axis")))?;
            if !(j.limits[0] < j.limits[1]) {
                return Err(KinematicsError::InvalidChain(format!(
                    "joint {i}: limits [{}, {}] are not increasing",
                    j.limits[0], j.limits[1]
                )));
            }
            joints.push(Joint {
                origin: FrameSpec { xyz: j.xyz, rpy: j.rpy }.isometry(),
                axis,
                limits: (j.limits[0], j.limits[1]),
            });
        }
        let home = match &spec.home {
            Some(h) => DVector::from_vec(h.clone()),
            None => DVector::from_iterator(
                joints.len(),
                joints.iter().map(|j| 0.0_f64.clamp(j.limits.0, j.limits.1)),
            ),
        };
        let chain = Self {
            name: spec.name.clone(),
            base_pose: spec.base.isometry(),
            joints,
            tool: spec.tool.isometry(),
            home,
            tool_lift: spec.tool_lift,
        };
        chain.validate()?;
        Ok(chain)
    }

    pub fn from_toml(text: &str) -> Result<Self, KinematicsError> {
        let spec: ChainSpec = toml::from_str(text).map_err(|e| KinematicsError::Config(e.to_string()))?;
        Self::from_spec(&spec)
    }

    pub fn preset(name: &str) -> Result<Self, KinematicsError> {
        let text = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| KinematicsError::UnknownPreset(name.to_string()))?;
        Self::from_toml(text)
    }

    /// Planar arm in the world xy plane with links along x, joints about z,
    /// the pen pointing down (-z) and a tool-actuated pen lift. Home bends
    /// every joint after the first by 1 rad.
    pub fn planar(lengths: &[f64]) -> Result<Self, KinematicsError> {
        let pi = std::f64::consts::PI;
        let mut offset = 0.0;
        let joints = lengths
            .iter()
            .map(|&l| {
                let j = JointSpec {
                    xyz: [offset, 0.0, 0.0],
                    rpy: [0.0; 3],
                    axis: [0.0, 0.0, 1.0],
                    limits: [-pi, pi],
                };
                offset = l;
                j
            })
            .collect();
        Self::from_spec(&ChainSpec {
            name: "planar".into(),
            base: FrameSpec::default(),
            joints,
            tool: FrameSpec {
                xyz: [offset, 0.0, 0.0],
                rpy: [pi, 0.0, 0.0],
            },
            home: Some((0..lengths.len()).map(|i| if i == 0 { 0.0 } else { 1.0 }).collect()),
            tool_lift: true,
        })
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if self.joints.is_empty() {
            return Err(KinematicsError::InvalidChain("chain has no joints".into()));
        }
        for (i, j) in self.joints.iter().enumerate() {
            if !(j.limits.0 < j.limits.1) {
                return Err(KinematicsError::InvalidChain(format!(
                    "joint {i}: limits [{}, {}] are not increasing",
                    j.limits.0, j.limits.1
                )));
            }
        }
        self.check_limits(&self.home)
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn check_limits(&self, q: &DVector<f64>) -> Result<(), KinematicsError> {
        if q.len() != self.dof() {
            return Err(KinematicsError::JointCount {
                expected: self.dof(),
                got: q.len(),
            });
        }
        for (i, (j, &v)) in self.joints.iter().zip(q.iter()).enumerate() {
            if !(v >= j.limits.0 && v <= j.limits.1) {
                return Err(KinematicsError::OutOfLimits {
                    joint: i,
                    value: v,
                    min: j.limits.0,
                    max: j.limits.1,
                });
            }
        }
        Ok(())
    }

    pub fn clamp(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            q.len(),
            q.iter().zip(&self.joints).map(|(&v, j)| v.clamp(j.limits.0, j.limits.1)),
        )
    }

    /// Upper bound on the distance from the first joint to the pen tip.
    pub fn reach_bound(&self) -> f64 {
        self.joints.iter().skip(1).map(|j| j.origin.translation.vector.norm()).sum::<f64>()
            + self.tool.translation.vector.norm()
    }

    /// World position of the first joint.
    pub fn shoulder(&self) -> Point3<f64> {
        Point3::from((self.base_pose * self.joints[0].origin).translation.vector)
    }

    /// Home configuration with the first joint turned so the arm faces
    /// `target` about that joint's axis. A cheap IK seed for far targets.
    pub fn aimed_seed(&self, target: &Point3<f64>) -> DVector<f64> {
        self.aimed_seeds(target).swap_remove(0)
    }

    /// The aimed seed followed by its first-joint 2π alias (clamped to the
    /// limits), which helps near a limit seam.
    pub fn aimed_seeds(&self, target: &Point3<f64>) -> Vec<DVector<f64>> {
        self.aimed_seeds_from(&self.home, target)
    }

    /// Aimed seeds from home and from home with every joint after the
    /// first negated, which starts IK on the opposite elbow branch.
    pub fn branch_seeds(&self, target: &Point3<f64>) -> Vec<DVector<f64>> {
        let mut mirrored = self.home.clone();
        mirrored.iter_mut().skip(1).for_each(|v| *v = -*v);
        let mirrored = self.clamp(&mirrored);
        let mut seeds = self.aimed_seeds(target);
        for s in self.aimed_seeds_from(&mirrored, target) {
            if !seeds.contains(&s) {
                seeds.push(s);
            }
        }
        seeds
    }

    fn aimed_seeds_from(&self, base: &DVector<f64>, target: &Point3<f64>) -> Vec<DVector<f64>> {
        let first = self.base_pose * self.joints[0].origin;
        let axis = first.rotation * self.joints[0].axis.into_inner();
        let origin = first.translation.vector;
        let flat = |p: Vector3<f64>| {
            let d = p - origin;
            d - axis * axis.dot(&d)
        };
        let a = flat(self.fk_iso(base.as_slice()).translation.vector);
        let b = flat(target.coords);
        if a.norm() < 1e-9 || b.norm() < 1e-9 {
            return vec![base.clone()];
        }
        let turn = axis.dot(&a.cross(&b)).atan2(a.dot(&b));
        let (lo, hi) = self.joints[0].limits;
        let tau = std::f64::consts::TAU;
        let mut q0 = base[0] + turn;
        while q0 > hi && q0 - tau >= lo {
            q0 -= tau;
        }
        while q0 < lo && q0 + tau <= hi {
            q0 += tau;
        }
        let alias = if q0 - lo < hi - q0 { q0 + tau } else { q0 - tau };
        let mut seeds = Vec::with_capacity(2);
        for v in [q0, alias] {
            let mut seed = base.clone();
            seed[0] = v.clamp(lo, hi);
            if !seeds.contains(&seed) {
                seeds.push(seed);
            }
        }
        seeds
    }

    pub(crate) fn fk_iso(&self, q: &[f64]) -> Isometry3<f64> {
        let mut t = self.base_pose;
        for (j, &v) in self.joints.iter().zip(q) {
            t = t * j.origin * UnitQuaternion::from_axis_angle(&j.axis, v);
        }
        t * self.tool
    }

    pub fn fk(&self, q: &DVector<f64>) -> Result<ToolPose, KinematicsError> {
        self.check_limits(q)?;
        Ok(ToolPose::from_isometry(&self.fk_iso(q.as_slice())))
    }

    /// 6×n Jacobian by central differences: rows 0..3 are the pen-tip
    /// velocity, rows 3..6 the world-frame angular velocity.
    pub fn jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dof();
        let mut jac = DMatrix::zeros(6, n);
        let mut qp = q.as_slice().to_vec();
        let h = JACOBIAN_STEP;
        for i in 0..n {
            let v = qp[i];
            qp[i] = v + h;
            let plus = self.fk_iso(&qp);
            qp[i] = v - h;
            let minus = self.fk_iso(&qp);
            qp[i] = v;
            let dp = (plus.translation.vector - minus.translation.vector) / (2.0 * h);
            let dw = (plus.rotation * minus.rotation.inverse()).scaled_axis() / (2.0 * h);
            jac.fixed_view_mut::<3, 1>(0, i).copy_from(&dp);
            jac.fixed_view_mut::<3, 1>(3, i).copy_from(&dw);
        }
        jac
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix4;
    use std::f64::consts::PI;

    #[test]
    fn planar_fk_examples() {
        let arm = KinematicChain::planar(&[1.0, 1.0]).unwrap();
        let p = arm.fk(&DVector::from_vec(vec![0.0, 0.0])).unwrap().position;
        assert!((p - Point3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
        let p = arm.fk(&DVector::from_vec(vec![PI / 2.0, 0.0])).unwrap().position;
        assert!((p - Point3::new(0.0, 2.0, 0.0)).norm() < 1e-12);
        let pose = arm.fk(&DVector::from_vec(vec![0.3, -1.2])).unwrap();
        assert!((pose.pen_axis() + Vector3::z()).norm() < 1e-12);
    }

    #[test]
    fn fk_rejects_out_of_limit() {
        let arm = KinematicChain::planar(&[1.0, 1.0]).unwrap();
        let err = arm.fk(&DVector::from_vec(vec![4.0, 0.0])).unwrap_err();
        assert!(matches!(err, KinematicsError::OutOfLimits { joint: 0, .. }));
        assert!(matches!(
            arm.fk(&DVector::from_vec(vec![0.0])),
            Err(KinematicsError::JointCount { expected: 2, got: 1 })
        ));
    }

    fn homogeneous(xyz: [f64; 3], rpy: [f64; 3]) -> Matrix4<f64> {
        let (sr, cr) = rpy[0].sin_cos();
        let (sp, cp) = rpy[1].sin_cos();
        let (sy, cy) = rpy[2].sin_cos();
        // R = Rz(yaw) Ry(pitch) Rx(roll)
        Matrix4::new(
            cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr, xyz[0],
            sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr, xyz[1],
            -sp, cp * sr, cp * cr, xyz[2],
            0.0, 0.0, 0.0, 1.0,
        )
    }

    fn axis_rotation(axis: [f64; 3], angle: f64) -> Matrix4<f64> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let (x, y, z) = (axis[0] / n, axis[1] / n, axis[2] / n);
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Matrix4::new(
            t * x * x + c, t * x * y - s * z, t * x * z + s * y, 0.0,
            t * x * y + s * z, t * y * y + c, t * y * z - s * x, 0.0,
            t * x * z - s * y, t * y * z + s * x, t * z * z + c, 0.0,
            0.0, 0.0, 0.0, 1.0,
        )
    }

    #[test]
    fn fk_matches_matrix_chain() {
        let text = include_str!("../../presets/ur5e-like.toml");
        let spec: ChainSpec = toml::from_str(text).unwrap();
        let arm = KinematicChain::from_spec(&spec).unwrap();
        let qs = [
            vec![0.1, -1.0, 1.2, -0.4, 0.9, 2.0],
            vec![-2.0, -2.5, 0.3, 1.0, -1.5, -3.0],
            vec![0.0; 6],
        ];
        for q in qs {
            let mut m = homogeneous(spec.base.xyz, spec.base.rpy);
            for (j, &v) in spec.joints.iter().zip(&q) {
                m = m * homogeneous(j.xyz, j.rpy) * axis_rotation(j.axis, v);
            }
            m *= homogeneous(spec.tool.xyz, spec.tool.rpy);
            let pose = arm.fk(&DVector::from_vec(q)).unwrap();
            let got = pose.orientation.to_rotation_matrix();
            for r in 0..3 {
                assert!((m[(r, 3)] - pose.position[r]).abs() < 1e-9);
                for c in 0..3 {
                    assert!((m[(r, c)] - got[(r, c)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn jacobian_matches_geometric_form() {
        let arm = KinematicChain::preset("ur5e-like").unwrap();
        let q = DVector::from_vec(vec![0.4, -1.1, 1.3, -0.2, 0.7, -0.5]);
        let jac = arm.jacobian(&q);
        let tip = arm.fk_iso(q.as_slice()).translation.vector;
        let mut t = arm.base_pose;
        for (i, j) in arm.joints.iter().enumerate() {
            t = t * j.origin;
            let z = t.rotation * j.axis.into_inner();
            let o = t.translation.vector;
            let lin = z.cross(&(tip - o));
            for r in 0..3 {
                assert!((jac[(r, i)] - lin[r]).abs() < 1e-4, "linear {r},{i}");
                assert!((jac[(r + 3, i)] - z[r]).abs() < 1e-4, "angular {r},{i}");
            }
            t = t * UnitQuaternion::from_axis_angle(&j.axis, q[i]);
        }
    }

    #[test]
    fn presets_load() {
        for name in preset_names() {
            let arm = KinematicChain::preset(name).unwrap();
            arm.fk(&arm.home).unwrap();
        }
        assert!(matches!(KinematicChain::preset("nope"), Err(KinematicsError::UnknownPreset(_))));
    }

    #[test]
    fn invalid_chains_rejected() {
        let bad_limits = "name = \"x\"\n[[joints]]\naxis = [0, 0, 1]\nlimits = [1, -1]\n";
        assert!(matches!(KinematicChain::from_toml(bad_limits), Err(KinematicsError::InvalidChain(_))));
        let zero_axis = "name = \"x\"\n[[joints]]\naxis = [0, 0, 0]\nlimits = [-1, 1]\n";
        assert!(matches!(KinematicChain::from_toml(zero_axis), Err(KinematicsError::InvalidChain(_))));
        let empty = "name = \"x\"\njoints = []\n";
        assert!(matches!(KinematicChain::from_toml(empty), Err(KinematicsError::InvalidChain(_))));
        assert!(matches!(KinematicChain::from_toml("name = 3"), Err(KinematicsError::Config(_))));
    }
}

//! Serial-manipulator kinematics and inertia.
//!
//! A [`KinematicChain`] is an ordered list of single-DOF joints. Each joint
//! carries the rigid transform from its parent link frame to the joint frame
//! (`origin`), the joint axis in that frame, and the inertial triple of the
//! link it drives. The pose of link `i` is
//!
//! ```text
//! T_i = T_{i-1} * origin_i * motion_i(q_i)
//! ```
//!
//! where `motion_i` is a rotation about (revolute) or translation along
//! (prismatic) the joint axis, and `T_{-1}` is the chain's base frame.

mod chain_file;
mod inertia;
mod kinematics;

pub use chain_file::{ChainFile, InertiaEntry, JointEntry, TransformEntry};
pub use inertia::{effective_mass, joint_space_inertia, EffectiveMass, IMMOBILE_EPSILON};
pub use kinematics::{forward_kinematics, geometric_jacobian, translational_jacobian};

use nalgebra::{Isometry3, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Tolerance on ‖axis‖ and ‖u‖ deviating from one.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error("configuration has {got} joint values but the chain has {expected} joints")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("joint-space inertia matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("direction is not a unit vector (norm {0})")]
    NonUnitDirection(f64),
    #[error("cannot read chain file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse chain file: {0}")]
    Parse(#[from] toml::de::Error),
}

pub type Result<T, E = DynamicsError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

/// One joint together with the inertial parameters of the link it moves.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub kind: JointKind,
    /// Unit axis expressed in the joint frame (after `origin`).
    pub axis: Vector3<f64>,
    /// Parent link frame to joint frame.
    pub origin: Isometry3<f64>,
    /// kg
    pub link_mass: f64,
    /// Centre of mass in the link frame, m.
    pub link_com: Vector3<f64>,
    /// Inertia tensor about the COM, in link-frame axes, kg·m².
    pub link_inertia: Matrix3<f64>,
}

impl JointSpec {
    pub fn revolute(axis: Vector3<f64>, origin: Isometry3<f64>) -> Self {
        Self::new(JointKind::Revolute, axis, origin)
    }

    pub fn prismatic(axis: Vector3<f64>, origin: Isometry3<f64>) -> Self {
        Self::new(JointKind::Prismatic, axis, origin)
    }

    fn new(kind: JointKind, axis: Vector3<f64>, origin: Isometry3<f64>) -> Self {
        Self {
            kind,
            axis,
            origin,
            link_mass: 1.0,
            link_com: Vector3::zeros(),
            link_inertia: Matrix3::zeros(),
        }
    }

    pub fn with_link(mut self, mass: f64, com: Vector3<f64>, inertia: Matrix3<f64>) -> Self {
        self.link_mass = mass;
        self.link_com = com;
        self.link_inertia = inertia;
        self
    }

    fn validate(&self, index: usize) -> Result<()> {
        let norm = self.axis.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(DynamicsError::InvalidChain(format!(
                "joint {index}: axis norm {norm} is not 1"
            )));
        }
        if !(self.link_mass > 0.0 && self.link_mass.is_finite()) {
            return Err(DynamicsError::InvalidChain(format!(
                "joint {index}: link mass must be positive, got {}",
                self.link_mass
            )));
        }
        let inertia = &self.link_inertia;
        if inertia.iter().any(|v| !v.is_finite()) || self.link_com.iter().any(|v| !v.is_finite())
        {
            return Err(DynamicsError::InvalidChain(format!(
                "joint {index}: non-finite inertial parameters"
            )));
        }
        let asym = (inertia - inertia.transpose()).abs().max();
        if asym > 1e-9 * inertia.abs().max().max(1.0) {
            return Err(DynamicsError::InvalidChain(format!(
                "joint {index}: inertia tensor is not symmetric"
            )));
        }
        let min_eig = inertia.symmetric_eigenvalues().min();
        if min_eig < -1e-12 * inertia.abs().max().max(1.0) {
            return Err(DynamicsError::InvalidChain(format!(
                "joint {index}: inertia tensor is not positive semidefinite (eigenvalue {min_eig})"
            )));
        }
        Ok(())
    }
}

/// Validated serial chain. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    base: Isometry3<f64>,
    joints: Vec<JointSpec>,
}

impl KinematicChain {
    pub fn new(base: Isometry3<f64>, joints: Vec<JointSpec>) -> Result<Self> {
        if joints.is_empty() {
            return Err(DynamicsError::InvalidChain("chain has no joints".into()));
        }
        for (i, joint) in joints.iter().enumerate() {
            joint.validate(i)?;
        }
        Ok(Self { base, joints })
    }

    pub fn base(&self) -> &Isometry3<f64> {
        &self.base
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.joints.iter().map(|j| j.link_mass).sum()
    }

    /// Loads a chain from the TOML chain format (see `docs/formats.md`).
    pub fn from_toml_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ChainFile = toml::from_str(text)?;
        file.into_chain()
    }

    pub(crate) fn check_config(&self, q: &JointConfiguration) -> Result<()> {
        if q.len() != self.dof() {
            return Err(DynamicsError::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }
}

/// Joint positions: rad for revolute joints, m for prismatic joints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfiguration(Vec<f64>);

impl JointConfiguration {
    pub fn new(q: Vec<f64>) -> Self {
        Self(q)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for JointConfiguration {
    fn from(q: Vec<f64>) -> Self {
        Self(q)
    }
}

impl From<&[f64]> for JointConfiguration {
    fn from(q: &[f64]) -> Self {
        Self(q.to_vec())
    }
}

/// Unit impact direction in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction(Vector3<f64>);

impl Direction {
    pub fn new(u: Vector3<f64>) -> Result<Self> {
        let norm = u.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(DynamicsError::NonUnitDirection(norm));
        }
        Ok(Self(u))
    }

    /// Normalizes `u`; fails only for a zero or non-finite vector.
    pub fn normalized(u: Vector3<f64>) -> Result<Self> {
        let norm = u.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(DynamicsError::NonUnitDirection(norm));
        }
        Ok(Self(u / norm))
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }
}

impl std::ops::Neg for Direction {
    type Output = Direction;

    fn neg(self) -> Direction {
        Direction(-self.0)
    }
}

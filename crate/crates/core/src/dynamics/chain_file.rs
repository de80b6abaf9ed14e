use nalgebra::{Isometry3, Matrix3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{JointKind, JointSpec, KinematicChain, Result};

/// On-disk chain description (TOML).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub note: Option<String>,
    #[serde(default)]
    pub base: TransformEntry,
    pub joints: Vec<JointEntry>,
}

/// Translation plus roll-pitch-yaw (fixed-axis X, Y, Z) rotation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformEntry {
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointEntry {
    pub kind: JointKind,
    pub axis: [f64; 3],
    #[serde(default)]
    pub origin: TransformEntry,
    pub mass: f64,
    #[serde(default)]
    pub com: [f64; 3],
    #[serde(default)]
    pub inertia: InertiaEntry,
}

/// Six independent entries of a symmetric inertia tensor about the COM.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InertiaEntry {
    #[serde(default)]
    pub ixx: f64,
    #[serde(default)]
    pub iyy: f64,
    #[serde(default)]
    pub izz: f64,
    #[serde(default)]
    pub ixy: f64,
    #[serde(default)]
    pub ixz: f64,
    #[serde(default)]
    pub iyz: f64,
}

impl TransformEntry {
    pub fn to_isometry(&self) -> Isometry3<f64> {
        let [x, y, z] = self.xyz;
        let [roll, pitch, yaw] = self.rpy;
        Isometry3::from_parts(
            Translation3::new(x, y, z),
            UnitQuaternion::from_euler_angles(roll, pitch, yaw),
        )
    }
}

impl InertiaEntry {
    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.ixx, self.ixy, self.ixz, //
            self.ixy, self.iyy, self.iyz, //
            self.ixz, self.iyz, self.izz,
        )
    }
}

impl ChainFile {
    pub fn into_chain(self) -> Result<KinematicChain> {
        let joints = self
            .joints
            .iter()
            .map(|j| JointSpec {
                kind: j.kind,
                axis: Vector3::from(j.axis),
                origin: j.origin.to_isometry(),
                link_mass: j.mass,
                link_com: Vector3::from(j.com),
                link_inertia: j.inertia.to_matrix(),
            })
            .collect();
        KinematicChain::new(self.base.to_isometry(), joints)
    }
}

use nalgebra::{DMatrix, Point3};
use serde::{Deserialize, Serialize};

use super::kinematics::{angular_columns, frames_and_axes, linear_columns};
use super::{Direction, DynamicsError, JointConfiguration, KinematicChain, Result};

/// Below this value of uᵀΛ⁻¹u (1/kg) the chain is treated as unable to move
/// the point along u.
pub const IMMOBILE_EPSILON: f64 = 1e-9;

/// Effective (reflected) mass along a direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveMass {
    Finite(f64),
    /// The chain cannot move the point along the requested direction.
    Immobile,
}

impl EffectiveMass {
    /// kg; `f64::INFINITY` when immobile.
    pub fn kg(&self) -> f64 {
        match *self {
            EffectiveMass::Finite(m) => m,
            EffectiveMass::Immobile => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            EffectiveMass::Finite(m) => Some(m),
            EffectiveMass::Immobile => None,
        }
    }
}

/// Joint-space inertia matrix M(q) = Σᵢ (mᵢ Jᵥᵢᵀ Jᵥᵢ + Jωᵢᵀ Rᵢ Iᵢ Rᵢᵀ Jωᵢ),
/// with Jᵥᵢ taken at link i's centre of mass.
pub fn joint_space_inertia(chain: &KinematicChain, q: &JointConfiguration) -> Result<DMatrix<f64>> {
    let (frames, axes) = frames_and_axes(chain, q)?;
    let n = chain.dof();
    let mut mass = DMatrix::<f64>::zeros(n, n);
    for (i, (joint, frame)) in chain.joints().iter().zip(&frames).enumerate() {
        let com = frame * Point3::from(joint.link_com);
        let jv = linear_columns(&axes, i + 1, &com);
        let jw = angular_columns(&axes, i + 1);
        let rot = frame.rotation.to_rotation_matrix();
        let inertia_world = rot.matrix() * joint.link_inertia * rot.matrix().transpose();
        mass += jv.transpose() * &jv * joint.link_mass;
        mass += jw.transpose() * inertia_world * &jw;
    }
    let sym = (&mass + mass.transpose()) * 0.5;
    if sym.clone().cholesky().is_none() {
        return Err(DynamicsError::NotPositiveDefinite);
    }
    Ok(sym)
}

/// Effective mass at `point` (world frame, attached to the last link) along
/// `direction`: m_u = (uᵀ J M⁻¹ Jᵀ u)⁻¹ with J the translational Jacobian.
pub fn effective_mass(
    chain: &KinematicChain,
    q: &JointConfiguration,
    point: &Point3<f64>,
    direction: &Direction,
) -> Result<EffectiveMass> {
    let mass = joint_space_inertia(chain, q)?;
    let (_, axes) = frames_and_axes(chain, q)?;
    let jv = linear_columns(&axes, axes.len(), point);
    let chol = mass.cholesky().ok_or(DynamicsError::NotPositiveDefinite)?;
    let u = direction.vector();
    // Jᵀu is all that is needed: uᵀ J M⁻¹ Jᵀ u = (Jᵀu)ᵀ M⁻¹ (Jᵀu).
    let jtu = jv.transpose() * u;
    let inv_mass = jtu.dot(&chol.solve(&jtu));
    if inv_mass < IMMOBILE_EPSILON {
        Ok(EffectiveMass::Immobile)
    } else {
        Ok(EffectiveMass::Finite(1.0 / inv_mass))
    }
}

use nalgebra::{
    Dyn, Isometry3, Matrix3xX, OMatrix, Point3, Translation3, UnitQuaternion, Unit, Vector3, U6,
};

use super::{JointConfiguration, JointKind, KinematicChain, Result};

/// World-frame joint axis and pivot at a given configuration.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WorldAxis {
    pub kind: JointKind,
    pub axis: Vector3<f64>,
    pub pivot: Point3<f64>,
}

/// Link frames and joint axes for configuration `q`.
pub(crate) fn frames_and_axes(
    chain: &KinematicChain,
    q: &JointConfiguration,
) -> Result<(Vec<Isometry3<f64>>, Vec<WorldAxis>)> {
    chain.check_config(q)?;
    let mut frames = Vec::with_capacity(chain.dof());
    let mut axes = Vec::with_capacity(chain.dof());
    let mut parent = *chain.base();
    for (joint, &qi) in chain.joints().iter().zip(q.as_slice()) {
        let pre = parent * joint.origin;
        axes.push(WorldAxis {
            kind: joint.kind,
            axis: pre.rotation * joint.axis,
            pivot: Point3::from(pre.translation.vector),
        });
        let motion = match joint.kind {
            JointKind::Revolute => Isometry3::from_parts(
                Translation3::identity(),
                UnitQuaternion::from_axis_angle(&Unit::new_unchecked(joint.axis), qi),
            ),
            JointKind::Prismatic => Isometry3::from_parts(
                Translation3::from(joint.axis * qi),
                UnitQuaternion::identity(),
            ),
        };
        let frame = pre * motion;
        frames.push(frame);
        parent = frame;
    }
    Ok((frames, axes))
}

/// Pose of every link in world coordinates, in joint order.
pub fn forward_kinematics(
    chain: &KinematicChain,
    q: &JointConfiguration,
) -> Result<Vec<Isometry3<f64>>> {
    frames_and_axes(chain, q).map(|(frames, _)| frames)
}

/// 6×n Jacobian of a point rigidly attached to the last link. Rows 0–2 are
/// linear velocity, rows 3–5 angular velocity.
pub fn geometric_jacobian(
    chain: &KinematicChain,
    q: &JointConfiguration,
    point: &Point3<f64>,
) -> Result<OMatrix<f64, U6, Dyn>> {
    let (_, axes) = frames_and_axes(chain, q)?;
    let n = axes.len();
    let mut jac = OMatrix::<f64, U6, Dyn>::zeros(n);
    for (i, ax) in axes.iter().enumerate() {
        let (lin, ang) = column(ax, point);
        jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        jac.fixed_view_mut::<3, 1>(3, i).copy_from(&ang);
    }
    Ok(jac)
}

/// 3×n translational Jacobian of a point attached to the last link.
pub fn translational_jacobian(
    chain: &KinematicChain,
    q: &JointConfiguration,
    point: &Point3<f64>,
) -> Result<Matrix3xX<f64>> {
    let (_, axes) = frames_and_axes(chain, q)?;
    Ok(linear_columns(&axes, axes.len(), point))
}

pub(crate) fn column(ax: &WorldAxis, point: &Point3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    match ax.kind {
        JointKind::Revolute => (ax.axis.cross(&(point - ax.pivot)), ax.axis),
        JointKind::Prismatic => (ax.axis, Vector3::zeros()),
    }
}

/// Linear-velocity columns for a point on link `upto - 1`; later joints do not
/// move it and their columns stay zero.
pub(crate) fn linear_columns(axes: &[WorldAxis], upto: usize, point: &Point3<f64>) -> Matrix3xX<f64> {
    let mut jac = Matrix3xX::zeros(axes.len());
    for (i, ax) in axes.iter().take(upto).enumerate() {
        jac.set_column(i, &column(ax, point).0);
    }
    jac
}

pub(crate) fn angular_columns(axes: &[WorldAxis], upto: usize) -> Matrix3xX<f64> {
    let mut jac = Matrix3xX::zeros(axes.len());
    for (i, ax) in axes.iter().take(upto).enumerate() {
        jac.set_column(i, &column(ax, &ax.pivot).1);
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{JointSpec, DynamicsError};
    use nalgebra::{Matrix3, Vector6};
    use std::f64::consts::FRAC_PI_2;

    fn single(joint: JointSpec) -> KinematicChain {
        KinematicChain::new(Isometry3::identity(), vec![joint]).unwrap()
    }

    #[test]
    fn revolute_at_zero_is_identity() {
        let chain = single(JointSpec::revolute(Vector3::z(), Isometry3::identity()));
        let frames = forward_kinematics(&chain, &JointConfiguration::zeros(1)).unwrap();
        assert_eq!(frames[0], Isometry3::identity());
    }

    #[test]
    fn prismatic_translates_along_axis() {
        let chain = single(JointSpec::prismatic(Vector3::x(), Isometry3::identity()));
        let frames = forward_kinematics(&chain, &vec![0.5].into()).unwrap();
        assert_eq!(frames[0].translation.vector, Vector3::new(0.5, 0.0, 0.0));
        assert_eq!(frames[0].rotation, UnitQuaternion::identity());
    }

    #[test]
    fn planar_two_link_quarter_turn() {
        // Link 1 of length 1 along x, second joint at its tip.
        let j1 = JointSpec::revolute(Vector3::z(), Isometry3::identity());
        let j2 = JointSpec::revolute(Vector3::z(), Isometry3::translation(1.0, 0.0, 0.0));
        let chain = KinematicChain::new(Isometry3::identity(), vec![j1, j2]).unwrap();
        let frames = forward_kinematics(&chain, &vec![FRAC_PI_2, 0.0].into()).unwrap();
        let end = frames[1];
        // Hand composition: Rz(pi/2) * Tx(1) puts the second frame at (0, 1, 0).
        assert!((end.translation.vector - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
        let rot = end.rotation.to_rotation_matrix();
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((rot.matrix() - expected).abs().max() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let chain = single(JointSpec::revolute(Vector3::z(), Isometry3::identity()));
        let err = forward_kinematics(&chain, &vec![0.0, 1.0].into()).unwrap_err();
        assert!(matches!(err, DynamicsError::DimensionMismatch { expected: 1, got: 2 }));
    }

    #[test]
    fn prismatic_column() {
        let chain = single(JointSpec::prismatic(Vector3::x(), Isometry3::identity()));
        let jac = geometric_jacobian(&chain, &vec![0.2].into(), &Point3::new(0.3, 0.4, 0.0)).unwrap();
        assert_eq!(jac.column(0).into_owned(), Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn revolute_column_is_cross_product() {
        let r = 0.7;
        let chain = single(JointSpec::revolute(Vector3::z(), Isometry3::identity()));
        let jac = geometric_jacobian(&chain, &vec![0.0].into(), &Point3::new(r, 0.0, 0.0)).unwrap();
        assert_eq!(jac.column(0).into_owned(), Vector6::new(0.0, r, 0.0, 0.0, 0.0, 1.0));
    }
}

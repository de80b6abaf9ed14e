//! Oracles and generators shared by the integration tests. Nothing here calls
//! the library's Jacobian, inertia or effective-mass code.

#![allow(dead_code)]

use nalgebra::{DMatrix, Isometry3, Matrix3, Matrix3xX, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use pfl_core::dynamics::{forward_kinematics, JointConfiguration, JointSpec, KinematicChain};
use pfl_core::pfl::SkinModel;
use pfl_core::sim::{Detection, Oscillation, ReactionKind, ReactionModel, SimScenario};
use rand::Rng;

const FD_STEP: f64 = 1e-6;

pub fn unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.2 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_pose(rng: &mut impl Rng) -> Isometry3<f64> {
    let t = Vector3::new(
        rng.gen_range(-0.4..0.4),
        rng.gen_range(-0.4..0.4),
        rng.gen_range(0.0..0.5),
    );
    let r = UnitQuaternion::from_euler_angles(
        rng.gen_range(-3.0..3.0),
        rng.gen_range(-1.5..1.5),
        rng.gen_range(-3.0..3.0),
    );
    Isometry3::from_parts(Translation3::from(t), r)
}

/// Positive-definite inertia about the centre of mass.
fn random_inertia(rng: &mut impl Rng) -> Matrix3<f64> {
    let d = Matrix3::from_diagonal(&Vector3::new(
        rng.gen_range(0.01..0.2),
        rng.gen_range(0.01..0.2),
        rng.gen_range(0.01..0.2),
    ));
    let r = Rotation3::from_euler_angles(
        rng.gen_range(-3.0..3.0),
        rng.gen_range(-1.5..1.5),
        rng.gen_range(-3.0..3.0),
    );
    r.matrix() * d * r.matrix().transpose()
}

/// A chain of `dof` joints, mostly revolute, with random geometry and links.
pub fn random_chain(rng: &mut impl Rng, dof: usize) -> KinematicChain {
    let joints = (0..dof)
        .map(|_| {
            let axis = unit_vector(rng);
            let origin = random_pose(rng);
            let spec = if rng.gen_bool(0.8) {
                JointSpec::revolute(axis, origin)
            } else {
                JointSpec::prismatic(axis, origin)
            };
            spec.with_link(
                rng.gen_range(0.5..8.0),
                Vector3::new(
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                ),
                random_inertia(rng),
            )
        })
        .collect();
    KinematicChain::new(random_pose(rng), joints).expect("generated chain is valid")
}

pub fn random_config(rng: &mut impl Rng, dof: usize) -> JointConfiguration {
    (0..dof)
        .map(|_| rng.gen_range(-2.0..2.0))
        .collect::<Vec<f64>>()
        .into()
}

fn shifted(q: &JointConfiguration, j: usize, h: f64) -> JointConfiguration {
    let mut v = q.as_slice().to_vec();
    v[j] += h;
    v.into()
}

fn skew_to_vector(s: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (s[(2, 1)] - s[(1, 2)]),
        0.5 * (s[(0, 2)] - s[(2, 0)]),
        0.5 * (s[(1, 0)] - s[(0, 1)]),
    )
}

/// Central finite-difference Jacobians of link `link`: the linear velocity
/// of `local_point` (link coordinates) and the angular velocity, both in
/// world coordinates.
pub fn fd_link_jacobians(
    chain: &KinematicChain,
    q: &JointConfiguration,
    link: usize,
    local_point: &Point3<f64>,
) -> (Matrix3xX<f64>, Matrix3xX<f64>) {
    let n = chain.dof();
    let frame = forward_kinematics(chain, q).unwrap()[link];
    let rot = frame.rotation.to_rotation_matrix().into_inner();
    let mut jv = Matrix3xX::zeros(n);
    let mut jw = Matrix3xX::zeros(n);
    for j in 0..n {
        let plus = forward_kinematics(chain, &shifted(q, j, FD_STEP)).unwrap()[link];
        let minus = forward_kinematics(chain, &shifted(q, j, -FD_STEP)).unwrap()[link];
        let dp = (plus * local_point - minus * local_point) / (2.0 * FD_STEP);
        let dr = (plus.rotation.to_rotation_matrix().into_inner()
            - minus.rotation.to_rotation_matrix().into_inner())
            / (2.0 * FD_STEP);
        jv.set_column(j, &dp);
        jw.set_column(j, &skew_to_vector(&(dr * rot.transpose())));
    }
    (jv, jw)
}

/// Joint-space inertia from the kinetic energy of every link, using only
/// finite differences of forward kinematics.
pub fn kinetic_energy_inertia(chain: &KinematicChain, q: &JointConfiguration) -> DMatrix<f64> {
    let n = chain.dof();
    let frames = forward_kinematics(chain, q).unwrap();
    let mut m = DMatrix::zeros(n, n);
    for (i, joint) in chain.joints().iter().enumerate() {
        let com = Point3::from(joint.link_com);
        let (jv, jw) = fd_link_jacobians(chain, q, i, &com);
        let rot = frames[i].rotation.to_rotation_matrix().into_inner();
        let inertia = rot * joint.link_inertia * rot.transpose();
        for a in 0..n {
            for b in 0..n {
                m[(a, b)] += joint.link_mass * jv.column(a).dot(&jv.column(b))
                    + jw.column(a).dot(&(inertia * jw.column(b)));
            }
        }
    }
    m
}

/// Effective mass by applying a unit impulse along `u` at `point` (world
/// coordinates, attached to the last link) and measuring the resulting
/// velocity change of the point along `u`.
pub fn impulse_oracle_effective_mass(
    chain: &KinematicChain,
    q: &JointConfiguration,
    point: &Point3<f64>,
    u: &Vector3<f64>,
) -> f64 {
    let last = chain.dof() - 1;
    let frame = forward_kinematics(chain, q).unwrap()[last];
    let local = frame.inverse() * point;
    let (jp, _) = fd_link_jacobians(chain, q, last, &local);
    let m = kinetic_energy_inertia(chain, q);
    let generalized = jp.transpose() * u;
    let dq = m.lu().solve(&generalized).expect("inertia matrix is invertible");
    let dv = &jp * dq;
    1.0 / u.dot(&dv)
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Randomised scenario for one of the three reacting presets. The trigger
/// threshold is drawn below the free-contact peak so the reaction fires.
pub fn reaction_scenario(rng: &mut impl Rng, kind: ReactionKind) -> SimScenario {
    const K: f64 = 75_000.0;
    let mu = rng.gen_range(8.0..20.0);
    let v0 = rng.gen_range(0.25..0.5);
    let skin = if rng.gen_bool(0.5) {
        SkinModel::airskin_pad()
    } else {
        SkinModel::none()
    };
    let contact_stiffness = if skin.is_absent() {
        K
    } else {
        skin.spring_constant * K / (skin.spring_constant + K)
    };
    let free_peak = pfl_core::sim::simulate(&SimScenario::new(
        mu,
        v0,
        skin.clone(),
        K,
        ReactionModel::none(),
    ))
    .unwrap()
    .peak_force;
    let threshold = rng.gen_range(22.0..0.9 * free_peak);
    let detection = if skin.is_absent() {
        Detection::RobotForceThreshold(threshold)
    } else {
        Detection::SkinThresholdForce(threshold)
    };
    let deceleration = rng.gen_range(20.0..40.0);
    let reaction = match kind {
        ReactionKind::Retract => {
            ReactionModel::retract(detection, 0.0, deceleration, rng.gen_range(0.05..0.3))
        }
        ReactionKind::BrakeHold => {
            ReactionModel::brake_hold(detection, rng.gen_range(0.0..0.01), deceleration)
        }
        ReactionKind::BrakeOscillate => {
            let stiffness = rng.gen_range(0.3..1.0) * contact_stiffness;
            let frequency = (stiffness / mu).sqrt() / (2.0 * std::f64::consts::PI);
            ReactionModel::brake_oscillate(
                detection,
                rng.gen_range(0.0..0.01),
                deceleration,
                Oscillation {
                    frequency,
                    damping_ratio: rng.gen_range(0.03..0.1),
                },
            )
        }
        ReactionKind::None => ReactionModel::none(),
    };
    SimScenario::new(mu, v0, skin, K, reaction)
}

/// 1 kHz, 1 s trace: a half-sine impact from the 20 N onset up to `peak` at
/// 50 ms, settling to `clamp` (or dropping to zero) by 100 ms.
pub fn impact_trace(peak: f64, clamp: Option<f64>) -> pfl_core::trace::ForceTrace {
    let rest = clamp.unwrap_or(0.0);
    let samples = (0..1000)
        .map(|i| {
            let s = (std::f64::consts::PI * i as f64 / 100.0).sin();
            match i {
                0..=50 => 20.0 + (peak - 20.0) * s,
                51..=100 => rest + (peak - rest) * s,
                _ => rest,
            }
        })
        .collect();
    pfl_core::trace::ForceTrace::new(1000.0, samples).unwrap()
}

pub fn record(
    robot: &str,
    place: u8,
    velocity: f64,
    skin: pfl_core::report::SkinSetting,
    safety: &str,
    repetition: u32,
    trace: pfl_core::trace::ForceTrace,
) -> pfl_core::report::MeasurementRecord {
    pfl_core::report::MeasurementRecord {
        robot: robot.into(),
        place,
        direction: [0.0, 0.0, -1.0],
        contact_kind: pfl_core::report::contact_kind_of_place(place).unwrap(),
        velocity,
        skin,
        safety: safety.into(),
        repetition,
        trace,
    }
}

pub const TRANSIENT_GRID: [f64; 9] = [0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.6, 0.7];
pub const QUASI_STATIC_GRID: [f64; 7] = [0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5];

/// Transient impacts at places 3 and 4 where every passive-skin peak is 60 %
/// of the matching no-skin peak.
pub fn passive_skin_fixture() -> Vec<pfl_core::report::MeasurementRecord> {
    use pfl_core::report::SkinSetting;
    let mut out = Vec::new();
    for place in [3u8, 4] {
        for &v in &TRANSIENT_GRID {
            for rep in 1..=3u32 {
                let bare = 60.0 + 250.0 * v + 5.0 * place as f64 + 3.0 * rep as f64;
                out.push(record("ur10e", place, v, SkinSetting::None, "pre4", rep, impact_trace(bare, None)));
                out.push(record(
                    "ur10e",
                    place,
                    v,
                    SkinSetting::Passive,
                    "pre4",
                    rep,
                    impact_trace(0.6 * bare, None),
                ));
            }
        }
    }
    out
}

/// Quasi-static impacts at place 0 for three setups:
/// * no skin: peaks cross 280 N between 0.30 and 0.35 m/s, no clamping;
/// * passive: already 300 N at 0.20 m/s, no clamping;
/// * active E-stop: always compliant, clamped at 100 N.
pub fn safe_velocity_fixture() -> Vec<pfl_core::report::MeasurementRecord> {
    use pfl_core::report::SkinSetting;
    let mut out = Vec::new();
    for &v in &QUASI_STATIC_GRID {
        for rep in 1..=3u32 {
            let crossing = 150.0 + 1000.0 * (v - 0.2) + rep as f64;
            out.push(record("ur10e", 0, v, SkinSetting::None, "pre4", rep, impact_trace(crossing, None)));
            out.push(record(
                "ur10e",
                0,
                v,
                SkinSetting::Passive,
                "pre4",
                rep,
                impact_trace(300.0 + 100.0 * v, None),
            ));
            out.push(record(
                "ur10e",
                0,
                v,
                SkinSetting::Active("E-stop".into()),
                "pre4",
                rep,
                impact_trace(120.0 + 100.0 * v, Some(100.0)),
            ));
        }
    }
    out
}

//! One-dimensional collision simulator.
//!
//! A point mass `mu` (the reduced mass of the collision) moves at `v0` into a
//! cover spring `k_s` in series with a body spring `k`. While the cover is
//! compressing the pair acts as one spring of stiffness `k_s·k/(k_s + k)`;
//! once the cover is flattened (compression `d_s`) only the body spring
//! stiffens further. Contact is unilateral.
//!
//! Integration uses fixed-step semi-implicit Euler. Output is resampled to
//! the measuring device's rate and starts at the first step whose force
//! reaches the onset threshold, like a real recording.

use serde::{Deserialize, Serialize};

use crate::pfl::SkinModel;
use crate::trace::{ForceTrace, TraceError};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(
        "integration unstable: energy drifted by {drift:.3e} (relative) in an undamped run; reduce the timestep"
    )]
    Unstable { drift: f64 },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{0}")]
    Config(String),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

/// Largest relative energy change tolerated in an undamped run.
pub const ENERGY_DRIFT_LIMIT: f64 = 1e-3;

/// μ₀ = F_f / F_N.
pub fn static_friction_coefficient(friction_force: f64, normal_force: f64) -> Result<f64> {
    if !(normal_force > 0.0 && normal_force.is_finite()) {
        return Err(SimError::Invalid(format!(
            "normal force must be positive, got {normal_force}"
        )));
    }
    if !(friction_force >= 0.0 && friction_force.is_finite()) {
        return Err(SimError::Invalid(format!(
            "friction force must be >= 0, got {friction_force}"
        )));
    }
    Ok(friction_force / normal_force)
}

/// Measured rig friction: the force needed to start the struck mass moving
/// and the normal force on its slides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Friction {
    pub force: f64,
    pub normal_force: f64,
}

impl Friction {
    pub fn coefficient(&self) -> Result<f64> {
        static_friction_coefficient(self.force, self.normal_force)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionKind {
    None,
    Retract,
    BrakeHold,
    BrakeOscillate,
}

/// What triggers the reaction. Both compare the contact force, which is the
/// same through the cover and the body in series; a cover trigger never
/// fires when no cover is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    SkinThresholdForce(f64),
    RobotForceThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Oscillation {
    /// Hz
    pub frequency: f64,
    pub damping_ratio: f64,
}

/// Observable stop behaviour of a robot after it detects a collision.
///
/// * `retract` – after the delay, velocity ramps to `-retract_speed` at
///   `deceleration`.
/// * `brake_hold` – after the delay, decelerate to rest and hold position.
/// * `brake_oscillate` – as `brake_hold`, then the held position becomes the
///   anchor of a compliant spring–damper controller with the given natural
///   frequency and damping ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionModel {
    pub kind: ReactionKind,
    #[serde(default = "default_detection")]
    pub detection: Detection,
    #[serde(default)]
    pub reaction_delay: f64,
    #[serde(default)]
    pub deceleration: f64,
    #[serde(default)]
    pub retract_speed: f64,
    #[serde(default)]
    pub oscillation: Option<Oscillation>,
}

fn default_detection() -> Detection {
    Detection::RobotForceThreshold(50.0)
}

impl ReactionModel {
    pub fn none() -> Self {
        Self {
            kind: ReactionKind::None,
            detection: default_detection(),
            reaction_delay: 0.0,
            deceleration: 0.0,
            retract_speed: 0.0,
            oscillation: None,
        }
    }

    pub fn retract(detection: Detection, delay: f64, deceleration: f64, retract_speed: f64) -> Self {
        Self {
            kind: ReactionKind::Retract,
            detection,
            reaction_delay: delay,
            deceleration,
            retract_speed,
            oscillation: None,
        }
    }

    pub fn brake_hold(detection: Detection, delay: f64, deceleration: f64) -> Self {
        Self {
            kind: ReactionKind::BrakeHold,
            detection,
            reaction_delay: delay,
            deceleration,
            retract_speed: 0.0,
            oscillation: None,
        }
    }

    pub fn brake_oscillate(
        detection: Detection,
        delay: f64,
        deceleration: f64,
        oscillation: Oscillation,
    ) -> Self {
        Self {
            kind: ReactionKind::BrakeOscillate,
            detection,
            reaction_delay: delay,
            deceleration,
            retract_speed: 0.0,
            oscillation: Some(oscillation),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::Invalid(m));
        if !(self.reaction_delay >= 0.0 && self.reaction_delay.is_finite()) {
            return bad(format!("reaction delay must be >= 0, got {}", self.reaction_delay));
        }
        let threshold = match self.detection {
            Detection::SkinThresholdForce(f) | Detection::RobotForceThreshold(f) => f,
        };
        if !(threshold >= 0.0 && threshold.is_finite()) {
            return bad(format!("detection threshold must be >= 0, got {threshold}"));
        }
        if self.kind != ReactionKind::None && !(self.deceleration > 0.0) {
            return bad(format!("deceleration must be positive, got {}", self.deceleration));
        }
        if self.kind == ReactionKind::Retract && !(self.retract_speed >= 0.0) {
            return bad(format!("retract speed must be >= 0, got {}", self.retract_speed));
        }
        if self.kind == ReactionKind::BrakeOscillate {
            match self.oscillation {
                Some(o) if o.frequency > 0.0 && o.damping_ratio > 0.0 && o.damping_ratio < 1.0 => {}
                Some(o) => {
                    return bad(format!(
                        "oscillation needs frequency > 0 and damping ratio in (0, 1), got {} Hz / {}",
                        o.frequency, o.damping_ratio
                    ))
                }
                None => return bad("brake_oscillate needs an oscillation block".into()),
            }
        }
        Ok(())
    }
}

impl Default for ReactionModel {
    fn default() -> Self {
        Self::none()
    }
}

fn default_timestep() -> f64 {
    1e-5
}
fn default_max_time() -> f64 {
    ForceTrace::DEFAULT_DURATION_CAP
}
fn default_output_rate() -> f64 {
    1000.0
}
fn default_onset() -> f64 {
    ForceTrace::DEFAULT_ONSET_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScenario {
    /// Reduced mass, kg.
    pub mu: f64,
    /// Approach velocity at first contact, m/s.
    pub v0: f64,
    #[serde(default)]
    pub skin: SkinModel,
    /// Body spring constant k, N/m.
    pub body_stiffness: f64,
    #[serde(default)]
    pub reaction: ReactionModel,
    #[serde(default)]
    pub friction: Option<Friction>,
    /// Integration step, s.
    #[serde(default = "default_timestep")]
    pub timestep: f64,
    /// Recording length after onset (and the longest wait for an onset), s.
    #[serde(default = "default_max_time")]
    pub max_time: f64,
    /// Output sample rate, Hz.
    #[serde(default = "default_output_rate")]
    pub output_rate: f64,
    /// Force at which recording starts, N.
    #[serde(default = "default_onset")]
    pub onset_threshold: f64,
}

impl SimScenario {
    pub fn new(mu: f64, v0: f64, skin: SkinModel, body_stiffness: f64, reaction: ReactionModel) -> Self {
        Self {
            mu,
            v0,
            skin,
            body_stiffness,
            reaction,
            friction: None,
            timestep: default_timestep(),
            max_time: default_max_time(),
            output_rate: default_output_rate(),
            onset_threshold: default_onset(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: SimScenario = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SimError::Invalid(format!("{what} must be positive, got {v}")))
            }
        };
        positive("mu", self.mu)?;
        positive("body stiffness", self.body_stiffness)?;
        positive("timestep", self.timestep)?;
        positive("max_time", self.max_time)?;
        positive("output rate", self.output_rate)?;
        if !(self.v0 >= 0.0 && self.v0.is_finite()) {
            return Err(SimError::Invalid(format!("v0 must be >= 0, got {}", self.v0)));
        }
        if !(self.onset_threshold >= 0.0) {
            return Err(SimError::Invalid("onset threshold must be >= 0".into()));
        }
        self.skin
            .validate()
            .map_err(|e| SimError::Invalid(e.to_string()))?;
        self.reaction.validate()?;
        if let Some(f) = self.friction {
            f.coefficient()?;
        }
        self.steps_per_sample()?;
        Ok(())
    }

    fn steps_per_sample(&self) -> Result<usize> {
        let ratio = 1.0 / (self.output_rate * self.timestep);
        let rounded = ratio.round();
        if rounded < 1.0 || (ratio - rounded).abs() > 1e-6 * rounded {
            return Err(SimError::Invalid(format!(
                "timestep {} s does not divide the output period {} s",
                self.timestep,
                1.0 / self.output_rate
            )));
        }
        Ok(rounded as usize)
    }

    fn is_undamped(&self) -> bool {
        self.reaction.kind == ReactionKind::None && self.friction.map_or(true, |f| f.force == 0.0)
    }
}

/// Unilateral series cover/body spring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactSpring {
    body: f64,
    skin: f64,
    thickness: f64,
    series: f64,
    /// Total compression at which the cover is flat.
    flat_at: f64,
    /// Force at which the cover is flat.
    flat_force: f64,
}

impl ContactSpring {
    pub fn new(body_stiffness: f64, skin: &SkinModel) -> Self {
        let (k, ks, ds) = (body_stiffness, skin.spring_constant, skin.compressible_thickness);
        let series = ks * k / (ks + k);
        let flat_force = ks * ds;
        Self {
            body: k,
            skin: ks,
            thickness: ds,
            series,
            flat_at: ds + flat_force / k,
            flat_force,
        }
    }

    /// Force at total compression `delta`, N.
    pub fn force(&self, delta: f64) -> f64 {
        if delta <= 0.0 {
            0.0
        } else if delta < self.flat_at {
            self.series * delta
        } else {
            self.flat_force + self.body * (delta - self.flat_at)
        }
    }

    /// Energy stored in both springs at compression `delta`, J.
    pub fn energy(&self, delta: f64) -> f64 {
        if delta <= 0.0 {
            0.0
        } else if delta < self.flat_at {
            0.5 * self.series * delta * delta
        } else {
            let extra = delta - self.flat_at;
            0.5 * self.flat_force * self.flat_at + self.flat_force * extra + 0.5 * self.body * extra * extra
        }
    }

    /// Cover compression at total compression `delta`, m.
    pub fn skin_compression(&self, delta: f64) -> f64 {
        if delta <= 0.0 {
            0.0
        } else if delta >= self.flat_at {
            self.thickness
        } else if self.skin > 0.0 {
            self.series * delta / self.skin
        } else {
            delta
        }
    }
}

/// Simulator state at one output sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSample {
    /// Time since first contact, s.
    pub time: f64,
    /// Total compression of the spring stack (negative when separated), m.
    pub position: f64,
    pub velocity: f64,
    pub skin_compression: f64,
    pub force: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    /// Recording from onset; empty when the onset threshold is never reached.
    pub trace: ForceTrace,
    /// State at the output rate, from first contact.
    pub log: Vec<StateSample>,
    /// Time from first contact to the recording onset.
    pub onset_time: Option<f64>,
    pub detection_time: Option<f64>,
    /// Largest force at integration resolution.
    pub peak_force: f64,
    /// ∫F dt from first contact until the velocity first reaches zero.
    pub impulse_to_rest: Option<f64>,
    /// Largest relative energy deviation; only for undamped runs.
    pub energy_drift: Option<f64>,
    /// Contact force while held (`brake_hold`).
    pub hold_force: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Free,
    Braking,
    Holding { anchor: f64 },
    Compliant { anchor: f64 },
    Retracting,
}

/// Runs one scenario. Deterministic for fixed inputs.
pub fn simulate(scenario: &SimScenario) -> Result<SimOutput> {
    scenario.validate()?;
    let ratio = scenario.steps_per_sample()?;
    let dt = scenario.timestep;
    let mu = scenario.mu;
    let spring = ContactSpring::new(scenario.body_stiffness, &scenario.skin);
    let reaction = &scenario.reaction;
    let friction = scenario.friction.map_or(0.0, |f| f.force);
    let record_len = (scenario.max_time * scenario.output_rate).round() as usize;
    let wait_steps = (scenario.max_time / dt).ceil() as usize;
    let undamped = scenario.is_undamped();

    let detection_threshold = match reaction.detection {
        Detection::SkinThresholdForce(f) if !scenario.skin.is_absent() => Some(f),
        Detection::SkinThresholdForce(_) => None,
        Detection::RobotForceThreshold(f) => Some(f),
    };
    let (stiffness_c, damping_c) = match reaction.oscillation {
        Some(o) if reaction.kind == ReactionKind::BrakeOscillate => {
            let omega = 2.0 * std::f64::consts::PI * o.frequency;
            (mu * omega * omega, 2.0 * o.damping_ratio * mu * omega)
        }
        _ => (0.0, 0.0),
    };

    let mut x = 0.0_f64;
    let mut v = scenario.v0;
    let mut phase = Phase::Free;
    let mut samples = Vec::with_capacity(record_len);
    let mut log = Vec::new();
    let mut onset_step: Option<usize> = None;
    let mut detection_step: Option<usize> = None;
    let react_steps = (reaction.reaction_delay / dt).round() as usize;
    let mut peak_force = 0.0_f64;
    let mut impulse = 0.0;
    let mut impulse_to_rest = None;
    let e0 = 0.5 * mu * v * v;
    let mut max_drift = 0.0_f64;
    let mut hold_force = None;

    if scenario.v0 == 0.0 {
        return Ok(SimOutput {
            trace: empty_trace(scenario)?,
            log,
            onset_time: None,
            detection_time: None,
            peak_force: 0.0,
            impulse_to_rest: Some(0.0),
            energy_drift: undamped.then_some(0.0),
            hold_force: None,
        });
    }

    let mut step = 0usize;
    loop {
        let force = spring.force(x);
        peak_force = peak_force.max(force);

        if step % ratio == 0 {
            log.push(StateSample {
                time: step as f64 * dt,
                position: x,
                velocity: v,
                skin_compression: spring.skin_compression(x),
                force,
            });
        }
        if onset_step.is_none() && force >= scenario.onset_threshold && force > 0.0 {
            onset_step = Some(step);
        }
        match onset_step {
            Some(s0) => {
                if (step - s0) % ratio == 0 {
                    samples.push(force);
                    if samples.len() >= record_len {
                        break;
                    }
                }
            }
            None if step >= wait_steps => break,
            None => {}
        }

        if reaction.kind != ReactionKind::None && detection_step.is_none() {
            if let Some(th) = detection_threshold {
                if force >= th && force > 0.0 {
                    detection_step = Some(step);
                }
            }
        }
        if phase == Phase::Free {
            if let Some(d) = detection_step {
                if step >= d + react_steps {
                    phase = match reaction.kind {
                        ReactionKind::Retract => Phase::Retracting,
                        ReactionKind::BrakeHold | ReactionKind::BrakeOscillate => Phase::Braking,
                        ReactionKind::None => Phase::Free,
                    };
                }
            }
        }

        let v_before = v;
        match phase {
            Phase::Free => {
                let drag = if v != 0.0 { friction * v.signum() } else { 0.0 };
                v += (-force - drag) / mu * dt;
                x += v * dt;
            }
            Phase::Compliant { anchor } => {
                let drag = if v != 0.0 { friction * v.signum() } else { 0.0 };
                let control = -stiffness_c * (x - anchor) - damping_c * v;
                v += (-force - drag + control) / mu * dt;
                x += v * dt;
            }
            Phase::Braking => {
                let dv = reaction.deceleration * dt;
                v = if v > 0.0 { (v - dv).max(0.0) } else { (v + dv).min(0.0) };
                x += v * dt;
                if v == 0.0 {
                    phase = if reaction.kind == ReactionKind::BrakeOscillate {
                        Phase::Compliant { anchor: x }
                    } else {
                        hold_force = Some(spring.force(x));
                        Phase::Holding { anchor: x }
                    };
                }
            }
            Phase::Holding { anchor } => {
                v = 0.0;
                x = anchor;
            }
            Phase::Retracting => {
                let target = -reaction.retract_speed;
                let dv = reaction.deceleration * dt;
                v = if v > target { (v - dv).max(target) } else { (v + dv).min(target) };
                x += v * dt;
            }
        }

        if impulse_to_rest.is_none() {
            impulse += force * dt;
            if v_before > 0.0 && v <= 0.0 {
                impulse_to_rest = Some(impulse);
            }
        }
        if undamped {
            let e = 0.5 * mu * v * v + spring.energy(x);
            let drift = (e - e0).abs() / e0;
            max_drift = max_drift.max(drift);
            if drift > ENERGY_DRIFT_LIMIT {
                return Err(SimError::Unstable { drift });
            }
        }
        step += 1;
    }

    let trace = if samples.is_empty() {
        empty_trace(scenario)?
    } else {
        ForceTrace::with_settings(
            scenario.output_rate,
            samples,
            scenario.onset_threshold,
            scenario.max_time,
        )?
    };
    Ok(SimOutput {
        trace,
        log,
        onset_time: onset_step.map(|s| s as f64 * dt),
        detection_time: detection_step.map(|s| s as f64 * dt),
        peak_force,
        impulse_to_rest,
        energy_drift: undamped.then_some(max_drift),
        hold_force,
    })
}

fn empty_trace(scenario: &SimScenario) -> Result<ForceTrace> {
    Ok(ForceTrace::with_settings(
        scenario.output_rate,
        Vec::new(),
        scenario.onset_threshold,
        scenario.max_time,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare(mu: f64, v0: f64) -> SimScenario {
        SimScenario::new(mu, v0, SkinModel::none(), 75_000.0, ReactionModel::none())
    }

    #[test]
    fn friction_coefficient() {
        assert!((static_friction_coefficient(3.2, 52.0).unwrap() - 0.062).abs() <= 0.001);
        assert_eq!(static_friction_coefficient(0.0, 52.0).unwrap(), 0.0);
        assert!((static_friction_coefficient(5.0, 50.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(static_friction_coefficient(1.0, 0.0).is_err());
    }

    #[test]
    fn spring_law_is_continuous_and_energy_consistent() {
        let s = ContactSpring::new(75_000.0, &SkinModel::airskin_pad());
        let eps = 1e-12;
        assert!((s.force(s.flat_at - eps) - s.force(s.flat_at + eps)).abs() < 1e-6);
        assert!((s.force(s.flat_at) - 48.0).abs() < 1e-9);
        // Energy at full compression = skin energy + body energy at 48 N.
        let expected = 0.5 * 3000.0 * 0.016f64.powi(2) + 48.0f64.powi(2) / (2.0 * 75_000.0);
        assert!((s.energy(s.flat_at) - expected).abs() < 1e-12);
        // dE/dx = F
        for &d in &[0.001, 0.01, 0.02, 0.03] {
            let h = 1e-7;
            let de = (s.energy(d + h) - s.energy(d - h)) / (2.0 * h);
            assert!((de - s.force(d)).abs() < 1e-4 * s.force(d).max(1.0));
        }
        assert_eq!(s.force(-0.01), 0.0);
        assert_eq!(s.skin_compression(1.0), 0.016);
    }

    #[test]
    fn bare_peak_matches_closed_form() {
        let out = simulate(&bare(15.0, 0.3)).unwrap();
        let expected = 0.3 * (75_000.0_f64 * 15.0).sqrt();
        assert!((out.peak_force - expected).abs() / expected < 0.005);
        let (trace_peak, _) = crate::trace::peak(&out.trace).unwrap();
        assert!((trace_peak - expected).abs() / expected < 0.005);
        assert!(out.energy_drift.unwrap() < ENERGY_DRIFT_LIMIT);
    }

    #[test]
    fn slow_impact_stays_in_cover() {
        let mut s = bare(15.0, 0.15);
        s.skin = SkinModel::airskin_pad();
        s.onset_threshold = 5.0;
        let out = simulate(&s).unwrap();
        assert!(out.peak_force <= 3000.0 * 0.016);
        assert!(out.log.iter().all(|st| st.skin_compression < 0.016));
    }

    #[test]
    fn zero_velocity_is_empty_contact() {
        let out = simulate(&bare(15.0, 0.0)).unwrap();
        assert!(out.trace.is_empty());
        assert_eq!(out.peak_force, 0.0);
    }

    #[test]
    fn rejects_bad_scenarios() {
        let mut s = bare(15.0, 0.3);
        s.timestep = 3e-5;
        assert!(matches!(simulate(&s), Err(SimError::Invalid(_))));
        let mut s = bare(0.0, 0.3);
        s.mu = 0.0;
        assert!(simulate(&s).is_err());
        let mut s = bare(15.0, 0.3);
        s.reaction = ReactionModel::brake_hold(Detection::RobotForceThreshold(30.0), -1.0, 5.0);
        assert!(simulate(&s).is_err());
        s.reaction = ReactionModel {
            kind: ReactionKind::BrakeOscillate,
            oscillation: None,
            ..ReactionModel::brake_hold(Detection::RobotForceThreshold(30.0), 0.0, 5.0)
        };
        assert!(simulate(&s).is_err());
    }

    #[test]
    fn coarse_step_is_flagged_unstable() {
        let mut s = bare(0.5, 0.3);
        s.timestep = 1e-3;
        assert!(matches!(simulate(&s), Err(SimError::Unstable { .. })));
    }

    #[test]
    fn scenario_file_round_trip() {
        let text = r#"
mu = 10.0
v0 = 0.4
body_stiffness = 75000.0

[skin]
spring_constant = 3000.0
compressible_thickness = 0.016

[reaction]
kind = "brake_oscillate"
detection = { robot_force_threshold = 40.0 }
reaction_delay = 0.005
deceleration = 20.0
oscillation = { frequency = 6.0, damping_ratio = 0.08 }

[friction]
force = 3.2
normal_force = 52.0
"#;
        let s = SimScenario::from_toml_str(text).unwrap();
        assert_eq!(s.timestep, 1e-5);
        assert_eq!(s.reaction.kind, ReactionKind::BrakeOscillate);
        assert!((s.friction.unwrap().coefficient().unwrap() - 0.0615).abs() < 1e-3);
        assert!(SimScenario::from_toml_str("mu = 1.0").is_err());
    }
}

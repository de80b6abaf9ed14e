//! Two-body spring model of a robot–human collision, with the soft-cover
//! extension.
//!
//! The robot (effective mass `m_R`) hits a body region modelled as a linear
//! spring `k`. Without a cover all kinetic energy `μv²/2` ends up in the body
//! spring, giving `v ≤ F/√(kμ)`. A cover of stiffness `k_s` and compressible
//! thickness `d_s` absorbs an extra `d_s²k_s/2`, which raises the permissible
//! velocity to `√(F²/(kμ) + d_s²k_s/μ)`. Solving the same balance for `F`
//! yields the force prediction; below `v² = d_s²k_s/μ` it has no real
//! solution and the model offers no prediction.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, Direction, DynamicsError, JointConfiguration, KinematicChain};

#[derive(Debug, thiserror::Error)]
pub enum PflError {
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("robot cannot move the contact point along the impact direction")]
    ImmobileRobot,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
}

pub type Result<T, E = PflError> = std::result::Result<T, E>;

fn positive(what: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(PflError::NonPositive { what, value })
    }
}

fn non_negative(what: &str, value: f64) -> Result<f64> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(PflError::Invalid(format!("{what} must be >= 0, got {value}")))
    }
}

/// Mass of the struck body part. `Constrained` means the part cannot recoil
/// (m_H⁻¹ = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HumanMass {
    Kg(f64),
    Constrained(ConstrainedTag),
}

/// Serialized as the string `"constrained"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstrainedTag {
    Constrained,
}

impl HumanMass {
    pub const CONSTRAINED: HumanMass = HumanMass::Constrained(ConstrainedTag::Constrained);

    pub fn kg(&self) -> Option<f64> {
        match *self {
            HumanMass::Kg(m) => Some(m),
            HumanMass::Constrained(_) => None,
        }
    }
}

/// Body region parameters: spring constant, force limits and mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyRegionModel {
    pub name: String,
    /// N/m
    pub spring_constant: f64,
    /// N, applies during the first 0.5 s after impact.
    pub max_force_transient: f64,
    /// N, applies after the first 0.5 s (clamping).
    pub max_force_quasistatic: f64,
    pub mass: HumanMass,
}

impl BodyRegionModel {
    /// Back of the non-dominant hand, struck through the transient test rig
    /// (5.3 kg moving mass).
    pub fn hand() -> Self {
        Self {
            name: "back of the non-dominant hand".into(),
            spring_constant: 75_000.0,
            max_force_transient: 280.0,
            max_force_quasistatic: 140.0,
            mass: HumanMass::Kg(5.3),
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("body spring constant", self.spring_constant)?;
        positive("quasi-static force limit", self.max_force_quasistatic)?;
        positive("transient force limit", self.max_force_transient)?;
        if self.max_force_transient < self.max_force_quasistatic {
            return Err(PflError::Invalid(format!(
                "transient force limit {} is below the quasi-static limit {}",
                self.max_force_transient, self.max_force_quasistatic
            )));
        }
        if let HumanMass::Kg(m) = self.mass {
            positive("body mass", m)?;
        }
        Ok(())
    }
}

impl Default for BodyRegionModel {
    fn default() -> Self {
        Self::hand()
    }
}

/// Soft protective cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkinModel {
    #[serde(default)]
    pub label: String,
    /// k_s, N/m
    pub spring_constant: f64,
    /// d_s, m
    pub compressible_thickness: f64,
    /// Force at which an active cover triggers. Informational for the
    /// analytical model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation_threshold_force: Option<f64>,
}

impl SkinModel {
    pub fn none() -> Self {
        Self {
            label: "none".into(),
            spring_constant: 0.0,
            compressible_thickness: 0.0,
            activation_threshold_force: None,
        }
    }

    /// Stiffest spot of an AIRSKIN module pad: 3000 N/m over 16 mm.
    pub fn airskin_pad() -> Self {
        Self {
            label: "AIRSKIN pad".into(),
            spring_constant: 3000.0,
            compressible_thickness: 0.016,
            activation_threshold_force: None,
        }
    }

    pub fn is_absent(&self) -> bool {
        self.spring_constant * self.compressible_thickness.powi(2) == 0.0
    }

    /// d_s²·k_s / 2, J: energy stored when fully compressed.
    pub fn absorbed_energy(&self) -> f64 {
        0.5 * self.compressible_thickness.powi(2) * self.spring_constant
    }

    pub fn validate(&self) -> Result<()> {
        non_negative("skin spring constant", self.spring_constant)?;
        non_negative("skin compressible thickness", self.compressible_thickness)?;
        if let Some(f) = self.activation_threshold_force {
            non_negative("skin activation threshold", f)?;
        }
        Ok(())
    }
}

impl Default for SkinModel {
    fn default() -> Self {
        Self::none()
    }
}

/// M/2 + m_L: the standard's static effective robot mass.
pub fn static_effective_mass(moving_mass: f64, payload: f64) -> Result<f64> {
    positive("robot moving mass", moving_mass)?;
    non_negative("payload", payload)?;
    Ok(moving_mass / 2.0 + payload)
}

/// How the robot's effective mass m_R is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum EffectiveMassSpec {
    Static { moving_mass: f64, payload: f64 },
    Explicit { mass: f64 },
    Dynamic {
        chain: KinematicChain,
        q: JointConfiguration,
        point: Point3<f64>,
        direction: Direction,
    },
}

impl EffectiveMassSpec {
    /// m_R in kg.
    pub fn resolve(&self) -> Result<f64> {
        match self {
            EffectiveMassSpec::Static { moving_mass, payload } => {
                static_effective_mass(*moving_mass, *payload)
            }
            EffectiveMassSpec::Explicit { mass } => positive("robot effective mass", *mass),
            EffectiveMassSpec::Dynamic {
                chain,
                q,
                point,
                direction,
            } => dynamics::effective_mass(chain, q, point, direction)?
                .finite()
                .ok_or(PflError::ImmobileRobot),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactKind {
    Transient,
    #[serde(alias = "quasi_static_constrained", alias = "quasistatic")]
    QuasiStatic,
}

impl fmt::Display for ContactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContactKind::Transient => "transient",
            ContactKind::QuasiStatic => "quasi_static",
        })
    }
}

impl FromStr for ContactKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "transient" => Ok(ContactKind::Transient),
            "quasi_static" | "quasistatic" | "quasi_static_constrained" => {
                Ok(ContactKind::QuasiStatic)
            }
            other => Err(format!("unknown contact kind '{other}'")),
        }
    }
}

/// A complete collision scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactScenario {
    pub kind: ContactKind,
    pub body: BodyRegionModel,
    pub skin: SkinModel,
    pub robot: EffectiveMassSpec,
}

impl ContactScenario {
    pub fn new(
        kind: ContactKind,
        body: BodyRegionModel,
        skin: SkinModel,
        robot: EffectiveMassSpec,
    ) -> Result<Self> {
        let scenario = Self {
            kind,
            body,
            skin,
            robot,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Quasi-static contact with the default hand region and a static
    /// robot mass M/2 + m_L.
    pub fn quasi_static(moving_mass: f64, payload: f64, skin: SkinModel) -> Result<Self> {
        Self::new(
            ContactKind::QuasiStatic,
            BodyRegionModel::hand(),
            skin,
            EffectiveMassSpec::Static {
                moving_mass,
                payload,
            },
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.body.validate()?;
        self.skin.validate()?;
        if self.kind == ContactKind::Transient && self.body.mass.kg().is_none() {
            return Err(PflError::Invalid(
                "transient contact requires a finite body mass".into(),
            ));
        }
        self.robot.resolve()?;
        Ok(())
    }

    pub fn robot_mass(&self) -> Result<f64> {
        self.robot.resolve()
    }

    /// μ for a given contact kind: quasi-static contact pins the body part.
    pub fn reduced_mass_for(&self, contact: ContactKind) -> Result<f64> {
        let human = match contact {
            ContactKind::QuasiStatic => HumanMass::CONSTRAINED,
            ContactKind::Transient => self.body.mass,
        };
        reduced_mass(self.robot_mass()?, human)
    }

    pub fn reduced_mass(&self) -> Result<f64> {
        self.reduced_mass_for(self.kind)
    }

    /// The model's force limit for a time window after impact.
    pub fn force_limit(&self, window: LimitWindow) -> f64 {
        match window {
            LimitWindow::FirstHalfSecond => self.body.max_force_transient,
            LimitWindow::AfterHalfSecond => self.body.max_force_quasistatic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitWindow {
    FirstHalfSecond,
    AfterHalfSecond,
}

/// μ = (1/m_R + 1/m_H)⁻¹; equals m_R when the body is constrained.
pub fn reduced_mass(robot_mass: f64, human: HumanMass) -> Result<f64> {
    positive("robot effective mass", robot_mass)?;
    match human {
        HumanMass::Constrained(_) => Ok(robot_mass),
        HumanMass::Kg(m_h) => {
            positive("body mass", m_h)?;
            Ok(1.0 / (1.0 / robot_mass + 1.0 / m_h))
        }
    }
}

/// Maximum relative velocity keeping the impact force at or below `f_max`.
///
/// Uses the scenario's own contact kind for μ. With `use_skin_extension` the
/// cover's absorbed energy is added to the balance.
pub fn permissible_velocity(
    scenario: &ContactScenario,
    f_max: f64,
    use_skin_extension: bool,
) -> Result<f64> {
    positive("force limit", f_max)?;
    let mu = positive("reduced mass", scenario.reduced_mass()?)?;
    let k = positive("body spring constant", scenario.body.spring_constant)?;
    if use_skin_extension {
        let skin_term = skin_velocity_term(&scenario.skin, mu);
        Ok((f_max * f_max / (k * mu) + skin_term).sqrt())
    } else {
        Ok(f_max / (k * mu).sqrt())
    }
}

/// d_s²·k_s/μ in m²/s².
fn skin_velocity_term(skin: &SkinModel, mu: f64) -> f64 {
    skin.compressible_thickness.powi(2) * skin.spring_constant / mu
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Cover not modelled.
    Ts15066,
    /// Cover energy included.
    Modified,
}

/// One of the four force-prediction variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Variant {
    pub model: ModelKind,
    pub contact: ContactKind,
}

impl Variant {
    pub const TS_QUASISTATIC: Variant = Variant::new(ModelKind::Ts15066, ContactKind::QuasiStatic);
    pub const TS_TRANSIENT: Variant = Variant::new(ModelKind::Ts15066, ContactKind::Transient);
    pub const MOD_QUASISTATIC: Variant = Variant::new(ModelKind::Modified, ContactKind::QuasiStatic);
    pub const MOD_TRANSIENT: Variant = Variant::new(ModelKind::Modified, ContactKind::Transient);
    pub const ALL: [Variant; 4] = [
        Variant::TS_QUASISTATIC,
        Variant::TS_TRANSIENT,
        Variant::MOD_QUASISTATIC,
        Variant::MOD_TRANSIENT,
    ];

    pub const fn new(model: ModelKind, contact: ContactKind) -> Self {
        Self { model, contact }
    }

    pub fn uses_skin(&self) -> bool {
        self.model == ModelKind::Modified
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let model = match self.model {
            ModelKind::Ts15066 => "ts",
            ModelKind::Modified => "mod",
        };
        let contact = match self.contact {
            ContactKind::Transient => "transient",
            ContactKind::QuasiStatic => "quasistatic",
        };
        write!(f, "{model}-{contact}")
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let lower = s.trim().to_ascii_lowercase();
        let (model, contact) = lower
            .split_once(['-', '_', 'x', ':'])
            .ok_or_else(|| format!("variant '{s}' is not of the form <ts|mod>-<transient|quasistatic>"))?;
        let model = match model {
            "ts" | "ts15066" => ModelKind::Ts15066,
            "mod" | "modified" => ModelKind::Modified,
            other => return Err(format!("unknown model '{other}' (expected ts or mod)")),
        };
        Ok(Variant::new(model, contact.parse()?))
    }
}

/// Outcome of a force prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcePrediction {
    Force(f64),
    /// v² < d_s²k_s/μ: the cover is not fully compressed and the balance has
    /// no real solution.
    NoPrediction,
}

impl ForcePrediction {
    pub fn force(&self) -> Option<f64> {
        match *self {
            ForcePrediction::Force(f) => Some(f),
            ForcePrediction::NoPrediction => None,
        }
    }
}

impl fmt::Display for ForcePrediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForcePrediction::Force(force) => write!(f, "{force:.1} N"),
            ForcePrediction::NoPrediction => f.write_str("no prediction"),
        }
    }
}

/// Knobs for [`predicted_impact_force_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PredictionOptions {
    /// Below the full-compression threshold, fall back to the series-spring
    /// force `v·√(μ·k·k_s/(k + k_s))` instead of reporting no prediction.
    pub actual_compression_fallback: bool,
}

/// Impact force at relative velocity `v` for one of the four variants.
pub fn predicted_impact_force(
    scenario: &ContactScenario,
    v: f64,
    variant: Variant,
) -> Result<ForcePrediction> {
    predicted_impact_force_with(scenario, v, variant, PredictionOptions::default())
}

pub fn predicted_impact_force_with(
    scenario: &ContactScenario,
    v: f64,
    variant: Variant,
    options: PredictionOptions,
) -> Result<ForcePrediction> {
    non_negative("velocity", v)?;
    let mu = positive("reduced mass", scenario.reduced_mass_for(variant.contact)?)?;
    let k = positive("body spring constant", scenario.body.spring_constant)?;
    let skin_term = if variant.uses_skin() {
        skin_velocity_term(&scenario.skin, mu)
    } else {
        0.0
    };
    let v2 = v * v;
    if v2 < skin_term {
        if options.actual_compression_fallback {
            let ks = scenario.skin.spring_constant;
            return Ok(ForcePrediction::Force(v * (mu * k * ks / (k + ks)).sqrt()));
        }
        return Ok(ForcePrediction::NoPrediction);
    }
    Ok(ForcePrediction::Force(((v2 - skin_term) * (k * mu)).sqrt()))
}

/// Where the kinetic energy of the impact goes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBalance {
    pub kinetic: f64,
    pub body_spring: f64,
    pub skin_spring: f64,
}

pub fn spring_energy_balance(scenario: &ContactScenario, v: f64) -> Result<EnergyBalance> {
    non_negative("velocity", v)?;
    let mu = scenario.reduced_mass()?;
    let kinetic = 0.5 * mu * v * v;
    let skin_spring = kinetic.min(scenario.skin.absorbed_energy());
    Ok(EnergyBalance {
        kinetic,
        body_spring: kinetic - skin_spring,
        skin_spring,
    })
}

/// Two decimals, half away from zero.
pub fn round_velocity(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

// ---------------------------------------------------------------------------
// Scenario files

/// On-disk scenario (TOML). Paths inside are relative to the file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub contact: ContactKind,
    #[serde(default)]
    pub body: Option<BodyRegionModel>,
    #[serde(default)]
    pub skin: Option<SkinModel>,
    pub robot: RobotEntry,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RobotEntry {
    Static {
        moving_mass: f64,
        #[serde(default)]
        payload: f64,
    },
    Explicit {
        mass: f64,
    },
    Dynamic {
        chain: PathBuf,
        q: Vec<f64>,
        point: [f64; 3],
        direction: [f64; 3],
    },
}

impl ScenarioFile {
    pub fn into_scenario(self, base_dir: &Path) -> Result<ContactScenario> {
        let robot = match self.robot {
            RobotEntry::Static {
                moving_mass,
                payload,
            } => EffectiveMassSpec::Static {
                moving_mass,
                payload,
            },
            RobotEntry::Explicit { mass } => EffectiveMassSpec::Explicit { mass },
            RobotEntry::Dynamic {
                chain,
                q,
                point,
                direction,
            } => {
                let path = base_dir.join(chain);
                let chain = KinematicChain::from_toml_file(&path)?;
                EffectiveMassSpec::Dynamic {
                    chain,
                    q: q.into(),
                    point: Point3::from(point),
                    direction: Direction::new(Vector3::from(direction))?,
                }
            }
        };
        ContactScenario::new(
            self.contact,
            self.body.unwrap_or_default(),
            self.skin.unwrap_or_default(),
            robot,
        )
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ContactScenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| PflError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ScenarioFile = toml::from_str(&text).map_err(|source| PflError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    file.into_scenario(path.parent().unwrap_or(Path::new(".")))
}

//! Measurement corpora: ingest, per-setup aggregation and the reference
//! tables (mean peak-force change and maximum safe velocities).
//!
//! A corpus is a directory holding `manifest.csv` plus trace files. Each
//! manifest row describes one collision measurement:
//!
//! ```text
//! robot,place,dir_x,dir_y,dir_z,contact,velocity,skin,safety,repetition,trace
//! ur10e,0,0,0,-1,quasi_static,0.25,passive,pre4,1,traces/r0001.csv
//! ```

mod aggregate;
mod corpus;
mod render;

pub use aggregate::{
    aggregate, build_report, max_safe_velocity, mean_force_change, Compliance, ForceChange,
    PlaceChange, Report, ReportOptions, SafeCell, SafeVelocityCells, SafeVelocityRow,
    SetupAggregate, VelocityStats, WindowStats, ForceChangeRow,
};
pub use corpus::{export, ingest, IngestOptions, Issue, MANIFEST_FILE};
pub use render::{render_tables, FORMAT_VERSION};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pfl::ContactKind;
use crate::trace::ForceTrace;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no {} in {}", MANIFEST_FILE, .0.display())]
    MissingManifest(PathBuf),
    #[error("{} problem(s) in corpus:\n{}", .0.len(), render_issues(.0))]
    Invalid(Vec<Issue>),
    #[error("setups {baseline} and {target} share no measured velocity")]
    NoOverlap { baseline: SetupKey, target: SetupKey },
    #[error("no measurements")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Trace(#[from] crate::trace::TraceError),
    #[error(transparent)]
    Pfl(#[from] crate::pfl::PflError),
}

fn render_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T, E = ReportError> = std::result::Result<T, E>;

/// Places 0–2 are quasi-static (clamping) contacts, 3–4 transient.
pub const PLACES: std::ops::RangeInclusive<u8> = 0..=4;

pub fn contact_kind_of_place(place: u8) -> Option<ContactKind> {
    match place {
        0..=2 => Some(ContactKind::QuasiStatic),
        3 | 4 => Some(ContactKind::Transient),
        _ => None,
    }
}

/// Default measured velocities, m/s.
pub fn default_velocity_grid(kind: ContactKind) -> Vec<f64> {
    match kind {
        ContactKind::QuasiStatic => vec![0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5],
        ContactKind::Transient => vec![0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.6, 0.7],
    }
}

/// Velocity in mm/s, used to match velocities across records.
pub(crate) fn velocity_key(v: f64) -> i64 {
    (v * 1000.0).round() as i64
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SkinSetting {
    None,
    Passive,
    /// Active skin wired to the named stop input.
    Active(String),
}

impl fmt::Display for SkinSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => f.write_str("none"),
            Self::Passive => f.write_str("passive"),
            Self::Active(stop) => write!(f, "active:{stop}"),
        }
    }
}

impl FromStr for SkinSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "none" => Ok(Self::None),
            "passive" => Ok(Self::Passive),
            other => match other.strip_prefix("active:") {
                Some(stop) if !stop.trim().is_empty() => Ok(Self::Active(stop.trim().to_string())),
                _ => Err(format!(
                    "unknown skin setting '{other}' (expected none, passive or active:<stop>)"
                )),
            },
        }
    }
}

impl TryFrom<String> for SkinSetting {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<SkinSetting> for String {
    fn from(s: SkinSetting) -> String {
        s.to_string()
    }
}

/// Robot, skin and safety configuration shared by a group of measurements.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SetupKey {
    pub robot: String,
    pub skin: SkinSetting,
    pub safety: String,
}

impl SetupKey {
    pub fn new(robot: impl Into<String>, skin: SkinSetting, safety: impl Into<String>) -> Self {
        Self {
            robot: robot.into(),
            skin,
            safety: safety.into(),
        }
    }
}

impl fmt::Display for SetupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.robot, self.skin, self.safety)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub robot: String,
    pub place: u8,
    pub direction: [f64; 3],
    pub contact_kind: ContactKind,
    pub velocity: f64,
    pub skin: SkinSetting,
    pub safety: String,
    pub repetition: u32,
    pub trace: ForceTrace,
}

impl MeasurementRecord {
    pub fn setup(&self) -> SetupKey {
        SetupKey::new(self.robot.clone(), self.skin.clone(), self.safety.clone())
    }
}

/// Moving mass used for the reference permissible velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotReference {
    pub label: String,
    pub moving_mass: f64,
    pub payload: f64,
}

impl RobotReference {
    pub fn new(label: &str, moving_mass: f64) -> Self {
        Self {
            label: label.to_string(),
            moving_mass,
            payload: 0.0,
        }
    }

    pub fn defaults() -> Vec<Self> {
        vec![
            Self::new("ur10e", 30.0),
            Self::new("kuka_iiwa", 20.0),
            Self::new("kuka_cybertech", 250.0),
        ]
    }
}

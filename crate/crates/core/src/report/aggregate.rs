use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{velocity_key, MeasurementRecord, ReportError, Result, RobotReference, SetupKey, SkinSetting};
use crate::pfl::{
    permissible_velocity, round_velocity, BodyRegionModel, ContactKind, ContactScenario,
    EffectiveMassSpec, SkinModel,
};
use crate::trace::{peak, window_maxima, AnalysisConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub mean: f64,
    pub max: f64,
}

impl WindowStats {
    fn of(values: &[f64]) -> Self {
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Repetitions at one velocity of one setup and place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityStats {
    pub velocity: f64,
    pub count: usize,
    pub peak: WindowStats,
    /// Largest force in the first 0.5 s.
    pub first_window: WindowStats,
    /// Largest force after 0.5 s.
    pub after_window: WindowStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupAggregate {
    pub setup: SetupKey,
    pub place: u8,
    pub contact_kind: ContactKind,
    /// Ascending velocity.
    pub velocities: Vec<VelocityStats>,
}

struct RecordMetrics {
    peak: f64,
    first: f64,
    after: f64,
}

fn record_metrics(record: &MeasurementRecord, config: &AnalysisConfig) -> RecordMetrics {
    if record.trace.is_empty() {
        return RecordMetrics {
            peak: 0.0,
            first: 0.0,
            after: 0.0,
        };
    }
    let w = window_maxima(&record.trace, config);
    RecordMetrics {
        peak: peak(&record.trace).map_or(0.0, |(f, _)| f),
        first: w.first,
        after: w.after,
    }
}

/// Groups records by setup and place, then by velocity.
pub fn aggregate(records: &[MeasurementRecord], config: &AnalysisConfig) -> Vec<SetupAggregate> {
    type Group = (ContactKind, BTreeMap<i64, (f64, Vec<RecordMetrics>)>);
    let mut groups: BTreeMap<(SetupKey, u8), Group> = BTreeMap::new();
    for r in records {
        let (_, by_velocity) = groups
            .entry((r.setup(), r.place))
            .or_insert_with(|| (r.contact_kind, BTreeMap::new()));
        by_velocity
            .entry(velocity_key(r.velocity))
            .or_insert_with(|| (r.velocity, Vec::new()))
            .1
            .push(record_metrics(r, config));
    }
    groups
        .into_iter()
        .map(|((setup, place), (contact_kind, by_velocity))| SetupAggregate {
            setup,
            place,
            contact_kind,
            velocities: by_velocity
                .into_values()
                .map(|(velocity, ms)| {
                    let pick = |f: fn(&RecordMetrics) -> f64| ms.iter().map(f).collect::<Vec<_>>();
                    VelocityStats {
                        velocity,
                        count: ms.len(),
                        peak: WindowStats::of(&pick(|m| m.peak)),
                        first_window: WindowStats::of(&pick(|m| m.first)),
                        after_window: WindowStats::of(&pick(|m| m.after)),
                    }
                })
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaceChange {
    pub place: u8,
    /// Percent change of the mean peak force.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceChange {
    pub per_place: Vec<PlaceChange>,
    /// Mean of the per-place changes.
    pub mean: f64,
}

/// 100·(target − baseline)/baseline of mean peak forces, averaged over the
/// velocities both setups were measured at, for each listed place.
pub fn mean_force_change(
    aggregates: &[SetupAggregate],
    baseline: &SetupKey,
    target: &SetupKey,
    places: &[u8],
) -> Result<ForceChange> {
    let find = |key: &SetupKey, place: u8| {
        aggregates
            .iter()
            .find(|a| &a.setup == key && a.place == place)
    };
    let mut per_place = Vec::new();
    for &place in places {
        let (Some(b), Some(t)) = (find(baseline, place), find(target, place)) else {
            continue;
        };
        let mut base = Vec::new();
        let mut targ = Vec::new();
        for bv in &b.velocities {
            if let Some(tv) = t
                .velocities
                .iter()
                .find(|tv| velocity_key(tv.velocity) == velocity_key(bv.velocity))
            {
                base.push(bv.peak.mean);
                targ.push(tv.peak.mean);
            }
        }
        if base.is_empty() {
            continue;
        }
        let mb = base.iter().sum::<f64>() / base.len() as f64;
        let mt = targ.iter().sum::<f64>() / targ.len() as f64;
        per_place.push(PlaceChange {
            place,
            percent: 100.0 * (mt - mb) / mb,
        });
    }
    if per_place.is_empty() {
        return Err(ReportError::NoOverlap {
            baseline: baseline.clone(),
            target: target.clone(),
        });
    }
    let mean = per_place.iter().map(|p| p.percent).sum::<f64>() / per_place.len() as f64;
    Ok(ForceChange { per_place, mean })
}

/// How repetitions at one velocity are judged against a force limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compliance {
    /// Every repetition must comply.
    #[default]
    WorstOf,
    /// The mean over repetitions must comply.
    Mean,
}

/// One cell of a safe-velocity table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "velocity")]
pub enum SafeCell {
    /// Already the smallest measured velocity violates the limit.
    BelowMin(f64),
    Velocity(f64),
    /// No measured velocity violates the limit.
    AboveMax(f64),
    /// No contact force was registered in the window.
    NoConstraint,
}

impl SafeCell {
    fn order_key(&self) -> Option<(f64, u8)> {
        match *self {
            Self::BelowMin(v) => Some((v, 0)),
            Self::Velocity(v) => Some((v, 1)),
            Self::AboveMax(v) => Some((v, 2)),
            Self::NoConstraint => None,
        }
    }

    /// The more restrictive of two cells.
    pub fn min(self, other: Self) -> Self {
        match (self.order_key(), other.order_key()) {
            (None, _) => other,
            (_, None) => self,
            (Some(a), Some(b)) => match a.partial_cmp(&b) {
                Some(Ordering::Greater) => other,
                _ => self,
            },
        }
    }

    /// Compares restrictiveness; `NoConstraint` is the least restrictive.
    pub fn cmp_restrictive(&self, other: &Self) -> Ordering {
        match (self.order_key(), other.order_key()) {
            (None, None) => Ordering::Equal,
            (None, _) => Ordering::Greater,
            (_, None) => Ordering::Less,
            (Some(a), Some(b)) => a.partial_cmp(&b).unwrap_or(Ordering::Equal),
        }
    }
}

fn grid_text(v: f64) -> String {
    format!("{}", round_velocity(v))
}

impl fmt::Display for SafeCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::BelowMin(v) => write!(f, "<{}", grid_text(v)),
            Self::Velocity(v) => f.write_str(&grid_text(v)),
            Self::AboveMax(v) => write!(f, ">{}", grid_text(v)),
            Self::NoConstraint => f.write_str("—"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeVelocityCells {
    /// Against the transient limit, first 0.5 s.
    pub first: SafeCell,
    /// Against the quasi-static limit, after 0.5 s.
    pub after: SafeCell,
    pub overall: SafeCell,
}

fn window_cell(
    velocities: &[VelocityStats],
    limit: f64,
    compliance: Compliance,
    contact_threshold: f64,
    window: impl Fn(&VelocityStats) -> WindowStats,
) -> SafeCell {
    if velocities.iter().all(|v| window(v).max < contact_threshold) {
        return SafeCell::NoConstraint;
    }
    let mut sorted: Vec<&VelocityStats> = velocities.iter().collect();
    sorted.sort_by(|a, b| a.velocity.total_cmp(&b.velocity));
    let mut last_ok = None;
    for v in &sorted {
        let w = window(v);
        let value = match compliance {
            Compliance::WorstOf => w.max,
            Compliance::Mean => w.mean,
        };
        if value > limit {
            return match last_ok {
                None => SafeCell::BelowMin(v.velocity),
                Some(ok) => SafeCell::Velocity(ok),
            };
        }
        last_ok = Some(v.velocity);
    }
    SafeCell::AboveMax(sorted.last().map_or(0.0, |v| v.velocity))
}

/// Largest measured velocity below which every measurement complies with
/// the limits of `body`, for each window and overall.
pub fn max_safe_velocity(
    velocities: &[VelocityStats],
    body: &BodyRegionModel,
    compliance: Compliance,
    contact_threshold: f64,
) -> Result<SafeVelocityCells> {
    if velocities.is_empty() {
        return Err(ReportError::Empty);
    }
    let first = window_cell(
        velocities,
        body.max_force_transient,
        compliance,
        contact_threshold,
        |v| v.first_window,
    );
    let after = window_cell(
        velocities,
        body.max_force_quasistatic,
        compliance,
        contact_threshold,
        |v| v.after_window,
    );
    Ok(SafeVelocityCells {
        first,
        after,
        overall: first.min(after),
    })
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub analysis: AnalysisConfig,
    pub body: BodyRegionModel,
    /// Cover used for the modified reference column.
    pub skin: SkinModel,
    pub robots: Vec<RobotReference>,
    pub compliance: Compliance,
    /// Window maxima below this count as no contact.
    pub contact_threshold: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            analysis: AnalysisConfig::default(),
            body: BodyRegionModel::hand(),
            skin: SkinModel::airskin_pad(),
            robots: RobotReference::defaults(),
            compliance: Compliance::WorstOf,
            contact_threshold: crate::trace::ForceTrace::DEFAULT_ONSET_THRESHOLD,
        }
    }
}

/// Permissible velocities for the two windows, rounded to 0.01 m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceVelocities {
    pub first: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeVelocityRow {
    pub robot: String,
    pub place: u8,
    pub contact_kind: ContactKind,
    pub setups: Vec<(SetupKey, SafeVelocityCells)>,
    pub ts: Option<ReferenceVelocities>,
    pub modified_ts: Option<ReferenceVelocities>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceChangeRow {
    pub baseline: SetupKey,
    pub target: SetupKey,
    pub contact_kind: ContactKind,
    pub change: ForceChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub aggregates: Vec<SetupAggregate>,
    pub safe_velocities: Vec<SafeVelocityRow>,
    pub force_changes: Vec<ForceChangeRow>,
}

fn references(
    robot: &RobotReference,
    kind: ContactKind,
    options: &ReportOptions,
    with_skin: bool,
) -> Result<ReferenceVelocities> {
    let scenario = ContactScenario::new(
        kind,
        options.body.clone(),
        options.skin.clone(),
        EffectiveMassSpec::Static {
            moving_mass: robot.moving_mass,
            payload: robot.payload,
        },
    )?;
    Ok(ReferenceVelocities {
        first: round_velocity(permissible_velocity(
            &scenario,
            options.body.max_force_transient,
            with_skin,
        )?),
        after: round_velocity(permissible_velocity(
            &scenario,
            options.body.max_force_quasistatic,
            with_skin,
        )?),
    })
}

const QUASI_STATIC_PLACES: [u8; 3] = [0, 1, 2];
const TRANSIENT_PLACES: [u8; 2] = [3, 4];

pub fn build_report(records: &[MeasurementRecord], options: &ReportOptions) -> Result<Report> {
    let aggregates = aggregate(records, &options.analysis);

    let mut rows: BTreeMap<(String, u8), SafeVelocityRow> = BTreeMap::new();
    for a in &aggregates {
        let cells = max_safe_velocity(
            &a.velocities,
            &options.body,
            options.compliance,
            options.contact_threshold,
        )?;
        let key = (a.setup.robot.clone(), a.place);
        if !rows.contains_key(&key) {
            let reference = options.robots.iter().find(|r| r.label == a.setup.robot);
            let (ts, modified_ts) = match reference {
                Some(r) => (
                    Some(references(r, a.contact_kind, options, false)?),
                    Some(references(r, a.contact_kind, options, true)?),
                ),
                None => (None, None),
            };
            rows.insert(
                key.clone(),
                SafeVelocityRow {
                    robot: a.setup.robot.clone(),
                    place: a.place,
                    contact_kind: a.contact_kind,
                    setups: Vec::new(),
                    ts,
                    modified_ts,
                },
            );
        }
        if let Some(row) = rows.get_mut(&key) {
            row.setups.push((a.setup.clone(), cells));
        }
    }

    let mut setups: Vec<&SetupKey> = aggregates.iter().map(|a| &a.setup).collect();
    setups.dedup();
    let mut force_changes = Vec::new();
    for baseline in setups.iter().filter(|s| s.skin == SkinSetting::None) {
        for target in setups
            .iter()
            .filter(|t| t.robot == baseline.robot && t != &baseline)
        {
            for (kind, places) in [
                (ContactKind::QuasiStatic, &QUASI_STATIC_PLACES[..]),
                (ContactKind::Transient, &TRANSIENT_PLACES[..]),
            ] {
                match mean_force_change(&aggregates, baseline, target, places) {
                    Ok(change) => force_changes.push(ForceChangeRow {
                        baseline: (*baseline).clone(),
                        target: (*target).clone(),
                        contact_kind: kind,
                        change,
                    }),
                    Err(ReportError::NoOverlap { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }

    Ok(Report {
        aggregates,
        safe_velocities: rows.into_values().collect(),
        force_changes,
    })
}

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    contact_kind_of_place, default_velocity_grid, velocity_key, MeasurementRecord, ReportError,
    Result, RobotReference, SkinSetting,
};
use crate::pfl::ContactKind;
use crate::trace::{read_trace, write_trace};

pub const MANIFEST_FILE: &str = "manifest.csv";
const TRACE_DIR: &str = "traces";
const DIRECTION_TOLERANCE: f64 = 1e-6;

/// A problem found while ingesting, with its location.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub file: PathBuf,
    pub line: Option<u64>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.file.display(), line, self.message),
            None => write!(f, "{}: {}", self.file.display(), self.message),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Robot labels accepted in the manifest.
    pub robots: Vec<String>,
    pub quasi_static_grid: Vec<f64>,
    pub transient_grid: Vec<f64>,
    /// Report trace files under `traces/` that no manifest row references.
    pub flag_unreferenced: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            robots: RobotReference::defaults().into_iter().map(|r| r.label).collect(),
            quasi_static_grid: default_velocity_grid(ContactKind::QuasiStatic),
            transient_grid: default_velocity_grid(ContactKind::Transient),
            flag_unreferenced: true,
        }
    }
}

impl IngestOptions {
    fn grid(&self, kind: ContactKind) -> &[f64] {
        match kind {
            ContactKind::QuasiStatic => &self.quasi_static_grid,
            ContactKind::Transient => &self.transient_grid,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    robot: String,
    place: u8,
    dir_x: f64,
    dir_y: f64,
    dir_z: f64,
    contact: String,
    velocity: f64,
    skin: String,
    safety: String,
    repetition: u32,
    trace: String,
}

/// Reads and validates a corpus. Every problem is collected; if there are
/// any, nothing is returned.
pub fn ingest(dir: impl AsRef<Path>, options: &IngestOptions) -> Result<Vec<MeasurementRecord>> {
    let dir = dir.as_ref();
    let manifest = dir.join(MANIFEST_FILE);
    if !manifest.is_file() {
        return Err(ReportError::MissingManifest(dir.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(&manifest)?;

    let mut issues = Vec::new();
    let mut records = Vec::new();
    let mut referenced = BTreeSet::new();
    let headers = reader.headers()?.clone();
    for record in reader.records() {
        let parsed = record.and_then(|r| {
            let line = r.position().map(|p| p.line());
            r.deserialize::<ManifestRow>(Some(&headers)).map(|row| (line, row))
        });
        let (line, row) = match parsed {
            Ok(r) => r,
            Err(e) => {
                issues.push(Issue {
                    file: manifest.clone(),
                    line: e.position().map(|p| p.line()),
                    message: e.to_string(),
                });
                continue;
            }
        };
        let mut problem = |message: String| {
            issues.push(Issue {
                file: manifest.clone(),
                line,
                message,
            })
        };
        referenced.insert(normalize(&row.trace));
        match validate_row(&row, options) {
            Err(message) => problem(message),
            Ok((contact_kind, skin)) => match read_trace(dir.join(&row.trace), None) {
                Err(e) => problem(format!("trace {}: {e}", row.trace)),
                Ok(trace) => records.push(MeasurementRecord {
                    robot: row.robot,
                    place: row.place,
                    direction: [row.dir_x, row.dir_y, row.dir_z],
                    contact_kind,
                    velocity: row.velocity,
                    skin,
                    safety: row.safety,
                    repetition: row.repetition,
                    trace,
                }),
            },
        }
    }

    if options.flag_unreferenced {
        let trace_dir = dir.join(TRACE_DIR);
        if trace_dir.is_dir() {
            let entries = std::fs::read_dir(&trace_dir).map_err(|source| ReportError::Io {
                path: trace_dir.clone(),
                source,
            })?;
            let mut unreferenced: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .filter(|p| {
                    let rel = p.strip_prefix(dir).unwrap_or(p);
                    !referenced.contains(&normalize(&rel.to_string_lossy()))
                })
                .collect();
            unreferenced.sort();
            issues.extend(unreferenced.into_iter().map(|file| Issue {
                file,
                line: None,
                message: "trace file not referenced by the manifest".into(),
            }));
        }
    }

    if issues.is_empty() {
        Ok(records)
    } else {
        Err(ReportError::Invalid(issues))
    }
}

fn normalize(path: &str) -> String {
    path.trim().trim_start_matches("./").replace('\\', "/")
}

fn validate_row(
    row: &ManifestRow,
    options: &IngestOptions,
) -> std::result::Result<(ContactKind, SkinSetting), String> {
    if !options.robots.iter().any(|r| r == &row.robot) {
        return Err(format!(
            "unknown robot '{}' (known: {})",
            row.robot,
            options.robots.join(", ")
        ));
    }
    let kind: ContactKind = row.contact.parse()?;
    match contact_kind_of_place(row.place) {
        None => return Err(format!("place {} outside 0..=4", row.place)),
        Some(expected) if expected != kind => {
            return Err(format!(
                "place {} is a {expected} contact, manifest says {kind}",
                row.place
            ))
        }
        Some(_) => {}
    }
    let grid = options.grid(kind);
    if !grid.iter().any(|&g| velocity_key(g) == velocity_key(row.velocity)) {
        return Err(format!(
            "velocity {} m/s is not on the {kind} grid {grid:?}",
            row.velocity
        ));
    }
    let norm = (row.dir_x.powi(2) + row.dir_y.powi(2) + row.dir_z.powi(2)).sqrt();
    if (norm - 1.0).abs() > DIRECTION_TOLERANCE {
        return Err(format!("direction has length {norm}, expected a unit vector"));
    }
    let skin: SkinSetting = row.skin.parse()?;
    if row.safety.trim().is_empty() {
        return Err("empty safety setting".into());
    }
    Ok((kind, skin))
}

/// Writes records as a corpus that [`ingest`] reads back unchanged.
pub fn export(records: &[MeasurementRecord], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let trace_dir = dir.join(TRACE_DIR);
    std::fs::create_dir_all(&trace_dir).map_err(|source| ReportError::Io {
        path: trace_dir.clone(),
        source,
    })?;
    let mut writer = csv::Writer::from_path(dir.join(MANIFEST_FILE))?;
    if records.is_empty() {
        writer.write_record([
            "robot", "place", "dir_x", "dir_y", "dir_z", "contact", "velocity", "skin", "safety",
            "repetition", "trace",
        ])?;
    }
    for (i, r) in records.iter().enumerate() {
        let rel = format!("{TRACE_DIR}/r{:04}.csv", i + 1);
        write_trace(dir.join(&rel), &r.trace)?;
        writer.serialize(ManifestRow {
            robot: r.robot.clone(),
            place: r.place,
            dir_x: r.direction[0],
            dir_y: r.direction[1],
            dir_z: r.direction[2],
            contact: r.contact_kind.to_string(),
            velocity: r.velocity,
            skin: r.skin.to_string(),
            safety: r.safety.clone(),
            repetition: r.repetition,
            trace: rel,
        })?;
    }
    writer.flush().map_err(|source| ReportError::Io {
        path: dir.join(MANIFEST_FILE),
        source,
    })?;
    Ok(())
}

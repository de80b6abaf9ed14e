use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::aggregate::{ForceChangeRow, Report, SafeCell, SafeVelocityRow};
use super::{ReportError, Result};

pub const FORMAT_VERSION: u32 = 1;

const FIRST_WINDOW: &str = "<0.5s";
const AFTER_WINDOW: &str = ">0.5s";
const MIN_WINDOW: &str = "min";

fn header(what: &str) -> String {
    format!("# pfl-report format {FORMAT_VERSION}: {what}\n")
}

fn csv_text(header_line: &str, write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w)?;
    let body = w.into_inner().map_err(|e| ReportError::Io {
        path: PathBuf::from("<memory>"),
        source: e.into_error(),
    })?;
    Ok(header_line.to_string() + &String::from_utf8_lossy(&body))
}

fn aggregates_csv(report: &Report) -> Result<String> {
    csv_text(&header("mean and max forces per setup, place and velocity"), |w| {
        w.write_record([
            "robot",
            "skin",
            "safety",
            "place",
            "contact",
            "velocity_m_s",
            "count",
            "mean_peak_n",
            "max_peak_n",
            "mean_first_window_n",
            "max_first_window_n",
            "mean_after_window_n",
            "max_after_window_n",
        ])?;
        for a in &report.aggregates {
            for v in &a.velocities {
                w.write_record([
                    a.setup.robot.clone(),
                    a.setup.skin.to_string(),
                    a.setup.safety.clone(),
                    a.place.to_string(),
                    a.contact_kind.to_string(),
                    v.velocity.to_string(),
                    v.count.to_string(),
                    v.peak.mean.to_string(),
                    v.peak.max.to_string(),
                    v.first_window.mean.to_string(),
                    v.first_window.max.to_string(),
                    v.after_window.mean.to_string(),
                    v.after_window.max.to_string(),
                ])?;
            }
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct JsonReport<'a> {
    format_version: u32,
    #[serde(flatten)]
    report: &'a Report,
}

fn cell_rows(row: &SafeVelocityRow) -> Vec<(&'static str, String, String)> {
    let mut out = Vec::new();
    let reference = |name: &str, r: Option<super::aggregate::ReferenceVelocities>| {
        r.map(|r| {
            vec![
                (FIRST_WINDOW, name.to_string(), r.first.to_string()),
                (AFTER_WINDOW, name.to_string(), r.after.to_string()),
                (MIN_WINDOW, name.to_string(), r.first.min(r.after).to_string()),
            ]
        })
        .unwrap_or_default()
    };
    out.extend(reference("ts_15066", row.ts));
    out.extend(reference("mod_ts_15066", row.modified_ts));
    for (setup, cells) in &row.setups {
        let column = format!("{}/{}", setup.skin, setup.safety);
        out.push((FIRST_WINDOW, column.clone(), cells.first.to_string()));
        out.push((AFTER_WINDOW, column.clone(), cells.after.to_string()));
        out.push((MIN_WINDOW, column, cells.overall.to_string()));
    }
    out
}

fn safe_csv(report: &Report) -> Result<String> {
    csv_text(&header("maximum safe velocities [m/s]"), |w| {
        w.write_record(["robot", "place", "contact", "window", "column", "value"])?;
        for row in &report.safe_velocities {
            for (window, column, value) in cell_rows(row) {
                w.write_record([
                    row.robot.clone(),
                    row.place.to_string(),
                    row.contact_kind.to_string(),
                    window.to_string(),
                    column,
                    value,
                ])?;
            }
        }
        Ok(())
    })
}

/// `*` marks the window that sets the overall limit of a column.
fn marked(cell: SafeCell, overall: SafeCell) -> String {
    if cell != SafeCell::NoConstraint && cell.cmp_restrictive(&overall) == Ordering::Equal {
        format!("{cell}*")
    } else {
        cell.to_string()
    }
}

fn safe_text(report: &Report) -> String {
    let mut out = header("maximum safe velocities [m/s]; * marks the binding window");
    let mut robots: Vec<&str> = report.safe_velocities.iter().map(|r| r.robot.as_str()).collect();
    robots.dedup();
    for robot in robots {
        let rows: Vec<&SafeVelocityRow> =
            report.safe_velocities.iter().filter(|r| r.robot == robot).collect();
        let mut columns: Vec<String> = Vec::new();
        for r in &rows {
            for (s, _) in &r.setups {
                let c = format!("{}/{}", s.skin, s.safety);
                if !columns.contains(&c) {
                    columns.push(c);
                }
            }
        }
        let mut table: Vec<Vec<String>> = vec![[
            "place", "T", "TS 15066", "mod. TS 15066",
        ]
        .iter()
        .map(|s| s.to_string())
        .chain(columns.iter().cloned())
        .collect()];
        for r in &rows {
            for (i, window) in [FIRST_WINDOW, AFTER_WINDOW].iter().enumerate() {
                let reference = |refs: Option<super::aggregate::ReferenceVelocities>| {
                    refs.map_or("-".to_string(), |x| {
                        let (v, other) = if i == 0 { (x.first, x.after) } else { (x.after, x.first) };
                        if v <= other { format!("{v}*") } else { v.to_string() }
                    })
                };
                let mut line = vec![
                    if i == 0 { r.place.to_string() } else { String::new() },
                    window.to_string(),
                    reference(r.ts),
                    reference(r.modified_ts),
                ];
                for c in &columns {
                    let cell = r
                        .setups
                        .iter()
                        .find(|(s, _)| &format!("{}/{}", s.skin, s.safety) == c)
                        .map_or(String::new(), |(_, cells)| {
                            let cell = if i == 0 { cells.first } else { cells.after };
                            marked(cell, cells.overall)
                        });
                    line.push(cell);
                }
                table.push(line);
            }
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|c| table.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
            .collect();
        let _ = writeln!(out, "\n{robot}");
        for row in &table {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
    }
    out
}

fn change_csv(changes: &[ForceChangeRow]) -> Result<String> {
    csv_text(&header("mean peak-force change against a no-skin baseline [%]"), |w| {
        w.write_record([
            "robot",
            "baseline_skin",
            "baseline_safety",
            "target_skin",
            "target_safety",
            "contact",
            "place",
            "change_pct",
            "change_pct_rounded",
        ])?;
        for c in changes {
            let places = c
                .change
                .per_place
                .iter()
                .map(|p| (p.place.to_string(), p.percent))
                .chain(std::iter::once(("mean".to_string(), c.change.mean)));
            for (place, pct) in places {
                w.write_record([
                    c.baseline.robot.clone(),
                    c.baseline.skin.to_string(),
                    c.baseline.safety.clone(),
                    c.target.skin.to_string(),
                    c.target.safety.clone(),
                    c.contact_kind.to_string(),
                    place,
                    pct.to_string(),
                    (pct.round() as i64).to_string(),
                ])?;
            }
        }
        Ok(())
    })
}

fn plot_csv(report: &Report) -> Result<String> {
    csv_text(&header("x = velocity [m/s], y = force [N] per series"), |w| {
        w.write_record(["series", "metric", "velocity_m_s", "value"])?;
        for a in &report.aggregates {
            let series = format!("{}/p{}", a.setup, a.place);
            for (metric, pick) in [
                ("mean_peak_n", (|v: &super::VelocityStats| v.peak.mean) as fn(&_) -> f64),
                ("max_first_window_n", |v| v.first_window.max),
                ("max_after_window_n", |v| v.after_window.max),
            ] {
                for v in &a.velocities {
                    w.write_record([
                        series.clone(),
                        metric.to_string(),
                        v.velocity.to_string(),
                        pick(v).to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })
}

/// Writes all report files into `dir` and returns their paths.
pub fn render_tables(report: &Report, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let json = serde_json::to_string_pretty(&JsonReport {
        format_version: FORMAT_VERSION,
        report,
    })? + "\n";
    let files = [
        ("aggregates.csv", aggregates_csv(report)?),
        ("aggregates.json", json),
        ("safe_velocities.csv", safe_csv(report)?),
        ("safe_velocities.txt", safe_text(report)),
        ("force_change.csv", change_csv(&report.force_changes)?),
        ("plot_data.csv", plot_csv(report)?),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|source| ReportError::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

//! Trace files.
//!
//! Delimited text (comma, semicolon or tab), one sample per line, either
//! `time_s,force_N` or a single `force_N` column. `#` lines are comments;
//! a comment of the form `# sample_rate_hz=1000` declares the sample rate,
//! which is required for single-column files and takes precedence over the
//! time column otherwise. `# onset_threshold_n=20` overrides the onset
//! threshold. An optional non-numeric header row is skipped.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::metrics::CollisionMetrics;
use super::{ForceTrace, Result, TraceError};

const RATE_KEY: &str = "sample_rate_hz";
const ONSET_KEY: &str = "onset_threshold_n";

/// Relative tolerance on time-column spacing.
const SPACING_TOLERANCE: f64 = 0.01;

pub fn read_trace(path: impl AsRef<Path>, sample_rate: Option<f64>) -> Result<ForceTrace> {
    let text = std::fs::read_to_string(path)?;
    read_trace_str(&text, sample_rate)
}

fn directive(line: &str, key: &str) -> Option<std::result::Result<f64, String>> {
    let body = line.trim_start_matches('#').trim();
    let (k, v) = body.split_once(['=', ':'])?;
    (k.trim() == key).then(|| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| format!("invalid value for {key}: '{}'", v.trim()))
    })
}

/// Parses trace text. `sample_rate` overrides any declared rate.
pub fn read_trace_str(text: &str, sample_rate: Option<f64>) -> Result<ForceTrace> {
    let mut declared_rate = None;
    let mut onset = ForceTrace::DEFAULT_ONSET_THRESHOLD;
    let mut first_data_line = None;
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            let parse_err = |message| TraceError::Parse { line: i + 1, message };
            if let Some(v) = directive(trimmed, RATE_KEY) {
                declared_rate = Some(v.map_err(parse_err)?);
            } else if let Some(v) = directive(trimmed, ONSET_KEY) {
                onset = v.map_err(parse_err)?;
            }
        } else if !trimmed.is_empty() && first_data_line.is_none() {
            first_data_line = Some(trimmed.to_string());
        }
    }
    let delimiter = match first_data_line.as_deref() {
        Some(l) if l.contains(';') => b';',
        Some(l) if l.contains('\t') => b'\t',
        _ => b',',
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut times = Vec::new();
    let mut forces = Vec::new();
    let mut columns = None;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let fields: Vec<&str> = record.iter().filter(|f| !f.is_empty()).collect();
        if fields.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if columns.is_none() && forces.is_empty() => continue, // header
            Err(_) => {
                return Err(TraceError::Parse {
                    line,
                    message: format!("non-numeric field in {fields:?}"),
                })
            }
        };
        let width = *columns.get_or_insert(values.len());
        if values.len() != width || !(1..=2).contains(&width) {
            return Err(TraceError::Parse {
                line,
                message: format!("expected {width} column(s) (1 or 2), found {}", values.len()),
            });
        }
        if width == 2 {
            times.push(values[0]);
            forces.push(values[1]);
        } else {
            forces.push(values[0]);
        }
    }

    let rate = match (sample_rate.or(declared_rate), times.len()) {
        (Some(rate), n) => {
            if n >= 2 {
                check_spacing(&times, rate)?;
            }
            rate
        }
        (None, n) if n >= 2 => {
            let span = times[n - 1] - times[0];
            let rate = (n - 1) as f64 / span;
            check_spacing(&times, rate)?;
            rate
        }
        _ => {
            return Err(TraceError::Format(
                "sample rate unknown: declare it with '# sample_rate_hz=<Hz>' or pass it explicitly"
                    .into(),
            ))
        }
    };
    ForceTrace::with_settings(rate, forces, onset, ForceTrace::DEFAULT_DURATION_CAP)
}

fn check_spacing(times: &[f64], rate: f64) -> Result<()> {
    let dt = 1.0 / rate;
    for (i, t) in times.iter().enumerate() {
        let expected = times[0] + i as f64 * dt;
        if (t - expected).abs() > SPACING_TOLERANCE * dt {
            return Err(TraceError::Format(format!(
                "sample {i} at t = {t} s does not match a uniform {rate} Hz grid"
            )));
        }
    }
    Ok(())
}

/// Two-column text with the sample-rate and onset directives.
pub fn write_trace_string(trace: &ForceTrace) -> String {
    let mut out = String::with_capacity(trace.len() * 16 + 64);
    let _ = writeln!(out, "# {RATE_KEY}={}", trace.sample_rate());
    let _ = writeln!(out, "# {ONSET_KEY}={}", trace.onset_threshold());
    out.push_str("time_s,force_N\n");
    for (i, f) in trace.samples().iter().enumerate() {
        let _ = writeln!(out, "{:.6},{}", trace.time_of(i), f);
    }
    out
}

pub fn write_trace(path: impl AsRef<Path>, trace: &ForceTrace) -> Result<()> {
    std::fs::write(path, write_trace_string(trace))?;
    Ok(())
}

/// One delimited row per named trace.
pub fn write_metrics_csv<W: Write>(
    writer: W,
    rows: &[(String, CollisionMetrics)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "trace",
        "peak_force_n",
        "peak_time_s",
        "phase1_duration_s",
        "clamping_force_n",
        "impulse_to_peak_ns",
        "estimated_mass_kg",
        "collision_type",
        "max_force_first_500ms_n",
        "max_force_after_500ms_n",
        "reaction_time_s",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (name, m) in rows {
        w.write_record([
            name.clone(),
            m.peak_force.to_string(),
            m.peak_time.to_string(),
            opt(m.phase1_duration),
            opt(m.clamping_force),
            m.impulse_to_peak.to_string(),
            opt(m.estimated_mass),
            m.collision_type.to_string(),
            m.force_in_first_500ms_max.to_string(),
            m.force_after_500ms_max.to_string(),
            opt(m.reaction_time),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_column_with_header() {
        let text = "time_s,force_N\n0.000,25\n0.001,30.5\n0.002,28\n";
        let t = read_trace_str(text, None).unwrap();
        assert!((t.sample_rate() - 1000.0).abs() < 1e-9);
        assert_eq!(t.samples(), &[25.0, 30.5, 28.0]);
    }

    #[test]
    fn single_column_needs_rate() {
        let text = "force_N\n25\n30\n";
        assert!(matches!(read_trace_str(text, None), Err(TraceError::Format(_))));
        let t = read_trace_str(text, Some(500.0)).unwrap();
        assert_eq!(t.sample_rate(), 500.0);
        let declared = format!("# {RATE_KEY}=2000\n{text}");
        assert_eq!(read_trace_str(&declared, None).unwrap().sample_rate(), 2000.0);
    }

    #[test]
    fn semicolon_and_tab_delimiters() {
        let t = read_trace_str("0;21\n0.01;22\n", None).unwrap();
        assert!((t.sample_rate() - 100.0).abs() < 1e-9);
        let t = read_trace_str("0\t21\n0.01\t22\n", None).unwrap();
        assert_eq!(t.samples(), &[21.0, 22.0]);
    }

    #[test]
    fn irregular_spacing_is_rejected() {
        let text = "0,25\n0.001,26\n0.0035,27\n";
        assert!(matches!(read_trace_str(text, None), Err(TraceError::Format(_))));
    }

    #[test]
    fn bad_rows_report_line() {
        let text = "time_s,force_N\n0,25\n0.001,abc\n";
        match read_trace_str(text, None) {
            Err(TraceError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let ragged = "0,25\n0.001\n";
        assert!(matches!(read_trace_str(ragged, None), Err(TraceError::Parse { .. })));
    }

    #[test]
    fn written_trace_reads_back_identically() {
        let samples = vec![20.0, 123.456_789_012_345, 1e-7 + 20.0, 0.1 + 0.2 + 20.0];
        let t = ForceTrace::new(1000.0, samples).unwrap();
        let back = read_trace_str(&write_trace_string(&t), None).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn onset_directive_is_honoured() {
        let text = "# onset_threshold_n=0\n# sample_rate_hz=1000\n0\n5\n";
        let t = read_trace_str(text, None).unwrap();
        assert_eq!(t.onset_threshold(), 0.0);
    }
}

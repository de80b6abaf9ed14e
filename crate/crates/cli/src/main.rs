use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{Point3, Vector3};
use pfl_core::dynamics::{effective_mass, Direction, EffectiveMass, KinematicChain};
use pfl_core::pfl::{
    load_scenario, permissible_velocity, predicted_impact_force, round_velocity, ContactScenario,
    ForcePrediction, LimitWindow, ModelKind, Variant,
};
use pfl_core::report::{
    build_report, ingest, render_tables, Compliance, IngestOptions, ReportOptions,
};
use pfl_core::sim::{simulate, SimScenario};
use pfl_core::trace::{analyze, read_trace, write_metrics_csv, write_trace, AnalysisConfig};
use rayon::prelude::*;
use serde_json::json;

/// Power-and-force-limiting calculator for collaborative robots.
#[derive(Parser, Debug)]
#[command(name = "pfl", version)]
struct Cli {
    /// Output style: human-readable text or one JSON object per line.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    JsonLines,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ComplianceArg {
    WorstOf,
    Mean,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Permissible velocity for a force limit, or impact force at a velocity,
    /// for the standard and the cover-aware model.
    Predict {
        /// Contact scenario (TOML).
        #[arg(long, env = "PFL_SCENARIO")]
        scenario: PathBuf,
        /// Relative impact velocity, m/s.
        #[arg(long, conflicts_with = "force")]
        velocity: Option<f64>,
        /// Force limit, N. Defaults to the body-region limits of both windows.
        #[arg(long)]
        force: Option<f64>,
        /// Contact kind to evaluate, e.g. `mod-quasistatic`. Both models are
        /// always printed; the model part only orders them.
        #[arg(long)]
        variant: Option<Variant>,
    },
    /// Effective mass of a manipulator at a point along a direction.
    Effmass {
        /// Kinematic chain (TOML).
        #[arg(long)]
        chain: PathBuf,
        /// Joint positions, comma separated (rad or m).
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        q: Vec<f64>,
        /// Contact point in world coordinates, m.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        point: Vec<f64>,
        /// Impact direction in world coordinates; normalised before use.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        direction: Vec<f64>,
    },
    /// Metrics for recorded force traces.
    Analyze {
        /// Trace files (CSV). May be repeated.
        #[arg(long = "trace", required = true)]
        traces: Vec<PathBuf>,
        /// Pre-impact velocity, m/s: one for all traces or one per trace.
        #[arg(long)]
        v0: Vec<f64>,
        /// Sample rate for traces without a time column or rate header, Hz.
        #[arg(long)]
        sample_rate: Option<f64>,
    },
    /// Simulate one contact and write its trace and metrics.
    Simulate {
        /// Simulation scenario (TOML).
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's initial velocity, m/s.
        #[arg(long)]
        v0: Option<f64>,
        /// Directory for trace.csv and metrics.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate a measurement corpus into report tables.
    Report {
        /// Corpus directory holding manifest.csv and traces/.
        #[arg(long, env = "PFL_DATASET_DIR")]
        corpus: PathBuf,
        /// Directory for the rendered tables.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ComplianceArg::WorstOf)]
        compliance: ComplianceArg,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

fn data_err(e: impl fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn internal(e: impl fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

type Result<T> = std::result::Result<T, CliError>;

struct Output {
    format: Format,
    out: std::io::StdoutLock<'static>,
}

impl Output {
    fn text(&mut self, line: impl fmt::Display) -> Result<()> {
        writeln!(self.out, "{line}").map_err(internal)
    }

    fn record(&mut self, value: serde_json::Value) -> Result<()> {
        writeln!(self.out, "{value}").map_err(internal)
    }
}

fn models_in_order(variant: Option<Variant>) -> [ModelKind; 2] {
    match variant.map(|v| v.model) {
        Some(ModelKind::Modified) => [ModelKind::Modified, ModelKind::Ts15066],
        _ => [ModelKind::Ts15066, ModelKind::Modified],
    }
}

fn predict(
    out: &mut Output,
    scenario: &Path,
    velocity: Option<f64>,
    force: Option<f64>,
    variant: Option<Variant>,
) -> Result<()> {
    let scenario: ContactScenario = load_scenario(scenario).map_err(data_err)?;
    let contact = variant.map_or(scenario.kind, |v| v.contact);
    let models = models_in_order(variant);

    if let Some(v) = velocity {
        for model in models {
            let variant = Variant::new(model, contact);
            let prediction = predicted_impact_force(&scenario, v, variant).map_err(data_err)?;
            match out.format {
                Format::Text => out.text(format_args!(
                    "{:<16} v = {v} m/s  F = {prediction}",
                    variant.to_string()
                ))?,
                Format::JsonLines => out.record(json!({
                    "variant": variant.to_string(),
                    "velocity_m_s": v,
                    "force_n": prediction.force(),
                    "no_prediction": prediction == ForcePrediction::NoPrediction,
                }))?,
            }
        }
        return Ok(());
    }

    let limits = match force {
        Some(f) => vec![f],
        None => vec![
            scenario.force_limit(LimitWindow::FirstHalfSecond),
            scenario.force_limit(LimitWindow::AfterHalfSecond),
        ],
    };
    for f in limits {
        for model in models {
            let variant = Variant::new(model, contact);
            let mut s = scenario.clone();
            s.kind = contact;
            let v = permissible_velocity(&s, f, variant.uses_skin()).map_err(data_err)?;
            match out.format {
                Format::Text => out.text(format_args!(
                    "{:<16} F = {f} N  v = {:.2} m/s ({v:.4})",
                    variant.to_string(),
                    round_velocity(v)
                ))?,
                Format::JsonLines => out.record(json!({
                    "variant": variant.to_string(),
                    "force_n": f,
                    "velocity_m_s": v,
                    "velocity_rounded_m_s": round_velocity(v),
                }))?,
            }
        }
    }
    Ok(())
}

fn vector3(name: &str, v: &[f64]) -> Result<[f64; 3]> {
    match v {
        [x, y, z] => Ok([*x, *y, *z]),
        _ => Err(CliError::Usage(format!(
            "--{name} needs three comma-separated numbers, got {}",
            v.len()
        ))),
    }
}

fn effmass(
    out: &mut Output,
    chain: &Path,
    q: Vec<f64>,
    point: &[f64],
    direction: &[f64],
) -> Result<()> {
    let chain = KinematicChain::from_toml_file(chain).map_err(data_err)?;
    let [px, py, pz] = vector3("point", point)?;
    let [dx, dy, dz] = vector3("direction", direction)?;
    let norm = (dx * dx + dy * dy + dz * dz).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(CliError::Usage(
            "--direction must be a non-zero vector".into(),
        ));
    }
    let u = Direction::new(Vector3::new(dx, dy, dz) / norm).map_err(data_err)?;
    let m = effective_mass(&chain, &q.into(), &Point3::new(px, py, pz), &u).map_err(data_err)?;
    match out.format {
        Format::Text => match m {
            EffectiveMass::Finite(kg) => out.text(format_args!("effective mass {kg:.4} kg")),
            EffectiveMass::Immobile => {
                out.text("effective mass unbounded (point cannot move along direction)")
            }
        },
        Format::JsonLines => out.record(json!({
            "effective_mass_kg": m.finite(),
            "immobile": m == EffectiveMass::Immobile,
        })),
    }
}

fn analyze_traces(
    out: &mut Output,
    traces: &[PathBuf],
    v0: &[f64],
    sample_rate: Option<f64>,
) -> Result<()> {
    let v0_for = |i: usize| -> Result<Option<f64>> {
        match v0.len() {
            0 => Ok(None),
            1 => Ok(Some(v0[0])),
            n if n == traces.len() => Ok(Some(v0[i])),
            n => Err(CliError::Usage(format!(
                "--v0 given {n} times for {} traces; give it once or once per trace",
                traces.len()
            ))),
        }
    };
    let velocities = (0..traces.len()).map(v0_for).collect::<Result<Vec<_>>>()?;
    let config = AnalysisConfig::default();
    let results: Vec<Result<(String, _)>> = traces
        .par_iter()
        .zip(velocities.par_iter())
        .map(|(path, &v0)| {
            let name = path.display().to_string();
            let trace = read_trace(path, sample_rate)
                .map_err(|e| CliError::Data(format!("{name}: {e}")))?;
            let metrics = analyze(&trace, v0, None, &config)
                .map_err(|e| CliError::Data(format!("{name}: {e}")))?;
            Ok((name, metrics))
        })
        .collect();
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    match out.format {
        Format::Text => write_metrics_csv(&mut out.out, &rows).map_err(internal),
        Format::JsonLines => {
            for (name, metrics) in rows {
                let mut value = serde_json::to_value(&metrics).map_err(internal)?;
                value["trace"] = json!(name);
                out.record(value)?;
            }
            Ok(())
        }
    }
}

fn run_simulation(
    out: &mut Output,
    scenario: &Path,
    v0: Option<f64>,
    dir: Option<&Path>,
) -> Result<()> {
    let text = std::fs::read_to_string(scenario)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", scenario.display())))?;
    let mut s = SimScenario::from_toml_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", scenario.display())))?;
    if let Some(v) = v0 {
        s.v0 = v;
    }
    let result = simulate(&s).map_err(data_err)?;
    let metrics = if result.trace.is_empty() {
        None
    } else {
        Some(
            analyze(&result.trace, Some(s.v0), None, &AnalysisConfig::default())
                .map_err(data_err)?,
        )
    };
    let summary = json!({
        "v0_m_s": s.v0,
        "peak_force_n": result.peak_force,
        "onset_time_s": result.onset_time,
        "detection_time_s": result.detection_time,
        "impulse_to_rest_ns": result.impulse_to_rest,
        "energy_drift": result.energy_drift,
        "hold_force_n": result.hold_force,
        "samples": result.trace.len(),
        "metrics": metrics,
    });
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        write_trace(dir.join("trace.csv"), &result.trace).map_err(data_err)?;
        let text = serde_json::to_string_pretty(&summary).map_err(internal)? + "\n";
        std::fs::write(dir.join("metrics.json"), text).map_err(data_err)?;
    }
    match out.format {
        Format::JsonLines => out.record(summary),
        Format::Text => {
            out.text(format_args!("peak force      {:.1} N", result.peak_force))?;
            match &metrics {
                None => out.text("no contact above the onset threshold"),
                Some(m) => {
                    out.text(format_args!("collision type  {}", m.collision_type))?;
                    out.text(format_args!("impulse to peak {:.4} N·s", m.impulse_to_peak))?;
                    if let Some(c) = m.clamping_force {
                        out.text(format_args!("clamping force  {c:.1} N"))?;
                    }
                    out.text(format_args!("samples         {}", result.trace.len()))
                }
            }
        }
    }
}

fn report(out: &mut Output, corpus: &Path, dir: &Path, compliance: ComplianceArg) -> Result<()> {
    let records = ingest(corpus, &IngestOptions::default()).map_err(data_err)?;
    let options = ReportOptions {
        compliance: match compliance {
            ComplianceArg::WorstOf => Compliance::WorstOf,
            ComplianceArg::Mean => Compliance::Mean,
        },
        ..ReportOptions::default()
    };
    let report = build_report(&records, &options).map_err(data_err)?;
    let files = render_tables(&report, dir).map_err(data_err)?;
    match out.format {
        Format::Text => {
            out.text(format_args!(
                "{} records, {} setups",
                records.len(),
                report.aggregates.len()
            ))?;
            for f in files {
                out.text(format_args!("wrote {}", f.display()))?;
            }
            Ok(())
        }
        Format::JsonLines => out.record(json!({
            "records": records.len(),
            "aggregates": report.aggregates.len(),
            "files": files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
        })),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut out = Output {
        format: cli.format,
        out: std::io::stdout().lock(),
    };
    match cli.command {
        Command::Predict {
            scenario,
            velocity,
            force,
            variant,
        } => predict(&mut out, &scenario, velocity, force, variant),
        Command::Effmass {
            chain,
            q,
            point,
            direction,
        } => effmass(&mut out, &chain, q, &point, &direction),
        Command::Analyze {
            traces,
            v0,
            sample_rate,
        } => analyze_traces(&mut out, &traces, &v0, sample_rate),
        Command::Simulate {
            scenario,
            v0,
            out: dir,
        } => run_simulation(&mut out, &scenario, v0, dir.as_deref()),
        Command::Report {
            corpus,
            out: dir,
            compliance,
        } => report(&mut out, &corpus, &dir, compliance),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pfl: {e}");
            ExitCode::from(e.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn variant_orders_models() {
        assert_eq!(
            models_in_order(None),
            [ModelKind::Ts15066, ModelKind::Modified]
        );
        assert_eq!(
            models_in_order(Some(Variant::MOD_TRANSIENT)),
            [ModelKind::Modified, ModelKind::Ts15066]
        );
    }

    #[test]
    fn vectors_need_three_components() {
        assert!(vector3("point", &[1.0, 2.0]).is_err());
        assert_eq!(vector3("point", &[1.0, 2.0, 3.0]).unwrap(), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::Usage(String::new()).code(), 1);
        assert_eq!(CliError::Data(String::new()).code(), 2);
        assert_eq!(CliError::Internal(String::new()).code(), 3);
    }
}

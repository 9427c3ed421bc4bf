use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use serde_json::json;

use otdr_split::calibration::{self, compare, CalibrationRecord, EndDetector};
use otdr_split::harness::{self, SequenceName, SequencePlan};
use otdr_split::separator::{self, PEARSON_GATE};
use otdr_split::trace_io;
use otdr_split::waveform::{self, Noise};
use otdr_split::{geo, DeConfig, DesignFile, Error, NetworkDesign, OtdrSettings};

#[derive(Parser)]
#[command(
    name = "otdr-split",
    version,
    about = "Simulate and separate superimposed OTDR traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the aggregate trace of a design.
    Simulate {
        #[arg(long)]
        design: PathBuf,
        /// Post-splitter level of one branch, `id=dB`. Unlisted branches use
        /// the design's nominal level.
        #[arg(long = "y0", value_parser = parse_pair::<f64>)]
        y0: Vec<(u32, f64)>,
        /// Gaussian noise sigma in dB.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit per-branch levels to a measured aggregate trace.
    Separate {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        measured: PathBuf,
        #[arg(long, default_value_t = 100)]
        pop: usize,
        #[arg(long, default_value_t = 400)]
        gens: usize,
        #[arg(long, default_value_t = 0.3)]
        cr: f64,
        #[arg(long, default_value_t = 0.05)]
        eta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        /// Search interval for every level, `lo,hi` in dB.
        #[arg(long, value_parser = parse_bounds, default_value = "-40,0")]
        bounds: (f64, f64),
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run a plug-in sequence and report how well superposition holds.
    Sequence {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        name: SequenceName,
        #[arg(long)]
        report: PathBuf,
        /// Directory with `isolated_<id>.csv` and `step_<n>.csv` captures.
        #[arg(long)]
        measured_dir: Option<PathBuf>,
    },
    /// Compare measured lengths with the design and append them to a database.
    Calibrate {
        #[arg(long)]
        design: PathBuf,
        /// Field trace of one fibre, `id=path`; id 0 is the feeder.
        #[arg(long = "field-trace", value_parser = parse_pair::<PathBuf>, required_unless_present = "measured")]
        field_trace: Vec<(u32, PathBuf)>,
        /// Measured length of one fibre, `id=km`; id 0 is the feeder.
        #[arg(long, value_parser = parse_pair::<f64>)]
        measured: Vec<(u32, f64)>,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Date stamped on the new records, YYYY-MM-DD.
        #[arg(long, value_parser = parse_date)]
        date: NaiveDate,
    },
    /// Map a trace distance on a branch to map coordinates.
    Locate {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        branch: u32,
        /// Distance from the instrument, km.
        #[arg(long)]
        distance: f64,
    },
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<(u32, T), String>
where
    T::Err: std::fmt::Display,
{
    let (id, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected id=value, got {s:?}"))?;
    let id = id.trim().parse().map_err(|e| format!("bad id {id:?}: {e}"))?;
    let value = value
        .trim()
        .parse()
        .map_err(|e| format!("bad value {value:?}: {e}"))?;
    Ok((id, value))
}

fn parse_bounds(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected lo,hi, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
    Ok((lo, hi))
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("bad date {s:?}: {e}"))
}

/// Exit status 1: the inputs were fine but the result is not acceptable.
#[derive(Debug)]
struct DomainFailure(String);

impl std::fmt::Display for DomainFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DomainFailure {}

fn domain(msg: impl Into<String>) -> anyhow::Error {
    DomainFailure(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<DomainFailure>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::UndefinedCorrelation(_)) => 1,
        _ => 2,
    }
}

fn load_design(path: &Path) -> anyhow::Result<(NetworkDesign, OtdrSettings)> {
    Ok(DesignFile::read(path)?.build()?)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn simulate(design: &Path, y0: &[(u32, f64)], noise: f64, seed: u64, out: &Path) -> anyhow::Result<()> {
    let (design, settings) = load_design(design)?;
    let connected = design.connected_ids();
    for (id, _) in y0 {
        if !connected.contains(id) {
            bail!(Error::InvalidInput(format!(
                "--y0 names branch {id}, which is not connected"
            )));
        }
    }
    let mut levels = waveform::nominal_y0(&design, &settings)?;
    for (slot, id) in levels.iter_mut().zip(&connected) {
        if let Some(&(_, v)) = y0.iter().rev().find(|(i, _)| i == id) {
            *slot = v;
        }
    }
    let noise = if noise > 0.0 {
        Noise::gaussian(noise, seed)
    } else {
        Noise::NONE
    };
    let trace = waveform::simulate_network(&design, &levels, &settings, noise)?;
    trace_io::write_trace(out, &trace)?;
    println!("wrote {} samples to {}", trace.len(), out.display());
    Ok(())
}

fn separate(design: &Path, measured: &Path, config: DeConfig, out_dir: &Path) -> anyhow::Result<()> {
    let (design, settings) = load_design(design)?;
    let measured = trace_io::read_trace(measured)?;
    let result = separator::separate(&measured, &design, &settings, &config)?;

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut channels = Vec::new();
    for (id, t) in result.channel_ids.iter().zip(&result.per_channel_traces) {
        trace_io::write_trace(out_dir.join(format!("channel_{id}.csv")), t)?;
        channels.push((*id, t.clone()));
    }
    trace_io::write_trace(out_dir.join("fitted.csv"), &result.fitted_aggregate)?;
    trace_io::export_overlay(
        out_dir.join("overlay.csv"),
        &measured,
        &result.fitted_aggregate,
        &channels,
    )?;

    let levels: serde_json::Map<String, serde_json::Value> = result
        .channel_ids
        .iter()
        .zip(&result.y0_per_channel)
        .map(|(id, y)| (id.to_string(), json!(y)))
        .collect();
    let summary = json!({
        "y0_db": levels,
        "pearson": result.pearson,
        "passed": result.passed(),
        "residual_sse": result.residual_sse,
        "roi": [result.roi.start, result.roi.end],
        "generations": result.generations_used,
        "seed": config.seed,
        "elapsed_s": result.elapsed.as_secs_f64(),
        "ambiguous_pairs": result.ambiguous,
    });
    write_file(
        &out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;

    for (id, y) in result.channel_ids.iter().zip(&result.y0_per_channel) {
        println!("channel {id}: y0 = {y:.4} dB");
    }
    println!(
        "pearson {:.6} over samples [{}, {})",
        result.pearson, result.roi.start, result.roi.end
    );
    for (a, b) in &result.ambiguous {
        eprintln!("warning: branches {a} and {b} end within one dead zone; their levels may trade off");
    }
    if !result.passed() {
        return Err(domain(format!(
            "pearson {:.6} is below the {PEARSON_GATE} gate",
            result.pearson
        )));
    }
    Ok(())
}

fn sequence(
    design: &Path,
    name: SequenceName,
    report: &Path,
    measured_dir: Option<&Path>,
) -> anyhow::Result<()> {
    let (design, settings) = load_design(design)?;
    let plan = SequencePlan::standard(name);
    let reports = match measured_dir {
        None => {
            let ids: Vec<u32> = design.branches.iter().map(|b| b.id).collect();
            let levels = waveform::nominal_y0(&design.with_connected(&ids)?, &settings)?;
            harness::run_sequence(&plan, &design, &settings, &levels)?
        }
        Some(dir) => {
            let mut isolated = BTreeMap::new();
            for id in plan.steps.iter().flatten() {
                if !isolated.contains_key(id) {
                    isolated.insert(*id, trace_io::read_trace(dir.join(format!("isolated_{id}.csv")))?);
                }
            }
            let measured = (1..=plan.steps.len())
                .map(|n| trace_io::read_trace(dir.join(format!("step_{n}.csv"))))
                .collect::<Result<Vec<_>, _>>()?;
            harness::run_sequence_measured(&plan, &design, &settings, &isolated, &measured)?
        }
    };
    write_file(report, harness::report_csv(&reports))?;
    print!("{}", harness::summary(name, &reports));

    let failing: Vec<usize> = reports
        .iter()
        .filter(|r| match measured_dir {
            None => r.max_abs_err_db > 1e-9,
            Some(_) => r.pearson < PEARSON_GATE,
        })
        .map(|r| r.step)
        .collect();
    if !failing.is_empty() {
        return Err(domain(format!(
            "steps {failing:?} do not match their superposition"
        )));
    }
    Ok(())
}

/// Database code and external number of fibre `id`: the feeder is 01, drop
/// branch `n` is `n + 1`.
fn fibre_label(design: &NetworkDesign, id: u32) -> anyhow::Result<(String, u32, f64)> {
    if id == 0 {
        let code = design.feeder_code.clone().unwrap_or_else(|| "FEEDER".to_string());
        return Ok((code, 1, design.feeder_length_km));
    }
    let b = design
        .branch(id)
        .ok_or_else(|| anyhow!(Error::InvalidInput(format!("unknown branch id {id}"))))?;
    let code = b.code.clone().unwrap_or_else(|| format!("BRANCH{id:02}"));
    Ok((code, id + 1, b.length_km))
}

fn calibrate(
    design: &Path,
    field_traces: &[(u32, PathBuf)],
    measured: &[(u32, f64)],
    db: &Path,
    report: Option<&Path>,
    date: NaiveDate,
) -> anyhow::Result<()> {
    let (design, _) = load_design(design)?;
    let detector = EndDetector::default();
    let mut lengths: Vec<(u32, f64)> = Vec::new();
    for (id, path) in field_traces {
        let trace = trace_io::read_trace(path)?;
        let (origin, offset) = if *id == 0 {
            (trace.start_km(), trace.start_km())
        } else {
            (design.feeder_length_km, design.feeder_length_km)
        };
        let ends = detector.detect(&trace, origin)?;
        let end = ends
            .first()
            .ok_or_else(|| domain(format!("no fibre end found in {}", path.display())))?;
        lengths.push((*id, end - offset));
    }
    lengths.extend_from_slice(measured);

    let mut records = Vec::new();
    let mut table = String::from("code,branch,measured_km,design_km,diff_km\n");
    for (id, km) in lengths {
        let (code, number, design_km) = fibre_label(&design, id)?;
        let field = CalibrationRecord::new(code.clone(), number, km, date)?;
        let planned = CalibrationRecord::new(code, number, design_km, date)?;
        let diff = compare(&field, &planned)?;
        writeln!(
            table,
            "{},{:02},{:.4},{:.4},{:.4}",
            diff.code, number, diff.measured_km, diff.design_km, diff.diff_km
        )?;
        records.push(field);
    }
    calibration::store(&records, db)?;
    if let Some(path) = report {
        write_file(path, &table)?;
    }
    print!("{table}");
    Ok(())
}

fn locate(design: &Path, branch: u32, distance: f64) -> anyhow::Result<()> {
    let (design, _) = load_design(design)?;
    let [x, y] = geo::locate_event(&design, branch, distance)?;
    println!(
        "{}",
        json!({ "branch": branch, "distance_km": distance, "x": x, "y": y })
    );
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            design,
            y0,
            noise,
            seed,
            out,
        } => simulate(&design, &y0, noise, seed, &out),
        Command::Separate {
            design,
            measured,
            pop,
            gens,
            cr,
            eta,
            seed,
            workers,
            bounds,
            out_dir,
        } => {
            let (d, _) = load_design(&design)?;
            let config = DeConfig {
                population_size: pop,
                generations: gens,
                crossover_rate: cr,
                scale_factor: eta,
                seed,
                workers,
                bounds: vec![bounds; d.connected_count()],
            };
            separate(&design, &measured, config, &out_dir)
        }
        Command::Sequence {
            design,
            name,
            report,
            measured_dir,
        } => sequence(&design, name, &report, measured_dir.as_deref()),
        Command::Calibrate {
            design,
            field_trace,
            measured,
            db,
            report,
            date,
        } => calibrate(&design, &field_trace, &measured, &db, report.as_deref(), date),
        Command::Locate {
            design,
            branch,
            distance,
        } => locate(&design, branch, distance),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

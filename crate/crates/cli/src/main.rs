use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use roadloc::eval::{self, LabelerKind};
use roadloc::libev;
use roadloc::registration::SolverKind;
use roadloc::sim::{self, DirectorySequence, FrameSource, ScenarioSpec, SimError};
use roadloc::PipelineConfig;

#[derive(Parser, Debug)]
#[command(name = "roadloc", version, about = "Road-marking detection and HD-map localization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic scenario (map, trajectory, odometry, scans) from a TOML spec.
    Gen {
        spec: PathBuf,
        out: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the localization pipeline over a scenario directory and write a report.
    Run {
        scenario: PathBuf,
        report: PathBuf,
        #[arg(long, default_value = "sgicp")]
        solver: SolverKind,
        #[arg(long, default_value = "oracle")]
        labeler: LabelerKind,
        /// Pipeline configuration (TOML); unknown keys are rejected.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seeds the local-map discard trials.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print two reports of the same scenario side by side.
    Compare { a: PathBuf, b: PathBuf },
    /// Export the LiBEV raster after frame k as PNG plus pixel and instance indices.
    RasterExport {
        scenario: PathBuf,
        out: PathBuf,
        #[arg(long)]
        frame: usize,
        #[arg(long, default_value = "oracle")]
        labeler: LabelerKind,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

type CmdResult = Result<(), Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<PipelineConfig, Failure> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))
                .map_err(usage)?;
            PipelineConfig::from_toml_str(&text)
                .with_context(|| format!("config {}", p.display()))
                .map_err(usage)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        config.local_map.rng_seed = s;
    }
    config.validate().map_err(usage)?;
    Ok(config)
}

fn open_scenario(dir: &Path) -> Result<DirectorySequence, Failure> {
    DirectorySequence::open(dir)
        .with_context(|| format!("opening scenario {}", dir.display()))
        .map_err(usage)
}

fn cmd_gen(spec_path: &Path, out: &Path, seed: Option<u64>) -> CmdResult {
    let text = std::fs::read_to_string(spec_path)
        .with_context(|| format!("reading spec {}", spec_path.display()))
        .map_err(usage)?;
    let mut spec = ScenarioSpec::from_toml_str(&text).map_err(usage)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate().map_err(usage)?;
    let scenario = sim::build_scenario(&spec).map_err(|e| match e {
        SimError::InvalidSpec { .. } => usage(e),
        other => runtime(other),
    })?;
    sim::write_scenario(out, &scenario)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(runtime)?;
    println!(
        "wrote {} map elements ({} points) and {} frames to {}",
        scenario.map.elements().len(),
        scenario.map.point_count(),
        scenario.trajectory.len(),
        out.display()
    );
    Ok(())
}

fn cmd_run(
    scenario: &Path,
    report: &Path,
    solver: SolverKind,
    labeler: LabelerKind,
    config: Option<&Path>,
    seed: Option<u64>,
) -> CmdResult {
    let config = load_config(config, seed)?;
    let source = open_scenario(scenario)?;
    let rep = eval::run_pipeline(&source, labeler, solver, &config).map_err(runtime)?;
    for f in rep.frames.iter() {
        if let Some(g) = &f.gap {
            eprintln!("frame {}: {g}", f.frame);
        }
    }
    rep.write(report)
        .with_context(|| format!("writing report {}", report.display()))
        .map_err(runtime)?;
    println!("{}", rep.summary_line());
    if let Some(det) = &rep.summary.detection {
        println!("{:<14}{:>8}{:>8}{:>8}", "label", "P", "R", "F1");
        for (label, m) in &det.per_label {
            println!("{:<14}{:>8.3}{:>8.3}{:>8.3}", label.to_string(), m.precision, m.recall, m.f1);
        }
    }
    Ok(())
}

fn cmd_compare(a: &Path, b: &Path) -> CmdResult {
    let sa = eval::read_summary(a).map_err(usage)?;
    let sb = eval::read_summary(b).map_err(usage)?;
    print!("{}", eval::compare(&sa, &sb).map_err(usage)?);
    Ok(())
}

fn cmd_raster_export(
    scenario: &Path,
    out: &Path,
    frame: usize,
    labeler: LabelerKind,
    config: Option<&Path>,
    seed: Option<u64>,
) -> CmdResult {
    let config = load_config(config, seed)?;
    let source = open_scenario(scenario)?;
    if frame >= source.len() {
        return Err(usage(anyhow::anyhow!("frame {frame} out of range (scenario has {} frames)", source.len())));
    }
    let (raster, instances) = eval::raster_at(&source, frame, labeler, &config).map_err(runtime)?;
    libev::write_raster_bundle(&raster, &instances, out)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(runtime)?;
    println!(
        "frame {frame}: {}x{} raster, {} occupied cells, {} instances -> {}",
        raster.width(),
        raster.height(),
        raster.occupied_cells().count(),
        instances.len(),
        out.display()
    );
    Ok(())
}

/// Context chain without causes already spelled out by their parent.
fn render(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !last.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
        last = msg;
    }
    out
}

fn main() -> ExitCode {
    let defaults = format!("Default pipeline configuration:\n\n{}", PipelineConfig::default().to_toml_string());
    let cmd = Cli::command()
        .mut_subcommand("run", |c| c.after_long_help(defaults.clone()))
        .mut_subcommand("raster-export", |c| c.after_long_help(defaults.clone()));
    let cli = match cmd.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::Gen { spec, out, seed } => cmd_gen(spec, out, *seed),
        Command::Run {
            scenario,
            report,
            solver,
            labeler,
            config,
            seed,
        } => cmd_run(scenario, report, *solver, *labeler, config.as_deref(), *seed),
        Command::Compare { a, b } => cmd_compare(a, b),
        Command::RasterExport {
            scenario,
            out,
            frame,
            labeler,
            config,
            seed,
        } => cmd_raster_export(scenario, out, *frame, *labeler, config.as_deref(), *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(1)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use collisim::commands::run;
use collisim::{Command, Grid, RunConfig, RunError};

const UNITS: &str = "All physical quantities are in units of the Rabi frequency Omega; \
times (dt, t-max) are in units of 1/Omega. Ranges are written start:stop:count and \
include both endpoints.";

/// Monitored collision-model simulator for a Rydberg-blockaded qubit chain.
#[derive(Parser, Debug)]
#[command(name = "collisim", version, after_help = UNITS)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Sample quantum trajectories and write outcome records.
    Simulate,
    /// Evolve the average state and write transient order parameters.
    Ensemble,
    /// Scan the s-ensemble over a (V, s) grid.
    PhaseDiagram,
    /// Continuous-time limit: jump trajectories, theta(s), collision limit.
    Lindblad,
    /// Closed-form single-site values and the (Delta, s) scan.
    Singlebody,
    /// Run the validation suite and print a pass/fail table.
    Validate,
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// TOML config file, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Number of sites L.
    #[arg(long = "L", global = true)]
    sites: Option<usize>,
    /// Rabi frequency (sets the unit; normally 1).
    #[arg(long, global = true)]
    omega: Option<f64>,
    /// Interaction V [Omega]; a range for phase-diagram.
    #[arg(long = "V", global = true, allow_hyphen_values = true)]
    v: Option<Grid>,
    /// Measurement rate gamma [Omega].
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Collision time [1/Omega].
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Static detuning Delta [Omega]; a range for singlebody.
    #[arg(long, global = true, allow_hyphen_values = true)]
    delta: Option<Grid>,
    /// Open boundary conditions instead of a ring.
    #[arg(long, global = true)]
    open: bool,
    /// Counting fields s, e.g. -0.5:0.5:41.
    #[arg(long, global = true, allow_hyphen_values = true)]
    s: Option<Grid>,
    /// Collisions per trajectory or transient length.
    #[arg(long = "T", global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    trajectories: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Basis-state index the runs start from (site 0 most significant).
    #[arg(long, global = true)]
    initial: Option<usize>,
    /// Duration of jump trajectories [1/Omega].
    #[arg(long = "t-max", global = true)]
    t_max: Option<f64>,
    /// Correlation offset di,dt (repeatable).
    #[arg(long = "offset", global = true, value_parser = parse_offset)]
    offsets: Vec<(i64, usize)>,
    /// Skip occupation columns.
    #[arg(long = "no-occupations", global = true)]
    no_occupations: bool,
    /// Also write packed binary trajectories.
    #[arg(long, global = true)]
    binary: bool,
    /// Output directory.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Directory for cached Kraus families.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Worker threads (default: $COLLISIM_WORKERS, then all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Exit with status 4 if any grid point fails to converge.
    #[arg(long, global = true)]
    strict: bool,
    /// validate: include the minutes-long criteria.
    #[arg(long, global = true)]
    full: bool,
    /// validate: run only the named criterion (repeatable).
    #[arg(long, global = true)]
    only: Vec<String>,
}

fn parse_offset(text: &str) -> Result<(i64, usize), String> {
    let (a, b) = text.split_once(',').ok_or("expected di,dt")?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

fn command_of(sub: Sub) -> Command {
    match sub {
        Sub::Simulate => Command::Simulate,
        Sub::Ensemble => Command::Ensemble,
        Sub::PhaseDiagram => Command::PhaseDiagram,
        Sub::Lindblad => Command::Lindblad,
        Sub::Singlebody => Command::Singlebody,
        Sub::Validate => Command::Validate,
    }
}

/// File values first, then every flag that was given.
fn resolve(flags: Flags) -> Result<RunConfig, RunError> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {$(if let Some(x) = flags.$flag { cfg.$field = x; })*};
    }
    set!(sites => sites, omega => omega, v => v, gamma => gamma, dt => dt, delta => delta, s => s,
         steps => steps, trajectories => trajectories, seed => seed, initial => initial, t_max => t_max,
         out => output);
    if flags.open {
        cfg.pbc = false;
    }
    if !flags.offsets.is_empty() {
        cfg.offsets = flags.offsets;
    }
    if flags.no_occupations {
        cfg.occupations = false;
    }
    cfg.binary |= flags.binary;
    cfg.strict |= flags.strict;
    cfg.full |= flags.full;
    if flags.cache.is_some() {
        cfg.cache = flags.cache;
    }
    if flags.workers.is_some() {
        cfg.workers = flags.workers;
    }
    if !flags.only.is_empty() {
        cfg.only = flags.only;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = command_of(cli.command);
    let result = resolve(cli.flags).and_then(|cfg| run(command, &cfg)).and_then(|report| {
        for c in &report.checks {
            println!("{:<26} {}  {:>8.1}s  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.seconds, c.detail);
        }
        report.status().map(|_| report)
    });
    match result {
        Ok(report) => {
            eprintln!(
                "{}: {} outputs in {} ({:.1}s, {} workers)",
                command.name(),
                report.manifest.outputs.len(),
                report.manifest.config.output.display(),
                report.manifest.wall_time_seconds,
                report.manifest.workers
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("collisim {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

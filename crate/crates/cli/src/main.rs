use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hebec::config::RunConfig;
use hebec::output::{OutputDir, RunManifest};
use hebec::pipeline::{self, FIGURES};
use hebec::Error;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage error (bad flag, unknown subcommand or figure)
  3  configuration error (unreadable TOML, unknown key, invalid value)
  4  I/O error, or a write outside the output directory
  5  model error (infeasible design, unstable trap, fit failure, ...)
  6  input parse error (corrupt DLD4 stream, malformed CSV)";

/// Metastable-helium BEC apparatus toolkit.
#[derive(Parser, Debug)]
#[command(name = "hebec", version, after_help = EXIT_CODES)]
struct Cli {
    /// TOML configuration; every key is optional.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed, overriding `master_seed`.
    #[arg(long, global = true, env = "HEBEC_SEED", value_name = "U64")]
    seed: Option<u64>,

    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true, env = "HEBEC_OUT", value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full chain from source to reconstructed momenta.
    Run,
    /// Slower target field, coil layout, synthesized field and efficiency.
    DesignSlower,
    /// Collimated beam through the designed slower.
    SimulateSlower,
    /// Trap frequencies, bias-field noise and the stage ledger.
    TrapAnalyze,
    /// Stage ledger and rf evaporation trajectory.
    Evaporate,
    /// Released clouds falling onto the detector plane.
    SimulateDrop,
    /// Drop through the detector read-out into a DLD4 stream.
    Encode,
    /// DLD4 stream to a CSV of raw hits.
    Decode { input: PathBuf },
    /// DLD4 stream to events and momenta.
    Reconstruct { input: PathBuf },
    /// Pair correlation of a momentum CSV.
    Correlate { input: PathBuf },
    /// CSV data for one figure.
    ReproduceFigure {
        #[arg(value_parser = parse_figure)]
        figure: u32,
    },
    /// Print the effective configuration with all defaults.
    ShowConfig,
}

fn parse_figure(s: &str) -> Result<u32, String> {
    let ids = FIGURES.map(|f| f.to_string()).join(", ");
    match s.parse::<u32>() {
        Ok(f) if FIGURES.contains(&f) => Ok(f),
        _ => Err(format!("supported figures: {ids}")),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) => 3,
        Error::Io { .. } | Error::OutsideOutputDir(_) => 4,
        Error::Parse(_) | Error::Csv { .. } => 6,
        _ => 5,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Io { .. } => Error::Config(format!("cannot read {}: {e}", p.display())),
            e => e,
        })?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn configure_threads(n: Option<u32>) -> Result<(), Error> {
    let Some(n) = n else { return Ok(()) };
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n as usize)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    if n > 1 {
        eprintln!("warning: built without the `parallel` feature; --threads {n} ignored");
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<Option<(RunManifest, PathBuf)>, Error> {
    configure_threads(cli.threads)?;
    let cfg = load_config(cli)?;
    if let Command::ShowConfig = cli.command {
        print!("{}", cfg.to_toml()?);
        return Ok(None);
    }
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let m = match &cli.command {
        Command::Run => {
            let run = pipeline::simulate(&cfg)?;
            pipeline::write_run(&run, &cfg, &mut out)?
        }
        Command::DesignSlower => pipeline::cmd_design_slower(&cfg, &mut out)?,
        Command::SimulateSlower => pipeline::cmd_simulate_slower(&cfg, &mut out)?,
        Command::TrapAnalyze => pipeline::cmd_trap_analyze(&cfg, &mut out)?,
        Command::Evaporate => pipeline::cmd_evaporate(&cfg, &mut out)?,
        Command::SimulateDrop => pipeline::cmd_simulate_drop(&cfg, &mut out)?,
        Command::Encode => pipeline::cmd_encode(&cfg, &mut out)?,
        Command::Decode { input } => pipeline::cmd_decode(&cfg, input, &mut out)?,
        Command::Reconstruct { input } => pipeline::cmd_reconstruct(&cfg, input, &mut out)?,
        Command::Correlate { input } => pipeline::cmd_correlate(&cfg, input, &mut out)?,
        Command::ReproduceFigure { figure } => pipeline::reproduce_figure(*figure, &cfg, &mut out)?,
        Command::ShowConfig => unreachable!(),
    };
    Ok(Some((m, cfg.output_dir)))
}

fn report(m: &RunManifest, out: &std::path::Path) {
    println!("{} (seed {}, config {})", m.command, m.seed, &m.config_hash[..12]);
    for (k, v) in &m.summary {
        println!("  {k:<28} {v:.6e}");
    }
    for w in &m.warnings {
        println!("  warning: {w}");
    }
    println!("wrote {} files to {}", m.files.len() + 1, out.display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(Some((m, out))) => {
            report(&m, &out);
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

mod commands;
mod config;
mod error;
mod presets;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Options, Outcome};
use config::{ghz_to_mhz, Loaded};
use error::CliError;

#[derive(Parser)]
#[command(name = "magcpa", version, about = "Coherent perfect absorption in a cavity-magnon system")]
struct Cli {
    /// TOML run configuration; defaults to the built-in reference system.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir; default "out").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Probe band "lo,hi" in GHz.
    #[arg(long, global = true, value_parser = parse_range)]
    freq_range: Option<(f64, f64)>,
    /// RNG seed for synthetic data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Report errors as JSON on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// S-parameters and two-feed output over a frequency band.
    Spectrum,
    /// Parameter sweeps from a built-in figure preset or the config's [[sweep]] sections.
    Sweep {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(presets::FIGURES))]
        figure: Option<String>,
    },
    /// Locate the exceptional-point displacement.
    Ep,
    /// Check the PT conditions and report the CPA frequencies.
    CpaCheck,
    /// Fit a measured spectrum (CSV) with the coupled or Lorentzian model.
    Fit { data: PathBuf },
    /// Write a synthetic spectrum from the [synth] section.
    Synth,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected \"lo,hi\" in GHz")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("empty range {lo},{hi}"));
    }
    Ok((ghz_to_mhz(lo), ghz_to_mhz(hi)))
}

fn load(cli: &Cli) -> Result<Loaded, CliError> {
    match (&cli.command, &cli.config) {
        (Command::Sweep { figure: Some(_) }, Some(_)) => {
            Err(CliError::Config("--figure and --config are mutually exclusive".into()))
        }
        (Command::Sweep { figure: Some(f) }, None) => presets::load(f),
        (_, Some(path)) => config::load(path),
        (_, None) => presets::load("reference"),
    }
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let cfg = load(cli)?;
    let opts = Options {
        freq_range: cli.freq_range,
        seed: cli.seed,
    };
    let outcome = match &cli.command {
        Command::Spectrum => commands::spectrum(&cfg, &opts)?,
        Command::Sweep { .. } => commands::sweep_cmd(&cfg, &opts)?,
        Command::Ep => commands::ep(&cfg)?,
        Command::CpaCheck => commands::cpa_check(&cfg)?,
        Command::Fit { data } => commands::fit(&cfg, data)?,
        Command::Synth => commands::synth(&cfg, &opts)?,
    };
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    commands::write_artifacts(&dir, &outcome.artifacts)?;
    Ok(outcome)
}

fn report(err: &CliError, json: bool) {
    if json {
        eprintln!("{}", err.to_json());
    } else {
        eprintln!("magcpa: {} error: {err}", err.kind());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            if let Some(text) = &outcome.stdout {
                print!("{text}");
            }
            match &outcome.failure {
                Some(err) => {
                    report(err, cli.json_errors);
                    ExitCode::from(err.exit_code() as u8)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(err) => {
            report(&err, cli.json_errors);
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

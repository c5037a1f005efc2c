//! Command-line front end: parse a TOML run configuration, apply flag and
//! environment overrides, execute the protocol, and write the artifacts.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error (parse errors
//! carry the TOML line/column), 3 physics-domain error, 4 under-truncated
//! number basis.

mod config;
mod runs;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Order, Protocol, RunConfig};
use runs::CliError;

/// Trapped-ion motional protocols in time-varying harmonic wells.
#[derive(Parser)]
#[command(name = "ionprep", version, about)]
struct Cli {
    /// Run configuration (TOML). A previous run's summary.toml is accepted
    /// too: its embedded [config] table reproduces that run.
    config: PathBuf,

    /// Write artifacts here instead of the configured output directory
    /// (takes precedence over IONPREP_OUTPUT_DIR).
    #[arg(short, long, value_name = "DIR")]
    output_dir: Option<PathBuf>,

    /// Progress detail on stderr (-v, -vv).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Also run the truncated number-basis cross-check of the protocol.
    #[arg(long)]
    with_oracle: bool,

    /// Override the preparation order of a freq-change run or sweep.
    #[arg(long, value_enum, value_name = "ORDER")]
    order: Option<Order>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let text = fs::read_to_string(&cli.config)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", cli.config.display())))?;
    let mut cfg = config::parse_config(&text, &cli.config).map_err(CliError::Config)?;
    cfg.validate_blocks().map_err(CliError::Config)?;
    if cfg.output.sample_points == 0 {
        return Err(CliError::Config("output.sample_points must be >= 1".into()));
    }

    if let Ok(dir) = std::env::var("IONPREP_OUTPUT_DIR") {
        if !dir.is_empty() {
            cfg.output.directory = PathBuf::from(dir);
        }
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output.directory = dir.clone();
    }
    if cli.with_oracle {
        cfg.with_oracle = true;
    }
    if let Some(order) = cli.order {
        apply_order(&mut cfg, order)?;
    }

    if cli.verbose > 0 {
        eprintln!(
            "protocol {:?}, output {}",
            cfg.protocol,
            cfg.output.directory.display()
        );
    }
    runs::execute(&cfg, cli.verbose)
}

/// `--order` rewrites the resolved config so the summary's embedded copy
/// reproduces the run without the flag.
fn apply_order(cfg: &mut RunConfig, order: Order) -> Result<(), CliError> {
    match cfg.protocol {
        Protocol::FreqChange => {
            let fc = cfg.freq_change.as_mut().expect("validated");
            if !fc.with_preparation {
                return Err(CliError::Config(
                    "--order given but [freq_change] has with_preparation = false".into(),
                ));
            }
            fc.order = Some(order);
        }
        Protocol::SweepFreqChange => {
            let sw = cfg.sweep_freq_change.as_mut().expect("validated");
            if !sw.with_preparation {
                return Err(CliError::Config(
                    "--order given but [sweep_freq_change] has with_preparation = false".into(),
                ));
            }
            sw.order = Some(order);
        }
        Protocol::Separation | Protocol::OracleCrosscheck => {
            return Err(CliError::Config(
                "--order only applies to freq_change and sweep_freq_change runs".into(),
            ));
        }
    }
    Ok(())
}

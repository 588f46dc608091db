use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gsm_home::sim::baud_table::{baud_table, DEFAULT_FOSC_HZ};
use gsm_home::sim::repl::Repl;
use gsm_home::sim::scenario::parse_duration;
use gsm_home::sim::{parse_scenario, run_with, RunOptions, SimConfig};
use gsm_home::time::SimDuration;

#[derive(Parser)]
#[command(version, about = "SMS home-automation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and check its assertions.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Shortest network delay, e.g. `1000ms`.
        #[arg(long, value_parser = duration)]
        sms_delay_min: Option<SimDuration>,
        /// Longest network delay, e.g. `2500ms`.
        #[arg(long, value_parser = duration)]
        sms_delay_max: Option<SimDuration>,
        /// Probability that a reply text is lost.
        #[arg(long)]
        loss_rate: Option<f64>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Play the phone interactively.
    Repl {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print baud settings for each oscillator.
    BaudTable {
        /// Oscillator frequency in Hz; repeat for several columns.
        #[arg(long = "fosc", value_parser = clap::value_parser!(u32).range(1..))]
        fosc: Vec<u32>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

fn duration(s: &str) -> Result<SimDuration, String> {
    parse_duration(s).ok_or_else(|| format!("`{s}` is not a duration like 1500ms"))
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Simulate {
            file,
            seed,
            sms_delay_min,
            sms_delay_max,
            loss_rate,
            format,
        } => {
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{}: {e}", file.display());
                    return ExitCode::from(2);
                }
            };
            let name = file
                .file_stem()
                .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned());
            let scenario = match parse_scenario(&name, &text) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{}: {e}", file.display());
                    return ExitCode::from(2);
                }
            };
            let opts = RunOptions {
                seed,
                delay_min: sms_delay_min,
                delay_max: sms_delay_max,
                loss_rate,
            };
            let report = match run_with(&scenario, &opts) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("{}: {e}", file.display());
                    return ExitCode::from(2);
                }
            };
            match format {
                Format::Text => print!("{}", report.to_text()),
                Format::Json => println!("{}", report.to_json()),
            }
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Repl { seed } => {
            let mut config = SimConfig::default();
            if let Some(seed) = seed {
                config.network.seed = seed;
            }
            let mut repl = match Repl::new(config) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            match repl.run(std::io::stdin().lock(), std::io::stdout().lock()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::BaudTable { fosc, format } => {
            let fosc = if fosc.is_empty() {
                DEFAULT_FOSC_HZ.to_vec()
            } else {
                fosc
            };
            let table = baud_table(&fosc);
            match format {
                Format::Text => print!("{}", table.to_text()),
                Format::Json => println!("{}", table.to_json()),
            }
            ExitCode::SUCCESS
        }
    }
}

//! `sodw`: reproduce figures, run custom evolutions and scans, classify
//! drive settings and run the acceptance suite.

mod commands;
mod config;
mod format;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::ClassifyArgs;
use crate::config::{parse_number, Config, EngineMode};

#[derive(Parser, Debug)]
#[command(name = "sodw", version, about = "Spin-orbit coupled boson in a driven double well")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn number(s: &str) -> Result<f64, String> {
    parse_number(s).map_err(|e| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the data, plot description and metadata of one reference figure.
    Figure {
        /// 1a-1f, 2a-2c, 3a-3d, or `all`
        #[arg(long)]
        id: String,
        /// Output directory (default: $SODW_OUT, else the current directory)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = sodw::figures::DEFAULT_SAMPLES)]
        samples: usize,
    },
    /// Evolve an initial state under a configured drive.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        /// exact, oracle, both or auto; overrides the config file
        #[arg(long)]
        engine: Option<EngineMode>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra `key=value` settings; these win over the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Sweep one parameter and record asymptotic imbalances.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Report which population-control condition a parameter set meets.
    Classify {
        #[arg(long, value_parser = number, allow_hyphen_values = true)]
        beta: Option<f64>,
        #[arg(long = "v", alias = "V", value_parser = number, allow_hyphen_values = true)]
        v: Option<f64>,
        #[arg(long, alias = "Omega", value_parser = number)]
        omega: Option<f64>,
        #[arg(long, value_parser = number, allow_hyphen_values = true)]
        epsilon: Option<f64>,
        #[arg(long, value_parser = number, allow_hyphen_values = true)]
        upsilon: Option<f64>,
        #[arg(long, value_parser = number)]
        chi: Option<f64>,
        #[arg(long, value_parser = number, allow_hyphen_values = true)]
        gamma: Option<f64>,
        #[arg(long, value_parser = number, default_value = "1e-9")]
        tol: f64,
    },
    /// Run the acceptance suite and print one line per criterion.
    Verify {
        /// Run only these criteria (repeatable).
        #[arg(long)]
        only: Vec<u8>,
    },
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("SODW_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn load(path: &PathBuf, overrides: &[String]) -> Result<Config> {
    let mut cfg = Config::load(path)?;
    for kv in overrides {
        cfg.set(kv)?;
    }
    Ok(cfg)
}

fn print_written(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Figure { id, out, samples } => {
            print_written(&commands::figure_cmd(&id, &out_dir(out), samples)?);
        }
        Command::Evolve { config, engine, out, set } => {
            let mut cfg = load(&config, &set)?;
            if let Some(e) = engine {
                cfg.set(&format!("engine={e}"))?;
            }
            let settings = config::evolve_settings(&cfg)?;
            print_written(&commands::evolve_cmd(&settings, &out_dir(out))?);
        }
        Command::Scan { config, out, set } => {
            let cfg = load(&config, &set)?;
            print_written(&commands::scan_cmd(&cfg, &out_dir(out))?);
        }
        Command::Classify { beta, v, omega, epsilon, upsilon, chi, gamma, tol } => {
            let args = ClassifyArgs { beta, v, omega, epsilon, upsilon, chi, gamma, tol };
            for line in commands::classify_report(&args)? {
                println!("{line}");
            }
        }
        Command::Verify { only } => {
            let reports = commands::verify_cmd(&only)?;
            for r in &reports {
                println!("{r}");
            }
            let passed = reports.iter().filter(|r| r.passed).count();
            println!("{passed}/{} criteria passed", reports.len());
            if passed != reports.len() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

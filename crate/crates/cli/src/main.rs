use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hyperwave_cli::{execute, Outcome};
use hyperwave_core::evolve::RunOptions;
use hyperwave_core::{Preset, RunConfig};

#[derive(Parser)]
#[command(name = "hyperwave", version, about = "Evolve the 2D wave/Klein-Gordon model and check hyperboloidal decay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a configuration file.
    Run {
        /// TOML configuration; keys not given come from the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Preset to start from (overrides the file's `preset` key).
        #[arg(long)]
        preset: Option<String>,
        /// Output directory (default: the config's `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        workers: Option<usize>,
        /// Coarse grid (h >= 0.1) and T <= 32.
        #[arg(long)]
        quick: bool,
        /// Print progress to stderr.
        #[arg(long, short)]
        verbose: bool,
    },
    /// Check every vector-field identity on random polynomial fields.
    VerifyIdentities {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Manufactured-solution convergence study.
    Mms {
        /// Number of spacings, starting at h = 0.2 and halving.
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn load(config: Option<&PathBuf>, preset: Option<&str>) -> Result<RunConfig> {
    let preset = preset.map(str::parse::<Preset>).transpose()?;
    let text = match config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    Ok(RunConfig::parse_with(&text, preset)?)
}

fn report(o: &Outcome) -> ExitCode {
    print!("{}", o.verdict.render(&o.title));
    println!("outputs in {}", o.out_dir.display());
    if o.verdict.pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main_inner() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            preset,
            out,
            workers,
            quick,
            verbose,
        } => {
            let mut c = load(config.as_ref(), preset.as_deref())?;
            if let Some(w) = workers {
                c.workers = w;
            }
            if quick {
                c.make_quick();
                c.validate()?;
            }
            let dir = out.unwrap_or_else(|| c.output.dir.clone());
            let opts = RunOptions {
                progress: verbose,
                ..Default::default()
            };
            Ok(report(&execute(&c, &dir, &opts)?))
        }
        Command::VerifyIdentities { out } => {
            let c = Preset::Identities.config();
            let dir = out.unwrap_or_else(|| PathBuf::from("out/identities"));
            Ok(report(&execute(&c, &dir, &RunOptions::default())?))
        }
        Command::Mms { levels, out, workers } => {
            if !(2..=5).contains(&levels) {
                bail!("--levels must be between 2 and 5");
            }
            let mut c = Preset::Mms.config();
            if let Some(w) = workers {
                c.workers = w;
            }
            let dir = out.unwrap_or_else(|| PathBuf::from("out/mms"));
            let hs: Vec<f64> = (0..levels).map(|k| 0.2 / f64::powi(2.0, k as i32)).collect();
            Ok(report(&hyperwave_cli::execute_mms(&c, &dir, &hs)?))
        }
    }
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use orbiquant::error::Error;
use orbiquant::experiments::{self, ExperimentConfig, ExperimentKind, OutputFormat, Summary};
use orbiquant::group_actions::BUILTIN_ACTIONS;

#[derive(Parser)]
#[command(
    name = "orbiquant",
    version,
    about = "Egorov-type correspondence checks on flat-torus orbifolds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write detail and summary files.
    Run {
        experiment: ExperimentKind,
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to `output.dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `output.format` in the config.
        #[arg(long)]
        format: Option<OutputFormat>,
    },
    /// Parse a config and check its model block.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List experiments and built-in group actions.
    List,
}

const EXIT_GATES: u8 = 1;
const EXIT_ERROR: u8 = 2;

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            experiment,
            config,
            out,
            format,
        } => run(experiment, &config, out, format),
        Command::Validate { config } => match ExperimentConfig::load(&config)
            .and_then(|c| experiments::validate(&c).map(|_| c))
        {
            Ok(c) => {
                println!("ok: {} (seed {})", c.experiment, c.seed);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_ERROR)
            }
        },
        Command::List => {
            println!("experiments:");
            for k in ExperimentKind::ALL {
                println!("  {:<18} {}", k.name(), k.description());
            }
            println!("actions:");
            for (name, what) in BUILTIN_ACTIONS {
                println!("  {name:<18} {what}");
            }
            ExitCode::SUCCESS
        }
    }
}

fn run(
    experiment: ExperimentKind,
    config: &Path,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
) -> ExitCode {
    let cfg = match ExperimentConfig::load(config) {
        Ok(c) => c,
        Err(e) => return fail(experiment, 0, format.unwrap_or_default(), out.as_deref(), e),
    };
    let format = format.unwrap_or(cfg.output.format);
    let Some(dir) = out.or_else(|| cfg.output.dir.clone()) else {
        eprintln!("error: no output directory (pass --out or set output.dir)");
        return ExitCode::from(EXIT_ERROR);
    };
    if cfg.experiment != experiment {
        let e = Error::Config(format!(
            "config is for `{}`, not `{experiment}`",
            cfg.experiment
        ));
        return fail(experiment, cfg.seed, format, Some(&dir), e);
    }
    let summary = match experiments::run(&cfg)
        .and_then(|r| experiments::write_outputs(&r, &cfg, &dir, format))
    {
        Ok(s) => s,
        Err(e) => return fail(experiment, cfg.seed, format, Some(&dir), e),
    };
    for g in &summary.gates {
        println!(
            "[{}] {}",
            if g.passed { "PASS" } else { "FAIL" },
            g.describe()
        );
    }
    if summary.passed {
        ExitCode::SUCCESS
    } else {
        eprintln!(
            "{} gate(s) failed; see {}",
            summary.failures.len(),
            dir.join("summary.json").display()
        );
        ExitCode::from(EXIT_GATES)
    }
}

fn fail(
    experiment: ExperimentKind,
    seed: u64,
    format: OutputFormat,
    dir: Option<&Path>,
    e: Error,
) -> ExitCode {
    eprintln!("error: {e}");
    if let Some(dir) = dir {
        let summary = Summary::from_error(experiment.name(), seed, format, &e);
        if let Err(w) = experiments::write_summary(&summary, dir) {
            eprintln!("error: could not write failure manifest: {w}");
        }
    }
    ExitCode::from(EXIT_ERROR)
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use randqc_cli::{run, Command, ExperimentConfig, RunError};

#[derive(Parser)]
#[command(name = "randqc", version, about = "Random quasiconformal map experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML config; the subcommand's defaults when absent.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override the output directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Also write SVG plots.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve the Beltrami equation for one field.
    Solve(RunArgs),
    /// Chemical-distance ratios over colorings.
    Percolation(RunArgs),
    /// Rectangle and annulus moduli under surface-model fields.
    Modulus(RunArgs),
    /// Deviation of solved maps from linear along a radius ladder.
    Linearity(RunArgs),
    /// Spherical area, characteristic and order fits.
    SurfaceOrder(RunArgs),
    /// Print the default config of a subcommand.
    Init { command: Command },
}

fn execute(command: Command, args: RunArgs) -> Result<(), RunError> {
    let mut config = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default_for(command),
    };
    if config.command != command {
        return Err(RunError::Precondition(format!(
            "config is for `{}`, not `{}`",
            config.command.name(),
            command.name()
        )));
    }
    if let Some(o) = args.output {
        config.output = o;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if args.threads.is_some() {
        config.threads = args.threads;
    }
    config.plot |= args.plot;
    if let Some(n) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Precondition(e.to_string()))?;
    }
    let art = run(&config)?;
    for f in &art.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Sub::Solve(a) => execute(Command::Solve, a),
        Sub::Percolation(a) => execute(Command::Percolation, a),
        Sub::Modulus(a) => execute(Command::Modulus, a),
        Sub::Linearity(a) => execute(Command::Linearity, a),
        Sub::SurfaceOrder(a) => execute(Command::SurfaceOrder, a),
        Sub::Init { command } => ExperimentConfig::default_for(command).to_toml().map(|t| print!("{t}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("randqc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

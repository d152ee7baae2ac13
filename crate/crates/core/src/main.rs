use clap::{Parser, Subcommand};
use perturbed_projections::cli::{
    cmd_dvh, cmd_pert_indices, cmd_reproduce, cmd_run, ExperimentSpec, Report,
};
use perturbed_projections::experiments::Table;
use perturbed_projections::Result;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pproj",
    version,
    about = "Perturbed subgradient projection experiments"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized problem generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent solves.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rerun a reference table and grade it.
    Reproduce { table: Table },
    /// Run a key = value experiment spec.
    Run { spec: PathBuf },
    /// Dose volume histograms of a solution.
    Dvh {
        solution: PathBuf,
        model_dir: PathBuf,
    },
    /// Perturbed iteration indices of a trace.
    PertIndices { trace: PathBuf },
}

fn execute(cli: Cli) -> Result<Report> {
    let out = cli.out.clone();
    let out_or = |default: PathBuf| out.clone().unwrap_or(default);
    match cli.command {
        Command::Reproduce { table } => cmd_reproduce(table, &out_or("out".into()), cli.threads),
        Command::Run { spec } => {
            let spec = ExperimentSpec::load(&spec)?;
            let dir = out_or(spec.output.clone().unwrap_or_else(|| "out".into()));
            cmd_run(&spec, &dir, cli.seed)
        }
        Command::Dvh {
            solution,
            model_dir,
        } => cmd_dvh(&solution, &model_dir, &out_or("out".into())),
        Command::PertIndices { trace } => cmd_pert_indices(&trace, &out_or("out".into())),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(report) => {
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if report.all_match {
                ExitCode::SUCCESS
            } else {
                eprintln!("measured iterations differ from the reference beyond tolerance");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

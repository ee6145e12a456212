//! `cutfem`: configuration-driven experiments for unfitted P1 finite elements.

mod commands;
mod config;
mod error;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Command, Experiment, Overrides};
use crate::error::CliError;

const AFTER_HELP: &str = "\
Configuration (TOML; every key optional):
  geometry = { kind = \"circle\", center = [0, 0], radius = 0.5 }
           | { kind = \"halfplane\", normal = [nx, ny], offset = c }   (domain: n.x < c)
  bbox = [xmin, ymin, xmax, ymax]        default [-1, -1, 1, 1]
  levels = [8, 16, 32, 64]               mesh subdivisions, strictly increasing
  n = 32                                 single mesh for solve and tau-sweep
  gamma = 0.5, beta = 10, tau = [0.1], family = \"nodal\", m = 1
  quadrature_order = 4, max_path_length = 6, target = \"large\"
  tol = 1e-10, max_iterations, eigen_tol = 1e-6, samples = 200, seed = 42
  problem = { kind = \"cosine\" } | { kind = \"affine\", coefficients = [a, b, c] }
  output_dir = \"out\", dump_matrices = false, verbose = false
Sections [solve], [convergence], [tau_sweep], [condition], [verify] override
top-level keys for one subcommand. Families: nodal, face_gradient, face_l2,
extension_gradient, extension_l2.

Outputs (all CSV files have a header row):
  solve        solution.csv  dof_id,x,y,value
               summary.csv   n,h,dofs,family,m,tau,l2_error,h1_error,iterations,residual
  convergence  convergence.csv family,m,tau,n,h,dofs,l2_error,h1_error,l2_rate,h1_rate,
                             iterations,residual   (+ convergence.gp)
  tau-sweep    tau_sweep.csv n,h,tau,nodal_defect,extension_defect,relative_extension_defect,
                             max_abs,seminorm,l2_error,h1_error,iterations,residual
               tau_sweep_summary.csv quantity,loglog_slope_vs_tau   (+ tau_sweep.gp)
  condition    condition.csv family,m,tau,n,h,dofs,lambda_min,lambda_max,kappa,
                             power_iterations,inverse_iterations
               condition_summary.csv tau,kappa_slope_vs_h   (+ condition.gp)
  verify       verify.csv    check,level,status,detail
               assumptions_n<N>.csv element_id,violation_kind,path_length
  every run    <command>_metadata.csv key,value
  --dump-matrices  system_<tag>.csv and stabilization_<tag>.csv (row,col,value),
                   load_<tag>.csv (index,value)

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical failure.";

#[derive(Debug, Parser)]
#[command(name = "cutfem", version, about = "Unfitted P1 finite element experiments for the Poisson problem", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Also write the assembled matrices and load vectors.
    #[arg(long, global = true)]
    dump_matrices: bool,

    /// Seed of the random test vectors and eigenvalue start blocks.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Progress messages on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Solve on one mesh and write the solution and error summary.
    Solve,
    /// Refinement study with observed rates for every tau.
    Convergence,
    /// Nodal-penalty limit study over large tau.
    TauSweep,
    /// Condition numbers per level and tau.
    Condition,
    /// Diagnostic checks; exits 1 if any fails.
    Verify,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let command = match cli.command {
        Cmd::Solve => Command::Solve,
        Cmd::Convergence => Command::Convergence,
        Cmd::TauSweep => Command::TauSweep,
        Cmd::Condition => Command::Condition,
        Cmd::Verify => Command::Verify,
    };
    let overrides = Overrides {
        output_dir: cli.out,
        dump_matrices: cli.dump_matrices,
        seed: cli.seed,
        verbose: cli.verbose,
    };
    let exp = Experiment::from_file(command, cli.config.as_deref(), &overrides)?;
    match command {
        Command::Solve => commands::solve(&exp),
        Command::Convergence => commands::convergence(&exp),
        Command::TauSweep => commands::tau_sweep_cmd(&exp),
        Command::Condition => commands::condition(&exp),
        Command::Verify => verify::verify(&exp),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

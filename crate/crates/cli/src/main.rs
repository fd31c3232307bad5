mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ocpstab_core::{Scheme, SchemeKind};

use crate::commands::SweepRequest;
use crate::error::CliError;

const AFTER_HELP: &str = "\
CSV files are comma-separated with a header row and LF line endings; floats
carry 17 significant digits.

  solve-linear  t,v,lambda,u,v_exact,lambda_exact,u_exact,abs_err_v
  sweep         alpha,dt,class_numeric,class_analytic,osc_index,alpha_th
                (rows ordered by dt, then alpha)
  pendulum      t,x1,x2x,x2y,v2x,v2y,u,lambda_norm

Exit codes: 0 success, 1 output failure, 2 configuration error, 3 solver
failure. Errors are reported as JSON on stderr.";

#[derive(Parser)]
#[command(name = "ocpstab", version, about = "Optimal control solvers and discretization stability analysis", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the linear velocity-tracking problem and compare with the exact optimum.
    SolveLinear {
        /// JSON with m, b, a, v0, vt, T, alpha and one of N, dt.
        #[arg(long)]
        config: PathBuf,
        /// mp, ie, or a tau value in [0, 0.5].
        #[arg(long, default_value = "mp")]
        scheme: Scheme,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        summary: PathBuf,
    },
    /// Print the stability report of one (alpha, dt) pair as JSON.
    Stability {
        #[arg(long)]
        m: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long, value_parser = parse_kind)]
        scheme: SchemeKind,
    },
    /// Classify a log-spaced (alpha, dt) grid numerically and analytically.
    Sweep {
        #[arg(long, value_parser = parse_kind)]
        scheme: SchemeKind,
        #[arg(long, default_value_t = 1e-5)]
        alpha_min: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha_max: f64,
        #[arg(long, default_value_t = 1e-2)]
        dt_min: f64,
        #[arg(long, default_value_t = 1.0)]
        dt_max: f64,
        /// Points per axis.
        #[arg(long, default_value_t = 64)]
        n: usize,
        /// Worker threads; 0 uses all available cores.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the elastic pendulum problem with the mid-point scheme.
    Pendulum {
        /// JSON with m1, m2, k, a, x_target, T, alpha, optional l0 and one of N, dt.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the alpha in the config.
        #[arg(long)]
        alpha: Option<f64>,
        /// Fail instead of falling back to alpha-continuation when Newton diverges.
        #[arg(long)]
        no_continuation: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        summary: PathBuf,
    },
}

fn parse_kind(s: &str) -> Result<SchemeKind, String> {
    match s {
        "mp" => Ok(SchemeKind::MidPoint),
        "ie" => Ok(SchemeKind::ImplicitEuler),
        _ => Err(format!("expected mp or ie, got {s}")),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SolveLinear { config, scheme, out, summary } => {
            commands::solve_linear(&config, scheme, &out, &summary)
        }
        Command::Stability { m, b, alpha, dt, scheme } => {
            let report = commands::stability(m, b, alpha, dt, scheme)?;
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Io(format!("cannot encode JSON: {e}")))?;
            println!("{text}");
            Ok(())
        }
        Command::Sweep { scheme, alpha_min, alpha_max, dt_min, dt_max, n, jobs, out } => {
            let req = SweepRequest {
                scheme,
                alpha_range: (alpha_min, alpha_max),
                dt_range: (dt_min, dt_max),
                n,
                jobs,
            };
            commands::sweep(&req, &out)
        }
        Command::Pendulum { config, alpha, no_continuation, out, summary } => {
            commands::pendulum(&config, alpha, !no_continuation, &out, &summary)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Config(e.to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

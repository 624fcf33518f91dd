//! `netchoice`: choice shares, ambassadors, cascades, herding, pricing and
//! estimation for recommendation-network choice models.
//!
//! Exit status: 0 success, 1 usage error, 2 invalid input or failed
//! validation, 3 failed computation.

mod commands;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{AmbassadorArgs, Failure, PriceArgs, EXIT_USAGE};
use netchoice::choice::Solver;
use output::{Format, Report};

const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(
    name = "netchoice",
    version,
    about = "Choice models on recommendation networks"
)]
struct Cli {
    /// Model document (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    model: Option<PathBuf>,

    /// Seed for every stochastic command.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,

    /// Worker threads; affects wall time only.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Write output here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverArg {
    Dense,
    Jacobi,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Phase {
    MinSlack,
    MaxMargin,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check row sums and collective decisiveness.
    Validate,
    /// Choice probabilities, choice and decision shares, centrality.
    Shares {
        #[arg(long, value_enum, default_value_t = SolverArg::Dense)]
        solver: SolverArg,
    },
    /// Greedy ambassador selection for one choice.
    Ambassadors {
        #[arg(long, value_name = "ID")]
        choice: String,
        #[arg(long, value_name = "K")]
        budget: usize,
        /// Lazy (CELF) evaluation of marginal gains.
        #[arg(long)]
        lazy: bool,
        /// Compare with exhaustive search.
        #[arg(long)]
        oracle: bool,
        /// Write the model with the selected ambassadors applied.
        #[arg(long, value_name = "FILE")]
        emit_model: Option<PathBuf>,
    },
    /// Monte Carlo random walks or joint cascades.
    Simulate {
        #[arg(long, value_name = "N")]
        samples: usize,
        /// Sample joint outcomes instead of per-agent walks.
        #[arg(long)]
        joint: bool,
        /// Non-activation choice for joint sampling.
        #[arg(long, value_name = "ID")]
        u_choice: Option<String>,
    },
    /// Herd-size moments and urn simulation.
    Herding {
        #[command(subcommand)]
        command: HerdingCommand,
    },
    /// Best responses and equilibria of the discount game.
    Price {
        #[arg(long, value_name = "ID", conflicts_with = "equilibrium")]
        firm: Option<String>,
        #[arg(long)]
        equilibrium: bool,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 0.5)]
        damping: f64,
        #[arg(long, default_value_t = 500)]
        max_rounds: usize,
        /// Discount profile to start from, one value per firm.
        #[arg(long, value_delimiter = ',', value_name = "Z,..")]
        at: Option<Vec<f64>>,
    },
    /// Fit a model to observed choice probabilities.
    Estimate {
        #[arg(long, value_name = "FILE")]
        observed: PathBuf,
        #[arg(long, value_name = "FILE")]
        emit_model: Option<PathBuf>,
    },
    /// Write the estimation LP in CPLEX LP format.
    ExportLp {
        #[arg(long, value_name = "FILE")]
        observed: PathBuf,
        #[arg(long, value_enum, default_value_t = Phase::MinSlack)]
        phase: Phase,
    },
}

#[derive(Subcommand, Debug)]
enum HerdingCommand {
    /// Expected herd-fraction moments for d = 1..dmax, m = 0..mmax.
    Moments {
        #[arg(long, default_value_t = 50)]
        dmax: usize,
        #[arg(long, default_value_t = 10)]
        mmax: usize,
    },
    /// Largest-bin fraction of a Pólya urn.
    Simulate {
        #[arg(long)]
        bins: usize,
        #[arg(long)]
        total: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate => "validate",
        Command::Shares { .. } => "shares",
        Command::Ambassadors { .. } => "ambassadors",
        Command::Simulate { .. } => "simulate",
        Command::Herding {
            command: HerdingCommand::Moments { .. },
        } => "herding moments",
        Command::Herding {
            command: HerdingCommand::Simulate { .. },
        } => "herding simulate",
        Command::Price { .. } => "price",
        Command::Estimate { .. } => "estimate",
        Command::ExportLp { .. } => "export-lp",
    }
}

fn require_model(cli: &Cli) -> Result<&Path, Failure> {
    cli.model.as_deref().ok_or_else(|| {
        Failure::new(
            EXIT_USAGE,
            format!("{} needs --model FILE", command_name(&cli.command)),
        )
    })
}

enum Emitted {
    Report(Report),
    Text(String),
}

fn dispatch(cli: &Cli) -> Result<Emitted, Failure> {
    let report = match &cli.command {
        Command::Validate => commands::validate_cmd(require_model(cli)?),
        Command::Shares { solver } => {
            let solver = match solver {
                SolverArg::Dense => Solver::Dense,
                SolverArg::Jacobi => Solver::Jacobi,
            };
            commands::shares_cmd(require_model(cli)?, solver)
        }
        Command::Ambassadors {
            choice,
            budget,
            lazy,
            oracle,
            emit_model,
        } => commands::ambassadors_cmd(
            require_model(cli)?,
            AmbassadorArgs {
                choice,
                budget: *budget,
                lazy: *lazy,
                oracle: *oracle,
                emit_model: emit_model.as_deref(),
            },
        ),
        Command::Simulate {
            samples,
            joint,
            u_choice,
        } => commands::simulate_cmd(
            require_model(cli)?,
            *samples,
            cli.seed,
            *joint,
            u_choice.as_deref(),
        ),
        Command::Herding {
            command: HerdingCommand::Moments { dmax, mmax },
        } => commands::herding_moments_cmd(*dmax, *mmax),
        Command::Herding {
            command:
                HerdingCommand::Simulate {
                    bins,
                    total,
                    trials,
                },
        } => commands::herding_simulate_cmd(*bins, *total, *trials, cli.seed),
        Command::Price {
            firm,
            equilibrium,
            tol,
            damping,
            max_rounds,
            at,
        } => commands::price_cmd(
            require_model(cli)?,
            PriceArgs {
                firm: firm.as_deref(),
                equilibrium: *equilibrium,
                tol: *tol,
                damping: *damping,
                max_rounds: *max_rounds,
                at: at.as_deref(),
            },
        ),
        Command::Estimate {
            observed,
            emit_model,
        } => commands::estimate_cmd(observed, emit_model.as_deref()),
        Command::ExportLp { observed, phase } => {
            return commands::export_lp_cmd(observed, matches!(phase, Phase::MaxMargin))
                .map(Emitted::Text)
        }
    };
    report.map(Emitted::Report)
}

fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    let result = match &cli.out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    result.map_err(|e| Failure::new(EXIT_USAGE, format!("cannot write output: {e}")))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::new(EXIT_USAGE, "--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    }
    let name = command_name(&cli.command);
    match dispatch(cli) {
        Ok(Emitted::Report(r)) => emit(cli, &r.render(name, cli.format)),
        Ok(Emitted::Text(t)) => emit(cli, &t),
        Err(mut f) => {
            if let Some(r) = f.report.take() {
                emit(cli, &r.render(name, cli.format))?;
            }
            Err(f)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("netchoice: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

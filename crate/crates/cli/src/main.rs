use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tmn_cli::commands::{self, GlobalOptions};
use tmn_disassembler::{TaskKind, EVAL_EPISODES};

#[derive(Parser)]
#[command(
    name = "tmn",
    version,
    about = "Time-window circularity of material networks with a learned disassembler"
)]
struct Cli {
    /// Scenario JSON file (defaults to the bundled perfect-disassembly scenario).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Also write machine-readable output to this CSV file.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Override Δ, the interval in seconds that turns the continuous flow into a mass.
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a scenario, then print the network.
    Validate,
    /// Compute λ for the scenario.
    Lambda {
        /// numeric, closed-form or approx
        #[arg(long, default_value = "numeric")]
        method: String,
    },
    /// Sweep one parameter and print λ and α as CSV.
    Sweep {
        /// s, T_d or m0
        #[arg(long)]
        var: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        steps: usize,
    },
    /// Train a policy on a grid task.
    Train {
        #[arg(long)]
        task: TaskKind,
        /// Environment steps (defaults to the task budget).
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long, default_value = "q-her")]
        learner: String,
        /// Where to save the trained policy.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a saved policy or a named controller.
    Eval {
        #[arg(long)]
        task: TaskKind,
        #[arg(long, conflicts_with = "controller")]
        policy: Option<PathBuf>,
        /// oracle, random or untrained
        #[arg(long)]
        controller: Option<String>,
        #[arg(long, default_value_t = EVAL_EPISODES)]
        episodes: usize,
    },
    /// Train, evaluate and compute λ for each seed.
    Pipeline {
        #[arg(long)]
        task: TaskKind,
        #[arg(long)]
        steps: Option<u64>,
        /// Comma-separated seeds (defaults to --seed).
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value = "q-her")]
        learner: String,
    },
    /// Recompute the published λ tables and compare.
    ReproduceTables {
        /// Read the table scenarios from this directory instead of the bundled copies.
        #[arg(long)]
        scenario_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<(), commands::CliError> {
    let opts = GlobalOptions {
        scenario: cli.scenario,
        seed: cli.seed,
        csv: cli.csv,
        delta: cli.delta,
    };
    match cli.command {
        Command::Validate => commands::cmd_validate(&opts, out).map(drop),
        Command::Lambda { method } => commands::cmd_lambda(&opts, &method, out).map(drop),
        Command::Sweep {
            var,
            from,
            to,
            steps,
        } => commands::cmd_sweep(&opts, &var, from, to, steps, out).map(drop),
        Command::Train {
            task,
            steps,
            learner,
            out: path,
        } => commands::cmd_train(&opts, task, steps, &learner, path.as_deref(), out).map(drop),
        Command::Eval {
            task,
            policy,
            controller,
            episodes,
        } => commands::cmd_eval(
            &opts,
            task,
            policy.as_deref(),
            controller.as_deref(),
            episodes,
            out,
        )
        .map(drop),
        Command::Pipeline {
            task,
            steps,
            seeds,
            learner,
        } => commands::cmd_pipeline(&opts, task, steps, &seeds, &learner, out).map(drop),
        Command::ReproduceTables { scenario_dir } => {
            commands::cmd_reproduce_tables(&opts, scenario_dir.as_deref(), out).map(drop)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            if let commands::CliError::Scenario(s) = &e {
                for f in s.field_errors() {
                    eprintln!("  {}: {}", f.path, f.message);
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

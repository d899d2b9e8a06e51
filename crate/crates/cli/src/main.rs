use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rwre::harness::Centering;
use rwre_cli::{run_to_exit_code, Command, RunOptions};

#[derive(Parser)]
#[command(
    name = "rwre",
    version,
    about = "Quenched random walks in one-dimensional random environments"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Raw hitting times T(n) and positions X(t)
    Simulate(RunArgs),
    /// Environment functionals, conditions and centerings
    Analyze(RunArgs),
    /// Hitting-time CLT against the normal law
    CltHitting(RunArgs),
    /// Position CLT with explicit or implicit centering
    CltPosition(RunArgs),
    /// Law of large numbers
    Lln(RunArgs),
    /// Range-sum conditions, fluctuation series, ergodicity and coupling checks
    Diagnostics(RunArgs),
    /// Series against the exact boundary-value oracle
    OracleCheck(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CenteringArg {
    Explicit,
    Implicit,
}

#[derive(Args)]
struct RunArgs {
    /// Config file, or a manifest from an earlier run
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory
    #[arg(long, value_name = "DIR", default_value = "rwre-out")]
    out: PathBuf,
    /// Master seed; overrides RWRE_SEED and the config
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of CPUs)
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    centering: Option<CenteringArg>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Analyze(a) => (Command::Analyze, a),
        Sub::CltHitting(a) => (Command::CltHitting, a),
        Sub::CltPosition(a) => (Command::CltPosition, a),
        Sub::Lln(a) => (Command::Lln, a),
        Sub::Diagnostics(a) => (Command::Diagnostics, a),
        Sub::OracleCheck(a) => (Command::OracleCheck, a),
    };
    let opts = RunOptions {
        command,
        config: args.config,
        out: args.out,
        seed: args.seed,
        workers: args.workers,
        centering: args.centering.map(|c| match c {
            CenteringArg::Explicit => Centering::Explicit,
            CenteringArg::Implicit => Centering::Implicit,
        }),
    };
    let (code, outcome) = run_to_exit_code(&opts);
    if let Some(o) = outcome {
        match (&o.error, o.verdict) {
            (Some(e), _) => eprintln!("error: {e}"),
            (None, Some(v)) => println!("{}: {:?} ({})", command.name(), v, o.out_dir.display()),
            (None, None) => println!("{}: done ({})", command.name(), o.out_dir.display()),
        }
    }
    ExitCode::from(code as u8)
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use latlab_core::harness::{self, Command, Format, HarnessError, Overrides};

#[derive(Parser)]
#[command(name = "latlab", version, about = "Finite-blocklength latency laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Minimal latency over information block size and SNR
    Bounds(RunArgs),
    /// Average latency of optimal early detection
    EarlyLatency(RunArgs),
    /// List-decoding MSPRT (or binary SPRT) campaigns
    Msprt(RunArgs),
    /// CRC-guided early detection campaigns
    Crc(RunArgs),
    /// OFDM distance-over-time curves, linearity and detection
    Ofdm(RunArgs),
    /// Multi-hop splitting curves, strategy comparison, two-hop AF campaign
    Multihop(RunArgs),
    /// Print the default config document of a command
    Example {
        #[arg(value_enum)]
        command: CommandName,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CommandName {
    Bounds,
    EarlyLatency,
    Msprt,
    Crc,
    Ofdm,
    Multihop,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config document
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output file (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

fn command_of(name: CommandName) -> Command {
    match name {
        CommandName::Bounds => Command::Bounds,
        CommandName::EarlyLatency => Command::EarlyLatency,
        CommandName::Msprt => Command::Msprt,
        CommandName::Crc => Command::Crc,
        CommandName::Ofdm => Command::Ofdm,
        CommandName::Multihop => Command::Multihop,
    }
}

fn execute(command: Command, args: RunArgs) -> Result<bool, HarnessError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", args.config.display())))?;
    let overrides = Overrides {
        seed: args.seed,
        trials: args.trials,
        workers: args.workers,
        out: args.out,
        format: args.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }),
    };
    let env = harness::run(command, &text, &overrides)?;
    env.emit(&mut std::io::stdout().lock())?;
    Ok(!env.all_infeasible())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Bounds(a) => (Command::Bounds, a),
        Cmd::EarlyLatency(a) => (Command::EarlyLatency, a),
        Cmd::Msprt(a) => (Command::Msprt, a),
        Cmd::Crc(a) => (Command::Crc, a),
        Cmd::Ofdm(a) => (Command::Ofdm, a),
        Cmd::Multihop(a) => (Command::Multihop, a),
        Cmd::Example { command } => {
            let doc = harness::example_config(command_of(command));
            println!("{}", serde_json::to_string_pretty(&doc).expect("config serializes"));
            return ExitCode::SUCCESS;
        }
    };
    match execute(command, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("latlab: every cell of the scenario is infeasible");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("latlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `svp`: register confidential contracts on an evidence ledger and prove
//! knowledge of them to a verifier without disclosing their content.

mod commands;
mod output;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use svp_core::{Target, DEFAULT_ROUNDS};

#[derive(Parser, Debug)]
#[command(name = "svp", version, about = "Contract evidence ledger and zero-knowledge proofs of contract possession")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Ledger file (one block per line).
    #[arg(long, global = true, default_value = "ledger.jsonl", env = "SVP_LEDGER")]
    pub ledger: PathBuf,

    /// Group parameters: `toy`, `production`, or a parameter file.
    #[arg(long, global = true, default_value = "production", env = "SVP_PARAMS")]
    pub params: String,

    /// Fixed rng seed for reproducible runs. Only allowed with the toy group.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Proof rounds; soundness error is 2^-k.
    #[arg(short = 'k', long, global = true, default_value_t = DEFAULT_ROUNDS,
          value_parser = clap::value_parser!(u32).range(1..))]
    pub rounds: u32,

    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    pub json: bool,

    /// File that `prove` writes its transcript to.
    #[arg(long, global = true)]
    pub transcript: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a validated group parameter file.
    ParamsGen {
        #[arg(long, value_enum, default_value = "production")]
        profile: Profile,
        /// Search for a fresh safe prime of this size instead of the built-in group.
        #[arg(long)]
        bits: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive evidence for a contract and append it to the ledger.
    Register {
        /// Contract content file.
        #[arg(long)]
        content: PathBuf,
        #[arg(long = "id")]
        contract_id: String,
    },
    /// Prove possession of a registered contract to a remote verifier.
    Prove {
        #[arg(long)]
        connect: String,
        #[arg(long)]
        content: PathBuf,
        #[arg(long = "id")]
        contract_id: String,
        /// `contract` or `term:<label>`.
        #[arg(long, default_value = "contract")]
        target: Target,
    },
    /// Serve verifier sessions against the ledger.
    VerifyServe {
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: SocketAddr,
        /// Exit after this many sessions.
        #[arg(long)]
        max_sessions: Option<usize>,
        /// Store every completed session's transcript here.
        #[arg(long)]
        transcript_dir: Option<PathBuf>,
        /// Per-message timeout in seconds.
        #[arg(long, default_value_t = 30)]
        timeout: u64,
    },
    /// Re-verify a stored transcript against the ledger's evidence.
    VerifyTranscript { path: PathBuf },
    /// Check the ledger's hash chain.
    Audit,
    /// Run a witnessless cheating prover against a registered contract.
    SimulateCheater {
        #[arg(long = "id")]
        contract_id: String,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Toy,
    Production,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let out = output::Output { json: cli.global.json };
    match commands::run(&cli, &out) {
        Ok(code) => code,
        Err(failure) => {
            out.failure(&failure);
            ExitCode::from(failure.code())
        }
    }
}

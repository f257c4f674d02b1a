use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::builder::BoolishValueParser;
use clap::{Args, Parser, Subcommand};
use clawgate::config::{load_policy, parse_list, RunConfig, SubjectKind};
use clawgate::scrub::{default_output, scrub_csv};
use clawgate::run_experiment;
use clawgate_core::audit::{parse_journal, verify_journal, ChainVerdict};
use clawgate_core::detectors::{strict_catalog, widened_catalog};
use clawgate_core::harness::Channel;

/// Adversarial harness for the clawgate runtime gates.
///
/// Without a subcommand, runs the experiment.
#[derive(Parser, Debug)]
#[command(name = "clawgate", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate samples, mediate them through every subject, write artifacts.
    Run(RunArgs),
    /// Redact the content column of a samples CSV with the widened catalog.
    ScrubCsv {
        input: PathBuf,
        /// Defaults to `<stem>.scrubbed.csv` beside the input.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a hash-chained audit journal.
    VerifyJournal { path: PathBuf },
    /// Print the DLP catalog as JSON.
    Catalog {
        #[arg(long)]
        widened: bool,
    },
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Samples per label per (channel, F-category) cell.
    #[arg(long = "n", env = "CLAWGATE_N", default_value_t = 100)]
    n: usize,
    /// Seed string; a random one is drawn and recorded when absent.
    #[arg(long, env = "CLAWGATE_SEED")]
    seed: Option<String>,
    /// Comma-separated channels.
    #[arg(long, env = "CLAWGATE_CHANNELS", default_value = "discord-mock,telegram-mock")]
    channels: String,
    /// Suppress chat posts; statistics only.
    #[arg(long, env = "CLAWGATE_STATS_ONLY", value_parser = BoolishValueParser::new())]
    stats_only: bool,
    /// Boot the witnessed subject without a witness (fail-closed path).
    #[arg(long, env = "CLAWGATE_DISABLE_WITNESS", value_parser = BoolishValueParser::new())]
    disable_witness: bool,
    /// Use the widened DLP catalog.
    #[arg(long, env = "CLAWGATE_WIDENED_DLP", value_parser = BoolishValueParser::new())]
    widened_dlp: bool,
    /// n = 10000 per cell on telegram-mock only.
    #[arg(long, env = "CLAWGATE_STRESS", value_parser = BoolishValueParser::new())]
    stress: bool,
    #[arg(long, env = "CLAWGATE_OUT_DIR", default_value = "clawgate-out")]
    out_dir: PathBuf,
    /// Comma-separated subjects.
    #[arg(long, env = "CLAWGATE_SUBJECTS", default_value = "passthrough,gated,gated-witness")]
    subjects: String,
    /// JSON policy file replacing the built-in channel policy.
    #[arg(long, env = "CLAWGATE_POLICY")]
    policy: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::new(self.out_dir);
        cfg.n_per_cell = self.n;
        cfg.seed = self.seed;
        cfg.channels = parse_list::<Channel>(&self.channels)?;
        cfg.stats_only = self.stats_only;
        cfg.disable_witness = self.disable_witness;
        cfg.widened_dlp = self.widened_dlp;
        cfg.subjects = parse_list::<SubjectKind>(&self.subjects)?;
        cfg.policy = self.policy.as_deref().map(load_policy).transpose()?;
        cfg.print_headline = true;
        if self.stress {
            cfg = cfg.stress();
        }
        Ok(cfg)
    }
}

fn run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let outcome = run_experiment(&args.into_config()?)?;
    if outcome.all_verified() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("chain or witness verification failed; see {}", outcome.report_path.display());
        Ok(ExitCode::FAILURE)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        None => run(cli.run),
        Some(Command::Run(args)) => run(args),
        Some(Command::ScrubCsv { input, out }) => {
            let out = out.unwrap_or_else(|| default_output(&input));
            scrub_csv(&input, &out, &widened_catalog()).map(|()| {
                println!("{}", out.display());
                ExitCode::SUCCESS
            })
        }
        Some(Command::VerifyJournal { path }) => std::fs::read(&path)
            .with_context(|| format!("reading {}", path.display()))
            .map(|bytes| match verify_journal(&bytes) {
                ChainVerdict::Ok => {
                    let n = parse_journal(&bytes).map_or(0, |c| c.len());
                    println!("ok: {n} record(s)");
                    ExitCode::SUCCESS
                }
                ChainVerdict::Broken { first_bad_index } => {
                    println!("broken: first bad record at index {first_bad_index}");
                    ExitCode::FAILURE
                }
            }),
        Some(Command::Catalog { widened }) => {
            let cat = if widened { widened_catalog() } else { strict_catalog() };
            serde_json::to_string_pretty(&cat).map_err(Into::into).map(|s| {
                println!("{s}");
                ExitCode::SUCCESS
            })
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}

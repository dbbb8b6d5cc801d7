use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sentsort::harness::{self, RunConfig, Sorter};
use sentsort::metrics::DEFAULT_LONG_THRESHOLD;
use sentsort::{Error, MissingPolicy, OracleKind};

#[derive(Parser)]
#[command(name = "sentsort", version, about = "Recover sentence order from pairwise constraints and score it")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a shuffle manifest for a corpus.
    Shuffle {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict an order for every document.
    Order(OrderArgs),
    /// Score a predicted-orders file.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Predicted-orders TSV (doc_id, order[, queries, dropped_edges]).
        #[arg(long)]
        orders: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LONG_THRESHOLD)]
        long_threshold: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// JSON report path; the text report is written next to it with a .txt extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate pairwise human preference votes.
    HumanEval {
        /// CSV with header story_id,judge_id,choice.
        #[arg(long)]
        annotations: PathBuf,
        /// CSV with header story_id,system_a,system_b[,tokens].
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Gold,
    Noisy,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum SorterArg {
    Topo,
    Merge,
}

#[derive(Clone, Copy, ValueEnum)]
enum MissingArg {
    Strict,
    InputOrder,
}

#[derive(Args)]
struct OrderArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "gold")]
    oracle: OracleArg,
    #[arg(long, default_value_t = 0.0)]
    flip_prob: f64,
    /// Seed for the noisy oracle.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pair prediction TSV for --oracle file.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "topo")]
    sorter: SorterArg,
    #[arg(long, value_enum, default_value = "strict")]
    missing: MissingArg,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

impl OrderArgs {
    fn into_config(self) -> Result<RunConfig, Error> {
        let oracle = match self.oracle {
            OracleArg::Gold => OracleKind::Gold,
            OracleArg::Noisy => OracleKind::Noisy {
                flip_probability: self.flip_prob,
                seed: self.seed,
            },
            OracleArg::File => OracleKind::File(
                self.predictions
                    .ok_or_else(|| Error::Config("--oracle file needs --predictions".into()))?,
            ),
        };
        Ok(RunConfig {
            corpus: Some(self.corpus),
            manifest: Some(self.manifest),
            seed: self.seed,
            oracle,
            sorter: match self.sorter {
                SorterArg::Topo => Sorter::Topo,
                SorterArg::Merge => Sorter::Merge,
            },
            missing: match self.missing {
                MissingArg::Strict => MissingPolicy::Strict,
                MissingArg::InputOrder => MissingPolicy::InputOrder,
            },
            out: Some(self.out),
            jobs: self.jobs,
            ..RunConfig::default()
        })
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Shuffle { corpus, seed, out } => {
            let manifest = harness::cmd_shuffle(&RunConfig {
                corpus: Some(corpus),
                seed,
                out: Some(out.clone()),
                ..RunConfig::default()
            })?;
            eprintln!("wrote {} shuffles to {}", manifest.len(), out.display());
        }
        Command::Order(args) => {
            let config = args.into_config()?;
            let rows = harness::cmd_order(&config)?;
            let dropped: usize = rows.iter().filter_map(|r| r.dropped_edges).sum();
            let queries: usize = rows.iter().filter_map(|r| r.queries).sum();
            eprintln!(
                "ordered {} documents ({queries} queries, {dropped} dropped edges)",
                rows.len()
            );
        }
        Command::Eval {
            corpus,
            manifest,
            orders,
            long_threshold,
            jobs,
            out,
        } => {
            let report = harness::cmd_eval(&RunConfig {
                corpus: Some(corpus),
                manifest: Some(manifest),
                orders: Some(orders),
                long_threshold,
                jobs,
                out,
                ..RunConfig::default()
            })?;
            print!("{}", report.to_text());
        }
        Command::HumanEval {
            annotations,
            labels,
            out,
        } => {
            let report = harness::cmd_human_eval(&annotations, &labels, out.as_deref())?;
            print!("{}", report.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are validation errors (exit 1), not I/O errors (exit 2).
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

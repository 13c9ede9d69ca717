use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use regolith_cli::commands::{
    run_analyze, run_evaluate, run_extract, run_plot, AnalyzeOptions, EvaluateOptions,
    ExtractOptions, PlotKind, PlotOptions,
};
use regolith_cli::error::{AppError, AppResult};
use regolith_cli::gateway::{Gateway, ReplayCache, RetryPolicy, TokenBudget};
use regolith_cli::ingest::DEFAULT_PAGE_DELIMITER;
use regolith_core::evaluate::GroupBy;
use regolith_core::normalize::Unit;

/// Turns a document corpus into composition-interval records via a
/// chat-completion model and scores them against interval ground truth.
#[derive(Parser)]
#[command(name = "regolith", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the extraction pipeline over a corpus directory.
    Extract(ExtractArgs),
    /// Join extracted records against ground truth and score them.
    Evaluate(EvaluateArgs),
    /// Corpus-level analytics over extracted records.
    Analyze(AnalyzeArgs),
    /// Render SVG plots from records, metrics, or the recall matrix.
    Plot(PlotArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// Directory of .txt (form-feed page breaks) or .pdf documents.
    #[arg(long)]
    corpus_dir: PathBuf,
    /// Where records.csv/records.json/manifest.json are written.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Chunk budget in characters; splits respect page boundaries.
    #[arg(long, default_value_t = 25_000)]
    chunk_chars: usize,
    /// Page delimiter in .txt inputs: a single character, or one of
    /// \f, \n, \t.
    #[arg(long, default_value = "\\f", value_parser = parse_delimiter)]
    page_delimiter: char,
    /// Model id sent to the endpoint.
    #[arg(long, default_value = "gpt-4o")]
    model: String,
    /// Sampling temperature.
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// Replay-cache directory (responses stored one file per request).
    #[arg(long, default_value = "cache")]
    cache_dir: PathBuf,
    /// Retry cap per request for transient endpoint failures.
    #[arg(long, default_value_t = 5)]
    max_attempts: u32,
    /// Tokens-per-minute admission budget (no throttling when absent).
    #[arg(long)]
    tokens_per_minute: Option<u64>,
    /// Query the model without document content (comparison baseline).
    #[arg(long)]
    standalone: bool,
    /// Concurrent documents in flight.
    #[arg(long, default_value_t = 4)]
    jobs: usize,
    /// Flag merges whose envelope exceeds this multiple of the longest
    /// input interval.
    #[arg(long, default_value_t = 5.0)]
    wide_merge_multiple: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// records.csv from `extract`.
    #[arg(long)]
    records: PathBuf,
    /// Ground-truth CSV (compound,sample_id,lo,hi,unit).
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Restrict evaluation to one unit (percent = the non-trace subset).
    #[arg(long, value_enum)]
    units: Option<UnitArg>,
    /// Truth midpoints below this get the relative error flagged as
    /// denominator-sensitive.
    #[arg(long, default_value_t = 0.5)]
    rel_err_threshold: f64,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// records.csv from `extract`.
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Compounds occurring this many times or fewer are moved to the
    /// discard list (report-level only).
    #[arg(long, default_value_t = 5)]
    min_occurrences: usize,
    /// Bins in each interval-length histogram.
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

#[derive(Args)]
struct PlotArgs {
    /// What to render.
    #[arg(value_enum)]
    kind: PlotKindArg,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// With-document records.csv (intervals).
    #[arg(long)]
    records: Option<PathBuf>,
    /// Standalone-baseline records.csv (intervals, optional third series).
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Ground-truth CSV (intervals, optional).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// metrics.csv from `evaluate` (box).
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// recall_matrix.csv from `evaluate` (matrix).
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Grouping for box plots.
    #[arg(long, value_enum, default_value_t = GroupByArg::Sample)]
    group_by: GroupByArg,
    /// Restrict interval plots to one compound.
    #[arg(long)]
    compound: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Percent,
    Ppm,
    Ppb,
}

impl From<UnitArg> for Unit {
    fn from(arg: UnitArg) -> Self {
        match arg {
            UnitArg::Percent => Unit::Percent,
            UnitArg::Ppm => Unit::Ppm,
            UnitArg::Ppb => Unit::Ppb,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKindArg {
    Intervals,
    Box,
    Matrix,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GroupByArg {
    Sample,
    Compound,
}

fn parse_delimiter(text: &str) -> Result<char, String> {
    match text {
        "\\f" | "\u{000c}" => Ok(DEFAULT_PAGE_DELIMITER),
        "\\n" | "\n" => Ok('\n'),
        "\\t" | "\t" => Ok('\t'),
        other => {
            let mut chars = other.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(format!(
                    "page delimiter must be a single character or \\f, \\n, \\t; got {other:?}"
                )),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::Extract(args) => {
            let cache = ReplayCache::open(&args.cache_dir)
                .map_err(|err| AppError::config(err.to_string()))?;
            let budget = args.tokens_per_minute.map(TokenBudget::new);
            let retry = RetryPolicy {
                max_attempts: args.max_attempts,
                ..RetryPolicy::default()
            };
            let gateway = Gateway::from_env(cache, budget, retry);
            let options = ExtractOptions {
                corpus_dir: args.corpus_dir,
                out_dir: args.out_dir,
                chunk_chars: args.chunk_chars,
                page_delimiter: args.page_delimiter,
                model: args.model,
                temperature: args.temperature,
                standalone: args.standalone,
                jobs: args.jobs,
                wide_merge_multiple: args.wide_merge_multiple,
            };
            let report = run_extract(&options, &gateway)?;
            let stats = &report.manifest.cache;
            println!(
                "extracted {} records from {} document(s) ({} failed); cache hits {}, network calls {}",
                report.records.len(),
                report.manifest.documents.len(),
                report.manifest.failures.len(),
                stats.hits,
                stats.network_calls,
            );
            println!("records: {}", report.records_csv.display());
            println!("manifest: {}", report.manifest_path.display());
            Ok(())
        }
        Command::Evaluate(args) => {
            let options = EvaluateOptions {
                records: args.records,
                truth: args.truth,
                out_dir: args.out_dir.clone(),
                units: args.units.map(Unit::from),
                rel_err_threshold: args.rel_err_threshold,
            };
            let report = run_evaluate(&options)?;
            println!(
                "matched {}, missed {}, false positives {}",
                report.matched, report.missed, report.false_positives
            );
            for notice in &report.notices {
                println!("notice: {notice}");
            }
            println!("outputs in {}", args.out_dir.display());
            Ok(())
        }
        Command::Analyze(args) => {
            let options = AnalyzeOptions {
                records: args.records,
                out_dir: args.out_dir,
                min_occurrences: args.min_occurrences,
                bins: args.bins,
            };
            let path = run_analyze(&options)?;
            println!("analytics: {}", path.display());
            Ok(())
        }
        Command::Plot(args) => {
            let options = PlotOptions {
                kind: match args.kind {
                    PlotKindArg::Intervals => PlotKind::Intervals,
                    PlotKindArg::Box => PlotKind::Box,
                    PlotKindArg::Matrix => PlotKind::Matrix,
                },
                out_dir: args.out_dir,
                records: args.records,
                baseline: args.baseline,
                truth: args.truth,
                metrics: args.metrics,
                matrix: args.matrix,
                group_by: match args.group_by {
                    GroupByArg::Sample => GroupBy::Sample,
                    GroupByArg::Compound => GroupBy::Compound,
                },
                compound: args.compound,
            };
            for path in run_plot(&options)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

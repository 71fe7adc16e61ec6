use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wikitrend::commands::{
    self, CorrelateConfig, IngestConfig, PairplotConfig, TopConfig,
};
use wikitrend::timeseries::{Period, Resolution};

#[derive(Parser)]
#[command(name = "wikitrend", version, about = "Estimate web-search trends from Wikipedia pageview dumps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ResolutionArg {
    Daily,
    Monthly,
}

impl From<ResolutionArg> for Resolution {
    fn from(r: ResolutionArg) -> Resolution {
        match r {
            ResolutionArg::Daily => Resolution::Daily,
            ResolutionArg::Monthly => Resolution::Monthly,
        }
    }
}

#[derive(Args)]
struct CommonScoreArgs {
    /// Directory of ingested hourly series CSVs (the `series/` output of `ingest`)
    #[arg(long)]
    series: PathBuf,
    /// Comparison resolution
    #[arg(long, value_enum, default_value = "daily")]
    resolution: ResolutionArg,
    /// Minutes added to UTC before assigning hours to local days (e.g. 540 for JST)
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    tz_offset_minutes: i32,
}

#[derive(Subcommand)]
enum Command {
    /// Parse pagecounts dumps into per-keyword hourly series CSVs
    Ingest {
        /// Project code to keep (exact match, e.g. "ja")
        #[arg(long)]
        project: String,
        /// Also match dotted subprojects such as "ja.m"
        #[arg(long)]
        include_project_variants: bool,
        /// Keyword list file, one keyword per line
        #[arg(long)]
        keywords: PathBuf,
        /// Directory of pagecounts-YYYYMMDD-HH0000[.gz] files
        #[arg(long)]
        dumps: PathBuf,
        /// First UTC hour, YYYY-MM-DDTHH
        #[arg(long)]
        from: String,
        /// Last UTC hour (inclusive), YYYY-MM-DDTHH
        #[arg(long)]
        to: String,
        /// Worker threads for file parsing
        #[arg(long, default_value_t = num_workers())]
        jobs: usize,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Omit the generated-at timestamp for byte-identical reruns
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Score ingested series against reference trend CSVs
    Correlate {
        #[arg(long)]
        keywords: PathBuf,
        #[command(flatten)]
        score: CommonScoreArgs,
        /// Directory of reference trend CSVs named <encoded-title>.csv
        #[arg(long)]
        trends: PathBuf,
        /// Rank-bucket width for the bucket and coverage reports
        #[arg(long, default_value_t = 1000)]
        bucket_size: u32,
        /// Mean-daily-views cutoff for the threshold summary (strictly greater)
        #[arg(long, default_value_t = 1000.0)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Write one keyword's aligned, rescaled views next to its reference trend
    Pairplot {
        /// The keyword, as written in the keyword list
        keyword: String,
        #[command(flatten)]
        score: CommonScoreArgs,
        #[arg(long)]
        trends: PathBuf,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Print keywords ranked by total views
    Top {
        #[arg(long)]
        keywords: PathBuf,
        #[command(flatten)]
        score: CommonScoreArgs,
        /// Maximum rows to print
        #[arg(long, default_value_t = 20)]
        limit: usize,
    },
}

fn num_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn parse_hour(text: &str) -> Result<chrono::NaiveDateTime, String> {
    match Period::parse(text, Resolution::Hourly) {
        Ok(Period::Hour(dt)) => Ok(dt),
        _ => Err(format!("expected YYYY-MM-DDTHH, got {text:?}")),
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Ingest {
            project,
            include_project_variants,
            keywords,
            dumps,
            from,
            to,
            jobs,
            out,
            no_timestamp,
        } => {
            let cfg = IngestConfig {
                project,
                include_project_variants,
                keywords,
                dumps,
                from: parse_hour(&from)?,
                to: parse_hour(&to)?,
                jobs,
                out,
                no_timestamp,
            };
            let summary = commands::cmd_ingest(&cfg).map_err(|e| e.to_string())?;
            eprintln!(
                "ingested {} keywords ({} unmatched), {} lines, {} missing hours, {} file errors",
                summary.matched_keywords,
                summary.unmatched_keywords.len(),
                summary.stats.lines_total,
                summary.missing_hours,
                summary.file_errors
            );
            Ok(())
        }
        Command::Correlate { keywords, score, trends, bucket_size, threshold, out, no_timestamp } => {
            let cfg = CorrelateConfig {
                keywords,
                series_dir: score.series,
                trends_dir: trends,
                resolution: score.resolution.into(),
                tz_offset_minutes: score.tz_offset_minutes,
                bucket_size,
                threshold,
                out,
                no_timestamp,
            };
            let summary = commands::cmd_correlate(&cfg).map_err(|e| e.to_string())?;
            eprintln!(
                "scored {} keywords (skipped: {} no series, {} no reference, {} no overlap, {} unresampled)",
                summary.reports.len(),
                summary.skipped_no_series,
                summary.skipped_no_reference,
                summary.skipped_no_overlap,
                summary.skipped_resample
            );
            Ok(())
        }
        Command::Pairplot { keyword, score, trends, out, no_timestamp } => {
            let cfg = PairplotConfig {
                keyword,
                series_dir: score.series,
                trends_dir: trends,
                resolution: score.resolution.into(),
                tz_offset_minutes: score.tz_offset_minutes,
                out,
                no_timestamp,
            };
            let result = commands::cmd_pairplot(&cfg).map_err(|e| e.to_string())?;
            match result.pearson {
                Some(p) => eprintln!("n={} pearson={p} udcr={}", result.n, result.udcr),
                None => eprintln!("n={} pearson=undefined udcr={}", result.n, result.udcr),
            }
            Ok(())
        }
        Command::Top { keywords, score, limit } => {
            let cfg = TopConfig {
                keywords,
                series_dir: score.series,
                resolution: score.resolution.into(),
                tz_offset_minutes: score.tz_offset_minutes,
                limit,
            };
            print!("{}", commands::cmd_top(&cfg).map_err(|e| e.to_string())?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

//! Pipeline orchestration behind the CLI subcommands, plus the file
//! formats that connect the stages.
//!
//! Stage outputs are plain CSV with a `#`-prefixed metadata block so any
//! figure-level number is traceable to its run parameters. Reference trend
//! files are one CSV per keyword (`<encoded-title>.csv`, rows
//! `period,value`), mirroring Google Trends exports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use thiserror::Error;

use crate::analysis::{self, AnalysisError, KeywordReport, RankedKeyword};
use crate::metrics::{self, MetricError};
use crate::pagecounts::{self, HourSpan, IngestError, ProjectFilter};
use crate::timeseries::{self, Period, Resolution, SeriesError, TimeSeries, Units};
use crate::titles::{self, TitleError};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    BadFile { path: PathBuf, message: String },
    #[error("{path}: expected {expected} periods, found {found}")]
    ResolutionMismatch { path: PathBuf, expected: Resolution, found: Resolution },
    #[error("keyword {0:?} has no ingested series")]
    MissingSeries(String),
    #[error("keyword {0:?} has no reference trend series")]
    MissingReference(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Title(#[from] TitleError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CommandError + '_ {
    move |source| CommandError::Io { path: path.to_path_buf(), source }
}

/// Run metadata echoed into every output file.
#[derive(Debug, Clone, Default)]
pub struct Metadata {
    entries: Vec<(String, String)>,
    /// Suppress the wall-clock timestamp so reruns are byte-identical.
    pub no_timestamp: bool,
}

impl Metadata {
    pub fn new(no_timestamp: bool) -> Metadata {
        Metadata { entries: Vec::new(), no_timestamp }
    }

    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    fn header(&self) -> String {
        let mut out = String::new();
        if !self.no_timestamp {
            let _ = writeln!(out, "# generated={}", chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ"));
        }
        for (k, v) in &self.entries {
            let _ = writeln!(out, "# {k}={v}");
        }
        out
    }
}

fn fmt_value(v: f64) -> String {
    // Shortest round-trip representation keeps outputs deterministic and
    // integer raw views free of a decimal point.
    format!("{v}")
}

/// Write a series as `period,value` CSV with a metadata header.
pub fn write_series_csv(path: &Path, series: &TimeSeries, meta: &Metadata) -> Result<(), CommandError> {
    let mut out = meta.header();
    out.push_str("period,value\n");
    for (i, &v) in series.values().iter().enumerate() {
        let _ = writeln!(out, "{},{}", series.period_at(i), fmt_value(v));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Read a `period,value` CSV back into a series, inferring the resolution
/// from the first data row. `#` comment lines and the header are skipped.
pub fn read_series_csv(path: &Path) -> Result<TimeSeries, CommandError> {
    let file = File::open(path).map_err(io_err(path))?;
    let bad = |message: String| CommandError::BadFile { path: path.to_path_buf(), message };
    let mut start: Option<Period> = None;
    let mut values: Vec<f64> = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') || line == "period,value" {
            continue;
        }
        let (period_text, value_text) = line
            .split_once(',')
            .ok_or_else(|| bad(format!("line {}: expected `period,value`", lineno + 1)))?;
        let value: f64 = value_text
            .trim()
            .parse()
            .map_err(|_| bad(format!("line {}: bad value {value_text:?}", lineno + 1)))?;
        match start {
            None => {
                let period = Period::parse_any(period_text)
                    .ok_or_else(|| bad(format!("line {}: bad period {period_text:?}", lineno + 1)))?;
                start = Some(period);
                values.push(value);
            }
            Some(first) => {
                let expected = first.plus(values.len() as i64);
                let period = Period::parse(period_text, first.resolution())
                    .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?;
                if period != expected {
                    return Err(bad(format!(
                        "line {}: period {period} breaks density, expected {expected}",
                        lineno + 1
                    )));
                }
                values.push(value);
            }
        }
    }
    let start = start.ok_or_else(|| bad("no data rows".to_string()))?;
    Ok(TimeSeries::new(start, values, Units::RawViews)?)
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub project: String,
    pub include_project_variants: bool,
    pub keywords: PathBuf,
    pub dumps: PathBuf,
    pub from: NaiveDateTime,
    pub to: NaiveDateTime,
    pub jobs: usize,
    pub out: PathBuf,
    pub no_timestamp: bool,
}

#[derive(Debug)]
pub struct IngestSummary {
    pub matched_keywords: usize,
    pub unmatched_keywords: Vec<String>,
    pub stats: pagecounts::IngestStats,
    pub missing_hours: usize,
    pub file_errors: usize,
}

/// `ingest`: parse the dump directory and persist one hourly series CSV
/// per matched keyword plus a stats summary.
pub fn cmd_ingest(cfg: &IngestConfig) -> Result<IngestSummary, CommandError> {
    let file = File::open(&cfg.keywords).map_err(io_err(&cfg.keywords))?;
    let index = titles::build_index(BufReader::new(file))?;
    let title_filter = index.titles().map(str::to_string).collect();
    let span = HourSpan::new(cfg.from, cfg.to)?;
    let project = ProjectFilter {
        code: cfg.project.clone(),
        include_variants: cfg.include_project_variants,
    };
    let ingest = pagecounts::ingest_directory(&cfg.dumps, span, &project, &title_filter, cfg.jobs)?;

    let series_dir = cfg.out.join("series");
    std::fs::create_dir_all(&series_dir).map_err(io_err(&series_dir))?;
    let mut meta = Metadata::new(cfg.no_timestamp);
    meta.push("command", "ingest");
    meta.push("project", &cfg.project);
    meta.push("from", Period::Hour(cfg.from));
    meta.push("to", Period::Hour(cfg.to));
    for (title, series) in &ingest.series {
        write_series_csv(&series_dir.join(format!("{title}.csv")), series, &meta)?;
    }

    let unmatched: Vec<String> = index
        .entries()
        .iter()
        .filter(|k| !ingest.series.contains_key(&k.normalized_title))
        .map(|k| k.raw.clone())
        .collect();

    let stats_path = cfg.out.join("ingest_stats.txt");
    let mut out = meta.header();
    let s = &ingest.stats;
    let _ = writeln!(out, "files_read={}", s.files_read);
    let _ = writeln!(out, "lines_total={}", s.lines_total);
    let _ = writeln!(out, "lines_matched={}", s.lines_matched);
    let _ = writeln!(out, "lines_malformed={}", s.lines_malformed);
    let _ = writeln!(out, "lines_other_project={}", s.lines_other_project);
    let _ = writeln!(out, "lines_unmatched_title={}", s.lines_unmatched_title());
    let _ = writeln!(out, "matched_keywords={}", ingest.series.len());
    let _ = writeln!(out, "duplicate_keywords={}", index.duplicates.len());
    let _ = writeln!(out, "missing_hours={}", ingest.missing_hours.len());
    for hour in &ingest.missing_hours {
        let _ = writeln!(out, "missing_hour={}", Period::Hour(*hour));
    }
    for path in &ingest.skipped_files {
        let _ = writeln!(out, "skipped_file={}", path.display());
    }
    for (path, error) in &ingest.file_errors {
        let _ = writeln!(out, "file_error={}: {}", path.display(), error);
    }
    for raw in &unmatched {
        let _ = writeln!(out, "unmatched_keyword={raw}");
    }
    std::fs::write(&stats_path, out).map_err(io_err(&stats_path))?;

    Ok(IngestSummary {
        matched_keywords: ingest.series.len(),
        unmatched_keywords: unmatched,
        stats: ingest.stats,
        missing_hours: ingest.missing_hours.len(),
        file_errors: ingest.file_errors.len(),
    })
}

#[derive(Debug, Clone)]
pub struct CorrelateConfig {
    pub keywords: PathBuf,
    pub series_dir: PathBuf,
    pub trends_dir: PathBuf,
    pub resolution: Resolution,
    pub tz_offset_minutes: i32,
    pub bucket_size: u32,
    pub threshold: f64,
    pub out: PathBuf,
    pub no_timestamp: bool,
}

#[derive(Debug)]
pub struct CorrelateSummary {
    pub reports: Vec<KeywordReport>,
    pub skipped_no_reference: usize,
    pub skipped_no_overlap: usize,
    pub skipped_no_series: usize,
    pub skipped_resample: usize,
}

/// Per-keyword resampled views plus bookkeeping shared by `correlate`,
/// `pairplot`, and `top`.
struct ResampledViews {
    views: BTreeMap<String, TimeSeries>,
    mean_daily: BTreeMap<String, f64>,
    no_series: usize,
    resample_failed: usize,
}

fn load_resampled_views(
    index: &titles::KeywordIndex,
    series_dir: &Path,
    resolution: Resolution,
    tz_offset_minutes: i32,
) -> Result<ResampledViews, CommandError> {
    let mut out = ResampledViews {
        views: BTreeMap::new(),
        mean_daily: BTreeMap::new(),
        no_series: 0,
        resample_failed: 0,
    };
    for keyword in index.entries() {
        let path = series_dir.join(format!("{}.csv", keyword.normalized_title));
        if !path.is_file() {
            out.no_series += 1;
            continue;
        }
        let hourly = read_series_csv(&path)?;
        let daily = match timeseries::hourly_to_daily(&hourly, tz_offset_minutes) {
            Ok(s) => s,
            Err(SeriesError::NoCompletePeriod(_)) => {
                out.resample_failed += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let mean_daily = daily.total() / daily.len() as f64;
        let resampled = match resolution {
            Resolution::Daily => daily,
            Resolution::Monthly => match timeseries::daily_to_monthly(&daily) {
                Ok(s) => s,
                Err(SeriesError::NoCompletePeriod(_)) => {
                    out.resample_failed += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            },
            Resolution::Hourly => hourly,
        };
        out.mean_daily.insert(keyword.normalized_title.clone(), mean_daily);
        out.views.insert(keyword.normalized_title.clone(), resampled);
    }
    Ok(out)
}

fn load_trends(
    index: &titles::KeywordIndex,
    trends_dir: &Path,
    resolution: Resolution,
) -> Result<BTreeMap<String, TimeSeries>, CommandError> {
    let mut trends = BTreeMap::new();
    for keyword in index.entries() {
        let path = trends_dir.join(format!("{}.csv", keyword.normalized_title));
        if !path.is_file() {
            continue;
        }
        let series = read_series_csv(&path)?;
        if series.resolution() != resolution {
            return Err(CommandError::ResolutionMismatch {
                path,
                expected: resolution,
                found: series.resolution(),
            });
        }
        trends.insert(keyword.normalized_title.clone(), series);
    }
    Ok(trends)
}

/// `correlate`: score every keyword and write the report, bucket,
/// coverage, and threshold outputs.
pub fn cmd_correlate(cfg: &CorrelateConfig) -> Result<CorrelateSummary, CommandError> {
    let file = File::open(&cfg.keywords).map_err(io_err(&cfg.keywords))?;
    let index = titles::build_index(BufReader::new(file))?;
    let loaded = load_resampled_views(&index, &cfg.series_dir, cfg.resolution, cfg.tz_offset_minutes)?;
    let trends = load_trends(&index, &cfg.trends_dir, cfg.resolution)?;
    let ranks = analysis::rank_keywords(&loaded.views)?;
    let (reports, skips) =
        analysis::correlate_all(&loaded.views, &trends, &ranks, &loaded.mean_daily, cfg.resolution)?;
    let buckets = analysis::bucket_report(&reports, cfg.bucket_size)?;
    let coverage = analysis::coverage_report(&ranks, &trends, cfg.bucket_size)?;
    let threshold = analysis::threshold_report(&reports, cfg.threshold);

    std::fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    let mut meta = Metadata::new(cfg.no_timestamp);
    meta.push("command", "correlate");
    meta.push("resolution", cfg.resolution);
    meta.push("tz_offset_minutes", cfg.tz_offset_minutes);
    meta.push("bucket_size", cfg.bucket_size);
    meta.push("threshold", cfg.threshold);
    meta.push("undefined_pearson_policy", "excluded-from-means");
    meta.push("keywords_total", index.len());
    meta.push("skipped_no_series", loaded.no_series);
    meta.push("skipped_resample", loaded.resample_failed);
    meta.push("skipped_no_reference", skips.no_reference);
    meta.push("skipped_no_overlap", skips.no_overlap);

    // report.csv
    let report_path = cfg.out.join("report.csv");
    let mut out = meta.header();
    out.push_str("keyword,rank,total_views,mean_daily_views,n,pearson,udcr\n");
    for r in &reports {
        let raw = index.by_title(&r.title).map(|k| k.raw.as_str()).unwrap_or(&r.title);
        let pearson = r.pearson.map(fmt_value).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(raw),
            r.access_rank,
            fmt_value(r.total_views),
            fmt_value(r.mean_daily_views),
            r.n,
            pearson,
            fmt_value(r.udcr)
        );
    }
    std::fs::write(&report_path, out).map_err(io_err(&report_path))?;

    // buckets.csv
    let buckets_path = cfg.out.join("buckets.csv");
    let mut out = meta.header();
    out.push_str("rank_lo,rank_hi,keyword_count,trend_data_count,mean_pearson,mean_udcr,excluded_undefined\n");
    for b in &buckets {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            b.rank_lo,
            b.rank_hi,
            b.keyword_count,
            b.trend_data_count,
            b.mean_pearson.map(fmt_value).unwrap_or_default(),
            fmt_value(b.mean_udcr),
            b.excluded_undefined_count
        );
    }
    std::fs::write(&buckets_path, out).map_err(io_err(&buckets_path))?;

    // coverage.csv
    let coverage_path = cfg.out.join("coverage.csv");
    let mut out = meta.header();
    out.push_str("rank_lo,rank_hi,keyword_count,trend_data_count\n");
    for c in &coverage {
        let _ = writeln!(out, "{},{},{},{}", c.rank_lo, c.rank_hi, c.keyword_count, c.trend_data_count);
    }
    std::fs::write(&coverage_path, out).map_err(io_err(&coverage_path))?;

    // threshold.txt
    let threshold_path = cfg.out.join("threshold.txt");
    let mut out = meta.header();
    let _ = writeln!(out, "count={}", threshold.count);
    let _ = writeln!(out, "empty={}", threshold.is_empty());
    if let Some(rank) = threshold.boundary_rank {
        let _ = writeln!(out, "boundary_rank={rank}");
    }
    if let Some(p) = threshold.mean_pearson {
        let _ = writeln!(out, "mean_pearson={}", fmt_value(p));
    }
    if let Some(u) = threshold.mean_udcr {
        let _ = writeln!(out, "mean_udcr={}", fmt_value(u));
    }
    let _ = writeln!(out, "excluded_undefined={}", threshold.excluded_undefined_count);
    std::fs::write(&threshold_path, out).map_err(io_err(&threshold_path))?;

    Ok(CorrelateSummary {
        reports,
        skipped_no_reference: skips.no_reference,
        skipped_no_overlap: skips.no_overlap,
        skipped_no_series: loaded.no_series,
        skipped_resample: loaded.resample_failed,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone)]
pub struct PairplotConfig {
    pub keyword: String,
    pub series_dir: PathBuf,
    pub trends_dir: PathBuf,
    pub resolution: Resolution,
    pub tz_offset_minutes: i32,
    pub out: PathBuf,
    pub no_timestamp: bool,
}

/// `pairplot`: emit one keyword's aligned views (rescaled to the 0..100
/// trend index) and reference values side by side, with the scores as a
/// footer comment.
pub fn cmd_pairplot(cfg: &PairplotConfig) -> Result<metrics::MetricResult, CommandError> {
    let title = titles::normalize_keyword(&cfg.keyword)?;
    let series_path = cfg.series_dir.join(format!("{title}.csv"));
    if !series_path.is_file() {
        return Err(CommandError::MissingSeries(cfg.keyword.clone()));
    }
    let trend_path = cfg.trends_dir.join(format!("{title}.csv"));
    if !trend_path.is_file() {
        return Err(CommandError::MissingReference(cfg.keyword.clone()));
    }
    let hourly = read_series_csv(&series_path)?;
    let daily = timeseries::hourly_to_daily(&hourly, cfg.tz_offset_minutes)?;
    let views = match cfg.resolution {
        Resolution::Daily => daily,
        Resolution::Monthly => timeseries::daily_to_monthly(&daily)?,
        Resolution::Hourly => hourly,
    };
    let trend = read_series_csv(&trend_path)?;
    if trend.resolution() != cfg.resolution {
        return Err(CommandError::ResolutionMismatch {
            path: trend_path,
            expected: cfg.resolution,
            found: trend.resolution(),
        });
    }
    let (views, trend) = timeseries::align(&views, &trend)?;
    let result = metrics::MetricResult {
        n: views.len(),
        pearson: metrics::pearson(views.values(), trend.values())?,
        udcr: metrics::udcr(views.values(), trend.values())?,
    };
    let scaled = timeseries::scale_to_trend_index(&views);

    let mut meta = Metadata::new(cfg.no_timestamp);
    meta.push("command", "pairplot");
    meta.push("keyword", &cfg.keyword);
    meta.push("resolution", cfg.resolution);
    meta.push("tz_offset_minutes", cfg.tz_offset_minutes);
    let mut out = meta.header();
    out.push_str("period,views_scaled,trend\n");
    for i in 0..views.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            views.period_at(i),
            fmt_value(scaled.series.values()[i]),
            fmt_value(trend.values()[i])
        );
    }
    let _ = writeln!(out, "# n={}", result.n);
    let _ = writeln!(out, "# pearson={}", result.pearson.map(fmt_value).unwrap_or_else(|| "undefined".into()));
    let _ = writeln!(out, "# udcr={}", fmt_value(result.udcr));
    if scaled.all_zero {
        let _ = writeln!(out, "# views_all_zero=true");
    }
    std::fs::write(&cfg.out, out).map_err(io_err(&cfg.out))?;
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct TopConfig {
    pub keywords: PathBuf,
    pub series_dir: PathBuf,
    pub resolution: Resolution,
    pub tz_offset_minutes: i32,
    pub limit: usize,
}

/// `top`: rank keywords by total views and render a text table.
pub fn cmd_top(cfg: &TopConfig) -> Result<String, CommandError> {
    let file = File::open(&cfg.keywords).map_err(io_err(&cfg.keywords))?;
    let index = titles::build_index(BufReader::new(file))?;
    let loaded = load_resampled_views(&index, &cfg.series_dir, cfg.resolution, cfg.tz_offset_minutes)?;
    let ranks = analysis::rank_keywords(&loaded.views)?;
    let mut out = String::from("rank\ttotal_views\tkeyword\n");
    for r in ranks.iter().take(cfg.limit) {
        let raw = index.by_title(&r.title).map(|k| k.raw.as_str()).unwrap_or(&r.title);
        let _ = writeln!(out, "{}\t{}\t{}", r.rank, fmt_value(r.total_views), raw);
    }
    Ok(out)
}

/// Ranked keywords with their CLI-facing labels, for callers that need the
/// raw list rather than the rendered table.
pub fn ranked_keywords(cfg: &TopConfig) -> Result<Vec<RankedKeyword>, CommandError> {
    let file = File::open(&cfg.keywords).map_err(io_err(&cfg.keywords))?;
    let index = titles::build_index(BufReader::new(file))?;
    let loaded = load_resampled_views(&index, &cfg.series_dir, cfg.resolution, cfg.tz_offset_minutes)?;
    Ok(analysis::rank_keywords(&loaded.views)?)
}

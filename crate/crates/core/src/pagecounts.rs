//! Streaming parser for hourly Wikimedia pagecounts dumps.
//!
//! Files are named `pagecounts-YYYYMMDD-HH0000` with an optional `.gz`
//! suffix; the name gives the START of the UTC hour covered. Each line is
//! four space-delimited fields: `project title count bytes`, with the
//! title still percent-encoded. Malformed lines are counted and skipped,
//! never fatal.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};
use flate2::bufread::MultiGzDecoder;
use rayon::prelude::*;
use thiserror::Error;

use crate::timeseries::{Period, TimeSeries, Units};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid hour span: {0}..{1}")]
    BadSpan(NaiveDateTime, NaiveDateTime),
    #[error("title filter is empty")]
    EmptyTitleFilter,
    #[error("cannot read directory {path}: {source}")]
    ReadDir { path: PathBuf, source: std::io::Error },
    #[error("no readable pagecounts files in {} for the requested span", .0.display())]
    NoReadableFiles(PathBuf),
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

/// One parsed dump line. The title is kept percent-encoded; decoding is
/// the title-mapping layer's job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PagecountRecord {
    pub project: String,
    pub title: String,
    pub views: u64,
    pub bytes: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed pagecounts line")]
pub struct MalformedLine;

/// UTC hour a dump file covers, taken from its name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HourStamp {
    pub year: i32,
    pub month: u32,
    pub day: u32,
    pub hour: u32,
}

impl HourStamp {
    pub fn to_datetime(self) -> Option<NaiveDateTime> {
        NaiveDate::from_ymd_opt(self.year, self.month, self.day)?.and_hms_opt(self.hour, 0, 0)
    }
}

/// Per-line accounting for an ingest run.
///
/// Every physical line falls in exactly one class: matched, malformed,
/// other-project, or (implicitly, the remainder) unmatched-title.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub files_read: u64,
    pub lines_total: u64,
    pub lines_matched: u64,
    pub lines_malformed: u64,
    pub lines_other_project: u64,
}

impl IngestStats {
    pub fn lines_unmatched_title(&self) -> u64 {
        self.lines_total - self.lines_matched - self.lines_malformed - self.lines_other_project
    }

    fn merge(&mut self, other: &IngestStats) {
        self.files_read += other.files_read;
        self.lines_total += other.lines_total;
        self.lines_matched += other.lines_matched;
        self.lines_malformed += other.lines_malformed;
        self.lines_other_project += other.lines_other_project;
    }
}

/// Project match rule: exact by default (`ja` does not match `ja.m`);
/// `include_variants` widens to dotted subprojects such as mobile.
#[derive(Debug, Clone)]
pub struct ProjectFilter {
    pub code: String,
    pub include_variants: bool,
}

impl ProjectFilter {
    pub fn exact(code: &str) -> ProjectFilter {
        ProjectFilter { code: code.to_string(), include_variants: false }
    }

    pub fn matches(&self, project: &str) -> bool {
        project == self.code
            || (self.include_variants
                && project.len() > self.code.len()
                && project.starts_with(&self.code)
                && project.as_bytes()[self.code.len()] == b'.')
    }
}

/// Parse one dump line. Tolerates a trailing CR.
pub fn parse_line(line: &str) -> Result<PagecountRecord, MalformedLine> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let mut fields = line.split(' ');
    let project = fields.next().ok_or(MalformedLine)?;
    let title = fields.next().ok_or(MalformedLine)?;
    let views = fields.next().ok_or(MalformedLine)?;
    let bytes = fields.next().ok_or(MalformedLine)?;
    if fields.next().is_some() || project.is_empty() || title.is_empty() {
        return Err(MalformedLine);
    }
    Ok(PagecountRecord {
        project: project.to_string(),
        title: title.to_string(),
        views: views.parse().map_err(|_| MalformedLine)?,
        bytes: bytes.parse().map_err(|_| MalformedLine)?,
    })
}

/// Extract the UTC hour from a `pagecounts-YYYYMMDD-HH0000[.gz]` file name.
pub fn hourstamp_from_filename(name: &str) -> Option<HourStamp> {
    let rest = name.strip_prefix("pagecounts-")?;
    let rest = rest.strip_suffix(".gz").unwrap_or(rest);
    let (date, time) = rest.split_once('-')?;
    if date.len() != 8 || time.len() != 6 || !time.ends_with("0000") {
        return None;
    }
    if !date.bytes().all(|b| b.is_ascii_digit()) || !time.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let stamp = HourStamp {
        year: date[..4].parse().ok()?,
        month: date[4..6].parse().ok()?,
        day: date[6..8].parse().ok()?,
        hour: time[..2].parse().ok()?,
    };
    // Reject impossible calendar fields up front.
    stamp.to_datetime()?;
    Some(stamp)
}

/// Result of ingesting a single file: summed views per filtered title.
#[derive(Debug, Default)]
pub struct FileIngest {
    pub views: HashMap<String, u64>,
    pub stats: IngestStats,
}

/// Stream one file (gzip if named `.gz`, plain text otherwise), summing
/// views per title for lines matching the project and title filters. A
/// title may appear more than once in a file; counts are summed.
pub fn ingest_file(
    path: &Path,
    project: &ProjectFilter,
    title_filter: &HashSet<String>,
) -> std::io::Result<FileIngest> {
    if title_filter.is_empty() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "title filter is empty",
        ));
    }
    let file = File::open(path)?;
    let gz = path.extension().is_some_and(|e| e == "gz");
    if gz {
        ingest_reader(BufReader::new(MultiGzDecoder::new(BufReader::new(file))), project, title_filter)
    } else {
        ingest_reader(BufReader::new(file), project, title_filter)
    }
}

fn ingest_reader<R: BufRead>(
    mut reader: R,
    project: &ProjectFilter,
    title_filter: &HashSet<String>,
) -> std::io::Result<FileIngest> {
    let mut out = FileIngest { stats: IngestStats { files_read: 1, ..Default::default() }, ..Default::default() };
    let mut line = String::new();
    loop {
        line.clear();
        // read_line surfaces gzip corruption as an io error mid-stream.
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let trimmed = line.strip_suffix('\n').unwrap_or(&line);
        out.stats.lines_total += 1;
        let record = match parse_line(trimmed) {
            Ok(r) => r,
            Err(MalformedLine) => {
                out.stats.lines_malformed += 1;
                continue;
            }
        };
        if !project.matches(&record.project) {
            out.stats.lines_other_project += 1;
            continue;
        }
        if !title_filter.contains(&record.title) {
            continue;
        }
        out.stats.lines_matched += 1;
        *out.views.entry(record.title).or_insert(0) += record.views;
    }
    Ok(out)
}

/// Inclusive UTC hour range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HourSpan {
    pub first: NaiveDateTime,
    pub last: NaiveDateTime,
}

impl HourSpan {
    pub fn new(first: NaiveDateTime, last: NaiveDateTime) -> Result<HourSpan, IngestError> {
        if last < first {
            return Err(IngestError::BadSpan(first, last));
        }
        Ok(HourSpan { first, last })
    }

    pub fn len(&self) -> usize {
        ((self.last - self.first).num_hours() + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false // first <= last by construction
    }

    fn index_of(&self, hour: NaiveDateTime) -> Option<usize> {
        if hour < self.first || hour > self.last {
            return None;
        }
        Some((hour - self.first).num_hours() as usize)
    }
}

/// Merged result of ingesting a directory of hourly files.
#[derive(Debug)]
pub struct DirectoryIngest {
    /// Dense hourly series per matched encoded title, zero-filled where no
    /// file or no line covered the hour.
    pub series: BTreeMap<String, TimeSeries>,
    pub stats: IngestStats,
    /// Hours in the span with no readable file.
    pub missing_hours: Vec<NaiveDateTime>,
    /// Files whose names did not match the pagecounts pattern.
    pub skipped_files: Vec<PathBuf>,
    /// Files that failed to open or decompress; other files are unaffected.
    pub file_errors: Vec<(PathBuf, String)>,
}

/// Ingest every pagecounts file in `dir` whose hour falls in `span`.
///
/// Files are parsed in parallel (`jobs` workers); per-title sums merge by
/// addition, so worker count and file order never change the result. Fails
/// only if zero files were readable.
pub fn ingest_directory(
    dir: &Path,
    span: HourSpan,
    project: &ProjectFilter,
    title_filter: &HashSet<String>,
    jobs: usize,
) -> Result<DirectoryIngest, IngestError> {
    if title_filter.is_empty() {
        return Err(IngestError::EmptyTitleFilter);
    }
    let mut skipped_files = Vec::new();
    let mut hour_files: Vec<(usize, PathBuf)> = Vec::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|source| IngestError::ReadDir { path: dir.to_path_buf(), source })?;
    for entry in entries {
        let entry = entry.map_err(|source| IngestError::ReadDir { path: dir.to_path_buf(), source })?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let name = entry.file_name();
        let Some(stamp) = name.to_str().and_then(hourstamp_from_filename) else {
            skipped_files.push(path);
            continue;
        };
        let Some(hour) = stamp.to_datetime() else {
            skipped_files.push(path);
            continue;
        };
        if let Some(index) = span.index_of(hour) {
            hour_files.push((index, path));
        }
    }
    hour_files.sort();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| IngestError::Pool(e.to_string()))?;
    let results: Vec<(usize, PathBuf, std::io::Result<FileIngest>)> = pool.install(|| {
        hour_files
            .par_iter()
            .map(|(index, path)| (*index, path.clone(), ingest_file(path, project, title_filter)))
            .collect()
    });

    let n_hours = span.len();
    let mut totals: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    let mut stats = IngestStats::default();
    let mut file_errors = Vec::new();
    let mut covered = vec![false; n_hours];
    for (index, path, result) in results {
        match result {
            Ok(ingest) => {
                covered[index] = true;
                stats.merge(&ingest.stats);
                for (title, views) in ingest.views {
                    totals.entry(title).or_insert_with(|| vec![0; n_hours])[index] += views;
                }
            }
            Err(e) => file_errors.push((path, e.to_string())),
        }
    }
    if stats.files_read == 0 {
        return Err(IngestError::NoReadableFiles(dir.to_path_buf()));
    }

    let start = Period::Hour(span.first);
    let series = totals
        .into_iter()
        .map(|(title, counts)| {
            let values = counts.into_iter().map(|v| v as f64).collect();
            let ts = TimeSeries::new(start, values, Units::RawViews)
                .expect("span is non-empty and counts are non-negative");
            (title, ts)
        })
        .collect();
    let missing_hours = covered
        .iter()
        .enumerate()
        .filter(|(_, &c)| !c)
        .map(|(i, _)| span.first + chrono::Duration::hours(i as i64))
        .collect();

    Ok(DirectoryIngest { series, stats, missing_hours, skipped_files, file_errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parse_line_basic() {
        assert_eq!(
            parse_line("ja Anne_Hathaway 12 345678").unwrap(),
            PagecountRecord {
                project: "ja".into(),
                title: "Anne_Hathaway".into(),
                views: 12,
                bytes: 345678,
            }
        );
        // Encoded title passes through verbatim.
        assert_eq!(
            parse_line("ja.m %E6%9D%B1%E4%BA%AC 3 999").unwrap().title,
            "%E6%9D%B1%E4%BA%AC"
        );
    }

    #[test]
    fn parse_line_malformed() {
        assert!(parse_line("ja Anne_Hathaway twelve 345678").is_err());
        assert!(parse_line("ja Anne_Hathaway 12").is_err());
        assert!(parse_line("ja Anne_Hathaway 12 34 56").is_err());
        assert!(parse_line("").is_err());
        assert!(parse_line("ja  12 34").is_err());
    }

    #[test]
    fn parse_line_tolerates_crlf() {
        assert_eq!(parse_line("ja A 1 2\r").unwrap().views, 1);
    }

    #[test]
    fn hourstamp_parsing() {
        assert_eq!(
            hourstamp_from_filename("pagecounts-20141212-150000.gz"),
            Some(HourStamp { year: 2014, month: 12, day: 12, hour: 15 })
        );
        assert_eq!(
            hourstamp_from_filename("pagecounts-20141231-230000"),
            Some(HourStamp { year: 2014, month: 12, day: 31, hour: 23 })
        );
        assert_eq!(hourstamp_from_filename("pageviews-20141212.gz"), None);
        assert_eq!(hourstamp_from_filename("pagecounts-20141399-000000.gz"), None);
        assert_eq!(hourstamp_from_filename("pagecounts-20141201-150100.gz"), None);
    }

    #[test]
    fn project_filter_variants() {
        let exact = ProjectFilter::exact("ja");
        assert!(exact.matches("ja"));
        assert!(!exact.matches("ja.m"));
        assert!(!exact.matches("jah"));
        let wide = ProjectFilter { code: "ja".into(), include_variants: true };
        assert!(wide.matches("ja"));
        assert!(wide.matches("ja.m"));
        assert!(!wide.matches("jah"));
    }

    fn write_plain(dir: &Path, name: &str, lines: &[&str]) -> PathBuf {
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        path
    }

    fn titles(names: &[&str]) -> HashSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ingest_file_sums_and_filters() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_plain(dir.path(), "pagecounts-20141201-000000", &["ja A 2 9", "ja A 3 9", "en A 7 9"]);
        let out = ingest_file(&path, &ProjectFilter::exact("ja"), &titles(&["A"])).unwrap();
        assert_eq!(out.views.get("A"), Some(&5));
        assert_eq!(out.stats.lines_total, 3);
        assert_eq!(out.stats.lines_matched, 2);
        assert_eq!(out.stats.lines_other_project, 1);
        assert_eq!(out.stats.lines_unmatched_title(), 0);
    }

    #[test]
    fn ingest_file_unmatched_title() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_plain(dir.path(), "f", &["ja B 4 9"]);
        let out = ingest_file(&path, &ProjectFilter::exact("ja"), &titles(&["A"])).unwrap();
        assert!(out.views.is_empty());
        assert_eq!(out.stats.lines_total, 1);
        assert_eq!(out.stats.lines_matched, 0);
        assert_eq!(out.stats.lines_unmatched_title(), 1);
    }

    #[test]
    fn ingest_file_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_plain(dir.path(), "f", &[]);
        let out = ingest_file(&path, &ProjectFilter::exact("ja"), &titles(&["A"])).unwrap();
        assert!(out.views.is_empty());
        assert_eq!(out.stats, IngestStats { files_read: 1, ..Default::default() });
    }

    #[test]
    fn ingest_file_counts_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_plain(dir.path(), "f", &["garbage", "ja A 1 1"]);
        let out = ingest_file(&path, &ProjectFilter::exact("ja"), &titles(&["A"])).unwrap();
        assert_eq!(out.stats.lines_malformed, 1);
        assert_eq!(out.views.get("A"), Some(&1));
    }

    #[test]
    fn ingest_file_reads_gzip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pagecounts-20141201-000000.gz");
        let f = File::create(&path).unwrap();
        let mut gz = flate2::write::GzEncoder::new(f, flate2::Compression::fast());
        writeln!(gz, "ja A 6 9").unwrap();
        gz.finish().unwrap();
        let out = ingest_file(&path, &ProjectFilter::exact("ja"), &titles(&["A"])).unwrap();
        assert_eq!(out.views.get("A"), Some(&6));
    }

    #[test]
    fn ingest_file_corrupt_gzip_is_file_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pagecounts-20141201-000000.gz");
        std::fs::write(&path, b"\x1f\x8b\x08 not really gzip data").unwrap();
        assert!(ingest_file(&path, &ProjectFilter::exact("ja"), &titles(&["A"])).is_err());
    }

    fn span(from: (i32, u32, u32, u32), hours: i64) -> HourSpan {
        let first = NaiveDate::from_ymd_opt(from.0, from.1, from.2)
            .unwrap()
            .and_hms_opt(from.3, 0, 0)
            .unwrap();
        HourSpan::new(first, first + chrono::Duration::hours(hours - 1)).unwrap()
    }

    #[test]
    fn ingest_directory_zero_fills_missing_hours() {
        let dir = tempfile::tempdir().unwrap();
        write_plain(dir.path(), "pagecounts-20141201-010000", &["ja A 4 9"]);
        let out = ingest_directory(
            dir.path(),
            span((2014, 12, 1, 0), 3),
            &ProjectFilter::exact("ja"),
            &titles(&["A"]),
            1,
        )
        .unwrap();
        assert_eq!(out.series["A"].values(), &[0.0, 4.0, 0.0]);
        assert_eq!(out.missing_hours.len(), 2);
    }

    #[test]
    fn ingest_directory_two_hours() {
        let dir = tempfile::tempdir().unwrap();
        write_plain(dir.path(), "pagecounts-20141201-000000", &["ja A 1 9"]);
        write_plain(dir.path(), "pagecounts-20141201-010000", &["ja A 1 9"]);
        let out = ingest_directory(
            dir.path(),
            span((2014, 12, 1, 0), 2),
            &ProjectFilter::exact("ja"),
            &titles(&["A"]),
            1,
        )
        .unwrap();
        assert_eq!(out.series["A"].values(), &[1.0, 1.0]);
        assert!(out.missing_hours.is_empty());
    }

    #[test]
    fn ingest_directory_empty_dir_fails() {
        let dir = tempfile::tempdir().unwrap();
        let err = ingest_directory(
            dir.path(),
            span((2014, 12, 1, 0), 2),
            &ProjectFilter::exact("ja"),
            &titles(&["A"]),
            1,
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::NoReadableFiles(_)));
    }

    #[test]
    fn ingest_directory_skips_unrecognized_names() {
        let dir = tempfile::tempdir().unwrap();
        write_plain(dir.path(), "pagecounts-20141201-000000", &["ja A 1 9"]);
        write_plain(dir.path(), "README.txt", &["not a dump"]);
        let out = ingest_directory(
            dir.path(),
            span((2014, 12, 1, 0), 1),
            &ProjectFilter::exact("ja"),
            &titles(&["A"]),
            1,
        )
        .unwrap();
        assert_eq!(out.skipped_files.len(), 1);
        assert_eq!(out.stats.files_read, 1);
    }

    #[test]
    fn ingest_directory_collects_file_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_plain(dir.path(), "pagecounts-20141201-000000", &["ja A 1 9"]);
        std::fs::write(dir.path().join("pagecounts-20141201-010000.gz"), b"\x1f\x8b\x08bad").unwrap();
        let out = ingest_directory(
            dir.path(),
            span((2014, 12, 1, 0), 2),
            &ProjectFilter::exact("ja"),
            &titles(&["A"]),
            1,
        )
        .unwrap();
        assert_eq!(out.file_errors.len(), 1);
        assert_eq!(out.series["A"].values(), &[1.0, 0.0]);
        // The failed hour counts as missing.
        assert_eq!(out.missing_hours.len(), 1);
    }
}

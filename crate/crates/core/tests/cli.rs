//! End-to-end runs of the `wikitrend` binary.

use std::io::Write;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wikitrend"))
}

fn write_gz(path: &Path, lines: &[&str]) {
    let f = std::fs::File::create(path).unwrap();
    let mut gz = flate2::write::GzEncoder::new(f, flate2::Compression::fast());
    for line in lines {
        writeln!(gz, "{line}").unwrap();
    }
    gz.finish().unwrap();
}

struct Fixture {
    _dir: tempfile::TempDir,
    dumps: std::path::PathBuf,
    trends: std::path::PathBuf,
    keywords: std::path::PathBuf,
    out: std::path::PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let dumps = dir.path().join("dumps");
    let trends = dir.path().join("trends");
    std::fs::create_dir_all(&dumps).unwrap();
    std::fs::create_dir_all(&trends).unwrap();
    // Two full UTC days; A gets 1 view at the top of every hour, B gets 2.
    for day in 1..=2 {
        for hour in 0..24 {
            write_gz(
                &dumps.join(format!("pagecounts-201412{day:02}-{hour:02}0000.gz")),
                &["ja A 1 9", "ja B 2 9"],
            );
        }
    }
    std::fs::write(trends.join("A.csv"), "period,value\n2014-12-01,50\n2014-12-02,100\n").unwrap();
    std::fs::write(trends.join("B.csv"), "period,value\n2014-12-01,100\n2014-12-02,25\n").unwrap();
    let keywords = dir.path().join("kw.txt");
    std::fs::write(&keywords, "A\nB\nMissing Keyword\n").unwrap();
    let out = dir.path().join("out");
    Fixture { dumps, trends, keywords, out, _dir: dir }
}

fn run_ingest(f: &Fixture) {
    let status = bin()
        .args(["ingest", "--project", "ja"])
        .arg("--keywords")
        .arg(&f.keywords)
        .arg("--dumps")
        .arg(&f.dumps)
        .args(["--from", "2014-12-01T00", "--to", "2014-12-02T23", "--no-timestamp"])
        .arg("--out")
        .arg(&f.out)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn full_pipeline_via_binary() {
    let f = fixture();
    run_ingest(&f);
    assert!(f.out.join("series/A.csv").is_file());
    assert!(f.out.join("series/B.csv").is_file());
    let stats = std::fs::read_to_string(f.out.join("ingest_stats.txt")).unwrap();
    assert!(stats.contains("unmatched_keyword=Missing Keyword"));
    assert!(stats.contains("lines_total=96"));
    assert!(stats.contains("missing_hours=0"));

    let status = bin()
        .arg("correlate")
        .arg("--keywords")
        .arg(&f.keywords)
        .arg("--series")
        .arg(f.out.join("series"))
        .arg("--trends")
        .arg(&f.trends)
        .args(["--resolution", "daily", "--bucket-size", "1000", "--threshold", "0", "--no-timestamp"])
        .arg("--out")
        .arg(&f.out)
        .status()
        .unwrap();
    assert!(status.success());
    let report = std::fs::read_to_string(f.out.join("report.csv")).unwrap();
    // Flat views, so pearson is undefined (empty field) for both keywords.
    assert!(report.contains("A,2,48,24,2,,"));
    assert!(report.contains("B,1,96,48,2,,"));

    let output = bin()
        .arg("top")
        .arg("--keywords")
        .arg(&f.keywords)
        .arg("--series")
        .arg(f.out.join("series"))
        .args(["--limit", "1"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("1\t96\tB"), "got: {stdout}");
}

#[test]
fn pairplot_writes_footer_scores() {
    let f = fixture();
    run_ingest(&f);
    let plot = f.out.join("pair.csv");
    let status = bin()
        .args(["pairplot", "A"])
        .arg("--series")
        .arg(f.out.join("series"))
        .arg("--trends")
        .arg(&f.trends)
        .args(["--no-timestamp"])
        .arg("--out")
        .arg(&plot)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&plot).unwrap();
    assert!(text.contains("period,views_scaled,trend"));
    // Views are flat [24,24] -> scaled [100,100]; trend column is verbatim.
    assert!(text.contains("2014-12-01,100,50"));
    assert!(text.contains("2014-12-02,100,100"));
    assert!(text.contains("# pearson=undefined"));
    assert!(text.contains("# udcr=0"));
}

#[test]
fn pairplot_missing_keyword_fails() {
    let f = fixture();
    run_ingest(&f);
    let status = bin()
        .args(["pairplot", "Nope"])
        .arg("--series")
        .arg(f.out.join("series"))
        .arg("--trends")
        .arg(&f.trends)
        .arg("--out")
        .arg(f.out.join("pair.csv"))
        .status()
        .unwrap();
    assert!(!status.success());
}

#[test]
fn ingest_empty_dumps_dir_fails_with_diagnostic() {
    let f = fixture();
    let empty = f.dumps.parent().unwrap().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let output = bin()
        .args(["ingest", "--project", "ja"])
        .arg("--keywords")
        .arg(&f.keywords)
        .arg("--dumps")
        .arg(&empty)
        .args(["--from", "2014-12-01T00", "--to", "2014-12-01T01"])
        .arg("--out")
        .arg(&f.out)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("no readable pagecounts files"), "got: {stderr}");
    assert!(stderr.contains(empty.to_str().unwrap()), "message must name the directory: {stderr}");
}

#[test]
fn correlate_resolution_mismatch_names_file() {
    let f = fixture();
    run_ingest(&f);
    // Monthly reference against a daily run.
    std::fs::write(f.trends.join("A.csv"), "period,value\n2014-12,10\n2015-01,20\n").unwrap();
    let output = bin()
        .arg("correlate")
        .arg("--keywords")
        .arg(&f.keywords)
        .arg("--series")
        .arg(f.out.join("series"))
        .arg("--trends")
        .arg(&f.trends)
        .arg("--out")
        .arg(&f.out)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("A.csv"), "got: {stderr}");
    assert!(stderr.contains("expected daily"), "got: {stderr}");
}

#[test]
fn correlate_no_references_fails() {
    let f = fixture();
    run_ingest(&f);
    let empty = f.trends.parent().unwrap().join("no-trends");
    std::fs::create_dir_all(&empty).unwrap();
    let output = bin()
        .arg("correlate")
        .arg("--keywords")
        .arg(&f.keywords)
        .arg("--series")
        .arg(f.out.join("series"))
        .arg("--trends")
        .arg(&empty)
        .arg("--out")
        .arg(&f.out)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("no keyword had both"), "got: {stderr}");
}

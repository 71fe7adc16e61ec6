//! Per-keyword scoring, access-rank assignment, rank-bucket averages,
//! coverage counts, and the views-per-day threshold subset.
//!
//! Keywords whose Pearson coefficient is undefined (zero variance, common
//! for low-frequency reference series that are mostly zeros) are excluded
//! from mean_pearson but kept in mean_udcr; every summary carries the
//! exclusion count so averages stay auditable.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::metrics::{self, MetricError};
use crate::timeseries::{Resolution, TimeSeries};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("no keywords to rank")]
    NothingToRank,
    #[error("no keyword had both a views series and a reference series with overlap >= 2")]
    NoRows,
    #[error("bucket size must be >= 1")]
    BadBucketSize,
    #[error("no reports to summarize")]
    NoReports,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// A keyword's rank by total views, 1-based and dense; ties break by
/// encoded title ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedKeyword {
    pub title: String,
    pub rank: u32,
    pub total_views: f64,
}

pub fn rank_keywords(
    series: &BTreeMap<String, TimeSeries>,
) -> Result<Vec<RankedKeyword>, AnalysisError> {
    if series.is_empty() {
        return Err(AnalysisError::NothingToRank);
    }
    let mut ranked: Vec<(String, f64)> =
        series.iter().map(|(title, s)| (title.clone(), s.total())).collect();
    // Descending by total, then title ascending for determinism.
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    Ok(ranked
        .into_iter()
        .enumerate()
        .map(|(i, (title, total_views))| RankedKeyword {
            title,
            rank: (i + 1) as u32,
            total_views,
        })
        .collect())
}

/// Scoring result for one keyword.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordReport {
    /// Encoded title; the CLI also prints the raw keyword next to it.
    pub title: String,
    pub access_rank: u32,
    pub total_views: f64,
    pub mean_daily_views: f64,
    pub n: usize,
    pub pearson: Option<f64>,
    pub udcr: f64,
    pub resolution: Resolution,
}

/// Why a keyword produced no report row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SkipTally {
    pub no_reference: usize,
    pub no_overlap: usize,
}

impl SkipTally {
    pub fn total(&self) -> usize {
        self.no_reference + self.no_overlap
    }
}

/// Score every keyword that has both a views series and a reference series.
///
/// `mean_daily` supplies each keyword's mean daily views (computed from the
/// daily series regardless of the comparison resolution).
pub fn correlate_all(
    views: &BTreeMap<String, TimeSeries>,
    trends: &BTreeMap<String, TimeSeries>,
    ranks: &[RankedKeyword],
    mean_daily: &BTreeMap<String, f64>,
    resolution: Resolution,
) -> Result<(Vec<KeywordReport>, SkipTally), AnalysisError> {
    let mut reports = Vec::new();
    let mut skips = SkipTally::default();
    for ranked in ranks {
        let Some(series) = views.get(&ranked.title) else {
            skips.no_reference += 1; // no usable views series at this resolution
            continue;
        };
        let Some(reference) = trends.get(&ranked.title) else {
            skips.no_reference += 1;
            continue;
        };
        let result = match metrics::score_pair(series, reference) {
            Ok(r) => r,
            Err(MetricError::Series(_)) => {
                skips.no_overlap += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        reports.push(KeywordReport {
            title: ranked.title.clone(),
            access_rank: ranked.rank,
            total_views: ranked.total_views,
            mean_daily_views: mean_daily.get(&ranked.title).copied().unwrap_or(0.0),
            n: result.n,
            pearson: result.pearson,
            udcr: result.udcr,
            resolution,
        });
    }
    if reports.is_empty() {
        return Err(AnalysisError::NoRows);
    }
    Ok((reports, skips))
}

/// Aggregate over one inclusive rank range.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketSummary {
    pub rank_lo: u32,
    pub rank_hi: u32,
    pub keyword_count: usize,
    /// Keywords in the bucket with reference data. Equal to keyword_count
    /// here since reports only exist for covered keywords; the coverage
    /// report counts against the full ranked index.
    pub trend_data_count: usize,
    pub mean_pearson: Option<f64>,
    pub mean_udcr: f64,
    pub excluded_undefined_count: usize,
}

/// Group reports into rank buckets [1..k], [k+1..2k], ... and average the
/// metrics per bucket. The last bucket may be partial.
pub fn bucket_report(
    reports: &[KeywordReport],
    bucket_size: u32,
) -> Result<Vec<BucketSummary>, AnalysisError> {
    if bucket_size < 1 {
        return Err(AnalysisError::BadBucketSize);
    }
    if reports.is_empty() {
        return Err(AnalysisError::NoReports);
    }
    let max_rank = reports.iter().map(|r| r.access_rank).max().unwrap();
    let n_buckets = max_rank.div_ceil(bucket_size);
    let mut out = Vec::new();
    for b in 0..n_buckets {
        let rank_lo = b * bucket_size + 1;
        let rank_hi = ((b + 1) * bucket_size).min(max_rank);
        let rows: Vec<&KeywordReport> = reports
            .iter()
            .filter(|r| (rank_lo..=rank_hi).contains(&r.access_rank))
            .collect();
        if rows.is_empty() {
            out.push(BucketSummary {
                rank_lo,
                rank_hi,
                keyword_count: 0,
                trend_data_count: 0,
                mean_pearson: None,
                mean_udcr: 0.0,
                excluded_undefined_count: 0,
            });
            continue;
        }
        let defined: Vec<f64> = rows.iter().filter_map(|r| r.pearson).collect();
        let excluded = rows.len() - defined.len();
        let mean_pearson = if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        };
        let mean_udcr = rows.iter().map(|r| r.udcr).sum::<f64>() / rows.len() as f64;
        out.push(BucketSummary {
            rank_lo,
            rank_hi,
            keyword_count: rows.len(),
            trend_data_count: rows.len(),
            mean_pearson,
            mean_udcr,
            excluded_undefined_count: excluded,
        });
    }
    Ok(out)
}

/// Metric means over keywords exceeding a mean-daily-views threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSummary {
    pub count: usize,
    /// Worst (largest) rank in the subset; None when the subset is empty.
    pub boundary_rank: Option<u32>,
    pub mean_pearson: Option<f64>,
    pub mean_udcr: Option<f64>,
    pub excluded_undefined_count: usize,
}

impl ThresholdSummary {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// Restrict to keywords with mean daily views strictly greater than the
/// threshold. An empty subset is a flagged success, not an error.
pub fn threshold_report(reports: &[KeywordReport], min_mean_daily_views: f64) -> ThresholdSummary {
    let rows: Vec<&KeywordReport> =
        reports.iter().filter(|r| r.mean_daily_views > min_mean_daily_views).collect();
    if rows.is_empty() {
        return ThresholdSummary {
            count: 0,
            boundary_rank: None,
            mean_pearson: None,
            mean_udcr: None,
            excluded_undefined_count: 0,
        };
    }
    let defined: Vec<f64> = rows.iter().filter_map(|r| r.pearson).collect();
    ThresholdSummary {
        count: rows.len(),
        boundary_rank: rows.iter().map(|r| r.access_rank).max(),
        mean_pearson: if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        },
        mean_udcr: Some(rows.iter().map(|r| r.udcr).sum::<f64>() / rows.len() as f64),
        excluded_undefined_count: rows.len() - defined.len(),
    }
}

/// Per rank-bucket count of keywords that have a non-empty reference
/// series, against the full ranked index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageBucket {
    pub rank_lo: u32,
    pub rank_hi: u32,
    pub keyword_count: usize,
    pub trend_data_count: usize,
}

pub fn coverage_report(
    ranks: &[RankedKeyword],
    trends: &BTreeMap<String, TimeSeries>,
    bucket_size: u32,
) -> Result<Vec<CoverageBucket>, AnalysisError> {
    if bucket_size < 1 {
        return Err(AnalysisError::BadBucketSize);
    }
    if ranks.is_empty() {
        return Ok(Vec::new());
    }
    let max_rank = ranks.iter().map(|r| r.rank).max().unwrap();
    let n_buckets = max_rank.div_ceil(bucket_size);
    let mut out: Vec<CoverageBucket> = (0..n_buckets)
        .map(|b| CoverageBucket {
            rank_lo: b * bucket_size + 1,
            rank_hi: ((b + 1) * bucket_size).min(max_rank),
            keyword_count: 0,
            trend_data_count: 0,
        })
        .collect();
    for r in ranks {
        let bucket = &mut out[((r.rank - 1) / bucket_size) as usize];
        bucket.keyword_count += 1;
        if trends.contains_key(&r.title) {
            bucket.trend_data_count += 1;
        }
    }
    Ok(out)
}

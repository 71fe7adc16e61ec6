//! Estimate web-search trends from open Wikipedia pageview data.
//!
//! The pipeline: ingest hourly pagecounts dumps, map keywords to article
//! titles, build per-keyword time series, resample to daily/monthly, and
//! score agreement against reference search-frequency series with Pearson
//! correlation and the up/down concordance rate, reported per access-rank
//! bucket.

pub mod analysis;
pub mod commands;
pub mod metrics;
pub mod pagecounts;
pub mod timeseries;
pub mod titles;

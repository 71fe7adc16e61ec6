//! Similarity measures between two time series: Pearson product-moment
//! correlation and the up/down concordance rate (UDCR).
//!
//! UDCR compares the three-way signs of consecutive deltas; two series
//! agree at step t when both rose, both fell, or both stayed flat. Note
//! that flat/flat counts as concordant, which inflates the rate on
//! near-constant series.

use thiserror::Error;

use crate::timeseries::{self, SeriesError, TimeSeries};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("need at least 2 values, got {0}")]
    TooShort(usize),
    #[error("input lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("pearson drifted to {0}, beyond the 1e-12 clamp tolerance")]
    Inconsistent(f64),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Three-way signs of consecutive deltas, one entry per step t = 2..n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignDelta(pub Vec<i8>);

/// Scores for one aligned pair of series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricResult {
    /// Overlap length.
    pub n: usize,
    /// `None` when either input has zero variance.
    pub pearson: Option<f64>,
    pub udcr: f64,
}

pub fn sign_delta(values: &[f64]) -> Result<SignDelta, MetricError> {
    if values.len() < 2 {
        return Err(MetricError::TooShort(values.len()));
    }
    let signs = values
        .windows(2)
        .map(|w| {
            if w[1] > w[0] {
                1
            } else if w[1] < w[0] {
                -1
            } else {
                0
            }
        })
        .collect();
    Ok(SignDelta(signs))
}

/// Up/down concordance rate: the fraction of steps where both series moved
/// the same way (including flat = flat).
pub fn udcr(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    let xs = sign_delta(x)?;
    let ys = sign_delta(y)?;
    let matches = xs.0.iter().zip(&ys.0).filter(|(a, b)| a == b).count();
    Ok(matches as f64 / xs.0.len() as f64)
}

/// Pearson product-moment correlation, two-pass.
///
/// Returns `Ok(None)` when either input has zero variance; the coefficient
/// is undefined there, and callers exclude such pairs from averages rather
/// than coercing to 0.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(MetricError::TooShort(n));
    }
    let mean_x = x.iter().sum::<f64>() / n as f64;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    let r = sxy / (sxx * syy).sqrt();
    if r.abs() > 1.0 + 1e-12 {
        return Err(MetricError::Inconsistent(r));
    }
    Ok(Some(r.clamp(-1.0, 1.0)))
}

/// Align two series to their common span and score both metrics.
pub fn score_pair(x: &TimeSeries, y: &TimeSeries) -> Result<MetricResult, MetricError> {
    let (a, b) = timeseries::align(x, y)?;
    Ok(MetricResult {
        n: a.len(),
        pearson: pearson(a.values(), b.values())?,
        udcr: udcr(a.values(), b.values())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{Period, TimeSeries, Units};

    #[test]
    fn sign_delta_cases() {
        assert_eq!(sign_delta(&[1.0, 2.0, 2.0, 1.0]).unwrap().0, vec![1, 0, -1]);
        assert_eq!(sign_delta(&[5.0, 5.0, 5.0]).unwrap().0, vec![0, 0]);
        assert_eq!(sign_delta(&[3.0, 1.0]).unwrap().0, vec![-1]);
        assert_eq!(sign_delta(&[3.0]), Err(MetricError::TooShort(1)));
    }

    #[test]
    fn udcr_examples() {
        assert_eq!(udcr(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(udcr(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), 0.0);
        // x' = [+1, 0, -1], y' = [+1, +1, -1]: matches at steps 1 and 3.
        let r = udcr(&[1.0, 2.0, 2.0, 1.0], &[3.0, 4.0, 5.0, 2.0]).unwrap();
        assert_eq!(r, 2.0 / 3.0);
    }

    #[test]
    fn udcr_input_errors() {
        assert_eq!(udcr(&[1.0, 2.0], &[1.0]), Err(MetricError::LengthMismatch(2, 1)));
        assert_eq!(udcr(&[1.0], &[1.0]), Err(MetricError::TooShort(1)));
    }

    #[test]
    fn pearson_affine_is_exact_one() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), Some(1.0));
    }

    #[test]
    fn pearson_hand_anchor() {
        // Exact value: 3 / sqrt(2 * 14/3) = 3 / sqrt(28/3).
        let expected = 3.0 / (28.0_f64 / 3.0).sqrt();
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap().unwrap();
        assert!((r - expected).abs() < 1e-9, "r = {r}, expected {expected}");
        assert!((r - 0.981980506).abs() < 1e-9);
    }

    #[test]
    fn pearson_zero_variance_is_undefined() {
        assert_eq!(pearson(&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]).unwrap(), None);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[7.0, 7.0, 7.0]).unwrap(), None);
    }

    #[test]
    fn pearson_input_errors() {
        assert_eq!(pearson(&[1.0], &[1.0]), Err(MetricError::TooShort(1)));
        assert_eq!(pearson(&[1.0, 2.0], &[1.0]), Err(MetricError::LengthMismatch(2, 1)));
    }

    #[test]
    fn score_pair_identical_series() {
        let s = TimeSeries::new(
            Period::day(2014, 1, 1).unwrap(),
            vec![1.0, 2.0, 3.0],
            Units::RawViews,
        )
        .unwrap();
        let r = score_pair(&s, &s).unwrap();
        assert_eq!(r.n, 3);
        assert_eq!(r.pearson, Some(1.0));
        assert_eq!(r.udcr, 1.0);
    }

    #[test]
    fn score_pair_disjoint_spans() {
        let a = TimeSeries::new(Period::day(2014, 1, 1).unwrap(), vec![1.0, 2.0], Units::RawViews)
            .unwrap();
        let b = TimeSeries::new(Period::day(2015, 1, 1).unwrap(), vec![1.0, 2.0], Units::RawViews)
            .unwrap();
        assert!(matches!(score_pair(&a, &b), Err(MetricError::Series(_))));
    }
}

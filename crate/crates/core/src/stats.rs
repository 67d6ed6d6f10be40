//! Shared numerical primitives: percentiles, Pearson correlation, descriptive
//! statistics.
//!
//! The percentile convention is linear interpolation between closest ranks:
//! position `p = (x/100) * (n-1)` in the ascending-sorted list. Every report
//! that exposes percentile values stamps this convention into its metadata so
//! numbers stay comparable across runs.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("correlation is undefined for a constant series")]
    ConstantSeries,
    #[error("correlation requires at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("percentile rank must lie in the open interval (0, 100), got {0}")]
    RankOutOfRange(f64),
}

/// A percentile rank in the open interval (0, 100).
///
/// 0 and 100 are deliberately rejected; use [`minimum`] and [`maximum`] for
/// the distribution endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercentileSpec(f64);

impl PercentileSpec {
    pub fn new(x: f64) -> Result<Self, StatsError> {
        if x.is_finite() && x > 0.0 && x < 100.0 {
            Ok(Self(x))
        } else {
            Err(StatsError::RankOutOfRange(x))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Value at percentile rank `x` of an ascending-sorted slice, interpolating
/// linearly between the two closest ranks. A single-element slice returns
/// that element for any rank.
pub fn percentile(sorted: &[f64], x: PercentileSpec) -> Result<f64, StatsError> {
    if sorted.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    debug_assert!(
        sorted.windows(2).all(|w| w[0] <= w[1]),
        "percentile input must be sorted ascending"
    );
    let n = sorted.len();
    if n == 1 {
        return Ok(sorted[0]);
    }
    let p = x.value() / 100.0 * (n - 1) as f64;
    let lo = p.floor() as usize;
    let frac = p - lo as f64;
    if frac == 0.0 || lo + 1 >= n {
        Ok(sorted[lo])
    } else {
        Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
    }
}

/// Smallest value of a non-empty slice; the rank-0 endpoint accessor.
pub fn minimum(sorted: &[f64]) -> Result<f64, StatsError> {
    sorted.first().copied().ok_or(StatsError::EmptyInput)
}

/// Largest value of a non-empty slice; the rank-100 endpoint accessor.
pub fn maximum(sorted: &[f64]) -> Result<f64, StatsError> {
    sorted.last().copied().ok_or(StatsError::EmptyInput)
}

/// Pearson product-moment correlation of two equal-length series.
///
/// A constant series is an error rather than a silent 0: degenerate
/// experiments should fail loudly.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(StatsError::TooFewPoints(xs.len()));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sum_xy = 0.0;
    let mut sum_xx = 0.0;
    let mut sum_yy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sum_xy += dx * dy;
        sum_xx += dx * dx;
        sum_yy += dy * dy;
    }
    if sum_xx == 0.0 || sum_yy == 0.0 {
        return Err(StatsError::ConstantSeries);
    }
    // Clamp against rounding: |r| may exceed 1 by a few ulps on exact fits.
    Ok((sum_xy / (sum_xx * sum_yy).sqrt()).clamp(-1.0, 1.0))
}

/// Arithmetic mean and sample standard deviation (n-1 denominator).
/// A single value yields a standard deviation of 0.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64), StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pct(values: &[f64], x: f64) -> f64 {
        percentile(values, PercentileSpec::new(x).unwrap()).unwrap()
    }

    #[test]
    fn percentile_exact_index() {
        assert_eq!(pct(&[1.0, 2.0, 3.0, 4.0, 5.0], 50.0), 3.0);
    }

    #[test]
    fn percentile_interpolates() {
        // p = 0.9 * 4 = 3.6, between 4 and 5
        assert!((pct(&[1.0, 2.0, 3.0, 4.0, 5.0], 90.0) - 4.6).abs() < 1e-12);
    }

    #[test]
    fn percentile_single_element() {
        assert_eq!(pct(&[7.0], 1.0), 7.0);
        assert_eq!(pct(&[7.0], 99.0), 7.0);
    }

    #[test]
    fn percentile_rejects_empty_and_bad_rank() {
        assert_eq!(
            percentile(&[], PercentileSpec::new(50.0).unwrap()),
            Err(StatsError::EmptyInput)
        );
        assert!(PercentileSpec::new(0.0).is_err());
        assert!(PercentileSpec::new(100.0).is_err());
        assert!(PercentileSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn endpoint_accessors() {
        let v = [1.0, 2.0, 9.0];
        assert_eq!(minimum(&v).unwrap(), 1.0);
        assert_eq!(maximum(&v).unwrap(), 9.0);
    }

    #[test]
    fn pearson_perfect_lines() {
        assert_eq!(
            pearson_r(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(),
            1.0
        );
        assert_eq!(
            pearson_r(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap(),
            -1.0
        );
    }

    #[test]
    fn pearson_hand_value() {
        // means 2,2; deviations (-1,0,1) and (-1,1,0); r = 1 / sqrt(2*2)
        let r = pearson_r(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pearson_rejects_degenerate_series() {
        assert_eq!(
            pearson_r(&[1.0, 2.0], &[1.0]),
            Err(StatsError::LengthMismatch { left: 2, right: 1 })
        );
        assert_eq!(
            pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::ConstantSeries)
        );
        assert_eq!(pearson_r(&[1.0], &[1.0]), Err(StatsError::TooFewPoints(1)));
    }

    #[test]
    fn mean_std_values() {
        let (m, s) = mean_std(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!((m, s), (5.0, 0.0));

        let (m, s) = mean_std(&[50.0, 100.0]).unwrap();
        assert_eq!(m, 75.0);
        assert!((s - 1250.0_f64.sqrt()).abs() < 1e-12);

        let (m, s) = mean_std(&[3.0]).unwrap();
        assert_eq!((m, s), (3.0, 0.0));

        assert_eq!(mean_std(&[]), Err(StatsError::EmptyInput));
    }
}

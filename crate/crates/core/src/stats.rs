//! Small statistics helpers shared across stages.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
pub fn two_sided_t_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    if t.is_nan() {
        return f64::NAN;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.cdf(-t.abs())).min(1.0)
}

/// Product-moment correlation with its t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub r: f64,
    pub p_value: f64,
    /// Complete pairs used.
    pub n: usize,
}

/// Pearson correlation over the pairs where both values are finite.
///
/// Non-finite entries (NaN for a missing value) drop the whole pair.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!(
            "correlation inputs differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    let n = pairs.len();
    if n < 3 {
        return Err(Error::UndefinedCorrelation(format!(
            "{n} complete pairs, at least 3 required"
        )));
    }
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    let mut r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    // An exact linear relation can land a few ulps short of +-1.
    if 1.0 - r.abs() < 1e-12 {
        r = r.signum();
    }
    let df = nf - 2.0;
    let p_value = if df == 0.0 {
        1.0
    } else if r.abs() == 1.0 {
        0.0
    } else {
        two_sided_t_p(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(Correlation { r, p_value, n })
}

/// Percentile `q` in [0, 100] of already sorted data, linear interpolation
/// between order statistics (the common "type 7" rule).
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty sample");
    let h = (sorted.len() - 1) as f64 * q / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1); zero for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_correlations() {
        let r = pearson(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((r.r - 1.0).abs() < 1e-15);
        assert_eq!(r.p_value, 0.0);
        let r = pearson(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap();
        assert!((r.r + 1.0).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_correlation() {
        // mean x = 7/3, mean y = 7/3; sxy = 8/3, sxx = 14/3, syy = 8/3
        // r = (8/3) / sqrt(14/3 * 8/3) = sqrt(8/14)
        let r = pearson(&[1.0, 2.0, 4.0], &[1.0, 3.0, 3.0]).unwrap();
        assert!((r.r - (8.0f64 / 14.0).sqrt()).abs() < 1e-14);
        assert!((r.r - 0.7559).abs() < 1e-4);
        // t = r sqrt(1 / (1 - r^2)) with one degree of freedom: p = 1 - 2 atan(t) / pi
        let t = r.r / (1.0 - r.r * r.r).sqrt();
        let p = 1.0 - 2.0 * t.atan() / std::f64::consts::PI;
        assert!((r.p_value - p).abs() < 1e-10);
    }

    #[test]
    fn missing_pairs_dropped() {
        let r = pearson(&[1.0, f64::NAN, 2.0, 3.0], &[2.0, 9.0, 4.0, 6.0]).unwrap();
        assert_eq!(r.n, 3);
        assert!((r.r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(matches!(
            pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn percentiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile_sorted(&s, 50.0), 2.5);
        assert_eq!(percentile_sorted(&s, 25.0), 1.75);
        assert_eq!(percentile_sorted(&s, 0.0), 1.0);
        assert_eq!(percentile_sorted(&s, 100.0), 4.0);
        assert_eq!(percentile_sorted(&[7.0], 25.0), 7.0);
    }

    #[test]
    fn t_p_values() {
        assert!((two_sided_t_p(0.0, 5.0) - 1.0).abs() < 1e-12);
        // df = 1 is Cauchy: P(|T| > 1) = 1/2
        assert!((two_sided_t_p(1.0, 1.0) - 0.5).abs() < 1e-12);
        assert_eq!(two_sided_t_p(f64::INFINITY, 3.0), 0.0);
    }
}

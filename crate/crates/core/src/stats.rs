//! Sample statistics used by the estimators and the statistical tests.

use serde::{Deserialize, Serialize};

/// Mean and standard error (`sample sd / √n`) of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMean {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl SampleMean {
    /// Summation runs in index order so the result does not depend on how the
    /// sample was produced.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                n,
            };
        }
        // shifted by the first value, so a constant sample has exact mean and zero error
        let shift = values[0];
        let offset = values.iter().map(|v| v - shift).sum::<f64>() / n as f64;
        let mean = shift + offset;
        let std_error = if n > 1 {
            let ss: f64 = values
                .iter()
                .map(|v| (v - shift - offset) * (v - shift - offset))
                .sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_error, n }
    }

    /// `|mean − target| ≤ k·std_error + slack`.
    pub fn within(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error + slack
    }
}

/// Kolmogorov–Smirnov distance between the sample and a continuous CDF. Infinite
/// samples are allowed (they stand for "never") and `cdf(∞)` may be below 1.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = samples.len() as f64;
    let mut finite: Vec<f64> = samples.iter().copied().filter(|s| s.is_finite()).collect();
    finite.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut d: f64 = 0.0;
    for (i, &x) in finite.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d.max(cdf(f64::INFINITY) - finite.len() as f64 / n)
}

/// Asymptotic critical value `√(−ln(α/2)/2) / √n` of the one-sample KS test.
pub fn ks_critical(n: usize, level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_error() {
        let s = SampleMean::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(SampleMean::of(&[3.0, 3.0]).std_error, 0.0);
    }

    #[test]
    fn ks_on_uniform_grid() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12);
        assert!((ks_critical(100, 0.01) - 0.16276).abs() < 1e-4);
    }

    #[test]
    fn ks_with_mass_at_infinity() {
        // half the sample never happens, CDF tops out at 1/2
        let mut xs: Vec<f64> = (0..50).map(|i| (i as f64 + 0.5) / 50.0).collect();
        xs.extend(std::iter::repeat_n(f64::INFINITY, 50));
        let d = ks_statistic(&xs, |x| 0.5 * x.min(1.0));
        assert!(d < 0.02, "{d}");
    }
}

//! Right-continuous step functions of age (or time) on `[0, ∞)`.
//!
//! All integrals are computed segment by segment in closed form, so there is no
//! quadrature error anywhere a step function is integrated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A step function with value `values[k]` on `[breaks[k], breaks[k+1])` and
/// `values[m]` on `[breaks[m], ∞)`. `breaks[0]` is always `0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.is_empty() {
            return Err(Error::validation(
                "breaks",
                "at least one breakpoint is required",
            ));
        }
        if breaks.len() != values.len() {
            return Err(Error::validation(
                "values",
                format!("expected {} values, got {}", breaks.len(), values.len()),
            ));
        }
        if breaks[0] != 0.0 {
            return Err(Error::validation("breaks[0]", "first breakpoint must be 0"));
        }
        for (k, w) in breaks.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::validation(
                    format!("breaks[{}]", k + 1),
                    "breakpoints must be finite and strictly increasing",
                ));
            }
        }
        for (k, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::validation(
                    format!("values[{k}]"),
                    "value is not finite",
                ));
            }
        }
        Ok(Self { breaks, values })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            breaks: vec![0.0],
            values: vec![value],
        }
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn segments(&self) -> usize {
        self.breaks.len()
    }

    /// Index of the segment containing `a` (segments are closed on the left).
    #[inline]
    pub fn segment_of(&self, a: f64) -> usize {
        self.breaks.partition_point(|&b| b <= a).saturating_sub(1)
    }

    #[inline]
    pub fn eval(&self, a: f64) -> f64 {
        self.values[self.segment_of(a)]
    }

    /// Left end of the segment after the one containing `a`, or `∞`.
    #[inline]
    pub fn next_break_after(&self, a: f64) -> f64 {
        let k = self.breaks.partition_point(|&b| b <= a);
        self.breaks.get(k).copied().unwrap_or(f64::INFINITY)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `∫_a^{a+s} h(r) dr`, exact. `s` may be `∞`.
    pub fn integral(&self, a: f64, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let end = a + s;
        let mut k = self.segment_of(a);
        let mut lo = a;
        let mut acc = 0.0;
        loop {
            let hi = self
                .breaks
                .get(k + 1)
                .copied()
                .unwrap_or(f64::INFINITY)
                .min(end);
            let v = self.values[k];
            if v != 0.0 {
                acc += v * (hi - lo);
            }
            if hi >= end {
                return acc;
            }
            lo = hi;
            k += 1;
        }
    }

    /// Smallest `s ≥ 0` with `∫_a^{a+s} h = level`, or `None` when the remaining mass
    /// `∫_a^∞ h` does not exceed `level`. Requires `h ≥ 0`.
    pub fn invert_integral(&self, a: f64, level: f64) -> Option<f64> {
        if level <= 0.0 {
            return Some(0.0);
        }
        let mut k = self.segment_of(a);
        let mut lo = a;
        let mut remaining = level;
        loop {
            let hi = self.breaks.get(k + 1).copied().unwrap_or(f64::INFINITY);
            let v = self.values[k];
            let mass = if v > 0.0 { v * (hi - lo) } else { 0.0 };
            if mass > remaining {
                return Some(lo + remaining / v - a);
            }
            if hi.is_infinite() {
                return None;
            }
            remaining -= mass;
            lo = hi;
            k += 1;
        }
    }

    /// Union of two break sets, used to split a domain so both functions are constant.
    pub fn merged_breaks(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
        out.sort_by(|x, y| x.partial_cmp(y).unwrap());
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_step() -> PiecewiseConstant {
        PiecewiseConstant::new(vec![0.0, 1.0], vec![1.0, 3.0]).unwrap()
    }

    #[test]
    fn integral_over_two_segments() {
        // 0.5 * 1 + 0.5 * 3
        assert_eq!(two_step().integral(0.5, 1.0), 2.0);
        assert_eq!(two_step().integral(2.0, 0.0), 0.0);
        assert!(two_step().integral(0.0, f64::INFINITY).is_infinite());
    }

    #[test]
    fn inversion_matches_integral() {
        let h = PiecewiseConstant::new(vec![0.0, 0.3, 1.1], vec![2.0, 0.0, 0.7]).unwrap();
        for &level in &[0.1, 0.6, 0.61, 1.5] {
            let s = h.invert_integral(0.2, level).unwrap();
            assert!((h.integral(0.2, s) - level).abs() < 1e-12);
        }
    }

    #[test]
    fn finite_mass_gives_none() {
        let h = PiecewiseConstant::new(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(h.invert_integral(0.0, 1.5), None);
        assert!(h.invert_integral(0.0, 0.5).is_some());
    }

    #[test]
    fn rejects_bad_breaks() {
        assert!(PiecewiseConstant::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(PiecewiseConstant::new(vec![0.5], vec![1.0]).is_err());
        assert!(PiecewiseConstant::new(vec![0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn next_break() {
        let h = two_step();
        assert_eq!(h.next_break_after(0.2), 1.0);
        assert_eq!(h.next_break_after(1.0), f64::INFINITY);
    }
}

//! Monte Carlo means with standard errors.

use serde::{Deserialize, Serialize};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

impl McEstimate {
    /// Mean and `sd / √n` of the samples; summation is sequential so results are reproducible.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, std_error: f64::NAN, count: 0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_error, count: n }
    }

    pub fn exact(value: f64, count: usize) -> Self {
        Self { mean: value, std_error: 0.0, count }
    }

    /// Same error bar, shifted/negated value: `offset + sign · mean`.
    pub fn affine(&self, offset: f64, sign: f64) -> Self {
        Self { mean: offset + sign * self.mean, std_error: self.std_error, count: self.count }
    }

    /// `|mean − target| ≤ k · se`, with a floor for zero-variance estimates.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error + 1e-12 * (1.0 + target.abs())
    }
}

/// Split `0..count` into at most `blocks` contiguous, nearly equal ranges.
pub fn block_ranges(count: usize, blocks: usize) -> Vec<std::ops::Range<usize>> {
    let k = blocks.min(count).max(1);
    (0..k).map(|b| (b * count / k)..((b + 1) * count / k)).collect()
}

/// Standard error of a statistic from its per-block values (batch means).
pub fn batch_means_se(block_values: &[f64]) -> f64 {
    let k = block_values.len();
    if k < 2 {
        return f64::NAN;
    }
    let mean = block_values.iter().sum::<f64>() / k as f64;
    let ss: f64 = block_values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (k - 1) as f64).sqrt() / (k as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se() {
        let e = McEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((e.std_error - sd / 2.0).abs() < 1e-15);
        assert_eq!(McEstimate::from_samples(&[7.0]).std_error, 0.0);
    }

    #[test]
    fn constant_samples_have_zero_error() {
        let e = McEstimate::from_samples(&[0.75; 100]);
        assert_eq!(e.std_error, 0.0);
        assert!(e.agrees_with(0.75, 3.0));
    }

    #[test]
    fn blocks_cover_range() {
        let r = block_ranges(10, 3);
        assert_eq!(r, vec![0..3, 3..6, 6..10]);
        assert_eq!(block_ranges(2, 32).len(), 2);
    }
}

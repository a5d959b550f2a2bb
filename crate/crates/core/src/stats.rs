//! Sample summaries and least-squares fits.

use serde::{Deserialize, Serialize};

/// Number of standard errors a Monte Carlo estimate may sit from its target.
pub const MC_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

impl Summary {
    /// Two-pass mean and unbiased standard deviation.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, sd: f64::NAN, se: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let sd = var.sqrt();
        Self { n, mean, sd, se: sd / (n as f64).sqrt() }
    }

    /// `|mean - target| ≤ 4 SE`, with an absolute floor for degenerate samples.
    pub fn agrees_with(&self, target: f64) -> bool {
        let tol = MC_SIGMAS * self.se + 1e-12 * (1.0 + target.abs());
        (self.mean - target).abs() <= tol
    }
}

/// Ordinary least squares `y ≈ a + b x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

impl LinearFit {
    pub fn of(x: &[f64], y: &[f64]) -> Self {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        let slope = sxy / sxx;
        let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
        let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
        Self { intercept: my - slope * mx, slope, r_squared }
    }
}

/// `a / b`, with `0/0 = 0`.
pub fn guarded_ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Whether every value lies within `±tol` relative of `reference`.
pub fn within_relative(reference: f64, values: &[f64], tol: f64) -> bool {
    values.iter().all(|v| (v - reference).abs() <= tol * reference.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_and_fit() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let f = LinearFit::of(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((f.slope - 2.0).abs() < 1e-15 && (f.intercept - 1.0).abs() < 1e-15);
        assert!((f.r_squared - 1.0).abs() < 1e-15);
        assert_eq!(guarded_ratio(0.0, 0.0), 0.0);
        assert!(within_relative(1.0, &[0.85, 1.15], 0.2));
        assert!(!within_relative(1.0, &[0.75], 0.2));
    }
}

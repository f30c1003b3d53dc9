//! Parallel Monte Carlo batches with a single-writer reduction.

use crate::rng::{RngStream, StreamRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Runs `f` once per path index on its own child stream and returns the
/// results in index order. The output is independent of thread count.
pub fn par_map<T, F>(n: usize, stream: RngStream, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut StreamRng) -> T + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            f(i, &mut rng)
        })
        .collect()
}

/// Sample mean with its CLT standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len();
        if n == 0 {
            return Estimate { mean: f64::NAN, std_error: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Estimate { mean, std_error: (var / n as f64).sqrt(), n }
    }

    pub fn exact(value: f64) -> Estimate {
        Estimate { mean: value, std_error: 0.0, n: 0 }
    }

    /// |mean - target| in units of standard error (0 when both agree exactly).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else if self.std_error == 0.0 {
            f64::INFINITY
        } else {
            d / self.std_error
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        self.z_score(target) <= sigmas
    }
}

/// Ratio estimator E[num]/E[den] from paired samples, with delta-method
/// standard error.
pub fn ratio_estimate(num: &[f64], den: &[f64]) -> Estimate {
    let n = num.len();
    assert_eq!(n, den.len());
    let mn = num.iter().sum::<f64>() / n as f64;
    let md = den.iter().sum::<f64>() / n as f64;
    let r = mn / md;
    let var = num.iter().zip(den).map(|(a, b)| (a - r * b).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    Estimate { mean: r, std_error: (var / n as f64).sqrt() / md.abs(), n }
}

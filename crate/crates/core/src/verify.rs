//! Test statistics shared by every suite: Kolmogorov–Smirnov (plain,
//! two-sample, weighted), chi-square on binned data, CLT intervals and
//! extrapolation of q-indexed estimates to q = 0.

use crate::error::{Error, Result};
use crate::mc::Estimate;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;

/// Global pass/fail thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub linear_algebra: f64,
    pub special_functions: f64,
    pub sigmas: f64,
    pub p_value: f64,
    pub min_ess: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { linear_algebra: 1e-8, special_functions: 1e-12, sigmas: 3.0, p_value: 0.01, min_ess: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Underpowered,
}

/// Outcome of one statistical or analytic check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci: Option<(f64, f64)>,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ess: Option<f64>,
    pub threshold: f64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl TestReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    fn base(name: &str, statistic: f64, n: usize, threshold: f64, status: Status) -> Self {
        TestReport {
            name: name.to_string(),
            statistic,
            p_value: None,
            ci: None,
            n,
            ess: None,
            threshold,
            status,
            metadata: BTreeMap::new(),
        }
    }

    /// Passes when `|value - target| <= tol`.
    pub fn absolute(name: &str, value: f64, target: f64, tol: f64) -> Self {
        let err = (value - target).abs();
        let status = if err <= tol { Status::Pass } else { Status::Fail };
        TestReport::base(name, err, 1, tol, status).with_meta("value", value).with_meta("target", target)
    }

    /// Passes when `|value - target| <= tol·max(|target|, 1)`.
    pub fn relative(name: &str, value: f64, target: f64, tol: f64) -> Self {
        let err = (value - target).abs() / target.abs().max(1.0);
        let status = if err <= tol { Status::Pass } else { Status::Fail };
        TestReport::base(name, err, 1, tol, status).with_meta("value", value).with_meta("target", target)
    }

    /// Passes when the estimate lies within `sigmas` standard errors of
    /// `target`; the statistic is the z-score.
    pub fn z_check(name: &str, est: &Estimate, target: f64, sigmas: f64) -> Self {
        let z = est.z_score(target);
        let status = if z.abs() <= sigmas { Status::Pass } else { Status::Fail };
        let mut r = TestReport::base(name, z, est.n, sigmas, status);
        r.ci = Some((est.mean - sigmas * est.std_error, est.mean + sigmas * est.std_error));
        r.with_meta("estimate", est.mean).with_meta("target", target)
    }

    /// Passes when `statistic < threshold`.
    pub fn below(name: &str, statistic: f64, threshold: f64, n: usize) -> Self {
        let status = if statistic < threshold { Status::Pass } else { Status::Fail };
        TestReport::base(name, statistic, n, threshold, status)
    }

    /// Passes when `p > threshold`, or reports `Underpowered` if `ess < min_ess`.
    pub fn p_check(name: &str, statistic: f64, p: f64, n: usize, ess: Option<f64>, th: &Thresholds) -> Self {
        let status = match ess {
            Some(e) if e < th.min_ess => Status::Underpowered,
            _ if p > th.p_value => Status::Pass,
            _ => Status::Fail,
        };
        let mut r = TestReport::base(name, statistic, n, th.p_value, status);
        r.p_value = Some(p);
        r.ess = ess;
        r
    }
}

/// Asymptotic Kolmogorov p-value for statistic `d` at effective size `n`,
/// with Stephens' small-sample correction.
pub fn ks_pvalue(d: f64, n: f64) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS statistic sup |F_n - F|, with optional weights normalised
/// to sum to one. Also returns the effective sample size.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], weights: Option<&[f64]>, cdf: F) -> Result<(f64, f64)> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::Degenerate("no samples".into()));
    }
    let w = normalized_weights(n, weights)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| samples[i].total_cmp(&samples[j]));
    let mut d: f64 = 0.0;
    let mut acc = 0.0;
    let mut k = 0;
    while k < n {
        let x = samples[idx[k]];
        let f = cdf(x);
        let before = acc;
        while k < n && samples[idx[k]] == x {
            acc += w[idx[k]];
            k += 1;
        }
        d = d.max((acc - f).abs()).max((f - before).abs());
    }
    Ok((d, ess(&w)))
}

fn normalized_weights(n: usize, weights: Option<&[f64]>) -> Result<Vec<f64>> {
    match weights {
        None => Ok(vec![1.0 / n as f64; n]),
        Some(w) => {
            if w.len() != n || w.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::Domain("weights must be nonnegative, one per sample".into()));
            }
            let total: f64 = w.iter().sum();
            if !(total > 0.0) {
                return Err(Error::Degenerate("all weights vanish".into()));
            }
            Ok(w.iter().map(|v| v / total).collect())
        }
    }
}

/// Effective sample size of normalised weights.
pub fn ess(normalized: &[f64]) -> f64 {
    1.0 / normalized.iter().map(|w| w * w).sum::<f64>()
}

pub fn ks_test<F: Fn(f64) -> f64>(name: &str, samples: &[f64], cdf: F, th: &Thresholds) -> Result<TestReport> {
    let (d, _) = ks_statistic(samples, None, cdf)?;
    let n = samples.len();
    Ok(TestReport::p_check(name, d, ks_pvalue(d, n as f64), n, None, th))
}

/// KS test of a weighted sample; the p-value uses the effective size.
pub fn ks_test_weighted<F: Fn(f64) -> f64>(
    name: &str,
    samples: &[f64],
    weights: &[f64],
    cdf: F,
    th: &Thresholds,
) -> Result<TestReport> {
    let (d, e) = ks_statistic(samples, Some(weights), cdf)?;
    Ok(TestReport::p_check(name, d, ks_pvalue(d, e), samples.len(), Some(e), th))
}

/// Two-sample KS statistic between (optionally weighted) samples, plus the
/// effective sizes of both.
pub fn ks_two_sample_statistic(
    a: &[f64],
    wa: Option<&[f64]>,
    b: &[f64],
    wb: Option<&[f64]>,
) -> Result<(f64, f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Degenerate("two-sample KS needs two non-empty samples".into()));
    }
    let wa = normalized_weights(a.len(), wa)?;
    let wb = normalized_weights(b.len(), wb)?;
    let mut ia: Vec<usize> = (0..a.len()).collect();
    let mut ib: Vec<usize> = (0..b.len()).collect();
    ia.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    ib.sort_by(|&i, &j| b[i].total_cmp(&b[j]));
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut d: f64 = 0.0;
    while i < ia.len() || j < ib.len() {
        let x = match (ia.get(i), ib.get(j)) {
            (Some(&p), Some(&q)) => a[p].min(b[q]),
            (Some(&p), None) => a[p],
            (None, Some(&q)) => b[q],
            (None, None) => unreachable!(),
        };
        while i < ia.len() && a[ia[i]] == x {
            fa += wa[ia[i]];
            i += 1;
        }
        while j < ib.len() && b[ib[j]] == x {
            fb += wb[ib[j]];
            j += 1;
        }
        d = d.max((fa - fb).abs());
    }
    Ok((d, ess(&wa), ess(&wb)))
}

pub fn ks_two_sample(
    name: &str,
    a: &[f64],
    wa: Option<&[f64]>,
    b: &[f64],
    wb: Option<&[f64]>,
    th: &Thresholds,
) -> Result<TestReport> {
    let (d, ea, eb) = ks_two_sample_statistic(a, wa, b, wb)?;
    let n_eff = ea * eb / (ea + eb);
    let weighted = wa.is_some() || wb.is_some();
    let ess = if weighted { Some(ea.min(eb)) } else { None };
    Ok(TestReport::p_check(name, d, ks_pvalue(d, n_eff), a.len() + b.len(), ess, th))
}

/// Pearson chi-square of observed counts against cell probabilities. Cells
/// with expected count below 5 are pooled with their neighbours first.
/// Returns (statistic, degrees of freedom, p-value).
pub fn chi_square(observed: &[u64], probs: &[f64]) -> Result<(f64, usize, f64)> {
    if observed.len() != probs.len() || observed.len() < 2 {
        return Err(Error::Domain("need matching observed/probability vectors with >= 2 cells".into()));
    }
    let n: u64 = observed.iter().sum();
    let total_p: f64 = probs.iter().sum();
    if n == 0 || !(total_p > 0.0) {
        return Err(Error::Degenerate("empty chi-square input".into()));
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        o_acc += o as f64;
        e_acc += n as f64 * p / total_p;
        if e_acc >= 5.0 {
            pooled.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => pooled.push((o_acc, e_acc)),
        }
    }
    if pooled.len() < 2 {
        return Err(Error::Degenerate("fewer than two cells after pooling".into()));
    }
    let stat: f64 = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len() - 1;
    let p = 1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(stat);
    Ok((stat, dof, p))
}

/// Rectangular 2D binning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binning2d {
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
}

impl Binning2d {
    pub fn uniform(x0: f64, x1: f64, nx: usize, y0: f64, y1: f64, ny: usize) -> Self {
        let edges = |a: f64, b: f64, n: usize| (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect();
        Binning2d { x_edges: edges(x0, x1, nx), y_edges: edges(y0, y1, ny) }
    }

    fn locate(edges: &[f64], v: f64) -> Option<usize> {
        if v < edges[0] || v > *edges.last().unwrap() {
            return None;
        }
        let k = edges.partition_point(|&e| e <= v);
        Some(k.saturating_sub(1).min(edges.len() - 2))
    }

    pub fn counts(&self, samples: &[(f64, f64)]) -> Vec<u64> {
        let nx = self.x_edges.len() - 1;
        let ny = self.y_edges.len() - 1;
        let mut counts = vec![0u64; nx * ny];
        for &(x, y) in samples {
            if let (Some(i), Some(j)) = (Self::locate(&self.x_edges, x), Self::locate(&self.y_edges, y)) {
                counts[i * ny + j] += 1;
            }
        }
        counts
    }
}

/// Chi-square test of 2D samples against a joint law given through its
/// cell probabilities `cell(x0, x1, y0, y1)`.
pub fn chi_square_grid<F>(
    name: &str,
    samples: &[(f64, f64)],
    binning: &Binning2d,
    cell: F,
    th: &Thresholds,
) -> Result<TestReport>
where
    F: Fn(f64, f64, f64, f64) -> f64,
{
    let counts = binning.counts(samples);
    let ny = binning.y_edges.len() - 1;
    let mut probs = vec![0.0; counts.len()];
    for (k, p) in probs.iter_mut().enumerate() {
        let (i, j) = (k / ny, k % ny);
        *p = cell(binning.x_edges[i], binning.x_edges[i + 1], binning.y_edges[j], binning.y_edges[j + 1]);
    }
    let (stat, dof, p) = chi_square(&counts, &probs)?;
    Ok(TestReport::p_check(name, stat, p, samples.len(), None, th).with_meta("dof", dof))
}

/// Total variation distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Limit as q → 0 of estimates indexed by q, by least squares on
/// `c0 + c1 q (+ c2 q²)`. Weighted by 1/se² when standard errors are given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub limit: f64,
    pub std_error: f64,
}

pub fn extrapolate_q(points: &[(f64, Estimate)], order: usize) -> Result<Extrapolation> {
    let m = order + 1;
    if points.len() < m {
        return Err(Error::Domain(format!("need at least {m} points for order {order}")));
    }
    let weighted = points.iter().all(|(_, e)| e.std_error > 0.0);
    let rows = points.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(rows, m);
    let mut b = nalgebra::DVector::<f64>::zeros(rows);
    for (r, (q, e)) in points.iter().enumerate() {
        let w = if weighted { 1.0 / e.std_error } else { 1.0 };
        for c in 0..m {
            a[(r, c)] = w * q.powi(c as i32);
        }
        b[r] = w * e.mean;
    }
    let ata = a.transpose() * &a;
    let inv = ata.try_inverse().ok_or_else(|| Error::Numeric("singular extrapolation system".into()))?;
    let coef = &inv * a.transpose() * &b;
    let std_error = if weighted {
        inv[(0, 0)].sqrt()
    } else if rows > m {
        let resid = &a * &coef - &b;
        (resid.norm_squared() / (rows - m) as f64 * inv[(0, 0)]).sqrt()
    } else {
        0.0
    };
    Ok(Extrapolation { limit: coef[0], std_error })
}

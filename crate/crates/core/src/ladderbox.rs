//! Brownian motion conditioned to reach its overall supremum before time `a`
//! at a level below `b`.
//!
//! The local time at the supremum is the supremum itself, so the ascending
//! ladder height is a unit drift, V(x) = x and κ(q, 0) = √(2q). The entrance
//! density of the dual reflected excursion is then the first-passage density
//! q*_s(y) = y e^{-y²/2s} / √(2πs³).
//!
//! Skeleton paths record, for every step, the exact maximum of the Brownian
//! bridge between the two grid values, so suprema carry no discretization bias.

use crate::error::{Error, Result};
use crate::mc::{par_map, Estimate};
use crate::models::{exp1, open_unit, Interpolation, PathSample};
use crate::quad::adaptive_simpson;
use crate::rng::RngStream;
use crate::verify::{chi_square_grid, ks_test, Binning2d, TestReport, Thresholds};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::f64::consts::PI;

const QUAD_TOL: f64 = 1e-13;

/// Density of n(ε_s ∈ dy, s < ζ) for standard Brownian motion.
pub fn entrance_density_bm(s: f64, y: f64) -> Result<f64> {
    if !(s > 0.0 && y > 0.0) {
        return Err(Error::Domain(format!("need s > 0 and y > 0, got s={s} y={y}")));
    }
    Ok(y * (-y * y / (2.0 * s)).exp() / (2.0 * PI * s.powi(3)).sqrt())
}

/// ∫_{y0}^{y1} q*_s(y) dy.
fn entrance_mass(s: f64, y0: f64, y1: f64) -> f64 {
    let tail = |y: f64| if y.is_infinite() { 0.0 } else { (-y * y / (2.0 * s)).exp() };
    (tail(y0) - tail(y1)) / (2.0 * PI * s).sqrt()
}

/// ∫_{s0}^{s1} e^{-qs} ∫_{y0}^{y1} q*_s(y) dy ds, integrated in u = √s to
/// remove the 1/√s singularity.
fn box_integral(q: f64, s0: f64, s1: f64, y0: f64, y1: f64) -> Result<f64> {
    if s1 <= s0 || y1 <= y0 {
        return Ok(0.0);
    }
    let f = |u: f64| {
        if u == 0.0 {
            if y0 == 0.0 {
                2.0 / (2.0 * PI).sqrt()
            } else {
                0.0
            }
        } else {
            let s = u * u;
            2.0 * u * (-q * s).exp() * entrance_mass(s, y0, y1)
        }
    };
    adaptive_simpson(f, s0.sqrt(), s1.sqrt(), QUAD_TOL)
}

/// P^{a,b}: the box law for standard Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderBoxLaw {
    pub a: f64,
    pub b: f64,
    pub skeleton_dt: f64,
    /// Drift of the ascending ladder height; 1 makes V(x) = x.
    #[serde(default = "unit")]
    pub ladder_drift: f64,
}

fn unit() -> f64 {
    1.0
}

impl LadderBoxLaw {
    pub fn new(a: f64, b: f64, skeleton_dt: f64) -> Result<Self> {
        let law = LadderBoxLaw { a, b, skeleton_dt, ladder_drift: 1.0 };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::Domain(format!("time barrier must be positive and finite, got {}", self.a)));
        }
        if !(self.b > 0.0) {
            return Err(Error::Domain(format!("space barrier must be positive, got {}", self.b)));
        }
        if !(self.skeleton_dt > 0.0 && self.skeleton_dt <= self.a) {
            return Err(Error::Domain(format!("skeleton step must lie in (0, a], got {}", self.skeleton_dt)));
        }
        if self.ladder_drift != 1.0 {
            return Err(Error::Unsupported("only the unit-drift ladder normalization is implemented".into()));
        }
        Ok(())
    }
}

/// V_q([0,a] × [0,b]).
#[allow(non_snake_case)]
pub fn V_box(law: &LadderBoxLaw, q: f64) -> Result<f64> {
    if !(q >= 0.0) {
        return Err(Error::Domain(format!("q must be nonnegative, got {q}")));
    }
    box_integral(q, 0.0, law.a, 0.0, law.b)
}

/// Joint density of (g_∞, S_{g_∞}) under P^{a,b}.
#[allow(non_snake_case)]
pub fn g_S_joint_density(law: &LadderBoxLaw, s: f64, y: f64) -> Result<f64> {
    if !(s > 0.0 && s <= law.a && (0.0..=law.b).contains(&y)) {
        return Ok(0.0);
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    Ok(entrance_density_bm(s, y)? / V_box(law, 0.0)?)
}

/// P^{a,b}((g_∞, S_{g_∞}) ∈ [s0,s1] × [y0,y1]).
#[allow(non_snake_case)]
pub fn g_S_cell_probability(law: &LadderBoxLaw, s0: f64, s1: f64, y0: f64, y1: f64) -> Result<f64> {
    let clip = |v: f64, hi: f64| v.clamp(0.0, hi);
    box_integral(0.0, clip(s0, law.a), clip(s1, law.a), clip(y0, law.b), clip(y1, law.b))
        .and_then(|v| Ok(v / V_box(law, 0.0)?))
}

/// [`g_S_cell_probability`] for every cell of `binning`, row-major in time.
pub fn cell_probabilities(law: &LadderBoxLaw, binning: &Binning2d) -> Result<Vec<f64>> {
    let total = V_box(law, 0.0)?;
    let clip = |v: f64, hi: f64| v.clamp(0.0, hi);
    let mut out = Vec::with_capacity((binning.x_edges.len() - 1) * (binning.y_edges.len() - 1));
    for s in binning.x_edges.windows(2) {
        for y in binning.y_edges.windows(2) {
            out.push(
                box_integral(0.0, clip(s[0], law.a), clip(s[1], law.a), clip(y[0], law.b), clip(y[1], law.b))? / total,
            );
        }
    }
    Ok(out)
}

/// h_s(t, x, y) = n(x < ε_{s-t} < b - y, s - t < ζ).
pub fn h_s_box(law: &LadderBoxLaw, s: f64, t: f64, x: f64, y: f64) -> Result<f64> {
    if !(t < s) {
        return Err(Error::Domain(format!("need t < s, got t={t} s={s}")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("x must be nonnegative, got {x}")));
    }
    if !(y < law.b) {
        return Ok(0.0);
    }
    let top = law.b - y;
    if x >= top {
        return Ok(0.0);
    }
    Ok(entrance_mass(s - t, x, top))
}

/// One Brownian step of length `dt` from `x`: the end point and the exact
/// maximum of the bridge in between.
pub fn bm_step<R: Rng + ?Sized>(x: f64, dt: f64, rng: &mut R) -> (f64, f64) {
    let z: f64 = rng.sample(StandardNormal);
    let end = x + dt.sqrt() * z;
    let d = end - x;
    let max = x + 0.5 * (d + (d * d + 2.0 * dt * exp1(rng)).sqrt());
    (end, max)
}

/// Running state of a Brownian skeleton started at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Walker {
    t: f64,
    x: f64,
    sup: f64,
    /// Time of the step in which the current supremum was attained.
    argmax: f64,
}

impl Walker {
    fn new() -> Self {
        Walker { t: 0.0, x: 0.0, sup: 0.0, argmax: 0.0 }
    }

    fn step<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) {
        let (end, max) = bm_step(self.x, dt, rng);
        if max > self.sup {
            self.sup = max;
            self.argmax = self.t + 0.5 * dt;
        }
        self.t += dt;
        self.x = end;
    }
}

/// Draws (g_∞, S_{g_∞}) under P^{a,b} by simulation: S uniform on [0, b], the
/// skeleton run to its first passage above S, accepted when that happens by
/// time a. Returns None on rejection.
pub fn sample_box_pair<R: Rng + ?Sized>(law: &LadderBoxLaw, rng: &mut R) -> Option<(f64, f64)> {
    let level = law.b * open_unit(rng);
    let mut w = Walker::new();
    let dt = law.skeleton_dt;
    while w.t < law.a {
        let step = dt.min(law.a - w.t);
        let before = w.t;
        let (end, max) = bm_step(w.x, step, rng);
        if max > level {
            return Some((before + 0.5 * step, level));
        }
        w.t += step;
        w.x = end;
    }
    None
}

/// Skeleton path on [0, horizon] under Q^{s,b} as an importance-weighted
/// Brownian path with weight h_s(T, S_T - X_T, X_T)/h_s(0,0,0) 1{S_T < b}.
pub fn sample_pre_supremum<R: Rng + ?Sized>(
    law: &LadderBoxLaw,
    s: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<PathSample> {
    if !(0.0 < s && s < law.a) {
        return Err(Error::Domain(format!("s must lie in (0, a), got {s}")));
    }
    if !(0.0 < horizon && horizon < s) {
        return Err(Error::Domain(format!("horizon must lie in (0, s), got {horizon}")));
    }
    let steps = (horizon / law.skeleton_dt).ceil().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let mut w = Walker::new();
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    times.push(0.0);
    values.push(0.0);
    for k in 1..=steps {
        w.step(dt, rng);
        times.push(if k == steps { horizon } else { k as f64 * dt });
        values.push(w.x);
    }
    let weight =
        if w.sup < law.b { h_s_box(law, s, horizon, w.sup - w.x, w.x)? / h_s_box(law, s, 0.0, 0.0, 0.0)? } else { 0.0 };
    Ok(PathSample::new(times, values, Interpolation::Linear)?.with_weight(weight))
}

/// Bessel(3) from `x0` on a grid of step `dt`, as the norm of a
/// three-dimensional Brownian motion.
pub fn sample_bessel3<R: Rng + ?Sized>(x0: f64, horizon: f64, dt: f64, rng: &mut R) -> Result<PathSample> {
    if !(horizon > 0.0 && dt > 0.0) {
        return Err(Error::Domain("horizon and step must be positive".into()));
    }
    let steps = (horizon / dt).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;
    let mut p = [x0, 0.0, 0.0];
    let mut times = vec![0.0];
    let mut values = vec![x0];
    for k in 1..=steps {
        for c in &mut p {
            let z: f64 = rng.sample(StandardNormal);
            *c += h.sqrt() * z;
        }
        times.push(if k == steps { horizon } else { k as f64 * h });
        values.push((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt());
    }
    PathSample::new(times, values, Interpolation::Linear)
}

/// The post-supremum path: the dual conditioned to stay positive from 0.
pub fn sample_post_supremum<R: Rng + ?Sized>(law: &LadderBoxLaw, horizon: f64, rng: &mut R) -> Result<PathSample> {
    sample_bessel3(0.0, horizon, law.skeleton_dt, rng)
}

/// CDF of |BES3_t| from 0 (Maxwell law).
pub fn bessel3_cdf(t: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let z = x / t.sqrt();
    erf(z / 2f64.sqrt()) - (2.0 / PI).sqrt() * z * (-z * z / 2.0).exp()
}

/// Monte Carlo of E(h_s(t, S_t - X_t, X_t) 1{S_t < b}) against h_s(0,0,0).
/// One step with its bridge maximum draws (X_t, S_t) exactly.
pub fn check_h_identity(
    law: &LadderBoxLaw,
    s: f64,
    t: f64,
    n_paths: usize,
    stream: RngStream,
    th: &Thresholds,
) -> Result<TestReport> {
    let target = h_s_box(law, s, 0.0, 0.0, 0.0)?;
    h_s_box(law, s, t, 0.0, 0.0)?;
    let samples = par_map(n_paths, stream, |_, rng| {
        let (x, m) = bm_step(0.0, t, rng);
        let sup = m.max(0.0);
        if sup < law.b {
            h_s_box(law, s, t, sup - x, x).unwrap_or(f64::NAN)
        } else {
            0.0
        }
    });
    let est = Estimate::from_samples(&samples);
    Ok(TestReport::z_check(&format!("h_s identity s={s} t={t}"), &est, target, th.sigmas))
}

/// Histogram of (g_∞, S_{g_∞}) against the cell probabilities.
pub fn check_joint_histogram(
    law: &LadderBoxLaw,
    n_paths: usize,
    bins: (usize, usize),
    stream: RngStream,
    th: &Thresholds,
) -> Result<TestReport> {
    let pairs: Vec<(f64, f64)> =
        par_map(n_paths, stream, |_, rng| sample_box_pair(law, rng)).into_iter().flatten().collect();
    let binning = skeleton_binning(law, bins.0, bins.1);
    let total = V_box(law, 0.0)?;
    let report = chi_square_grid(
        "box (g, S) histogram",
        &pairs,
        &binning,
        |s0, s1, y0, y1| box_integral(0.0, s0, s1, y0, y1).map(|v| v / total).unwrap_or(f64::NAN),
        th,
    )?;
    Ok(report.with_meta("proposals", n_paths))
}

/// KS test of the Bessel(3) marginal at time t.
pub fn check_bessel3_marginal(
    law: &LadderBoxLaw,
    t: f64,
    n_paths: usize,
    stream: RngStream,
    th: &Thresholds,
) -> Result<TestReport> {
    let samples = par_map(n_paths, stream, |_, rng| {
        sample_bessel3(0.0, t, law.skeleton_dt.max(t / 16.0), rng).map(|p| p.terminal())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    ks_test(&format!("Bessel(3) marginal t={t}"), &samples, |x| bessel3_cdf(t, x), th)
}

/// Reports of the exponential-time construction of P^{a,b}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxLimitRow {
    pub q: f64,
    /// P(g_{e_q} <= a, S_{e_q} <= b) / (√(2q) V_q).
    pub ratio: Estimate,
    pub accepted: usize,
}

/// Paths accepted per q below which smaller q are skipped.
pub const MIN_ACCEPTED: usize = 100;

/// Runs a skeleton to e_q; returns (g, S, S - X_{e_q}) when g <= a and
/// S <= b. A path is stopped once rejected: its supremum passes b, or a new
/// supremum is made after time a.
fn run_to_exponential<R: Rng + ?Sized>(law: &LadderBoxLaw, q: f64, dt: f64, rng: &mut R) -> Option<(f64, f64, f64)> {
    let horizon = exp1(rng) / q;
    let mut w = Walker::new();
    let mut sup_at_a = None;
    while w.t < horizon {
        w.step(dt.min(horizon - w.t), rng);
        if w.sup > law.b {
            return None;
        }
        if w.t >= law.a {
            match sup_at_a {
                None => sup_at_a = Some(w.sup),
                Some(s) if w.sup > s => return None,
                _ => {}
            }
        }
    }
    (w.argmax <= law.a).then_some((w.argmax, w.sup, w.sup - w.x))
}

/// Simulates skeletons up to e_q, keeps those with g_{e_q} <= a and
/// S_{e_q} <= b, and checks the acceptance probability against
/// √(2q) V_q, the joint law of (g, S) against the q-tilted joint density,
/// and the independence of the post-supremum depth S - X_{e_q} from g.
///
/// When fewer than [`MIN_ACCEPTED`] paths are accepted the remaining q are
/// skipped and the last report carries a warning.
pub fn verify_box_limit(
    law: &LadderBoxLaw,
    q_seq: &[f64],
    n_paths: usize,
    stream: RngStream,
    th: &Thresholds,
) -> Result<(Vec<BoxLimitRow>, Vec<TestReport>)> {
    if q_seq.is_empty() || q_seq.iter().any(|&q| !(q > 0.0)) || q_seq.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Domain("q sequence must be positive and decreasing".into()));
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut last = None;
    for (k, &q) in q_seq.iter().enumerate() {
        let outcomes =
            par_map(n_paths, stream.child(k as u64), |_, rng| run_to_exponential(law, q, law.skeleton_dt, rng));
        let accepted: Vec<(f64, f64, f64)> = outcomes.iter().flatten().copied().collect();
        let hits: Vec<f64> = outcomes.iter().map(|o| o.is_some() as u8 as f64).collect();
        let p = Estimate::from_samples(&hits);
        let scale = (2.0 * q).sqrt() * V_box(law, q)?;
        let ratio = Estimate { mean: p.mean / scale, std_error: p.std_error / scale, n: p.n };
        let mut report = TestReport::z_check(&format!("box acceptance ratio q={q}"), &ratio, 1.0, th.sigmas);
        let floor = accepted.len() < MIN_ACCEPTED;
        if floor {
            report = report.with_meta("warning", format!("only {} accepted paths; q floor reached", accepted.len()));
        }
        reports.push(report);
        rows.push(BoxLimitRow { q, ratio, accepted: accepted.len() });
        if floor {
            break;
        }
        last = Some((q, accepted));
    }
    if let Some((q, accepted)) = last {
        let pairs: Vec<(f64, f64)> = accepted.iter().map(|a| (a.0, a.1)).collect();
        reports.push(tilted_histogram(law, q, &pairs, th)?);
        let gs: Vec<f64> = accepted.iter().map(|a| a.0).collect();
        let depth: Vec<f64> = accepted.iter().map(|a| a.2).collect();
        let r = correlation(&gs, &depth);
        let se = 1.0 / (gs.len() as f64).sqrt();
        reports.push(
            TestReport::below(&format!("pre/post supremum correlation q={q}"), r.abs(), th.sigmas * se, gs.len())
                .with_meta("correlation", r),
        );
    }
    Ok((rows, reports))
}

/// Bins in time whose edges sit on the skeleton grid, so that the step
/// holding the supremum decides the bin exactly.
/// Uniform box binning with time edges on multiples of the skeleton step.
pub fn skeleton_binning(law: &LadderBoxLaw, nx: usize, ny: usize) -> Binning2d {
    let steps = (law.a / law.skeleton_dt).round().max(1.0) as usize;
    let nx = nx.min(steps);
    let mut binning = Binning2d::uniform(0.0, law.a, nx, 0.0, law.b, ny);
    binning.x_edges = (0..=nx).map(|k| (((k * steps) / nx) as f64 * law.skeleton_dt).min(law.a)).collect();
    binning
}

/// Chi-square of (g, S) against the density ∝ e^{-qs} q*_s(y) on the box.
fn tilted_histogram(law: &LadderBoxLaw, q: f64, pairs: &[(f64, f64)], th: &Thresholds) -> Result<TestReport> {
    let binning = skeleton_binning(law, 5, 4);
    let total = V_box(law, q)?;
    chi_square_grid(
        &format!("(g, S) law under e_q conditioning q={q}"),
        pairs,
        &binning,
        |s0, s1, y0, y1| box_integral(q, s0, s1, y0, y1).map(|v| v / total).unwrap_or(f64::NAN),
        th,
    )
}

/// Acceptance probability at the skeleton step and at half of it, which
/// should agree within the combined standard error.
pub fn skeleton_halving_check(
    law: &LadderBoxLaw,
    q: f64,
    n_paths: usize,
    stream: RngStream,
    th: &Thresholds,
) -> Result<TestReport> {
    let est = |dt: f64, s: RngStream| {
        let hits = par_map(n_paths, s, |_, rng| run_to_exponential(law, q, dt, rng).is_some() as u8 as f64);
        Estimate::from_samples(&hits)
    };
    let coarse = est(law.skeleton_dt, stream.labeled("coarse"));
    let fine = est(law.skeleton_dt / 2.0, stream.labeled("fine"));
    let diff =
        Estimate { mean: coarse.mean - fine.mean, std_error: coarse.std_error.hypot(fine.std_error), n: n_paths };
    Ok(TestReport::z_check(&format!("skeleton halving q={q}"), &diff, 0.0, th.sigmas)
        .with_meta("coarse", coarse.mean)
        .with_meta("fine", fine.mean))
}

/// V_box(0) = E ∫_0^a 1{S_t <= b} dS_t = E min(S_a, b), since the local time
/// at the supremum is S itself.
pub fn check_v_box_mc(law: &LadderBoxLaw, n_paths: usize, stream: RngStream, th: &Thresholds) -> Result<TestReport> {
    let steps = (law.a / law.skeleton_dt).ceil().max(1.0) as usize;
    let dt = law.a / steps as f64;
    let samples = par_map(n_paths, stream, |_, rng| {
        let mut w = Walker::new();
        for _ in 0..steps {
            w.step(dt, rng);
        }
        w.sup.min(law.b)
    });
    let est = Estimate::from_samples(&samples);
    Ok(TestReport::z_check("box renewal measure by simulation", &est, V_box(law, 0.0)?, th.sigmas))
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law() -> LadderBoxLaw {
        LadderBoxLaw::new(1.0, 1.0, 1e-3).unwrap()
    }

    #[test]
    fn entrance_density_identities() {
        for s in [0.3f64, 1.0, 2.5] {
            let total = adaptive_simpson(
                |y| if y == 0.0 { 0.0 } else { entrance_density_bm(s, y).unwrap() },
                0.0,
                12.0 * s.sqrt(),
                1e-13,
            )
            .unwrap();
            assert!((total - 1.0 / (2.0 * PI * s).sqrt()).abs() < 1e-10);
            let y = 0.7;
            let lhs = entrance_density_bm(4.0 * s, 2.0 * y).unwrap();
            assert!((lhs - entrance_density_bm(s, y).unwrap() / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn v_box_limits() {
        for a in [0.5, 1.0, 3.0] {
            let l = LadderBoxLaw::new(a, f64::INFINITY, 1e-3).unwrap();
            let v = V_box(&l, 0.0).unwrap();
            assert!((v - (2.0 * a / PI).sqrt()).abs() < 1e-8, "{v}");
        }
        let tiny = LadderBoxLaw::new(1e-8, 1.0, 1e-9).unwrap();
        assert!(V_box(&tiny, 0.0).unwrap() < 1e-3);
    }

    #[test]
    fn joint_density_normalized() {
        let l = law();
        let v = V_box(&l, 0.0).unwrap();
        assert_eq!(g_S_joint_density(&l, 0.5, 0.5).unwrap(), entrance_density_bm(0.5, 0.5).unwrap() / v);
        // outer integral in u = √s, inner cut where the density is negligible
        let total = adaptive_simpson(
            |u: f64| {
                if u == 0.0 {
                    return 2.0 / (2.0 * PI).sqrt() / v;
                }
                let s = u * u;
                let top = (12.0 * u).min(1.0);
                2.0 * u
                    * adaptive_simpson(
                        |y| if y == 0.0 { 0.0 } else { entrance_density_bm(s, y).unwrap() / v },
                        0.0,
                        top,
                        1e-12,
                    )
                    .unwrap()
            },
            0.0,
            1.0,
            1e-10,
        )
        .unwrap();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        assert!((g_S_cell_probability(&l, 0.0, 1.0, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn h_s_examples() {
        let l = law();
        let s: f64 = 0.8;
        let want = (1.0 - (-1.0 / (2.0 * s)).exp()) / (2.0 * PI * s).sqrt();
        assert!((h_s_box(&l, s, 0.0, 0.0, 0.0).unwrap() - want).abs() < 1e-15);
        assert_eq!(h_s_box(&l, s, 0.2, 0.6, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn h_identity_three_times() {
        let l = law();
        let th = Thresholds::default();
        for (k, t) in [0.2, 0.4, 0.6].into_iter().enumerate() {
            let r = check_h_identity(&l, 0.8, t, 20000, RngStream::new(21, k as u64), &th).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn pre_supremum_weights() {
        let l = law();
        let n = 20000;
        let ws: Vec<(f64, f64)> = par_map(n, RngStream::new(22, 0), |_, r| {
            let p = sample_pre_supremum(&l, 0.8, 0.4, r).unwrap();
            let sup = p.values.iter().copied().fold(0.0, f64::max);
            if p.weight > 0.0 {
                assert!(sup < 1.0);
            }
            (p.weight, p.terminal())
        });
        let w = Estimate::from_samples(&ws.iter().map(|x| x.0).collect::<Vec<_>>());
        assert!((w.mean - 1.0).abs() < 4.0 * w.std_error, "{w:?}");
        // weighted mean of X_T against the joint law of (X_T, S_T)
        let t: f64 = 0.4;
        let joint = |x: f64, m: f64| {
            2.0 * (2.0 * m - x) / (2.0 * PI * t.powi(3)).sqrt() * (-(2.0 * m - x).powi(2) / (2.0 * t)).exp()
        };
        let h0 = h_s_box(&l, 0.8, 0.0, 0.0, 0.0).unwrap();
        let mean_x = adaptive_simpson(
            |m| {
                adaptive_simpson(|x| x * joint(x, m) * h_s_box(&l, 0.8, t, m - x, x).unwrap() / h0, -6.0, m, 1e-10)
                    .unwrap()
            },
            0.0,
            1.0,
            1e-9,
        )
        .unwrap();
        let xw = Estimate::from_samples(&ws.iter().map(|x| x.0 * x.1).collect::<Vec<_>>());
        assert!((xw.mean - mean_x).abs() < 4.0 * xw.std_error, "{xw:?} vs {mean_x}");
    }

    #[test]
    fn bessel3_marginal_and_h_transform() {
        let l = law();
        let th = Thresholds::default();
        let r = check_bessel3_marginal(&l, 1.0, 20000, RngStream::new(23, 0), &th).unwrap();
        assert!(r.passed(), "{r:?}");
        // from x = 1: BES3 mean vs Brownian motion killed at 0 weighted by X_t / x
        let n = 20000;
        let bes: Vec<f64> =
            par_map(n, RngStream::new(24, 0), |_, rng| sample_bessel3(1.0, 1.0, 0.25, rng).unwrap().terminal());
        let killed: Vec<f64> = par_map(n, RngStream::new(25, 0), |_, rng| {
            let (mut x, mut min) = (1.0, 1.0f64);
            for _ in 0..100 {
                let (end, _) = bm_step(x, 0.01, rng);
                // exact minimum of the bridge by reflection
                let d = end - x;
                let lo = x + 0.5 * (d - (d * d + 0.02 * exp1(rng)).sqrt());
                min = min.min(lo);
                x = end;
            }
            if min > 0.0 {
                x * x
            } else {
                0.0
            }
        });
        let a = Estimate::from_samples(&bes);
        let b = Estimate::from_samples(&killed);
        assert!((a.mean - b.mean).abs() < 4.0 * a.std_error.hypot(b.std_error), "{a:?} {b:?}");
    }

    #[test]
    fn joint_histogram_small() {
        let l = LadderBoxLaw::new(1.0, 1.0, 1e-3).unwrap();
        let r = check_joint_histogram(&l, 20000, (6, 6), RngStream::new(26, 0), &Thresholds::default()).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn box_limit_reports() {
        let l = LadderBoxLaw::new(1.0, 1.0, 2e-3).unwrap();
        let (rows, reps) =
            verify_box_limit(&l, &[1.0, 0.3], 20000, RngStream::new(28, 0), &Thresholds::default()).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &reps {
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn v_box_matches_simulated_renewal_measure() {
        let l = LadderBoxLaw::new(1.0, 1.0, 1e-3).unwrap();
        let r = check_v_box_mc(&l, 20000, RngStream::new(29, 0), &Thresholds::default()).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn halving_agrees() {
        let l = LadderBoxLaw::new(1.0, 1.0, 4e-3).unwrap();
        let r = skeleton_halving_check(&l, 0.5, 20000, RngStream::new(30, 0), &Thresholds::default()).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn entrance_shape_from_meanders() {
        // Brownian motion from a small x killed at 0, seen at s = 1: its law
        // is close to the normalized entrance density y e^{-y²/2}
        let x = 0.01;
        let ends: Vec<Option<f64>> = par_map(200_000, RngStream::new(31, 0), |_, rng| {
            let mut v = x;
            for _ in 0..50 {
                let (end, _) = bm_step(v, 0.02, rng);
                let d = end - v;
                let lo = v + 0.5 * (d - (d * d + 0.04 * exp1(rng)).sqrt());
                if lo <= 0.0 {
                    return None;
                }
                v = end;
            }
            Some(v)
        });
        let ys: Vec<f64> = ends.into_iter().flatten().collect();
        assert!(ys.len() > 1000);
        let r = ks_test("meander", &ys, |y| 1.0 - (-y * y / 2.0).exp(), &Thresholds::default()).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn q_floor_stops_sequence() {
        let l = LadderBoxLaw::new(0.05, 0.05, 1e-3).unwrap();
        let (rows, reps) =
            verify_box_limit(&l, &[0.1, 0.01], 200, RngStream::new(32, 0), &Thresholds::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(reps[0].metadata.contains_key("warning"));
    }
}

//! Subordinators conditioned to stay below a barrier (P↓) or to hit a point
//! continuously (P°), as weighted and exact samplers, together with the
//! exponential-killing limit that defines P↓.

use crate::error::{Error, Result};
use crate::inversion::EulerInversion;
use crate::lamperti::{Tilt, XiSampler};
use crate::mc::{par_map, Estimate};
use crate::models::{
    exp1, open_unit, sample_increment, sample_path, sample_path_past_level, Interpolation, JumpLaw, PathSample,
    SampleMode, SubordinatorSpec,
};
use crate::potential::{potential, potential_density};
use crate::rng::RngStream;
use crate::verify::{extrapolate_q, Extrapolation, TestReport, Thresholds};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Truncation level for small jumps of ξ in the exact stable hit sampler.
pub const STABLE_HIT_EPS: f64 = 1e-3;

const TABLE_POINTS: usize = 4097;

/// U or u on [0, top]: exact where a closed form exists, otherwise a
/// linear interpolation table built from numeric inversion.
#[derive(Debug, Clone)]
struct Tabulated {
    spec: SubordinatorSpec,
    density: bool,
    table: Option<(f64, Vec<f64>)>,
}

impl Tabulated {
    fn new(spec: &SubordinatorSpec, top: f64, density: bool) -> Result<Self> {
        let exact = match spec {
            SubordinatorSpec::Drift { .. } | SubordinatorSpec::Poisson { .. } | SubordinatorSpec::Stable { .. } => true,
            SubordinatorSpec::CompoundPoissonDrift { kappa, jump_law: JumpLaw::Exponential { .. }, .. } => *kappa > 0.0,
            _ => false,
        };
        let mut out = Tabulated { spec: *spec, density, table: None };
        if !exact {
            let step = top / (TABLE_POINTS - 1) as f64;
            // density tables start just inside 0 where u may be singular
            let values = (0..TABLE_POINTS)
                .map(|i| out.direct((i as f64 * step).max(step * 1e-3)))
                .collect::<Result<Vec<_>>>()?;
            out.table = Some((step, values));
        }
        Ok(out)
    }

    fn direct(&self, x: f64) -> Result<f64> {
        let inv = EulerInversion::default();
        if self.density {
            potential_density(&self.spec, x, &inv)
        } else {
            potential(&self.spec, 0.0, x, &inv)
        }
    }

    fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match &self.table {
            None => self.direct(x).unwrap_or(f64::NAN),
            Some((step, v)) => {
                let pos = x / step;
                let i = (pos.floor() as usize).min(v.len() - 2);
                let w = pos - i as f64;
                v[i] * (1.0 - w) + v[i + 1] * w
            }
        }
    }
}

/// P↓: the subordinator from `x0` conditioned to stay in [0, a].
#[derive(Debug, Clone)]
pub struct StripLaw {
    pub spec: SubordinatorSpec,
    pub a: f64,
    pub x0: f64,
    renewal: Tabulated,
}

impl StripLaw {
    pub fn new(spec: SubordinatorSpec, a: f64, x0: f64) -> Result<Self> {
        spec.validate()?;
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("barrier must be positive and finite, got {a}")));
        }
        if !(0.0..a).contains(&x0) {
            return Err(Error::Domain(format!("start {x0} must lie in [0, {a})")));
        }
        let renewal = Tabulated::new(&spec, a, false)?;
        let law = StripLaw { spec, a, x0, renewal };
        if !(law.renewal(a - x0) > 0.0) {
            return Err(Error::Degenerate("U(a - x0) vanishes".into()));
        }
        Ok(law)
    }

    /// Renewal function U(x), zero for x < 0.
    pub fn renewal(&self, x: f64) -> f64 {
        self.renewal.eval(x)
    }

    /// U(a - x)/U(a - x0) on {x <= a}, zero above the barrier.
    pub fn weight_at(&self, x: f64) -> f64 {
        if x > self.a {
            0.0
        } else {
            self.renewal(self.a - x) / self.renewal(self.a - self.x0)
        }
    }
}

/// Change-of-measure weight of P↓ against P at time `t`.
pub fn weight_strip(law: &StripLaw, path: &PathSample, t: f64) -> Result<f64> {
    if t > path.end_time() {
        return Err(Error::Domain(format!("t = {t} lies past the path horizon {}", path.end_time())));
    }
    Ok(path.value_at(t).map_or(0.0, |x| law.weight_at(x)))
}

/// P↓(X_{ζ-} <= y) = U(y - x0)/U(a - x0).
pub fn terminal_cdf(law: &StripLaw, y: f64) -> Result<f64> {
    if !(law.x0..=law.a).contains(&y) {
        return Err(Error::Domain(format!("y = {y} outside [{}, {}]", law.x0, law.a)));
    }
    Ok((law.renewal(y - law.x0) / law.renewal(law.a - law.x0)).min(1.0))
}

/// Draws X_{ζ-} under P↓.
pub fn sample_terminal<R: Rng + ?Sized>(law: &StripLaw, rng: &mut R) -> Result<f64> {
    let span = law.a - law.x0;
    match law.spec {
        SubordinatorSpec::Drift { .. } => Ok(law.x0 + span * open_unit(rng)),
        SubordinatorSpec::Stable { alpha } => Ok(law.x0 + span * open_unit(rng).powf(1.0 / alpha)),
        SubordinatorSpec::Poisson { .. } => {
            // U has equal steps, so every reachable level is equally likely
            let levels = span.floor() as u64 + 1;
            Ok(law.x0 + rng.random_range(0..levels) as f64)
        }
        _ if law.spec.has_potential_density() => {
            let target = open_unit(rng) * law.renewal(span);
            let (mut lo, mut hi) = (0.0, span);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if law.renewal(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(law.x0 + 0.5 * (lo + hi))
        }
        _ => {
            Err(Error::Unsupported(format!("{} has neither a potential density nor a lattice", law.spec.family_name())))
        }
    }
}

/// P°: the subordinator from `x0` conditioned to hit `y` continuously.
#[derive(Debug, Clone)]
pub struct HitLaw {
    pub spec: SubordinatorSpec,
    pub y: f64,
    pub x0: f64,
    density: Tabulated,
}

impl HitLaw {
    pub fn new(spec: SubordinatorSpec, y: f64, x0: f64) -> Result<Self> {
        spec.validate()?;
        if !(y >= 0.0 && y.is_finite()) || (y == 0.0 && !spec.is_lattice()) {
            return Err(Error::Domain(format!("target must be positive and finite, got {y}")));
        }
        if spec.is_lattice() {
            if !(x0 >= 0.0 && x0 <= y) || ((y - x0) - (y - x0).round()).abs() > 1e-9 {
                return Err(Error::Domain(format!("lattice target {y} is not reachable from {x0}")));
            }
        } else if !(0.0..y).contains(&x0) {
            return Err(Error::Domain(format!("start {x0} must lie in [0, {y})")));
        } else if !spec.has_potential_density() {
            return Err(Error::DensityUnavailable(format!("{} has no potential density", spec.family_name())));
        }
        let density = Tabulated::new(&spec, y, !spec.is_lattice())?;
        let law = HitLaw { spec, y, x0, density };
        if !(law.density(y - x0) > 0.0) {
            return Err(Error::Degenerate("u(y - x0) vanishes".into()));
        }
        Ok(law)
    }

    /// Potential density u(x); on a lattice the mass U(x) - U(x - 1).
    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else if self.spec.is_lattice() {
            self.density.eval(x) - self.density.eval(x - 1.0)
        } else {
            self.density.eval(x)
        }
    }

    /// u(y - x)/u(y - x0) on {x <= y}.
    pub fn weight_at(&self, x: f64) -> f64 {
        if x > self.y {
            0.0
        } else if x == self.y && !self.spec.is_lattice() {
            // u blows up at 0 for infinite activity; that set is null anyway
            0.0
        } else {
            self.density(self.y - x) / self.density(self.y - self.x0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum HitMethod {
    Exact,
    ImportanceWeight { horizon: f64, mode: SampleMode },
}

/// Draws a path under P°. `Exact` covers Drift, Poisson, Stable and drift
/// plus exponential jumps; other families must use `ImportanceWeight`.
pub fn sample_hit<R: Rng + ?Sized>(law: &HitLaw, method: HitMethod, rng: &mut R) -> Result<PathSample> {
    match method {
        HitMethod::ImportanceWeight { horizon, mode } => {
            let path = sample_path(&law.spec, horizon, mode, rng)?.shifted(law.x0);
            let w = law.weight_at(path.terminal());
            Ok(path.with_weight(w))
        }
        HitMethod::Exact => match law.spec {
            SubordinatorSpec::Drift { kappa } => {
                let end = (law.y - law.x0) / kappa;
                Ok(PathSample::new(vec![0.0, end], vec![law.x0, law.y], Interpolation::Linear)?.kill_at_end())
            }
            SubordinatorSpec::Poisson { jump_rate } => Ok(poisson_hit(law.x0, law.y, jump_rate, rng)?),
            SubordinatorSpec::Stable { alpha } => {
                XiSampler::cached(alpha, Tilt::Circ, STABLE_HIT_EPS)?.hit_path(law.x0, law.y, rng)
            }
            SubordinatorSpec::CompoundPoissonDrift { kappa, jump_rate, jump_law: JumpLaw::Exponential { rate } }
                if kappa > 0.0 =>
            {
                cpd_exp_hit(law, kappa, jump_rate, rate, rng)
            }
            _ => Err(Error::Unsupported(format!(
                "no exact hit sampler for {}; use importance weighting",
                law.spec.family_name()
            ))),
        },
    }
}

/// Poisson under P°: unconditioned jumps up to `y`, an Exp(r) holding time
/// there, then killing at the moment the next jump would have occurred.
fn poisson_hit<R: Rng + ?Sized>(x0: f64, y: f64, rate: f64, rng: &mut R) -> Result<PathSample> {
    let steps = (y - x0).round() as usize;
    let mut times = vec![0.0];
    let mut values = vec![x0];
    let mut t = 0.0;
    for k in 1..=steps {
        t += exp1(rng) / rate;
        times.push(t);
        values.push(x0 + k as f64);
    }
    t += exp1(rng) / rate;
    times.push(t);
    values.push(y);
    Ok(PathSample::new(times, values, Interpolation::Step)?.kill_at_end())
}

/// Drift κ plus Exp(μ) jumps under P°, by thinning. With
/// u(x) = A + B e^{-ρx}, jumps are proposed at rate r(A+B)/A and a proposal
/// of size j from position x is kept with probability
/// A u(y-x-j) / ((A+B) u(y-x)) when it stays below y. Since u(y - ·) is
/// harmonic below y there is no killing before the drift reaches y.
fn cpd_exp_hit<R: Rng + ?Sized>(law: &HitLaw, kappa: f64, rate: f64, mu: f64, rng: &mut R) -> Result<PathSample> {
    let s = kappa * mu + rate;
    let (a, b, rho) = (mu / s, rate / (kappa * s), s / kappa);
    let u = |x: f64| a + b * (-rho * x).exp();
    let proposal_rate = rate * (a + b) / a;
    let mut times = vec![0.0];
    let mut values = vec![law.x0];
    let (mut t, mut x) = (0.0, law.x0);
    loop {
        let e = exp1(rng) / proposal_rate;
        if x + kappa * e >= law.y {
            t += (law.y - x) / kappa;
            break;
        }
        t += e;
        x += kappa * e;
        let j = exp1(rng) / mu;
        let gap = law.y - x;
        if j < gap && rng.random::<f64>() * (a + b) * u(gap) < a * u(gap - j) {
            x += j;
            times.push(t);
            values.push(x);
        }
    }
    times.push(t.max(times.last().copied().unwrap_or(0.0).next_up()));
    values.push(law.y);
    Ok(PathSample::new(times, values, Interpolation::Drift(kappa))?.kill_at_end())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum StripMethod {
    ImportanceWeight {
        horizon: f64,
        mode: SampleMode,
    },
    PathDecomposition,
    /// Forward simulation with the conditioned dynamics; Poisson and stable.
    HTransform,
}

/// Jump rate of ξ above the small-jump cutoff in the stable strip sampler.
pub const STABLE_STRIP_JUMP_RATE: f64 = 200.0;

/// Draws a path under P↓.
///
/// `PathDecomposition` picks the terminal value first and then a P° path
/// into it. Families without an exact hit sampler get an importance-weighted
/// hit path over the mean time needed to cover the gap.
pub fn sample_strip<R: Rng + ?Sized>(law: &StripLaw, method: StripMethod, rng: &mut R) -> Result<PathSample> {
    match method {
        StripMethod::ImportanceWeight { horizon, mode } => {
            let path = sample_path(&law.spec, horizon, mode, rng)?.shifted(law.x0);
            let w = law.weight_at(path.terminal());
            Ok(path.with_weight(w))
        }
        StripMethod::PathDecomposition => {
            let y = sample_terminal(law, rng)?;
            if y <= law.x0 && !law.spec.is_lattice() {
                return Err(Error::Numeric("terminal draw fell on the start point".into()));
            }
            let hit = HitLaw::new(law.spec, y, law.x0)?;
            match sample_hit(&hit, HitMethod::Exact, rng) {
                Err(Error::Unsupported(_)) => {
                    let horizon = (y - law.x0) / law.spec.mean();
                    let mode = SampleMode::Grid { dt: horizon / 100.0 };
                    sample_hit(&hit, HitMethod::ImportanceWeight { horizon, mode }, rng)
                }
                other => other,
            }
        }
        StripMethod::HTransform => match law.spec {
            SubordinatorSpec::Poisson { jump_rate } => Ok(poisson_strip(law, jump_rate, rng)?),
            SubordinatorSpec::Stable { alpha } => {
                let eps = XiSampler::eps_for_rate(alpha, STABLE_STRIP_JUMP_RATE)?;
                XiSampler::cached(alpha, Tilt::Down, eps)?.strip_path(law.x0, law.a, rng)
            }
            _ => Err(Error::Unsupported(format!("no forward conditioned dynamics for {}", law.spec.family_name()))),
        },
    }
}

/// Poisson under P↓: with n levels left in the strip the process holds for
/// Exp(r), then steps up with probability (n-1)/n and is killed otherwise.
fn poisson_strip<R: Rng + ?Sized>(law: &StripLaw, rate: f64, rng: &mut R) -> Result<PathSample> {
    let mut levels = (law.a - law.x0).floor() as u64 + 1;
    let mut times = vec![0.0];
    let mut values = vec![law.x0];
    let mut t = 0.0;
    loop {
        t += exp1(rng) / rate;
        times.push(t);
        if rng.random_range(0..levels) == 0 {
            values.push(*values.last().unwrap());
            return Ok(PathSample::new(times, values, Interpolation::Step)?.kill_at_end());
        }
        values.push(values.last().unwrap() + 1.0);
        levels -= 1;
    }
}

/// Events A ∈ F_T used to test the killing limit, each with its stopping time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum StripEvent {
    /// A = Ω at T = 0.
    Full,
    /// A = Ω at T = first passage strictly above `y`.
    Passes { y: f64 },
    /// A = {X_t <= c} at T = t.
    BelowAt { t: f64, c: f64 },
    /// A = {X_t > c} at T = t.
    AboveAt { t: f64, c: f64 },
}

impl StripEvent {
    /// (T, 1_A) on an unconditioned path, or None when T lies past the path.
    fn evaluate(&self, path: &PathSample) -> Option<(f64, bool)> {
        match *self {
            StripEvent::Full => Some((0.0, true)),
            StripEvent::Passes { y } => path.passage_time(y).map(|t| (t, true)),
            StripEvent::BelowAt { t, c } => path.value_at(t).map(|x| (t, x <= c)),
            StripEvent::AboveAt { t, c } => path.value_at(t).map(|x| (t, x > c)),
        }
    }

    /// Whether a P↓ path realises {A, T < ζ}.
    pub fn holds_conditioned(&self, path: &PathSample) -> bool {
        match *self {
            StripEvent::Full => true,
            StripEvent::Passes { y } => path.passage_time(y).is_some_and(|t| t < path.lifetime),
            StripEvent::BelowAt { t, c } => t < path.lifetime && path.value_at(t).is_some_and(|x| x <= c),
            StripEvent::AboveAt { t, c } => t < path.lifetime && path.value_at(t).is_some_and(|x| x > c),
        }
    }
}

/// P↓(A, T < ζ) by direct summation for Drift and Poisson.
pub fn strip_event_exact(law: &StripLaw, event: StripEvent) -> Result<f64> {
    let at_time = |t: f64, keep: &dyn Fn(f64) -> bool| -> Result<f64> {
        match law.spec {
            SubordinatorSpec::Drift { kappa } => {
                let x = law.x0 + kappa * t;
                Ok(if keep(x) { law.weight_at(x) } else { 0.0 })
            }
            SubordinatorSpec::Poisson { jump_rate } => {
                let m = jump_rate * t;
                let mut pmf = (-m).exp();
                let mut total = 0.0;
                for n in 0..=((law.a - law.x0).floor() as u64) {
                    if n > 0 {
                        pmf *= m / n as f64;
                    }
                    let x = law.x0 + n as f64;
                    if keep(x) {
                        total += pmf * law.weight_at(x);
                    }
                }
                Ok(total)
            }
            _ => Err(Error::Unsupported(format!("no exact event law for {}", law.spec.family_name()))),
        }
    };
    match event {
        StripEvent::Full => Ok(1.0),
        StripEvent::Passes { y } if y < law.x0 => Ok(1.0),
        StripEvent::Passes { y } => Ok(1.0 - terminal_cdf(law, y.min(law.a))?),
        StripEvent::BelowAt { t, c } => at_time(t, &|x| x <= c),
        StripEvent::AboveAt { t, c } => at_time(t, &|x| x > c),
    }
}

/// One row of the killing-limit table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KillingRow {
    pub q: f64,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KillingLimit {
    pub rows: Vec<KillingRow>,
    pub extrapolated: Extrapolation,
    /// P↓(A, T < ζ) from the path-decomposition sampler.
    pub conditioned: Estimate,
    /// The same probability in closed form when available.
    pub exact: Option<f64>,
    /// Set when the standard errors are too wide for a verdict.
    pub inconclusive: bool,
}

/// Estimates P_x(A, T < e_q | e_q < τ_a) along `q_seq` and compares it with
/// P↓(A, T < ζ).
///
/// The exponential time is integrated out on each path, so a path
/// contributes 1_A (e^{-qT} - e^{-qτ_a})^+ to the numerator and 1 - e^{-qτ_a}
/// to the denominator. All q share the same paths.
pub fn verify_killing_limit(
    law: &StripLaw,
    event: StripEvent,
    q_seq: &[f64],
    n_paths: usize,
    stream: RngStream,
) -> Result<KillingLimit> {
    if q_seq.is_empty() || q_seq.iter().any(|&q| !(q > 0.0 && q.is_finite())) {
        return Err(Error::Domain("q sequence must hold positive finite values".into()));
    }
    if q_seq.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Domain("q sequence must be decreasing".into()));
    }
    if n_paths < 2 {
        return Err(Error::Domain("need at least two paths".into()));
    }
    let level = law.a - law.x0;
    let shifted = |e: StripEvent| match e {
        StripEvent::Full => e,
        StripEvent::Passes { y } => StripEvent::Passes { y: y - law.x0 },
        StripEvent::BelowAt { t, c } => StripEvent::BelowAt { t, c: c - law.x0 },
        StripEvent::AboveAt { t, c } => StripEvent::AboveAt { t, c: c - law.x0 },
    };
    let local = shifted(event);
    let per_path = par_map(n_paths, stream.labeled("unconditioned"), |_, rng| {
        let path = sample_path_past_level(&law.spec, level, rng)?;
        let tau = path.passage_time(level).ok_or_else(|| Error::Numeric("path ended below the barrier".into()))?;
        let (t, hit) = local.evaluate(&path).unwrap_or((f64::INFINITY, false));
        Ok((tau, t, hit))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(q_seq.len());
    for &q in q_seq {
        let num: Vec<f64> = per_path
            .iter()
            .map(|&(tau, t, hit)| if hit && t < tau { (-q * t).exp() - (-q * tau).exp() } else { 0.0 })
            .collect();
        let den: Vec<f64> = per_path.iter().map(|&(tau, _, _)| -(-q * tau).exp_m1()).collect();
        rows.push(KillingRow { q, estimate: ratio(&num, &den) });
    }
    let points: Vec<(f64, Estimate)> = rows.iter().map(|r| (r.q, r.estimate)).collect();
    let extrapolated = extrapolate_q(&points, (points.len() - 1).min(2))?;

    let samples = par_map(n_paths, stream.labeled("conditioned"), |_, rng| {
        sample_strip(law, StripMethod::PathDecomposition, rng).map(|p| event.holds_conditioned(&p) as u8 as f64)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let conditioned = Estimate::from_samples(&samples);
    let exact = strip_event_exact(law, event).ok();
    let inconclusive = extrapolated.std_error > 0.01 || conditioned.std_error > 0.01;
    Ok(KillingLimit { rows, extrapolated, conditioned, exact, inconclusive })
}

/// Ratio of means with a delta-method standard error.
fn ratio(num: &[f64], den: &[f64]) -> Estimate {
    let n = num.len() as f64;
    let mn = num.iter().sum::<f64>() / n;
    let md = den.iter().sum::<f64>() / n;
    let r = mn / md;
    let var = num.iter().zip(den).map(|(a, b)| (a - r * b).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate { mean: r, std_error: (var / n).sqrt() / md, n: num.len() }
}

/// Monte Carlo check that U(a - X_t)1{X_t < a} (or u in place of U) has
/// mean at most its value at time 0 and is nonincreasing along `t_grid`.
pub fn check_supermartingale(
    spec: &SubordinatorSpec,
    a: f64,
    t_grid: &[f64],
    density: bool,
    n_paths: usize,
    stream: RngStream,
    th: &Thresholds,
) -> Result<Vec<TestReport>> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid[0] < 0.0 {
        return Err(Error::Domain("time grid must be increasing and nonnegative".into()));
    }
    if density && !spec.has_potential_density() {
        return Err(Error::DensityUnavailable(format!("{} has no potential density", spec.family_name())));
    }
    let f = Tabulated::new(spec, a, density)?;
    let value = |x: f64| if x < a { f.eval(a - x) } else { 0.0 };
    let start = value(0.0);
    let rows = par_map(n_paths, stream, |_, rng| {
        let mut x = 0.0;
        let mut last = 0.0;
        t_grid
            .iter()
            .map(|&t| {
                x += sample_increment(spec, t - last, rng);
                last = t;
                value(x)
            })
            .collect::<Vec<_>>()
    });
    let label = if density { "u" } else { "U" };
    let mut reports = Vec::new();
    let mut previous: Option<(f64, Estimate)> = None;
    for (k, &t) in t_grid.iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        let est = Estimate::from_samples(&col);
        let bound = start + th.sigmas * est.std_error;
        reports.push(
            TestReport::below(&format!("{label}-supermartingale bound at t={t}"), est.mean, bound, n_paths)
                .with_meta("mean", est.mean)
                .with_meta("std_error", est.std_error)
                .with_meta("initial", start),
        );
        if let Some((t_prev, prev)) = previous {
            // paired differences along the same paths
            let diffs: Vec<f64> = rows.iter().map(|r| r[k] - r[k - 1]).collect();
            let d = Estimate::from_samples(&diffs);
            reports.push(
                TestReport::below(
                    &format!("{label}-supermartingale monotone {t_prev}->{t}"),
                    d.mean,
                    th.sigmas * d.std_error,
                    n_paths,
                )
                .with_meta("previous_mean", prev.mean),
            );
        }
        previous = Some((t, est));
    }
    Ok(reports)
}

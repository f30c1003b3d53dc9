use super::path::{Interpolation, PathSample};
use super::spec::SubordinatorSpec;
use crate::error::{Error, Result};
use crate::special::gamma;
use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleMode {
    JumpExact,
    Grid { dt: f64 },
}

/// Uniform on the open interval (0, 1).
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub(crate) fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// One-sided stable variate with E e^{-λS} = e^{-λ^α} (Kanter's representation).
pub(crate) fn unit_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = PI * open_unit(rng);
    let w = exp1(rng);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * u).sin() / w).powf((1.0 - alpha) / alpha);
    a * b
}

/// Stable increment over a time span `t`: E e^{-λS} = e^{-tλ^α}.
pub fn sample_stable_increment<R: Rng + ?Sized>(alpha: f64, t: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie strictly inside (0, 1), got {alpha}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time span must be positive, got {t}")));
    }
    Ok(t.powf(1.0 / alpha) * unit_stable(alpha, rng))
}

/// log of a Gamma(shape, 1) variate, accurate for tiny shapes.
pub(crate) fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        Gamma::new(shape, 1.0).expect("positive shape").sample(rng).ln()
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        g.ln() + open_unit(rng).ln() / shape
    }
}

/// Exact increment X_{t+dt} - X_t.
pub fn sample_increment<R: Rng + ?Sized>(spec: &SubordinatorSpec, dt: f64, rng: &mut R) -> f64 {
    match *spec {
        SubordinatorSpec::Drift { kappa } => kappa * dt,
        SubordinatorSpec::Poisson { jump_rate } => poisson_count(jump_rate * dt, rng) as f64,
        SubordinatorSpec::CompoundPoissonDrift { kappa, jump_rate, jump_law } => {
            let n = poisson_count(jump_rate * dt, rng);
            kappa * dt + (0..n).map(|_| jump_law.sample(rng)).sum::<f64>()
        }
        SubordinatorSpec::Stable { alpha } => dt.powf(1.0 / alpha) * unit_stable(alpha, rng),
        SubordinatorSpec::Gamma { gamma_shape, gamma_rate } => {
            ln_gamma_variate(gamma_shape * dt, rng).exp() / gamma_rate
        }
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let v: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
    v as u64
}

/// Simulates a path on `[0, horizon]` started at 0.
pub fn sample_path<R: Rng + ?Sized>(
    spec: &SubordinatorSpec,
    horizon: f64,
    mode: SampleMode,
    rng: &mut R,
) -> Result<PathSample> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    match mode {
        SampleMode::Grid { dt } => {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Domain(format!("grid step must be positive, got {dt}")));
            }
            let steps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
            let mut times = Vec::with_capacity(steps + 1);
            let mut values = Vec::with_capacity(steps + 1);
            times.push(0.0);
            values.push(0.0);
            let mut x = 0.0;
            for k in 1..=steps {
                let t = if k == steps { horizon } else { k as f64 * dt };
                x += sample_increment(spec, t - times[k - 1], rng);
                times.push(t);
                values.push(x);
            }
            let interp = match spec {
                SubordinatorSpec::Drift { .. } => Interpolation::Linear,
                _ => Interpolation::Step,
            };
            PathSample::new(times, values, interp)
        }
        SampleMode::JumpExact => {
            let (kappa, rate) = match *spec {
                SubordinatorSpec::Drift { kappa } => (kappa, 0.0),
                SubordinatorSpec::Poisson { jump_rate } => (0.0, jump_rate),
                SubordinatorSpec::CompoundPoissonDrift { kappa, jump_rate, .. } => (kappa, jump_rate),
                _ => {
                    return Err(Error::Unsupported(format!(
                        "jump-exact sampling needs finite activity, {} has infinitely many jumps",
                        spec.family_name()
                    )))
                }
            };
            let mut times = vec![0.0];
            let mut values = vec![0.0];
            let mut t = 0.0;
            let mut x = 0.0;
            if rate > 0.0 {
                let hold = Exp::new(rate).expect("validated rate");
                loop {
                    let e: f64 = hold.sample(rng);
                    if t + e >= horizon {
                        break;
                    }
                    let prev = t;
                    t += e;
                    if t <= prev {
                        continue;
                    }
                    x += kappa * e + jump_size(spec, rng);
                    times.push(t);
                    values.push(x);
                }
            }
            if horizon > t {
                times.push(horizon);
                values.push(x + kappa * (horizon - t));
            }
            PathSample::new(times, values, Interpolation::Drift(kappa))
        }
    }
}

/// Jump-exact path from 0 of a finite-activity subordinator, continued for
/// one time unit past its first passage strictly above `level`.
pub fn sample_path_past_level<R: Rng + ?Sized>(spec: &SubordinatorSpec, level: f64, rng: &mut R) -> Result<PathSample> {
    let (kappa, rate) = match *spec {
        SubordinatorSpec::Drift { kappa } => (kappa, 0.0),
        SubordinatorSpec::Poisson { jump_rate } => (0.0, jump_rate),
        SubordinatorSpec::CompoundPoissonDrift { kappa, jump_rate, .. } => (kappa, jump_rate),
        _ => {
            return Err(Error::Unsupported(format!(
                "jump-exact sampling needs finite activity, {} has infinitely many jumps",
                spec.family_name()
            )))
        }
    };
    if !level.is_finite() {
        return Err(Error::Domain("level must be finite".into()));
    }
    let mut times = vec![0.0];
    let mut values = vec![0.0];
    let (mut t, mut x) = (0.0, 0.0);
    let mut horizon = f64::INFINITY;
    if level < 0.0 {
        horizon = 1.0;
    }
    loop {
        let e = if rate > 0.0 { exp1(rng) / rate } else { f64::INFINITY };
        if horizon.is_infinite() && kappa > 0.0 && x + kappa * e.min(f64::MAX) > level {
            horizon = t + (level - x) / kappa + 1.0;
        }
        if t + e >= horizon {
            break;
        }
        t += e;
        x += kappa * e + jump_size(spec, rng);
        times.push(t);
        values.push(x);
        if horizon.is_infinite() && x > level {
            horizon = t + 1.0;
        }
    }
    times.push(horizon);
    values.push(x + kappa * (horizon - t));
    PathSample::new(times, values, Interpolation::Drift(kappa))
}

fn jump_size<R: Rng + ?Sized>(spec: &SubordinatorSpec, rng: &mut R) -> f64 {
    match spec {
        SubordinatorSpec::CompoundPoissonDrift { jump_law, .. } => jump_law.sample(rng),
        _ => 1.0,
    }
}

/// Exact first-passage time τ = inf{t : X_t > level} for the process
/// started at 0. Gamma is bracketed on a grid and refined by gamma bridges.
pub fn sample_passage_time<R: Rng + ?Sized>(spec: &SubordinatorSpec, level: f64, rng: &mut R) -> f64 {
    if level < 0.0 {
        return 0.0;
    }
    if level.is_infinite() {
        return f64::INFINITY;
    }
    match *spec {
        SubordinatorSpec::Drift { kappa } => level / kappa,
        SubordinatorSpec::Stable { alpha } => {
            // P(τ > t) = P(X_t <= level) = P(S <= level t^{-1/α})
            if level == 0.0 {
                0.0
            } else {
                (level / unit_stable(alpha, rng)).powf(alpha)
            }
        }
        SubordinatorSpec::Poisson { jump_rate } => finite_activity_passage(0.0, jump_rate, spec, level, rng),
        SubordinatorSpec::CompoundPoissonDrift { kappa, jump_rate, .. } => {
            finite_activity_passage(kappa, jump_rate, spec, level, rng)
        }
        SubordinatorSpec::Gamma { gamma_shape, gamma_rate } => gamma_passage(gamma_shape, gamma_rate, level, rng),
    }
}

fn finite_activity_passage<R: Rng + ?Sized>(
    kappa: f64,
    rate: f64,
    spec: &SubordinatorSpec,
    level: f64,
    rng: &mut R,
) -> f64 {
    let hold = Exp::new(rate).expect("validated rate");
    let (mut t, mut x) = (0.0, 0.0);
    loop {
        let e: f64 = hold.sample(rng);
        if kappa > 0.0 && x + kappa * e > level {
            return t + (level - x) / kappa;
        }
        t += e;
        x += kappa * e + jump_size(spec, rng);
        if x > level {
            return t;
        }
    }
}

fn gamma_passage<R: Rng + ?Sized>(shape: f64, rate: f64, level: f64, rng: &mut R) -> f64 {
    if level == 0.0 {
        return 0.0;
    }
    // expect roughly eight grid steps to bracket the passage
    let dt = (level * rate / shape / 8.0).max(1e-12);
    let (mut t0, mut x0) = (0.0, 0.0);
    let (mut t1, mut x1);
    loop {
        let inc = ln_gamma_variate(shape * dt, rng).exp() / rate;
        t1 = t0 + dt;
        x1 = x0 + inc;
        if x1 > level {
            break;
        }
        t0 = t1;
        x0 = x1;
    }
    // gamma bridge: X_m - X_{t0} = (x1 - x0)·Beta(shape(m-t0), shape(t1-m))
    for _ in 0..200 {
        if t1 - t0 <= 1e-13 * t1.max(1.0) {
            break;
        }
        let m = 0.5 * (t0 + t1);
        let la = ln_gamma_variate(shape * (m - t0), rng);
        let lb = ln_gamma_variate(shape * (t1 - m), rng);
        let frac = 1.0 / (1.0 + (lb - la).exp());
        let xm = x0 + (x1 - x0) * frac;
        if xm > level {
            t1 = m;
            x1 = xm;
        } else {
            t0 = m;
            x0 = xm;
        }
    }
    0.5 * (t0 + t1)
}

/// Stable process with jumps below `rel_cutoff · (distance to the level)`
/// replaced by their mean drift. Used where the pre-passage trajectory
/// matters (undershoots, Lamperti extraction).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableJumpApprox {
    pub alpha: f64,
    pub rel_cutoff: f64,
}

/// Path run up to first passage: killed at τ with terminal point
/// `(τ, X_{τ-})`; `overshoot_value` is `X_τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstPassage {
    pub path: PathSample,
    pub overshoot_value: f64,
}

impl StableJumpApprox {
    pub fn new(alpha: f64, rel_cutoff: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie strictly inside (0, 1), got {alpha}")));
        }
        if !(rel_cutoff > 0.0 && rel_cutoff < 1.0) {
            return Err(Error::Domain(format!("relative cutoff must lie in (0, 1), got {rel_cutoff}")));
        }
        Ok(StableJumpApprox { alpha, rel_cutoff })
    }

    pub fn run_to_level<R: Rng + ?Sized>(&self, x0: f64, level: f64, rng: &mut R) -> Result<FirstPassage> {
        if !(x0 < level) {
            return Err(Error::Domain(format!("start {x0} must lie below level {level}")));
        }
        let a = self.alpha;
        let g = gamma(1.0 - a);
        let mut times = vec![0.0];
        let mut values = vec![x0];
        let mut slopes = Vec::new();
        let (mut t, mut x) = (0.0, x0);
        loop {
            let r = level - x;
            let delta = self.rel_cutoff * r;
            let rate = delta.powf(-a) / g;
            let drift = a * delta.powf(1.0 - a) / ((1.0 - a) * g);
            let e = exp1(rng) / rate;
            if drift * e >= r {
                // drift reaches the level first: creeping artefact of the truncation
                let tau = (t + r / drift).max(t.next_up());
                slopes.push(drift);
                times.push(tau);
                values.push(level);
                let path = PathSample::new(times, values, Interpolation::Segments(slopes))?;
                return Ok(FirstPassage { path: path.kill_at_end(), overshoot_value: level });
            }
            // keep the clock strictly increasing even when e underflows against t
            t = (t + e).max(t.next_up());
            let pre = x + drift * e;
            let jump = delta * open_unit(rng).powf(-1.0 / a);
            slopes.push(drift);
            times.push(t);
            if pre + jump > level {
                values.push(pre);
                let path = PathSample::new(times, values, Interpolation::Segments(slopes))?;
                return Ok(FirstPassage { path: path.kill_at_end(), overshoot_value: pre + jump });
            }
            x = pre + jump;
            values.push(x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::JumpLaw;
    use crate::rng::RngStream;
    use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};

    fn mean_of<F: FnMut(&mut crate::rng::StreamRng) -> f64>(n: usize, seed: u64, mut f: F) -> (f64, f64) {
        let mut rng = RngStream::new(seed, 0).rng();
        let xs: Vec<f64> = (0..n).map(|_| f(&mut rng)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (m, (v / n as f64).sqrt())
    }

    #[test]
    fn drift_grid_example() {
        let mut rng = RngStream::new(1, 0).rng();
        let p =
            sample_path(&SubordinatorSpec::drift(1.0).unwrap(), 2.0, SampleMode::Grid { dt: 0.5 }, &mut rng).unwrap();
        assert_eq!(p.times, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(p.values, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn jump_exact_rejects_infinite_activity() {
        let mut rng = RngStream::new(1, 0).rng();
        let err = sample_path(&SubordinatorSpec::stable(0.5).unwrap(), 1.0, SampleMode::JumpExact, &mut rng);
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn poisson_jump_count_mean() {
        let spec = SubordinatorSpec::poisson(1.0).unwrap();
        let (m, se) = mean_of(10_000, 2, |r| {
            let p = sample_path(&spec, 10.0, SampleMode::JumpExact, r).unwrap();
            p.terminal()
        });
        assert!((m - 10.0).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn stable_laplace_transform() {
        let (m, se) = mean_of(50_000, 3, |r| (-sample_stable_increment(0.5, 1.0, r).unwrap()).exp());
        assert!((m - (-1f64).exp()).abs() < 3.0 * se, "{m} ± {se}");
        assert!(sample_stable_increment(1.0, 1.0, &mut RngStream::new(0, 0).rng()).is_err());
        assert!(sample_stable_increment(0.0, 1.0, &mut RngStream::new(0, 0).rng()).is_err());
    }

    #[test]
    fn exact_marginals_all_families() {
        let specs = [
            SubordinatorSpec::poisson(1.3).unwrap(),
            SubordinatorSpec::compound_poisson_drift(0.5, 2.0, JumpLaw::Exponential { rate: 1.5 }).unwrap(),
            SubordinatorSpec::stable(0.7).unwrap(),
            SubordinatorSpec::gamma(0.8, 2.0).unwrap(),
        ];
        for (k, spec) in specs.iter().enumerate() {
            for &lambda in &[0.5, 2.0] {
                let (m, se) = mean_of(20_000, 10 + k as u64, |r| (-lambda * sample_increment(spec, 0.5, r)).exp());
                let exact = (-0.5 * spec.laplace_exponent(lambda).unwrap()).exp();
                assert!((m - exact).abs() < 3.5 * se, "{spec:?} λ={lambda}: {m} vs {exact}");
            }
        }
    }

    #[test]
    fn passage_time_poisson_and_stable() {
        let p = SubordinatorSpec::poisson(1.0).unwrap();
        let (m, se) = mean_of(20_000, 4, |r| sample_passage_time(&p, 2.5, r));
        assert!((m - 3.0).abs() < 3.0 * se);
        // P(τ <= 1) = P(X_1 > 1) for the gamma family
        let g = SubordinatorSpec::gamma(1.0, 1.0).unwrap();
        let (m, se) = mean_of(20_000, 5, |r| f64::from(u8::from(sample_passage_time(&g, 1.0, r) <= 1.0)));
        let exact = 1.0 - GammaDist::new(1.0, 1.0).unwrap().cdf(1.0);
        assert!((m - exact).abs() < 3.0 * se, "{m} vs {exact}");
    }

    #[test]
    fn path_past_level_covers_passage() {
        let mut rng = RngStream::new(9, 0).rng();
        let spec = SubordinatorSpec::compound_poisson_drift(1.0, 1.0, JumpLaw::Exponential { rate: 1.0 }).unwrap();
        for _ in 0..200 {
            let p = sample_path_past_level(&spec, 2.0, &mut rng).unwrap();
            let tau = p.passage_time(2.0).unwrap();
            assert!(p.end_time() >= tau + 1.0 - 1e-12);
        }
        let d = sample_path_past_level(&SubordinatorSpec::drift(2.0).unwrap(), 3.0, &mut rng).unwrap();
        assert!((d.passage_time(3.0).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn stable_approx_first_passage_shape() {
        let approx = StableJumpApprox::new(0.5, 1e-4).unwrap();
        let mut rng = RngStream::new(6, 0).rng();
        for _ in 0..200 {
            let fp = approx.run_to_level(0.0, 1.0, &mut rng).unwrap();
            assert!(fp.path.killed && fp.path.is_nondecreasing());
            assert!(fp.path.terminal() <= 1.0 && fp.overshoot_value >= 1.0);
        }
    }
}

//! The stable subordinator seen through the Lamperti transform.
//!
//! For a stable subordinator `X` with index `α` and a barrier `a`, the
//! process `Y = a - X` killed at first passage is positive self-similar and
//! `Y_t = a exp(ξ_{σ(t)})` with `σ(t) = ∫_0^t Y_r^{-α} dr`. The negative of
//! `ξ` is a killed subordinator with Lévy density
//!
//! ```text
//! π(s) = α/Γ(1-α) · e^{-s} (1 - e^{-s})^{-α-1},   killing rate 1/Γ(1-α).
//! ```
//!
//! Exponential tilts by `e^{αξ}` and `e^{(α-1)ξ}` replace `e^{-s}` by
//! `e^{-(1+α)s}` and `e^{-αs}` and give the exponents `Φ↓` and `Φ°`.

use crate::error::{Error, Result};
use crate::mc::{par_map, Estimate};
use crate::models::{exp1, open_unit, Interpolation, PathSample, StableJumpApprox};
use crate::quad::{gauss16, tanh_sinh};
use crate::rng::RngStream;
use crate::special::{gamma, gamma_ratio, rgamma};
use crate::verify::{TestReport, Thresholds};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie strictly inside (0, 1), got {alpha}")))
    }
}

/// Φ(λ) = Γ(1+λ)/Γ(1+λ-α). Also evaluated left of zero wherever the Gamma
/// quotient is finite, so that Φ(α-1) = 0 can be checked as an identity.
pub fn phi_xi(lambda: f64, alpha: f64) -> f64 {
    gamma_ratio(1.0 + lambda, 1.0 + lambda - alpha)
}

/// Φ↓(λ) = Γ(1+λ+α)/Γ(1+λ) = Φ(λ+α).
pub fn phi_down(lambda: f64, alpha: f64) -> f64 {
    gamma_ratio(1.0 + lambda + alpha, 1.0 + lambda)
}

/// Φ°(λ) = Γ(α+λ)/Γ(λ) = Φ(λ+α-1).
pub fn phi_circ(lambda: f64, alpha: f64) -> f64 {
    gamma_ratio(alpha + lambda, lambda)
}

/// Rate at which ξ is killed under P.
pub fn killing_rate(alpha: f64) -> f64 {
    rgamma(1.0 - alpha)
}

/// Density of the scaled undershoot (a - X_{τ_a-})/a.
pub fn undershoot_density(y: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::Domain(format!("undershoot density lives on the open interval (0, 1), got {y}")));
    }
    Ok(y.powf(-alpha) * (1.0 - y).powf(alpha - 1.0) * rgamma(1.0 - alpha) * rgamma(alpha))
}

/// Distribution function of the scaled undershoot, a Beta(1-α, α) law.
pub fn undershoot_cdf(y: f64, alpha: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else if y >= 1.0 {
        1.0
    } else {
        beta_reg(1.0 - alpha, alpha, y)
    }
}

/// Exponential change of measure applied to ξ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tilt {
    None,
    /// by e^{αξ}: the strip conditioning
    Down,
    /// by e^{(α-1)ξ}: conditioning to hit the barrier continuously
    Circ,
}

impl Tilt {
    /// Exponent γ in the tilted Lévy density ∝ e^{-γs}(1-e^{-s})^{-α-1}.
    fn decay(self, alpha: f64) -> f64 {
        match self {
            Tilt::None => 1.0,
            Tilt::Down => 1.0 + alpha,
            Tilt::Circ => alpha,
        }
    }

    pub fn exponent(self, lambda: f64, alpha: f64) -> f64 {
        match self {
            Tilt::None => phi_xi(lambda, alpha),
            Tilt::Down => phi_down(lambda, alpha),
            Tilt::Circ => phi_circ(lambda, alpha),
        }
    }

    pub fn kill_rate(self, alpha: f64) -> f64 {
        self.exponent(0.0, alpha)
    }

    /// Lévy density of -ξ under this tilt.
    pub fn levy_density(self, s: f64, alpha: f64) -> f64 {
        alpha * rgamma(1.0 - alpha) * (-self.decay(alpha) * s).exp() * (-(-s).exp_m1()).powf(-alpha - 1.0)
    }
}

/// Simulator for ξ under a tilt: jumps of -ξ larger than `eps` are drawn
/// exactly, smaller ones are replaced by their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct XiSampler {
    pub alpha: f64,
    pub tilt: Tilt,
    pub eps: f64,
    /// Rate of linear decrease of ξ contributed by the small jumps.
    pub drift: f64,
    pub kill_rate: f64,
    mass_low: f64,
    mass_high: f64,
    z_eps: f64,
    bound_low: f64,
}

impl XiSampler {
    pub fn new(alpha: f64, tilt: Tilt, eps: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(eps > 0.0 && eps < 0.1) {
            return Err(Error::Domain(format!("small-jump cutoff must lie in (0, 0.1), got {eps}")));
        }
        let c = alpha * rgamma(1.0 - alpha);
        let g = tilt.decay(alpha);
        let z_eps = -(-eps).exp_m1();
        // in z = 1 - e^{-s} the density is c z^{-α-1} (1-z)^{g-1}
        let mass_low = c * tanh_sinh(|z| z.powf(-alpha - 1.0) * (1.0 - z).powf(g - 1.0), z_eps, 0.5, 1e-12)?;
        let mass_high = c * tanh_sinh(|w| (1.0 - w).powf(-alpha - 1.0) * w.powf(g - 1.0), 0.0, 0.5, 1e-12)?;
        let drift = tanh_sinh(|s| s * tilt.levy_density(s, alpha), 0.0, eps, 1e-14 * eps)?;
        Ok(XiSampler {
            alpha,
            tilt,
            eps,
            drift,
            kill_rate: tilt.kill_rate(alpha),
            mass_low,
            mass_high,
            z_eps,
            bound_low: if g >= 1.0 { 1.0 } else { 2f64.powf(1.0 - g) },
        })
    }

    /// Shared instance for `(alpha, tilt, eps)`; construction runs several
    /// quadratures, so per-path callers should go through this.
    pub fn cached(alpha: f64, tilt: Tilt, eps: f64) -> Result<Arc<XiSampler>> {
        type Cache = Mutex<HashMap<(u64, Tilt, u64), Arc<XiSampler>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let key = (alpha.to_bits(), tilt, eps.to_bits());
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(s) = cache.lock().expect("sampler cache poisoned").get(&key) {
            return Ok(Arc::clone(s));
        }
        let built = Arc::new(XiSampler::new(alpha, tilt, eps)?);
        cache.lock().expect("sampler cache poisoned").insert(key, Arc::clone(&built));
        Ok(built)
    }

    /// Cutoff at which jumps above it arrive at roughly `rate` per unit of
    /// Lamperti time, capped at 1e-3. The mass below the cutoff that the
    /// drift replacement distorts is then of order `1/rate`.
    pub fn eps_for_rate(alpha: f64, rate: f64) -> Result<f64> {
        check_alpha(alpha)?;
        if !(rate > 1.0) {
            return Err(Error::Domain(format!("jump rate must exceed 1, got {rate}")));
        }
        Ok((rate * gamma(1.0 - alpha)).powf(-1.0 / alpha).min(1e-3))
    }

    /// Total rate of jumps of -ξ above the cutoff.
    pub fn big_jump_rate(&self) -> f64 {
        self.mass_low + self.mass_high
    }

    pub fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.alpha;
        let g = self.tilt.decay(a);
        if rng.random::<f64>() * self.big_jump_rate() < self.mass_low {
            // truncated Pareto z^{-α-1} on (z_eps, 1/2], thinned by (1-z)^{g-1}
            let lo = self.z_eps.powf(-a);
            let hi = 2f64.powf(a);
            loop {
                let z = (lo - open_unit(rng) * (lo - hi)).powf(-1.0 / a);
                if rng.random::<f64>() * self.bound_low <= (1.0 - z).powf(g - 1.0) {
                    return -(-z).ln_1p();
                }
            }
        } else {
            // w = 1 - z with density ∝ w^{g-1} on (0, 1/2), thinned by (1-w)^{-α-1}
            loop {
                let w = 0.5 * open_unit(rng).powf(1.0 / g);
                if rng.random::<f64>() <= (2.0 * (1.0 - w)).powf(-a - 1.0) {
                    return -w.ln();
                }
            }
        }
    }

    /// ξ on its own clock over `[0, horizon]`, started at 0.
    pub fn sample<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<PathSample> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        let kill = if self.kill_rate > 0.0 { exp1(rng) / self.kill_rate } else { f64::INFINITY };
        let stop = kill.min(horizon);
        let rate = self.big_jump_rate();
        let (mut t, mut xi) = (0.0, 0.0);
        let mut times = vec![0.0];
        let mut values = vec![0.0];
        loop {
            let e = exp1(rng) / rate;
            if t + e >= stop {
                break;
            }
            t += e;
            xi -= self.drift * e + self.sample_jump(rng);
            times.push(t);
            values.push(xi);
        }
        if stop > t {
            times.push(stop);
            values.push(xi - self.drift * (stop - t));
        }
        let path = PathSample::new(times, values, Interpolation::Drift(-self.drift))?;
        Ok(if kill < horizon { path.kill_at_end() } else { path })
    }

    /// Stable subordinator from `x0` conditioned to hit `y` continuously,
    /// built from ξ under the `Circ` tilt. Once `(y - X)^α` has fallen by a
    /// factor `1e-9` the remaining jumps are dropped and the path drifts into
    /// `y`. The result is killed at its absorption time with terminal value `y`.
    pub fn hit_path<R: Rng + ?Sized>(&self, x0: f64, y: f64, rng: &mut R) -> Result<PathSample> {
        if self.tilt != Tilt::Circ {
            return Err(Error::InvalidSpec("hit paths need the Circ tilt".into()));
        }
        if !(x0 < y) {
            return Err(Error::Domain(format!("start {x0} must lie below the target {y}")));
        }
        let a = self.alpha;
        let y0 = y - x0;
        let xi_stop = (1e-9f64).ln() / a;
        // real-time rate at which (y - X)^α decreases between jumps
        let rate = a * self.drift;
        let jump_rate = self.big_jump_rate();
        let mut times = vec![0.0];
        let mut values = vec![x0];
        let (mut t, mut xi) = (0.0, 0.0);
        loop {
            let e = exp1(rng) / jump_rate;
            let gap_pow = y0.powf(a) * (a * xi).exp();
            if xi - self.drift * e <= xi_stop {
                t += gap_pow / rate;
                break;
            }
            let dt = gap_pow * -(-rate * e).exp_m1() / rate;
            t = (t + dt).max(t.next_up());
            xi -= self.drift * e + self.sample_jump(rng);
            times.push(t);
            values.push(y - y0 * xi.exp());
            if xi <= xi_stop {
                t += y0.powf(a) * (a * xi).exp() / rate;
                break;
            }
        }
        times.push(t.max(times.last().unwrap().next_up()));
        values.push(y);
        let path = PathSample::new(times, values, Interpolation::PowerToward { target: y, alpha: a, rate })?;
        Ok(path.kill_at_end())
    }

    /// Stable subordinator from `x0` conditioned to stay below `a`, built
    /// from ξ under the `Down` tilt and killed with it. The terminal value is
    /// X_{ζ-}.
    pub fn strip_path<R: Rng + ?Sized>(&self, x0: f64, a: f64, rng: &mut R) -> Result<PathSample> {
        if self.tilt != Tilt::Down {
            return Err(Error::InvalidSpec("strip paths need the Down tilt".into()));
        }
        if !(x0 < a) {
            return Err(Error::Domain(format!("start {x0} must lie below the barrier {a}")));
        }
        let al = self.alpha;
        let y0 = a - x0;
        let rate = al * self.drift;
        let jump_rate = self.big_jump_rate();
        let mut kill = exp1(rng) / self.kill_rate;
        let mut times: Vec<f64> = vec![0.0];
        let mut values = vec![x0];
        let (mut t, mut xi) = (0.0, 0.0);
        loop {
            let e = exp1(rng) / jump_rate;
            let run = e.min(kill);
            let gap_pow = y0.powf(al) * (al * xi).exp();
            t += gap_pow * -(-rate * run).exp_m1() / rate;
            xi -= self.drift * run;
            if kill <= e {
                break;
            }
            kill -= e;
            t = t.max(times.last().unwrap().next_up());
            xi -= self.sample_jump(rng);
            times.push(t);
            values.push(a - y0 * xi.exp());
        }
        times.push(t.max(times.last().unwrap().next_up()));
        values.push(a - y0 * xi.exp());
        let path = PathSample::new(times, values, Interpolation::PowerToward { target: a, alpha: al, rate })?;
        Ok(path.kill_at_end())
    }
}

/// A path below a barrier rewritten on the Lamperti clock.
#[derive(Debug, Clone, PartialEq)]
pub struct LampertiView {
    pub alpha: f64,
    pub a: f64,
    /// ξ at the recorded points, indexed by the Lamperti clock `σ`.
    pub xi_path: PathSample,
    /// The additive functional ∫_0^σ e^{αξ_u} du = a^{-α} t at each point.
    pub clock: Vec<f64>,
    source: PathSample,
}

/// Truncates `path` where it first reaches `a`, keeping `(τ, X_{τ-})` as a
/// killed terminal point.
fn kill_at_level(path: &PathSample, a: f64) -> PathSample {
    let touch = path.values.iter().position(|&v| v >= a);
    let cross = path.passage_time(a);
    let tau = match (touch.map(|j| path.times[j]), cross) {
        (Some(s), Some(c)) => s.min(c),
        (Some(s), None) => s,
        (None, Some(c)) => c,
        (None, None) => return path.clone(),
    };
    if path.killed && tau >= path.lifetime {
        return path.clone();
    }
    let keep = path.times.partition_point(|&t| t < tau);
    let mut out = path.clone();
    let last = keep - 1;
    let left = path.evolve(last, tau - path.times[last]).min(a);
    out.times.truncate(keep);
    out.values.truncate(keep);
    if let Interpolation::Segments(s) = &mut out.interpolation {
        s.truncate(keep);
    }
    if tau > out.times[last] {
        out.times.push(tau);
        out.values.push(left);
    } else if let Interpolation::Segments(s) = &mut out.interpolation {
        s.truncate(keep - 1);
    }
    out.kill_at_end()
}

/// ∫_0^dt (a - X)^{-α} dr along segment `i` of `path`.
fn segment_clock(path: &PathSample, i: usize, dt: f64, a: f64, alpha: f64) -> f64 {
    if dt <= 0.0 {
        return 0.0;
    }
    let y0 = a - path.values[i];
    let slope = match &path.interpolation {
        Interpolation::Step => Some(0.0),
        Interpolation::Drift(k) => Some(*k),
        Interpolation::Segments(s) => Some(s[i]),
        Interpolation::Linear => {
            path.times.get(i + 1).map(|&t1| (path.values[i + 1] - path.values[i]) / (t1 - path.times[i])).or(Some(0.0))
        }
        Interpolation::PowerToward { target, alpha: p, rate } if *target == a && *p == alpha => {
            // (a - X)^α = y0^α - rate·r
            return -(-rate * dt / y0.powf(alpha)).ln_1p() / rate;
        }
        Interpolation::PowerToward { .. } => None,
    };
    match slope {
        Some(0.0) => dt * y0.powf(-alpha),
        Some(m) => {
            let y1 = (y0 - m * dt).max(0.0);
            (y0.powf(1.0 - alpha) - y1.powf(1.0 - alpha)) / (m * (1.0 - alpha))
        }
        None => {
            let panels = 4;
            let h = dt / panels as f64;
            (0..panels)
                .map(|k| {
                    let lo = k as f64 * h;
                    gauss16(|r| (a - path.evolve(i, r)).powf(-alpha), lo, lo + h)
                })
                .sum()
        }
    }
}

/// Rewrites a path that stays below `a` until it is killed in terms of ξ.
/// A path that reaches `a` is killed there first.
pub fn lamperti_transform(path: &PathSample, a: f64, alpha: f64) -> Result<LampertiView> {
    check_alpha(alpha)?;
    if !(a > path.start()) {
        return Err(Error::Domain(format!("path must start below the barrier {a}")));
    }
    let source = kill_at_level(path, a);
    let n = source.times.len();
    let mut clock_times = Vec::with_capacity(n);
    let mut xi = Vec::with_capacity(n);
    let mut sigma = 0.0f64;
    for i in 0..n {
        if i > 0 {
            let inc = segment_clock(&source, i - 1, source.times[i] - source.times[i - 1], a, alpha);
            sigma = (sigma + inc).max(sigma.next_up());
        }
        clock_times.push(sigma);
        xi.push(((a - source.values[i]) / a).ln());
    }
    let mut xi_path = PathSample::new(clock_times, xi, Interpolation::Step)?;
    if source.killed {
        xi_path = xi_path.kill_at_end();
    }
    let clock = source.times.iter().map(|t| t * a.powf(-alpha)).collect();
    Ok(LampertiView { alpha, a, xi_path, clock, source })
}

impl LampertiView {
    /// Time at which ξ is killed (∞ if the source path is alive).
    pub fn kill_time(&self) -> f64 {
        if self.xi_path.killed {
            self.xi_path.lifetime
        } else {
            f64::INFINITY
        }
    }

    /// Real time corresponding to Lamperti time `u`, or `None` past the end.
    pub fn real_time(&self, u: f64) -> Option<f64> {
        let clock = &self.xi_path.times;
        if u < 0.0 || u >= self.kill_time() {
            return None;
        }
        let i = clock.partition_point(|&s| s <= u) - 1;
        let target = u - clock[i];
        if target == 0.0 {
            return Some(self.source.times[i]);
        }
        let span = match self.source.times.get(i + 1) {
            Some(&t1) => t1 - self.source.times[i],
            None => return None,
        };
        let (a, alpha) = (self.a, self.alpha);
        let y0 = a - self.source.values[i];
        let closed = match &self.source.interpolation {
            Interpolation::Step => Some(target * y0.powf(alpha)),
            Interpolation::PowerToward { target: tg, alpha: p, rate } if *tg == a && *p == alpha => {
                Some(y0.powf(alpha) * -(-rate * target).exp_m1() / rate)
            }
            Interpolation::Drift(_) | Interpolation::Segments(_) | Interpolation::Linear => {
                let m = (self.source.evolve(i, span) - self.source.values[i]) / span;
                if m == 0.0 {
                    Some(target * y0.powf(alpha))
                } else {
                    // y0^{1-α} - y^{1-α} = m(1-α)·target
                    let y = (y0.powf(1.0 - alpha) - m * (1.0 - alpha) * target).max(0.0).powf(1.0 / (1.0 - alpha));
                    Some((y0 - y) / m)
                }
            }
            Interpolation::PowerToward { .. } => None,
        };
        let dt = match closed {
            Some(dt) => dt.min(span),
            None => {
                let (mut lo, mut hi) = (0.0, span);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if segment_clock(&self.source, i, mid, a, alpha) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        };
        Some(self.source.times[i] + dt)
    }

    /// ξ at Lamperti time `u`, or `None` once ξ is killed.
    pub fn xi_at(&self, u: f64) -> Option<f64> {
        let t = self.real_time(u)?;
        let i = self.source.times.partition_point(|&s| s <= t) - 1;
        let x = self.source.evolve(i, t - self.source.times[i]);
        Some(((self.a - x) / self.a).ln())
    }

    /// Lamperti clock at real time `t`.
    pub fn clock_at(&self, t: f64) -> Option<f64> {
        let times = &self.source.times;
        if t < 0.0 || (self.source.killed && t >= self.source.lifetime) {
            return None;
        }
        let i = times.partition_point(|&s| s <= t) - 1;
        Some(self.xi_path.times[i] + segment_clock(&self.source, i, t - times[i], self.a, self.alpha))
    }

    /// `a - a·exp(ξ_{σ(t)})`: the source path rebuilt from ξ.
    pub fn reconstruct(&self, t: f64) -> Option<f64> {
        let u = self.clock_at(t)?;
        self.xi_at(u).map(|xi| self.a - self.a * xi.exp())
    }
}

/// Expected Lamperti-clock integral ∫_0^∞ e^{αξ°} du under the Circ tilt.
pub fn circ_clock_mean(alpha: f64) -> f64 {
    gamma(alpha) * rgamma(2.0 * alpha)
}

/// Laplace exponent of ξ read off stable paths run to first passage above
/// 1: E(e^{λξ_u}; u < kill) = e^{-uΦ(λ)} gives -ln(mean)/u, with its
/// delta-method standard error. One estimate per λ.
pub fn xi_exponent_estimates(
    alpha: f64,
    lambdas: &[f64],
    u: f64,
    n_paths: usize,
    stream: RngStream,
) -> Result<Vec<Estimate>> {
    check_alpha(alpha)?;
    if !(u > 0.0) {
        return Err(Error::Domain(format!("Lamperti time must be positive, got {u}")));
    }
    let approx = StableJumpApprox::new(alpha, 1e-4)?;
    let xis = par_map(n_paths, stream, |_, rng| -> Result<Option<f64>> {
        let fp = approx.run_to_level(0.0, 1.0, rng)?;
        Ok(lamperti_transform(&fp.path, 1.0, alpha)?.xi_at(u))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(lambdas
        .iter()
        .map(|&l| {
            let vals: Vec<f64> = xis.iter().map(|x| x.map_or(0.0, |x| (l * x).exp())).collect();
            let m = Estimate::from_samples(&vals);
            Estimate { mean: -m.mean.ln() / u, std_error: m.std_error / (m.mean * u), n: m.n }
        })
        .collect())
}

/// [`xi_exponent_estimates`] against Φ(λ), one report per λ.
pub fn xi_exponent_check(
    alpha: f64,
    lambdas: &[f64],
    u: f64,
    n_paths: usize,
    stream: RngStream,
    th: &Thresholds,
) -> Result<Vec<TestReport>> {
    let est = xi_exponent_estimates(alpha, lambdas, u, n_paths, stream)?;
    Ok(lambdas
        .iter()
        .zip(&est)
        .map(|(&l, e)| {
            TestReport::z_check(
                &format!("extracted xi exponent alpha={alpha} lambda={l}"),
                e,
                phi_xi(l, alpha),
                th.sigmas,
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::StableJumpApprox;
    use crate::quad::tanh_sinh_to_infinity;
    use crate::rng::RngStream;
    use std::f64::consts::PI;

    #[test]
    fn gamma_identities() {
        for k in 1..10 {
            let a = k as f64 / 10.0;
            assert!(phi_xi(a - 1.0, a).abs() < 1e-12);
            assert!(phi_circ(0.0, a).abs() < 1e-12);
            assert!((phi_xi(0.0, a) * gamma(1.0 - a) - 1.0).abs() < 1e-12);
            assert!((phi_down(0.0, a) - gamma(1.0 + a)).abs() < 1e-12);
            for &l in &[0.3, 1.0, 2.5] {
                assert!((phi_down(l, a) - phi_xi(l + a, a)).abs() < 1e-12);
                assert!((phi_circ(l, a) - phi_xi(l + a - 1.0, a)).abs() < 1e-12);
            }
        }
        assert!((phi_xi(0.0, 0.5) - 1.0 / PI.sqrt()).abs() < 1e-12);
        assert!((phi_xi(0.5, 0.5) - gamma(1.5)).abs() < 1e-12);
    }

    #[test]
    fn undershoot_law() {
        assert!((undershoot_density(0.5, 0.5).unwrap() - 2.0 / PI).abs() < 1e-12);
        let total = tanh_sinh(|y| undershoot_density(y, 0.3).unwrap(), 0.0, 0.5, 1e-12).unwrap()
            + tanh_sinh(|w| (1.0 - w).powf(-0.3) * w.powf(-0.7) / (gamma(0.7) * gamma(0.3)), 0.0, 0.5, 1e-12).unwrap();
        assert!((total - 1.0).abs() < 1e-8, "{total}");
        assert!(undershoot_density(0.0, 0.5).is_err());
        assert!((undershoot_cdf(0.5, 0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn levy_triplet_reproduces_exponents() {
        for &alpha in &[0.3, 0.5, 0.8] {
            for tilt in [Tilt::None, Tilt::Down, Tilt::Circ] {
                for &l in &[0.5, 1.0, 3.0] {
                    let jumps = tanh_sinh(|s| -(-l * s).exp_m1() * tilt.levy_density(s, alpha), 0.0, 1.0, 1e-13)
                        .unwrap()
                        + tanh_sinh_to_infinity(|s| -(-l * s).exp_m1() * tilt.levy_density(s, alpha), 1.0, 1e-13)
                            .unwrap();
                    let phi = tilt.kill_rate(alpha) + jumps;
                    let exact = tilt.exponent(l, alpha);
                    assert!((phi - exact).abs() < 1e-8 * exact.max(1.0), "{alpha} {tilt:?} {l}: {phi} vs {exact}");
                }
            }
        }
    }

    fn laplace_check(tilt: Tilt, alpha: f64, seed: u64) {
        let sampler = XiSampler::new(alpha, tilt, 1e-4).unwrap();
        let n = 20_000;
        let mut rng = RngStream::new(seed, 0).rng();
        let paths: Vec<PathSample> = (0..n).map(|_| sampler.sample(1.0, &mut rng).unwrap()).collect();
        for &l in &[0.5, 1.0] {
            let xs: Vec<f64> = paths.iter().map(|p| if p.killed { 0.0 } else { (l * p.terminal()).exp() }).collect();
            let est = Estimate::from_samples(&xs);
            let exact = (-tilt.exponent(l, alpha)).exp();
            assert!(est.within(exact, 3.5), "{tilt:?} λ={l}: {est:?} vs {exact}");
        }
    }

    #[test]
    fn xi_sampler_exponents() {
        laplace_check(Tilt::None, 0.5, 1);
        laplace_check(Tilt::Down, 0.5, 2);
        laplace_check(Tilt::Circ, 0.5, 3);
    }

    #[test]
    fn circ_hit_path_ends_at_target() {
        let sampler = XiSampler::new(0.5, Tilt::Circ, 1e-3).unwrap();
        let mut rng = RngStream::new(4, 0).rng();
        for _ in 0..100 {
            let p = sampler.hit_path(0.2, 1.0, &mut rng).unwrap();
            assert!(p.killed && p.is_nondecreasing());
            assert_eq!(p.terminal(), 1.0);
            assert!(p.values.iter().all(|&v| v <= 1.0));
        }
    }

    #[test]
    fn down_strip_path_terminal_law() {
        for (k, &alpha) in [0.3, 0.7].iter().enumerate() {
            let eps = XiSampler::eps_for_rate(alpha, 200.0).unwrap();
            let sampler = XiSampler::new(alpha, Tilt::Down, eps).unwrap();
            let mut rng = RngStream::new(40 + k as u64, 0).rng();
            let ends: Vec<f64> = (0..20_000)
                .map(|_| {
                    let p = sampler.strip_path(0.0, 1.0, &mut rng).unwrap();
                    assert!(p.killed && p.is_nondecreasing());
                    assert!(p.values.iter().all(|&v| v < 1.0));
                    p.terminal()
                })
                .collect();
            let th = crate::verify::Thresholds::default();
            let r = crate::verify::ks_test("down terminal", &ends, |y| y.clamp(0.0, 1.0).powf(alpha), &th).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn constant_path_has_zero_xi() {
        let p = PathSample::new(vec![0.0, 2.0], vec![0.0, 0.0], Interpolation::Step).unwrap();
        let v = lamperti_transform(&p, 1.0, 0.5).unwrap();
        assert_eq!(v.xi_path.values, vec![0.0, 0.0]);
        assert!((v.xi_path.times[1] - 2.0).abs() < 1e-15);
        assert_eq!(v.xi_at(1.3), Some(0.0));
    }

    #[test]
    fn round_trip_on_jump_resolved_paths() {
        let approx = StableJumpApprox::new(0.5, 1e-3).unwrap();
        let mut rng = RngStream::new(5, 0).rng();
        for _ in 0..20 {
            let fp = approx.run_to_level(0.0, 1.0, &mut rng).unwrap();
            let view = lamperti_transform(&fp.path, 1.0, 0.5).unwrap();
            let end = fp.path.end_time();
            for k in 0..50 {
                let t = end * k as f64 / 50.0;
                let x = fp.path.value_at(t).unwrap();
                let r = view.reconstruct(t).unwrap();
                assert!((x - r).abs() < 1e-9, "t={t}: {x} vs {r}");
            }
        }
    }

    #[test]
    fn extracted_exponent() {
        let th = crate::verify::Thresholds::default();
        for r in xi_exponent_check(0.5, &[0.5, 1.0, 2.0], 0.5, 10_000, RngStream::new(9, 0), &th).unwrap() {
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn round_trip_on_hit_paths_with_other_barrier() {
        let sampler = XiSampler::new(0.5, Tilt::Circ, 1e-3).unwrap();
        let mut rng = RngStream::new(6, 0).rng();
        for _ in 0..10 {
            let p = sampler.hit_path(0.0, 0.7, &mut rng).unwrap();
            for a in [0.7, 1.0] {
                let view = lamperti_transform(&p, a, 0.5).unwrap();
                for k in 0..20 {
                    let t = p.end_time() * k as f64 / 20.0;
                    let x = p.value_at(t).unwrap();
                    let r = view.reconstruct(t).unwrap();
                    assert!((x - r).abs() < 1e-9, "a={a} t={t}: {x} vs {r}");
                }
            }
        }
    }
}

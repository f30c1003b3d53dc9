//! Conditioning a Markov process not to visit 0 after a fixed time, realised
//! exactly on finite continuous-time Markov chains and, through the overshoot
//! process, on finite-activity subordinators.
//!
//! Local time is the occupation time at 0 divided by β, so the excursion
//! measure has total mass β·c with c the holding rate at 0. All quantities
//! below take the normalization from an [`Excursions`] value; the plain
//! functions use β = 1.

use crate::conditioning::{sample_strip, KillingLimit, KillingRow, StripLaw, StripMethod};
use crate::error::{Error, Result};
use crate::mc::{par_map, Estimate};
use crate::models::{exp1, open_unit, sample_path_past_level, Interpolation, PathSample, SubordinatorSpec};
use crate::rng::RngStream;
use crate::verify::{extrapolate_q, ks_test, ks_two_sample, TestReport, Thresholds};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A finite CTMC with distinguished state 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtmcSpec {
    pub generator: Vec<Vec<f64>>,
    #[serde(default)]
    pub start: usize,
}

impl CtmcSpec {
    pub fn new(generator: Vec<Vec<f64>>, start: usize) -> Result<Self> {
        let chain = CtmcSpec { generator, start };
        chain.validate()?;
        Ok(chain)
    }

    pub fn from_json(doc: &str) -> Result<Self> {
        let chain: CtmcSpec = serde_json::from_str(doc).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.generator.len();
        if n < 2 {
            return Err(Error::InvalidSpec("a chain needs at least two states".into()));
        }
        if self.start >= n {
            return Err(Error::InvalidSpec(format!("start {} out of range", self.start)));
        }
        for (i, row) in self.generator.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidSpec(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec(format!("row {i} has a non-finite rate")));
            }
            if row.iter().enumerate().any(|(j, &v)| j != i && v < 0.0) {
                return Err(Error::InvalidSpec(format!("row {i} has a negative off-diagonal rate")));
            }
            let scale = row.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            if row.iter().sum::<f64>().abs() > 1e-12 * scale {
                return Err(Error::InvalidSpec(format!("row {i} does not sum to zero")));
            }
        }
        if !(self.generator[0][0] < 0.0) {
            return Err(Error::InvalidSpec("state 0 is absorbing".into()));
        }
        // every state must lead to 0: search backwards from 0
        let mut reach = vec![false; n];
        reach[0] = true;
        let mut stack = vec![0];
        while let Some(j) = stack.pop() {
            for (i, row) in self.generator.iter().enumerate() {
                if !reach[i] && row[j] > 0.0 {
                    reach[i] = true;
                    stack.push(i);
                }
            }
        }
        if let Some(i) = reach.iter().position(|r| !r) {
            return Err(Error::InvalidSpec(format!("state 0 is not reachable from state {i}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.generator.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generator.is_empty()
    }

    pub fn with_start(mut self, start: usize) -> Result<Self> {
        self.start = start;
        self.validate()?;
        Ok(self)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.generator[i][j])
    }

    /// Generator restricted to the states other than 0.
    fn killed(&self) -> DMatrix<f64> {
        let n = self.len() - 1;
        DMatrix::from_fn(n, n, |i, j| self.generator[i + 1][j + 1])
    }

    fn holding_rate(&self, i: usize) -> f64 {
        -self.generator[i][i]
    }

    /// Rates 0 → 1 at rate `up`, 1 → 0 at rate `down`.
    pub fn two_state(up: f64, down: f64) -> Result<Self> {
        CtmcSpec::new(vec![vec![-up, up], vec![down, -down]], 1)
    }

    /// Birth–death chain on {0, …, n} with birth rate `birth` and death rate `death`.
    pub fn birth_death(birth: f64, death: f64, n: usize) -> Result<Self> {
        let mut g = vec![vec![0.0; n + 1]; n + 1];
        for (i, row) in g.iter_mut().enumerate() {
            if i < n {
                row[i + 1] = birth;
            }
            if i > 0 {
                row[i - 1] = death;
            }
            row[i] = -row.iter().sum::<f64>();
        }
        CtmcSpec::new(g, 1)
    }

    /// A five-state chain whose rates circulate, so it is not reversible.
    pub fn cyclic_five() -> Result<Self> {
        let off = [
            [0.0, 1.0, 0.5, 0.0, 0.0],
            [0.0, 0.0, 2.0, 0.7, 0.0],
            [0.5, 0.0, 0.0, 1.5, 0.0],
            [0.0, 0.4, 0.0, 0.0, 1.0],
            [2.0, 0.0, 0.0, 0.3, 0.0],
        ];
        let g = off
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let total: f64 = row.iter().sum();
                row.iter().enumerate().map(|(j, &v)| if i == j { -total } else { v }).collect()
            })
            .collect();
        CtmcSpec::new(g, 2)
    }

    /// The bundled fixtures by name.
    pub fn fixtures() -> Vec<(&'static str, CtmcSpec)> {
        vec![
            ("two_state", CtmcSpec::two_state(1.0, 2.0).expect("valid fixture")),
            ("birth_death", CtmcSpec::birth_death(1.0, 2.0, 10).expect("valid fixture")),
            ("cyclic_five", CtmcSpec::cyclic_five().expect("valid fixture")),
        ]
    }

    pub fn fixture(name: &str) -> Result<Self> {
        CtmcSpec::fixtures()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, c)| c)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown chain fixture {name:?}")))
    }
}

fn expm(m: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    (m * t).exp()
}

/// ∫_0^t e^{M u} du from the block exponential of [[M, I], [0, 0]].
fn integral_expm(m: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(m);
    block.view_mut((0, n), (n, n)).fill_with_identity();
    let e = (block * t).exp();
    e.view((0, n), (n, n)).into_owned()
}

fn solve(m: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    m.lu().solve(&b).ok_or_else(|| Error::Numeric("singular linear system".into()))
}

/// Local-time normalization and the excursion quantities built on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excursions {
    pub chain: CtmcSpec,
    pub beta: f64,
    /// Holding rate at 0.
    pub c: f64,
    /// Distribution of the first state of an excursion.
    pub start: Vec<f64>,
    /// E_x T_0 for every state.
    pub mean_hit: Vec<f64>,
}

/// β = 1, so L is the occupation time at 0 and η has mass c.
pub fn local_time_normalization(chain: &CtmcSpec) -> Result<Excursions> {
    chain.validate()?;
    let c = chain.holding_rate(0);
    let start = (0..chain.len()).map(|j| if j == 0 { 0.0 } else { chain.generator[0][j] / c }).collect();
    let k = chain.killed();
    let ones = DVector::from_element(k.nrows(), 1.0);
    let m = solve(-k, ones)?;
    let mut mean_hit = vec![0.0];
    mean_hit.extend(m.iter());
    Ok(Excursions { chain: chain.clone(), beta: 1.0, c, start, mean_hit })
}

impl Excursions {
    /// Same chain with local time rescaled so that βL is the occupation time.
    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!("β must be positive, got {beta}")));
        }
        self.beta = beta;
        Ok(self)
    }

    fn check_state(&self, x: usize) -> Result<()> {
        if x < self.chain.len() {
            Ok(())
        } else {
            Err(Error::Domain(format!("state {x} out of range")))
        }
    }

    /// E_x e^{-qT_0} for every state.
    pub fn hit_laplace(&self, q: f64) -> Result<Vec<f64>> {
        if !(q >= 0.0) {
            return Err(Error::Domain(format!("q must be nonnegative, got {q}")));
        }
        let k = self.chain.killed();
        let n = k.nrows();
        let to_zero = DVector::from_fn(n, |i, _| self.chain.generator[i + 1][0]);
        let w = solve(DMatrix::identity(n, n) * q - k, to_zero)?;
        let mut out = vec![1.0];
        out.extend(w.iter());
        Ok(out)
    }

    /// η(1 - e^{-qζ}), or η(ζ) when q = 0.
    pub fn eta_laplace(&self, q: f64) -> Result<f64> {
        let k =
            if q == 0.0 { self.mean_hit.clone() } else { self.hit_laplace(q)?.into_iter().map(|w| 1.0 - w).collect() };
        Ok(self.beta * self.c * self.start.iter().zip(&k).map(|(p, v)| p * v).sum::<f64>())
    }

    /// η(ζ).
    pub fn eta_zeta(&self) -> f64 {
        self.beta * self.c * self.start.iter().zip(&self.mean_hit).map(|(p, m)| p * m).sum::<f64>()
    }

    /// h_q for every state.
    pub fn h_q_all(&self, q: f64) -> Result<Vec<f64>> {
        if !(q > 0.0) {
            return Err(Error::Domain(format!("h_q needs q > 0, got {q}")));
        }
        let den = q * self.beta + self.eta_laplace(q)?;
        Ok(self.hit_laplace(q)?.into_iter().map(|w| (1.0 - w) / den).collect())
    }

    pub fn h_q(&self, x: usize, q: f64) -> Result<f64> {
        self.check_state(x)?;
        Ok(self.h_q_all(q)?[x])
    }

    /// h = lim h_q = E_x T_0 / (β + η(ζ)) for every state.
    pub fn h_all(&self) -> Vec<f64> {
        let den = self.beta + self.eta_zeta();
        self.mean_hit.iter().map(|m| m / den).collect()
    }

    pub fn h(&self, x: usize) -> Result<f64> {
        self.check_state(x)?;
        Ok(self.h_all()[x])
    }

    /// V^{(q)}_{s,t}(x) = E_x ∫_s^t e^{-qu} dL_u.
    pub fn v_q(&self, x: usize, s: f64, t: f64, q: f64) -> Result<f64> {
        self.check_state(x)?;
        if !(0.0 <= s && s <= t && q >= 0.0) {
            return Err(Error::Domain(format!("need 0 <= s <= t and q >= 0, got s={s} t={t} q={q}")));
        }
        if s == t {
            return Ok(0.0);
        }
        let n = self.chain.len();
        let m = self.chain.matrix() - DMatrix::identity(n, n) * q;
        let at = |u: f64| if u == 0.0 { 0.0 } else { integral_expm(&m, u)[(x, 0)] };
        Ok((at(t) - at(s)) / self.beta)
    }

    /// P_x(T_0 > u) for every state.
    pub fn survival_all(&self, u: f64) -> Vec<f64> {
        let e = expm(&self.chain.killed(), u);
        let mut out = vec![0.0];
        out.extend(e.row_iter().map(|r| r.sum()));
        out
    }
}

pub fn h_q_exact(chain: &CtmcSpec, x: usize, q: f64) -> Result<f64> {
    local_time_normalization(chain)?.h_q(x, q)
}

pub fn h_limit(chain: &CtmcSpec, x: usize) -> Result<f64> {
    local_time_normalization(chain)?.h(x)
}

#[allow(non_snake_case)]
pub fn V_q_exact(chain: &CtmcSpec, x: usize, s: f64, t: f64, q: f64) -> Result<f64> {
    local_time_normalization(chain)?.v_q(x, s, t, q)
}

/// Both sides of the excessiveness identity
/// E_x[h_q(X_t); t < T_0] = e^{qt}(h_q(x) - q/(qβ + η(1-e^{-qζ})) ∫_0^t P_x(T_0 > u) e^{-qu} du).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessiveCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// h_q(x) itself, which bounds the left side.
    pub h_q: f64,
}

pub fn check_excessive_identity(ex: &Excursions, x: usize, q: f64, t: f64) -> Result<ExcessiveCheck> {
    ex.check_state(x)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let h = ex.h_q_all(q)?;
    let k = ex.chain.killed();
    let n = k.nrows();
    let lhs = if x == 0 {
        0.0
    } else {
        let e = expm(&k, t);
        (0..n).map(|j| e[(x - 1, j)] * h[j + 1]).sum::<f64>()
    };
    let integral = if x == 0 {
        0.0
    } else {
        let s = integral_expm(&(k - DMatrix::identity(n, n) * q), t);
        s.row(x - 1).sum()
    };
    let den = q * ex.beta + ex.eta_laplace(q)?;
    let rhs = (q * t).exp() * (h[x] - q / den * integral);
    Ok(ExcessiveCheck { lhs, rhs, residual: (lhs - rhs).abs(), h_q: h[x] })
}

/// P_x(T_0 <= e_q, g_{e_q} < a) computed from hitting-time laws alone, and
/// V^{(q)}_{0,a}(x)(qβ + η(1 - e^{-qζ})). Returns (direct, via V).
pub fn last_zero_identity(ex: &Excursions, x: usize, q: f64, a: f64) -> Result<(f64, f64)> {
    ex.check_state(x)?;
    if !(q > 0.0 && a > 0.0) {
        return Err(Error::Domain("need q > 0 and a > 0".into()));
    }
    let n = ex.chain.len();
    let k = ex.chain.killed();
    let nk = k.nrows();
    let full = expm(&ex.chain.matrix(), a);
    let killed = expm(&k, a);
    let escape: Vec<f64> = ex.hit_laplace(q)?.into_iter().map(|w| 1.0 - w).collect();
    // e_q < a with the first zero already reached
    let before = if x == 0 {
        -(-q * a).exp_m1()
    } else {
        let s = integral_expm(&(k.clone() - DMatrix::identity(nk, nk) * q), a);
        -(-q * a).exp_m1() - q * s.row(x - 1).sum()
    };
    // e_q >= a: 0 already visited, and no return before e_q
    let after: f64 = (1..n)
        .map(|y| {
            let visited = full[(x, y)] - if x == 0 { 0.0 } else { killed[(x - 1, y - 1)] };
            visited * escape[y]
        })
        .sum();
    let direct = before + (-q * a).exp() * after;
    let via_v = ex.v_q(x, 0.0, a, q)? * (q * ex.beta + ex.eta_laplace(q)?);
    Ok((direct, via_v))
}

/// η(e^{-qt} - e^{-qζ}; t < ζ)/(qβ + η(1 - e^{-qζ})) for q > 0 and its
/// limit η(h(ε_t); t < ζ) for q = 0.
pub fn excursion_factor(ex: &Excursions, t: f64, q: f64) -> Result<f64> {
    let h = if q == 0.0 { ex.h_all() } else { ex.h_q_all(q)? };
    let e = expm(&ex.chain.killed(), t);
    let n = e.nrows();
    let mut total = 0.0;
    for j in 1..=n {
        let eh: f64 = (0..n).map(|l| e[(j - 1, l)] * h[l + 1]).sum();
        total += ex.beta * ex.c * ex.start[j] * eh;
    }
    Ok((-q * t).exp() * total)
}

/// Whether q ↦ h_q(x) is monotone on a log grid for every x, and the bound
/// sup_q h_q(x) <= E_x T_0 / β that gives the dominated alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionAudit {
    pub monotone: bool,
    pub bound_holds: bool,
    /// Largest relative gap between h and h_q extrapolated from small q.
    pub limit_error: f64,
}

pub fn audit_assumptions(ex: &Excursions) -> Result<AssumptionAudit> {
    let qs: Vec<f64> = (0..=50).map(|i| 10f64.powf(2.0 - 5.0 * i as f64 / 50.0)).collect();
    let tables = qs.iter().map(|&q| ex.h_q_all(q)).collect::<Result<Vec<_>>>()?;
    let n = ex.chain.len();
    let mut monotone = true;
    let mut bound_holds = true;
    for x in 0..n {
        let col: Vec<f64> = tables.iter().map(|t| t[x]).collect();
        let up = col.windows(2).all(|w| w[1] >= w[0] - 1e-14);
        let down = col.windows(2).all(|w| w[1] <= w[0] + 1e-14);
        monotone &= up || down;
        bound_holds &= col.iter().all(|&v| v <= ex.mean_hit[x] / ex.beta + 1e-12);
    }
    // quadratic extrapolation of h_q from q = 0.1, 0.01, 0.001 to q = 0
    let qs3 = [0.1, 0.01, 0.001];
    let h3 = qs3.iter().map(|&q| ex.h_q_all(q)).collect::<Result<Vec<_>>>()?;
    let lagrange = |k: usize| -> f64 { (0..3).filter(|&l| l != k).map(|l| qs3[l] / (qs3[l] - qs3[k])).product() };
    let limit_error = ex
        .h_all()
        .iter()
        .enumerate()
        .filter(|(_, h)| **h > 0.0)
        .map(|(x, h)| ((0..3).map(|k| lagrange(k) * h3[k][x]).sum::<f64>() - h).abs() / h)
        .fold(0.0, f64::max);
    Ok(AssumptionAudit { monotone, bound_holds, limit_error })
}

const CDF_POINTS: usize = 2049;

/// P^{←a}_x: the chain conditioned not to visit 0 after time `a`.
#[derive(Debug, Clone)]
pub struct LastPassageLaw {
    pub ex: Excursions,
    pub a: f64,
    pub x0: usize,
    pub audit: AssumptionAudit,
    g_cdf: Vec<f64>,
    uniform_rate: f64,
    /// Columns P^n e_0 of the uniformized kernel.
    to_zero: Vec<Vec<f64>>,
    kernel: DMatrix<f64>,
}

impl LastPassageLaw {
    pub fn new(ex: Excursions, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("time barrier must be positive, got {a}")));
        }
        let x0 = ex.chain.start;
        let audit = audit_assumptions(&ex)?;
        if ex.h_all().iter().skip(1).all(|&h| h == 0.0) {
            return Err(Error::Degenerate("h vanishes off 0".into()));
        }
        let total = ex.v_q(x0, 0.0, a, 0.0)?;
        if !(total > 0.0) {
            return Err(Error::Degenerate("V_{0,a}(x) vanishes".into()));
        }
        let g_cdf = (0..CDF_POINTS)
            .map(|i| {
                let t = a * i as f64 / (CDF_POINTS - 1) as f64;
                ex.v_q(x0, 0.0, t, 0.0).map(|v| v / total)
            })
            .collect::<Result<Vec<_>>>()?;
        let n = ex.chain.len();
        let uniform_rate = (0..n).map(|i| ex.chain.holding_rate(i)).fold(0.0, f64::max);
        let kernel = DMatrix::identity(n, n) + ex.chain.matrix() / uniform_rate;
        let mean = uniform_rate * a;
        let n_max = (mean + 12.0 * mean.sqrt() + 40.0).ceil() as usize;
        let mut to_zero = Vec::with_capacity(n_max + 1);
        let mut col = DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 });
        for _ in 0..=n_max {
            to_zero.push(col.iter().copied().collect());
            col = &kernel * col;
        }
        Ok(LastPassageLaw { ex, a, x0, audit, g_cdf, uniform_rate, to_zero, kernel })
    }

    /// P^{←a}(g_∞ <= t) = 1 - V_{t,a}(x)/V_{0,a}(x).
    pub fn g_cdf(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        if t >= self.a {
            return Ok(1.0);
        }
        Ok(self.ex.v_q(self.x0, 0.0, t, 0.0)? / self.ex.v_q(self.x0, 0.0, self.a, 0.0)?)
    }

    fn sample_g<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = open_unit(rng);
        let i = self.g_cdf.partition_point(|&v| v < u).clamp(1, CDF_POINTS - 1);
        let (lo, hi) = (self.g_cdf[i - 1], self.g_cdf[i]);
        let w = if hi > lo { (u - lo) / (hi - lo) } else { 0.5 };
        self.a * ((i - 1) as f64 + w) / (CDF_POINTS - 1) as f64
    }

    /// Bridge of the chain from x0 to 0 over [0, g] by uniformization.
    fn bridge<R: Rng + ?Sized>(&self, g: f64, rng: &mut R, times: &mut Vec<f64>, values: &mut Vec<f64>) -> Result<()> {
        let mean = self.uniform_rate * g;
        let mut weights = Vec::with_capacity(self.to_zero.len());
        let mut pois = (-mean).exp();
        for (n, col) in self.to_zero.iter().enumerate() {
            if n > 0 {
                pois *= mean / n as f64;
            }
            weights.push(pois * col[self.x0]);
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Numeric("bridge to 0 has no mass".into()));
        }
        let mut u = rng.random::<f64>() * total;
        let mut steps = weights.len() - 1;
        for (n, w) in weights.iter().enumerate() {
            if u < *w {
                steps = n;
                break;
            }
            u -= w;
        }
        let mut epochs: Vec<f64> = (0..steps).map(|_| g * open_unit(rng)).collect();
        epochs.sort_by(f64::total_cmp);
        let mut state = self.x0;
        for (k, &t) in epochs.iter().enumerate() {
            let left = steps - k;
            let denom = self.to_zero[left][state];
            let mut u = rng.random::<f64>() * denom;
            let mut next = 0;
            for j in 0..self.ex.chain.len() {
                let w = self.kernel[(state, j)] * self.to_zero[left - 1][j];
                next = j;
                if u < w {
                    break;
                }
                u -= w;
            }
            if next != state {
                times.push(t.max(times.last().copied().unwrap_or(0.0).next_up()));
                values.push(next as f64);
                state = next;
            }
        }
        if state != 0 {
            return Err(Error::Numeric("bridge did not end at 0".into()));
        }
        Ok(())
    }

    /// One path of P^{←a}_x, killed at its lifetime.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ConditionedPath> {
        let g = self.sample_g(rng);
        let mut times = vec![0.0];
        let mut values = vec![self.x0 as f64];
        self.bridge(g, rng, &mut times, &mut values)?;
        let chain = &self.ex.chain;
        let eta = self.ex.eta_zeta();
        let die_at_zero = rng.random::<f64>() * (self.ex.beta + eta) < self.ex.beta;
        let mut t = g;
        if !die_at_zero {
            // entrance law ∝ rate into j times h(j), then the h-transform
            let m = &self.ex.mean_hit;
            let weights: Vec<f64> = (0..chain.len()).map(|j| self.ex.start[j] * m[j]).collect();
            let mut state = pick(&weights, rng);
            times.push(t.max(times.last().copied().unwrap_or(0.0).next_up()));
            values.push(state as f64);
            loop {
                t += exp1(rng) / chain.holding_rate(state);
                // jump weights Q_ij m_j; the rest, 1, is the killing weight
                let mut w: Vec<f64> = (0..chain.len())
                    .map(|j| if j == state || j == 0 { 0.0 } else { chain.generator[state][j] * m[j] })
                    .collect();
                w.push(1.0);
                let next = pick(&w, rng);
                if next == chain.len() {
                    break;
                }
                state = next;
                times.push(t.max(times.last().copied().unwrap_or(0.0).next_up()));
                values.push(state as f64);
            }
        }
        let last = *values.last().expect("nonempty path");
        times.push(t.max(times.last().copied().unwrap_or(0.0).next_up()));
        values.push(last);
        let path = PathSample::new(times, values, Interpolation::Step)?.kill_at_end();
        Ok(ConditionedPath { path, g, died_at_zero: die_at_zero })
    }

    /// P^{←a}(X_t = j, t < ζ) for every state j, derived from the q ↓ 0
    /// limit: with m = E T_0, π(y, s) = s + E_y m(X_s) and ψ = π - m,
    /// the answer is [P_x(X_t=j, T_0<=t) π(j, a-t) + P_x(X_t=j, T_0>t) ψ(j, a-t)] / ψ(x, a).
    pub fn marginal_exact(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0 <= t && t < self.a) {
            return Err(Error::Domain(format!("t must lie in [0, a), got {t}")));
        }
        let chain = &self.ex.chain;
        let n = chain.len();
        let m = DVector::from_vec(self.ex.mean_hit.clone());
        let pi = |s: f64| -> DVector<f64> { expm(&chain.matrix(), s) * &m + DVector::from_element(n, s) };
        let pi_rest = pi(self.a - t);
        let psi_rest = &pi_rest - &m;
        let psi_x = (pi(self.a) - &m)[self.x0];
        let full = expm(&chain.matrix(), t);
        let killed = expm(&chain.killed(), t);
        Ok((0..n)
            .map(|j| {
                let fresh = if self.x0 == 0 || j == 0 { 0.0 } else { killed[(self.x0 - 1, j - 1)] };
                ((full[(self.x0, j)] - fresh) * pi_rest[j] + fresh * psi_rest[j]) / psi_x
            })
            .collect())
    }
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedPath {
    pub path: PathSample,
    pub g: f64,
    pub died_at_zero: bool,
}

impl ConditionedPath {
    /// State at time t, or None once the path is dead.
    pub fn state_at(&self, t: f64) -> Option<usize> {
        self.path.value_at(t).map(|v| v as usize)
    }
}

pub fn sample_conditioned_avoid<R: Rng + ?Sized>(law: &LastPassageLaw, rng: &mut R) -> Result<ConditionedPath> {
    law.sample(rng)
}

/// Unconditioned chain from `x` until it sits at 0 at some time >= `a`.
/// Returns the jump times, the states and the first such time.
fn run_until_zero_after<R: Rng + ?Sized>(
    chain: &CtmcSpec,
    x: usize,
    a: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<usize>, f64) {
    let mut times = vec![0.0];
    let mut states = vec![x];
    let (mut t, mut state) = (0.0, x);
    loop {
        let hold = exp1(rng) / chain.holding_rate(state);
        if state == 0 && t + hold > a {
            return (times, states, t.max(a));
        }
        t += hold;
        let w: Vec<f64> = (0..chain.len()).map(|j| if j == state { 0.0 } else { chain.generator[state][j] }).collect();
        state = pick(&w, rng);
        times.push(t);
        states.push(state);
    }
}

/// Last zero before an independent e_q of the unconditioned chain, given
/// T_0 <= e_q and g_{e_q} < a, against the exact law
/// P(g_{e_q} <= t | ·) = V^{(q)}_{0,t}(x)/V^{(q)}_{0,a}(x). Needs no
/// conditioned sampler, so it checks the g law independently.
pub fn last_zero_exponential_check(
    law: &LastPassageLaw,
    q: f64,
    n_paths: usize,
    stream: RngStream,
    th: &Thresholds,
) -> Result<TestReport> {
    if !(q > 0.0) {
        return Err(Error::Domain(format!("q must be positive, got {q}")));
    }
    let chain = &law.ex.chain;
    let a = law.a;
    let draws = par_map(n_paths, stream, |_, rng| {
        let horizon = exp1(rng) / q;
        let (mut t, mut state) = (0.0, law.x0);
        let mut g = None;
        loop {
            let hold = exp1(rng) / chain.holding_rate(state);
            if state == 0 {
                g = Some((t + hold).min(horizon));
            }
            if t + hold >= horizon || g.is_some_and(|g| g >= a) {
                break;
            }
            t += hold;
            let w: Vec<f64> =
                (0..chain.len()).map(|j| if j == state { 0.0 } else { chain.generator[state][j] }).collect();
            state = pick(&w, rng);
        }
        g.filter(|&g| g < a)
    });
    let gs: Vec<f64> = draws.into_iter().flatten().collect();
    let total = law.ex.v_q(law.x0, 0.0, a, q)?;
    let report = ks_test(
        &format!("last zero before e_q, q={q}"),
        &gs,
        |t| law.ex.v_q(law.x0, 0.0, t.clamp(0.0, a), q).map(|v| v / total).unwrap_or(f64::NAN),
        th,
    )?;
    let (_, via_v) = last_zero_identity(&law.ex, law.x0, q, a)?;
    Ok(report.with_meta("accepted", gs.len()).with_meta("acceptance_exact", via_v))
}

/// Events A ∈ F_T for the Markov killing limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum MarkovEvent {
    /// A = Ω at T = 0.
    Full,
    /// A = {X_t = state} at T = t.
    AtState { t: f64, state: usize },
}

/// Estimates P_x(A; T < e_q | T_0 <= e_q, g_{e_q} < a) along `q_seq`.
///
/// With r_a the first time >= a spent at 0, the admissible values of e_q
/// form the interval (max(T, T_0), r_a), which is integrated out per path.
pub fn verify_markov_killing_limit(
    law: &LastPassageLaw,
    event: MarkovEvent,
    q_seq: &[f64],
    n_paths: usize,
    stream: RngStream,
) -> Result<KillingLimit> {
    if q_seq.is_empty() || q_seq.iter().any(|&q| !(q > 0.0)) || q_seq.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Domain("q sequence must be positive and decreasing".into()));
    }
    if n_paths < 2 {
        return Err(Error::Domain("need at least two paths".into()));
    }
    let chain = &law.ex.chain;
    let per_path = par_map(n_paths, stream.labeled("unconditioned"), |_, rng| {
        let (times, states, r_a) = run_until_zero_after(chain, law.x0, law.a, rng);
        let t0 = states.iter().position(|&s| s == 0).map_or(f64::INFINITY, |i| times[i]);
        let state_at = |t: f64| states[times.partition_point(|&s| s <= t) - 1];
        let (big_t, hit) = match event {
            MarkovEvent::Full => (0.0, true),
            MarkovEvent::AtState { t, state } => (t, state_at(t) == state),
        };
        (t0, r_a, big_t, hit)
    });
    let mut rows = Vec::new();
    for &q in q_seq {
        let num: Vec<f64> = per_path
            .iter()
            .map(|&(t0, r_a, big_t, hit)| {
                let from = big_t.max(t0);
                if hit && from < r_a {
                    (-q * from).exp() - (-q * r_a).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let den: Vec<f64> = per_path.iter().map(|&(t0, r_a, _, _)| (-q * t0).exp() - (-q * r_a).exp()).collect();
        rows.push(KillingRow { q, estimate: ratio(&num, &den) });
    }
    let points: Vec<(f64, Estimate)> = rows.iter().map(|r| (r.q, r.estimate)).collect();
    let extrapolated = extrapolate_q(&points, (points.len() - 1).min(2))?;
    let samples = par_map(n_paths, stream.labeled("conditioned"), |_, rng| {
        law.sample(rng).map(|p| match event {
            MarkovEvent::Full => 1.0,
            MarkovEvent::AtState { t, state } => (p.state_at(t) == Some(state)) as u8 as f64,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let conditioned = Estimate::from_samples(&samples);
    let exact = match event {
        MarkovEvent::Full => Some(1.0),
        MarkovEvent::AtState { t, state } => law.marginal_exact(t)?.get(state).copied(),
    };
    let inconclusive = extrapolated.std_error > 0.01 || conditioned.std_error > 0.01;
    Ok(KillingLimit { rows, extrapolated, conditioned, exact, inconclusive })
}

fn ratio(num: &[f64], den: &[f64]) -> Estimate {
    let n = num.len() as f64;
    let mn = num.iter().sum::<f64>() / n;
    let md = den.iter().sum::<f64>() / n;
    let r = mn / md;
    let var = num.iter().zip(den).map(|(a, b)| (a - r * b).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate { mean: r, std_error: (var / n).sqrt() / md, n: num.len() }
}

/// Functionals of (local time at the excursion start, excursion) summed over
/// excursions that start before local time 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "functional", rename_all = "snake_case")]
pub enum ExcursionFunctional {
    Zero,
    Count,
    LongerThan { length: f64 },
}

impl ExcursionFunctional {
    fn of_length(&self, zeta: f64) -> f64 {
        match *self {
            ExcursionFunctional::Zero => 0.0,
            ExcursionFunctional::Count => 1.0,
            ExcursionFunctional::LongerThan { length } => (zeta > length) as u8 as f64,
        }
    }

    /// η(F) per unit local time, from matrix exponentials.
    fn eta_exact(&self, ex: &Excursions) -> f64 {
        match *self {
            ExcursionFunctional::Zero => 0.0,
            ExcursionFunctional::Count => ex.beta * ex.c,
            ExcursionFunctional::LongerThan { length } => {
                let s = ex.survival_all(length);
                ex.beta * ex.c * ex.start.iter().zip(&s).map(|(p, v)| p * v).sum::<f64>()
            }
        }
    }
}

/// Compensation formula: E Σ_{ℓ_i : L_{ℓ_i} < 1} F(ε_i) against ∫ η(F) 1{L_u < 1} dL_u = η(F).
/// The left side is simulated from 0, the right side both exactly and by
/// sampling excursions from the excursion measure.
pub fn compensation_formula_check(
    ex: &Excursions,
    functional: ExcursionFunctional,
    n_paths: usize,
    stream: RngStream,
    th: &Thresholds,
) -> Result<TestReport> {
    let chain = &ex.chain;
    let c = ex.c;
    let beta = ex.beta;
    let lhs = par_map(n_paths, stream.labeled("sum"), |_, rng| {
        // occupation at 0 needed for L to reach 1
        let mut budget = beta;
        let mut total = 0.0;
        loop {
            let hold = exp1(rng) / c;
            if hold >= budget {
                break;
            }
            budget -= hold;
            let mut state = pick(&ex.start, rng);
            let mut zeta = 0.0;
            while state != 0 {
                zeta += exp1(rng) / chain.holding_rate(state);
                let w: Vec<f64> =
                    (0..chain.len()).map(|j| if j == state { 0.0 } else { chain.generator[state][j] }).collect();
                state = pick(&w, rng);
            }
            total += functional.of_length(zeta);
        }
        total
    });
    let rhs_mc = par_map(n_paths, stream.labeled("excursion measure"), |_, rng| {
        let mut state = pick(&ex.start, rng);
        let mut zeta = 0.0;
        while state != 0 {
            zeta += exp1(rng) / chain.holding_rate(state);
            let w: Vec<f64> =
                (0..chain.len()).map(|j| if j == state { 0.0 } else { chain.generator[state][j] }).collect();
            state = pick(&w, rng);
        }
        beta * c * functional.of_length(zeta)
    });
    let lhs = Estimate::from_samples(&lhs);
    let rhs_mc = Estimate::from_samples(&rhs_mc);
    let exact = functional.eta_exact(ex);
    let se = lhs.std_error.hypot(rhs_mc.std_error);
    let z = if (lhs.mean - rhs_mc.mean).abs() == 0.0 { 0.0 } else { (lhs.mean - rhs_mc.mean).abs() / se };
    Ok(TestReport::z_check("compensation formula", &lhs, exact, th.sigmas)
        .with_meta("rhs_mc", rhs_mc.mean)
        .with_meta("rhs_mc_std_error", rhs_mc.std_error)
        .with_meta("two_sided_z", z))
}

/// The overshoot process D_x = Y_{τ+_x} - x of a subordinator path from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct OvershootProcess {
    /// Jump gaps (Y_{σ-}, Y_σ) in increasing order.
    pub gaps: Vec<(f64, f64)>,
}

impl OvershootProcess {
    pub fn from_path(path: &PathSample) -> Self {
        let gaps = (1..path.times.len())
            .filter_map(|i| {
                let before = path.left_limit(i);
                (path.values[i] > before).then_some((before, path.values[i]))
            })
            .collect();
        OvershootProcess { gaps }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.gaps.iter().find(|(lo, hi)| *lo < x && x < *hi).map_or(0.0, |(_, hi)| hi - x)
    }

    /// sup{z <= x : D_z = 0}.
    pub fn last_zero(&self, x: f64) -> f64 {
        self.gaps.iter().find(|(lo, hi)| *lo < x && x < *hi).map_or(x, |(lo, _)| *lo)
    }
}

/// Two-sample comparison of the last zero of D under the last-passage
/// conditioning with the terminal value of Y under P↓.
///
/// The last-zero law is the q ↓ 0 limit of g_{e_q} given g_{e_q} < a: a path
/// admits e_q ∈ (0, a) and, when Y jumps over a, e_q ∈ (a, Y_{τ_a}). Each
/// path therefore draws e uniformly on that set and carries its length as
/// weight.
pub fn overshoot_consistency(
    spec: &SubordinatorSpec,
    a: f64,
    n_paths: usize,
    stream: RngStream,
    th: &Thresholds,
) -> Result<TestReport> {
    if !spec.is_finite_activity() {
        return Err(Error::Unsupported("overshoot process needs a finite-activity subordinator".into()));
    }
    let degenerate = match spec {
        SubordinatorSpec::Poisson { .. } => true,
        SubordinatorSpec::CompoundPoissonDrift { kappa, .. } => *kappa == 0.0,
        _ => false,
    };
    let draws = par_map(n_paths, stream.labeled("overshoot"), |_, rng| {
        let path = sample_path_past_level(spec, a, rng)?;
        let d = OvershootProcess::from_path(&path);
        let over = d.gaps.iter().find(|(lo, hi)| *lo <= a && a < *hi).map_or(0.0, |(_, hi)| hi - a);
        let length = a + over;
        let e = length * open_unit(rng);
        let g = if e < a { d.last_zero(e) } else { d.last_zero(a) };
        Ok((g, length))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let law = StripLaw::new(*spec, a, 0.0)?;
    let terminal = par_map(n_paths, stream.labeled("strip"), |_, rng| {
        sample_strip(&law, StripMethod::PathDecomposition, rng).map(|p| p.terminal())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (gs, ws): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();
    let report = ks_two_sample("overshoot last zero vs strip terminal", &gs, Some(&ws), &terminal, None, th)?;
    Ok(if degenerate { report.with_meta("warning", "zero drift: D has a discrete zero set") } else { report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_simpson;

    fn two() -> Excursions {
        local_time_normalization(&CtmcSpec::two_state(1.0, 2.0).unwrap()).unwrap()
    }

    #[test]
    fn last_zero_before_exponential_time() {
        for (k, (name, chain)) in CtmcSpec::fixtures().into_iter().enumerate() {
            let law = LastPassageLaw::new(local_time_normalization(&chain).unwrap(), 1.5).unwrap();
            let r =
                last_zero_exponential_check(&law, 0.2, 20000, RngStream::new(60 + k as u64, 0), &Thresholds::default())
                    .unwrap();
            assert!(r.passed(), "{name}: {r:?}");
        }
    }

    #[test]
    fn normalization_examples() {
        let ex = two();
        assert_eq!(ex.c, 1.0);
        assert_eq!(ex.start, vec![0.0, 1.0]);
        let bd = local_time_normalization(&CtmcSpec::birth_death(1.0, 2.0, 10).unwrap()).unwrap();
        assert_eq!(bd.c, 1.0);
        assert!(CtmcSpec::new(vec![vec![0.0, 0.0], vec![1.0, -1.0]], 0).is_err());
        assert!(CtmcSpec::new(vec![vec![-1.0, 1.0, 0.0], vec![1.0, -1.0, 0.0], vec![0.0, 0.0, 0.0]], 0).is_err());
    }

    #[test]
    fn two_state_h_values() {
        // E_1 e^{-qT_0} = 2/(2+q), η = δ_1 at rate 1
        let ex = two();
        let h1 = ex.h_q(1, 1.0).unwrap();
        assert!((h1 - (1.0 / 3.0) / (1.0 + 1.0 / 3.0)).abs() < 1e-14);
        assert_eq!(ex.h_q(0, 1.0).unwrap(), 0.0);
        assert!((ex.h(1).unwrap() - 0.5 / 1.5).abs() < 1e-14);
        let near = ex.h_q(1, 1e-7).unwrap();
        assert!((near - ex.h(1).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn excessive_identity_all_fixtures() {
        for (name, chain) in CtmcSpec::fixtures() {
            let ex = local_time_normalization(&chain).unwrap();
            for x in 0..chain.len() {
                for q in [0.1, 1.0, 10.0] {
                    for t in [0.1, 1.0] {
                        let r = check_excessive_identity(&ex, x, q, t).unwrap();
                        assert!(r.residual < 1e-8, "{name} x={x} q={q} t={t}: {r:?}");
                        assert!(r.lhs <= r.h_q + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn v_matches_simpson_and_series() {
        let chain = CtmcSpec::birth_death(1.0, 2.0, 10).unwrap();
        let ex = local_time_normalization(&chain).unwrap();
        let q = 0.7;
        let v = ex.v_q(3, 0.2, 1.5, q).unwrap();
        let m = chain.matrix();
        let oracle = adaptive_simpson(|u| (-q * u).exp() * expm(&m, u)[(3, 0)], 0.2, 1.5, 1e-12).unwrap();
        assert!((v - oracle).abs() < 1e-9, "{v} {oracle}");
        let t = 1e-3;
        let small = ex.v_q(0, 0.0, t, q).unwrap();
        assert!((small - (t - t * t * (1.0 + q) / 2.0)).abs() < 1e-8);
        assert_eq!(ex.v_q(2, 0.5, 0.5, q).unwrap(), 0.0);
    }

    #[test]
    fn last_zero_identity_holds() {
        for (name, chain) in CtmcSpec::fixtures() {
            let ex = local_time_normalization(&chain).unwrap();
            for x in 0..chain.len() {
                for q in [0.1, 1.0, 10.0] {
                    let (d, v) = last_zero_identity(&ex, x, q, 1.3).unwrap();
                    assert!((d - v).abs() < 1e-8, "{name} {x} {q}: {d} {v}");
                }
            }
        }
    }

    #[test]
    fn beta_rescaling_is_invisible() {
        let chain = CtmcSpec::cyclic_five().unwrap();
        let one = local_time_normalization(&chain).unwrap();
        let two = one.clone().with_beta(2.0).unwrap();
        let (_, v1) = last_zero_identity(&one, 2, 0.5, 1.0).unwrap();
        let (_, v2) = last_zero_identity(&two, 2, 0.5, 1.0).unwrap();
        assert!((v1 - v2).abs() < 1e-12);
        let l1 = LastPassageLaw::new(one, 1.0).unwrap();
        let l2 = LastPassageLaw::new(two, 1.0).unwrap();
        assert!((l1.g_cdf(0.4).unwrap() - l2.g_cdf(0.4).unwrap()).abs() < 1e-12);
        for (a, b) in l1.ex.h_all().iter().zip(l2.ex.h_all()) {
            assert!((a / b - 2.0).abs() < 1e-12 || *a == 0.0);
        }
    }

    #[test]
    fn excursion_factor_two_state() {
        let ex = two();
        for (q, t) in [(1.0f64, 0.5f64), (0.1, 1.0), (0.0, 0.3)] {
            let want = (-(2.0 + q) * t).exp() / (3.0 + q);
            assert!((excursion_factor(&ex, t, q).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn strictly_excessive_birth_death() {
        let ex = local_time_normalization(&CtmcSpec::birth_death(1.0, 2.0, 10).unwrap()).unwrap();
        let h = ex.h_all();
        let e = expm(&ex.chain.killed(), 1.0);
        for x in 1..=10 {
            let lhs: f64 = (1..=10).map(|j| e[(x - 1, j - 1)] * h[j]).sum();
            assert!(lhs < h[x]);
        }
        let audit = audit_assumptions(&ex).unwrap();
        assert!(audit.bound_holds);
        assert!(audit.limit_error < 1e-4, "{audit:?}");
    }

    #[test]
    fn sampler_shape_and_marginal() {
        let chain = CtmcSpec::birth_death(1.0, 2.0, 10).unwrap().with_start(2).unwrap();
        let law = LastPassageLaw::new(local_time_normalization(&chain).unwrap(), 2.0).unwrap();
        let marg = law.marginal_exact(1.0).unwrap();
        let n = 20000;
        let paths = par_map(n, RngStream::new(11, 0), |_, r| law.sample(r).unwrap());
        let mut counts = vec![0.0; chain.len() + 1];
        for p in &paths {
            assert!(p.g <= law.a);
            // no visit to 0 at or after g
            for (i, &t) in p.path.times.iter().enumerate() {
                if t >= p.g && i + 1 < p.path.times.len() {
                    assert!(p.path.values[i] != 0.0 || p.died_at_zero);
                }
            }
            match p.state_at(1.0) {
                Some(s) => counts[s] += 1.0,
                None => counts[chain.len()] += 1.0,
            }
        }
        let mut want = marg.clone();
        want.push(1.0 - marg.iter().sum::<f64>());
        let emp: Vec<f64> = counts.iter().map(|c| c / n as f64).collect();
        let tv = crate::verify::total_variation(&emp, &want);
        assert!(tv < 0.02, "{emp:?} {want:?}");
    }

    #[test]
    fn markov_killing_limit_full_and_state() {
        let chain = CtmcSpec::two_state(1.0, 2.0).unwrap();
        let law = LastPassageLaw::new(local_time_normalization(&chain).unwrap(), 1.0).unwrap();
        let full =
            verify_markov_killing_limit(&law, MarkovEvent::Full, &[1.0, 0.1], 200, RngStream::new(1, 0)).unwrap();
        assert!(full.rows.iter().all(|r| (r.estimate.mean - 1.0).abs() < 1e-12));
        let ev = MarkovEvent::AtState { t: 0.25, state: 0 };
        let res = verify_markov_killing_limit(&law, ev, &[1.0, 0.3, 0.1, 0.03], 40000, RngStream::new(2, 0)).unwrap();
        let exact = res.exact.unwrap();
        assert!((res.extrapolated.limit - exact).abs() < 0.02, "{res:?}");
        assert!((res.conditioned.mean - exact).abs() < 4.0 * res.conditioned.std_error + 1e-3, "{res:?}");
    }

    #[test]
    fn compensation_two_state() {
        let ex = two();
        let th = Thresholds::default();
        let r = compensation_formula_check(
            &ex,
            ExcursionFunctional::LongerThan { length: 1.0 },
            20000,
            RngStream::new(3, 0),
            &th,
        )
        .unwrap();
        assert!(r.passed(), "{r:?}");
        assert!((ExcursionFunctional::LongerThan { length: 1.0 }.eta_exact(&ex) - (-2.0f64).exp()).abs() < 1e-14);
        let z = compensation_formula_check(&ex, ExcursionFunctional::Zero, 100, RngStream::new(4, 0), &th).unwrap();
        assert!(z.passed());
        let c = compensation_formula_check(&ex, ExcursionFunctional::Count, 20000, RngStream::new(5, 0), &th).unwrap();
        assert!(c.passed(), "{c:?}");
    }

    #[test]
    fn overshoot_zero_set_is_range() {
        let spec =
            SubordinatorSpec::compound_poisson_drift(1.0, 1.0, crate::models::JumpLaw::Exponential { rate: 1.0 })
                .unwrap();
        let mut rng = RngStream::new(9, 0).rng();
        let path = sample_path_past_level(&spec, 3.0, &mut rng).unwrap();
        let d = OvershootProcess::from_path(&path);
        for i in 0..300 {
            let x = 0.01 * i as f64 + 0.005;
            let in_range = path.times.windows(2).enumerate().any(|(k, w)| {
                let lo = path.values[k];
                let hi = path.evolve(k, w[1] - w[0]);
                lo <= x && x <= hi
            });
            assert_eq!(d.value(x) == 0.0, in_range, "x = {x}");
        }
    }

    #[test]
    fn overshoot_matches_strip_terminal() {
        let spec =
            SubordinatorSpec::compound_poisson_drift(1.0, 1.0, crate::models::JumpLaw::Exponential { rate: 1.0 })
                .unwrap();
        let r = overshoot_consistency(&spec, 2.0, 5000, RngStream::new(10, 0), &Thresholds::default()).unwrap();
        assert!(r.passed(), "{r:?}");
        let drift = SubordinatorSpec::drift(1.0).unwrap();
        let r = overshoot_consistency(&drift, 1.0, 2000, RngStream::new(12, 0), &Thresholds::default()).unwrap();
        assert!(r.passed(), "{r:?}");
    }
}

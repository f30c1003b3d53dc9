//! The verification suites behind `verify`: each one runs a fixed set of
//! exact and Monte Carlo checks from a seed and returns its reports.
//!
//! Every suite draws from its own labeled stream, so results do not depend
//! on which other suites run or on the thread count.

use crate::conditioning::{sample_strip, strip_event_exact, verify_killing_limit, StripEvent, StripLaw, StripMethod};
use crate::error::{Error, Result};
use crate::inversion::EulerInversion;
use crate::ladderbox::{
    check_bessel3_marginal, check_h_identity, check_joint_histogram, check_v_box_mc, skeleton_halving_check,
    verify_box_limit, LadderBoxLaw, V_box,
};
use crate::lamperti::{phi_circ, phi_down, phi_xi, undershoot_cdf, xi_exponent_check};
use crate::lastpassage::{
    check_excessive_identity, last_zero_exponential_check, last_zero_identity, local_time_normalization,
    overshoot_consistency, CtmcSpec, LastPassageLaw,
};
use crate::mc::par_map;
use crate::models::{JumpLaw, StableJumpApprox, SubordinatorSpec};
use crate::potential::{potential_closed_form, potential_mc, potential_numeric};
use crate::rng::RngStream;
use crate::special::{gamma, rgamma};
use crate::verify::{chi_square, ks_statistic, ks_test, total_variation, Status, TestReport, Thresholds};
use serde::{Deserialize, Serialize};

/// Suite names in the order `verify all` runs them.
pub const SUITES: [&str; 9] =
    ["strip", "terminal", "killing", "lamperti", "undershoot", "potential", "lastpassage", "overshoot", "ladderbox"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteOptions {
    /// Multiplier on every Monte Carlo sample size; 1 runs the full suites.
    pub scale: f64,
    pub thresholds: Thresholds,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { scale: 1.0, thresholds: Thresholds::default() }
    }
}

impl SuiteOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale <= 10.0) {
            return Err(Error::Domain(format!("scale must lie in (0, 10], got {}", self.scale)));
        }
        Ok(())
    }

    fn n(&self, full: usize) -> usize {
        ((full as f64 * self.scale).round() as usize).max(20)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub reports: Vec<TestReport>,
}

/// Runs one suite by name.
pub fn run_suite(name: &str, seed: u64, opts: &SuiteOptions) -> Result<SuiteResult> {
    opts.validate()?;
    let stream = RngStream::new(seed, 0).labeled(name);
    let th = &opts.thresholds;
    let reports = match name {
        "strip" => strip_suite(opts, stream, th)?,
        "terminal" => terminal_suite(opts, stream)?,
        "killing" => killing_suite(opts, stream)?,
        "lamperti" => lamperti_suite(opts, stream, th)?,
        "undershoot" => undershoot_suite(opts, stream, th)?,
        "potential" => potential_suite(opts, stream, th)?,
        "lastpassage" => lastpassage_suite(opts, stream, th)?,
        "overshoot" => overshoot_suite(opts, stream, th)?,
        "ladderbox" => ladderbox_suite(opts, stream, th)?,
        other => return Err(Error::Domain(format!("unknown suite '{other}'; expected one of {}", SUITES.join(", ")))),
    };
    let passed = reports.iter().all(TestReport::passed);
    Ok(SuiteResult { suite: name.to_string(), seed, passed, reports })
}

/// Runs every suite in [`SUITES`] order.
pub fn run_all(seed: u64, opts: &SuiteOptions) -> Result<Vec<SuiteResult>> {
    SUITES.iter().map(|s| run_suite(s, seed, opts)).collect()
}

/// Killing level of the Poisson process under P↓ from its forward dynamics.
fn strip_suite(opts: &SuiteOptions, stream: RngStream, th: &Thresholds) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    for a in [2.0, 3.0] {
        let law = StripLaw::new(SubordinatorSpec::poisson(1.0)?, a, 0.0)?;
        let levels = a as usize + 1;
        let draws = par_map(opts.n(100_000), stream.labeled(&format!("a={a}")), |_, rng| {
            sample_strip(&law, StripMethod::HTransform, rng).map(|p| p.terminal() as usize)
        });
        let mut counts = vec![0u64; levels];
        for d in draws {
            counts[d?] += 1;
        }
        let (stat, dof, p) = chi_square(&counts, &vec![1.0 / levels as f64; levels])?;
        let n = counts.iter().sum::<u64>() as usize;
        out.push(
            TestReport::p_check(&format!("poisson killing level uniform a={a}"), stat, p, n, None, th)
                .with_meta("dof", dof)
                .with_meta("counts", format!("{counts:?}")),
        );
    }
    Ok(out)
}

/// X_{ζ-} of the stable process under P↓ against y^α.
fn terminal_suite(opts: &SuiteOptions, stream: RngStream) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    for alpha in [0.3, 0.5, 0.7] {
        let law = StripLaw::new(SubordinatorSpec::stable(alpha)?, 1.0, 0.0)?;
        let n = opts.n(100_000);
        let ys = par_map(n, stream.labeled(&format!("alpha={alpha}")), |_, rng| {
            sample_strip(&law, StripMethod::HTransform, rng).map(|p| p.terminal())
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let (d, _) = ks_statistic(&ys, None, |y| y.clamp(0.0, 1.0).powf(alpha))?;
        out.push(TestReport::below(
            &format!("stable terminal law alpha={alpha}"),
            d,
            3.0 * 1.36 / (n as f64).sqrt(),
            n,
        ));
    }
    Ok(out)
}

/// Exponential-killing limit of Poisson and drift paths.
fn killing_suite(opts: &SuiteOptions, stream: RngStream) -> Result<Vec<TestReport>> {
    let q_seq = [1.0, 0.3, 0.1, 0.03];
    let cases = [
        (
            "poisson",
            StripLaw::new(SubordinatorSpec::poisson(1.0)?, 3.0, 0.0)?,
            [
                StripEvent::Passes { y: 1.5 },
                StripEvent::BelowAt { t: 1.0, c: 1.0 },
                StripEvent::AboveAt { t: 2.0, c: 1.5 },
            ],
        ),
        (
            "drift",
            StripLaw::new(SubordinatorSpec::drift(1.0)?, 1.0, 0.0)?,
            [
                StripEvent::Passes { y: 0.5 },
                StripEvent::BelowAt { t: 0.3, c: 0.5 },
                StripEvent::AboveAt { t: 0.6, c: 0.4 },
            ],
        ),
    ];
    let mut out = Vec::new();
    for (family, law, events) in cases {
        for (k, event) in events.into_iter().enumerate() {
            let res =
                verify_killing_limit(&law, event, &q_seq, opts.n(100_000), stream.labeled(&format!("{family}/{k}")))?;
            let exact = strip_event_exact(&law, event)?;
            let mut r = TestReport::absolute(
                &format!("killing limit {family} {}", serde_json::to_string(&event).unwrap_or_default()),
                res.extrapolated.limit,
                exact,
                0.01,
            )
            .with_meta("extrapolation_std_error", res.extrapolated.std_error)
            .with_meta("conditioned_sampler", res.conditioned.mean);
            for row in &res.rows {
                r = r.with_meta(&format!("q={}", row.q), row.estimate.mean);
            }
            if res.inconclusive && r.status == Status::Pass {
                r.status = Status::Underpowered;
            }
            out.push(r);
        }
    }
    Ok(out)
}

/// Exact exponent identities and the exponent of ξ read off simulated paths.
fn lamperti_suite(opts: &SuiteOptions, stream: RngStream, th: &Thresholds) -> Result<Vec<TestReport>> {
    let tol = th.special_functions;
    let mut out = Vec::new();
    for k in 1..=9 {
        let alpha = k as f64 / 10.0;
        out.push(TestReport::absolute(&format!("Phi(alpha-1) alpha={alpha}"), phi_xi(alpha - 1.0, alpha), 0.0, tol));
        out.push(TestReport::absolute(&format!("Phi_circ(0) alpha={alpha}"), phi_circ(0.0, alpha), 0.0, tol));
        out.push(TestReport::relative(&format!("Phi(0) alpha={alpha}"), phi_xi(0.0, alpha), rgamma(1.0 - alpha), tol));
        out.push(TestReport::relative(
            &format!("Phi_down(0) alpha={alpha}"),
            phi_down(0.0, alpha),
            gamma(1.0 + alpha),
            tol,
        ));
    }
    out.extend(xi_exponent_check(0.5, &[0.5, 1.0, 2.0], 0.5, opts.n(10_000), stream.labeled("xi"), th)?);
    Ok(out)
}

/// Scaled undershoot of the stable process at first passage.
fn undershoot_suite(opts: &SuiteOptions, stream: RngStream, th: &Thresholds) -> Result<Vec<TestReport>> {
    let alpha = 0.5;
    let approx = StableJumpApprox::new(alpha, 1e-5)?;
    let ys = par_map(opts.n(100_000), stream, |_, rng| {
        approx.run_to_level(0.0, 1.0, rng).map(|fp| 1.0 - fp.path.terminal())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(vec![ks_test("stable undershoot alpha=0.5", &ys, |y| undershoot_cdf(y, alpha), th)?])
}

/// Closed form, Laplace inversion and simulation of U on a grid.
fn potential_suite(opts: &SuiteOptions, stream: RngStream, th: &Thresholds) -> Result<Vec<TestReport>> {
    let inversion = EulerInversion::default();
    let xs: Vec<f64> = (0..10).map(|k| 0.35 + 0.5 * k as f64).collect();
    let families = [
        ("drift", SubordinatorSpec::drift(1.0)?),
        ("poisson", SubordinatorSpec::poisson(1.0)?),
        ("stable", SubordinatorSpec::stable(0.5)?),
    ];
    let mut out = Vec::new();
    for (family, spec) in families {
        for (k, &x) in xs.iter().enumerate() {
            let closed = potential_closed_form(&spec, 0.0, x)?;
            let numeric = potential_numeric(&spec, 0.0, x, &inversion)?;
            let mc = potential_mc(&spec, 0.0, x, opts.n(20_000), stream.labeled(&format!("{family}/{k}")))?;
            let rel = (numeric - closed).abs() / closed.abs();
            out.push(
                TestReport::below(&format!("U {family} x={x} closed vs inversion"), rel, 1e-5, 1)
                    .with_meta("closed", closed)
                    .with_meta("inversion", numeric),
            );
            if mc.std_error > 1e-9 * mc.mean.abs() {
                out.push(TestReport::z_check(
                    &format!("U {family} x={x} closed vs simulation"),
                    &mc,
                    closed,
                    th.sigmas,
                ));
                out.push(TestReport::z_check(
                    &format!("U {family} x={x} inversion vs simulation"),
                    &mc,
                    numeric,
                    th.sigmas,
                ));
            } else {
                // deterministic passage times: the estimate is exact up to rounding
                out.push(TestReport::relative(
                    &format!("U {family} x={x} closed vs simulation"),
                    mc.mean,
                    closed,
                    1e-9,
                ));
                out.push(TestReport::relative(
                    &format!("U {family} x={x} inversion vs simulation"),
                    mc.mean,
                    numeric,
                    1e-5,
                ));
            }
        }
    }
    Ok(out)
}

/// Identities and samplers for the chain conditioned to avoid 0 after a.
fn lastpassage_suite(opts: &SuiteOptions, stream: RngStream, th: &Thresholds) -> Result<Vec<TestReport>> {
    let tol = th.linear_algebra;
    let a = 1.5;
    let mut out = Vec::new();
    for (name, chain) in CtmcSpec::fixtures() {
        let ex = local_time_normalization(&chain)?;
        for beta in [1.0, 2.0] {
            let ex_b = ex.clone().with_beta(beta)?;
            for x in 0..chain.len() {
                for (q, t) in [(0.5, 0.7), (2.0, 1.3)] {
                    let c = check_excessive_identity(&ex_b, x, q, t)?;
                    out.push(
                        TestReport::below(
                            &format!("{name} excessive identity beta={beta} x={x} q={q} t={t}"),
                            c.residual,
                            tol,
                            1,
                        )
                        .with_meta("lhs", c.lhs)
                        .with_meta("rhs", c.rhs),
                    );
                }
                let (direct, via_v) = last_zero_identity(&ex_b, x, 0.5, a)?;
                out.push(TestReport::absolute(
                    &format!("{name} last zero identity beta={beta} x={x}"),
                    via_v,
                    direct,
                    tol,
                ));
            }
        }
        let law = LastPassageLaw::new(ex, a)?;
        let n = opts.n(100_000);
        let paths = par_map(n, stream.labeled(&format!("{name}/sampler")), |_, rng| {
            law.sample(rng).map(|p| (p.g, p.state_at(a / 2.0)))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let gs: Vec<f64> = paths.iter().map(|p| p.0).collect();
        let (d, _) = ks_statistic(&gs, None, |t| law.g_cdf(t).unwrap_or(f64::NAN))?;
        out.push(TestReport::below(&format!("{name} g law under the conditioned sampler"), d, 0.02, n));
        let exact = law.marginal_exact(a / 2.0)?;
        let mut empirical = vec![0.0; chain.len() + 1];
        for p in &paths {
            empirical[p.1.unwrap_or(chain.len())] += 1.0 / n as f64;
        }
        let mut target = exact.clone();
        target.push((1.0 - exact.iter().sum::<f64>()).max(0.0));
        out.push(
            TestReport::below(&format!("{name} marginal at a/2"), total_variation(&empirical, &target), 0.02, n)
                .with_meta("empirical", format!("{empirical:?}"))
                .with_meta("exact", format!("{target:?}")),
        );
        out.push(last_zero_exponential_check(&law, 0.2, opts.n(50_000), stream.labeled(&format!("{name}/eq")), th)?);
    }
    Ok(out)
}

/// Strip-conditioned terminal value against the last zero of the overshoot
/// process for drift plus exponential jumps.
fn overshoot_suite(opts: &SuiteOptions, stream: RngStream, th: &Thresholds) -> Result<Vec<TestReport>> {
    let spec = SubordinatorSpec::compound_poisson_drift(1.0, 1.0, JumpLaw::Exponential { rate: 1.0 })?;
    Ok(vec![overshoot_consistency(&spec, 2.0, opts.n(100_000), stream, th)?])
}

/// Brownian motion conditioned on where and when it reaches its supremum.
fn ladderbox_suite(opts: &SuiteOptions, stream: RngStream, th: &Thresholds) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    for a in [0.5, 1.0, 2.0] {
        let law = LadderBoxLaw::new(a, f64::INFINITY, 1e-4)?;
        out.push(TestReport::absolute(
            &format!("V_box unbounded b a={a}"),
            V_box(&law, 0.0)?,
            (2.0 * a / std::f64::consts::PI).sqrt(),
            th.linear_algebra,
        ));
    }
    let fine = LadderBoxLaw::new(1.0, 1.0, 1e-4)?;
    out.push(check_joint_histogram(&fine, opts.n(100_000), (5, 5), stream.labeled("joint"), th)?);
    let s = 0.8;
    for t in [0.2, 0.4, 0.6] {
        out.push(check_h_identity(&fine, s, t, opts.n(100_000), stream.labeled(&format!("h/{t}")), th)?);
    }
    out.push(check_bessel3_marginal(&fine, 1.0, opts.n(100_000), stream.labeled("bessel"), th)?);
    let coarse = LadderBoxLaw::new(1.0, 1.0, 1e-3)?;
    out.push(check_v_box_mc(&coarse, opts.n(20_000), stream.labeled("renewal"), th)?);
    let (_, limit) = verify_box_limit(&coarse, &[1.0, 0.3], opts.n(20_000), stream.labeled("limit"), th)?;
    out.extend(limit);
    out.push(skeleton_halving_check(&coarse, 0.5, opts.n(20_000), stream.labeled("halving"), th)?);
    Ok(out)
}

use crate::config::{
    overlay, ExperimentConfig, Format, HitMethodArg, HitParams, LadderBoxEmit, LadderBoxParams, LampertiParams,
    LastPassageEmit, LastPassageParams, ModelArgs, PotentialParams, SimulateParams, StripEmit, StripMethodArg,
    StripParams,
};
use crate::output::{json_bytes, Provenance, Sink, Table};
use crate::{CliError, Command, ConditionCommand};
use condsub::conditioning::{sample_hit, sample_strip, terminal_cdf};
use condsub::ladderbox::{cell_probabilities, g_S_joint_density, sample_box_pair, skeleton_binning};
use condsub::lamperti::{phi_circ, phi_down, phi_xi, xi_exponent_estimates};
use condsub::lastpassage::{check_excessive_identity, local_time_normalization};
use condsub::mc::par_map;
use condsub::models::sample_path;
use condsub::potential::potential_table;
use condsub::suites::{run_suite, SuiteOptions, SuiteResult, SUITES};
use condsub::{
    CtmcSpec, HitLaw, HitMethod, LadderBoxLaw, LastPassageLaw, PathSample, RngStream, SampleMode, Status, StripLaw,
    StripMethod, SubordinatorSpec,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub struct Context {
    pub seed: u64,
    pub format: Option<Format>,
    pub sink: Sink,
    pub cfg: ExperimentConfig,
}

impl Context {
    fn stream(&self, command: &str) -> RngStream {
        RngStream::new(self.seed, 0).labeled(command)
    }

    fn paths(&self, flag: Option<usize>, default: usize) -> Result<usize, CliError> {
        match flag.or(self.cfg.n_paths).unwrap_or(default) {
            0 => Err(CliError::Usage("the number of paths must be at least 1".into())),
            n => Ok(n),
        }
    }

    fn emit(&self, command: &str, resolved: Value, table: &Table) -> Result<i32, CliError> {
        let prov =
            Provenance::new(command, self.seed, &json!({ "command": command, "seed": self.seed, "config": resolved }));
        self.sink.table(command, self.format.unwrap_or(Format::Csv), table, &prov)?;
        Ok(0)
    }
}

/// A saved `verify` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyReport {
    pub seed: u64,
    pub config_sha256: String,
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

pub fn dispatch(ctx: &Context, command: Command) -> Result<i32, CliError> {
    match command {
        Command::Simulate { model, params } => simulate(ctx, &model, &params),
        Command::Potential { model, params } => potential(ctx, &model, &params),
        Command::Condition { which: ConditionCommand::Strip { model, params } } => strip(ctx, &model, &params),
        Command::Condition { which: ConditionCommand::Hit { model, params } } => hit(ctx, &model, &params),
        Command::Lamperti { params } => lamperti(ctx, &params),
        Command::Lastpassage { params } => lastpassage(ctx, &params),
        Command::Ladderbox { params } => ladderbox(ctx, &params),
        Command::Verify { suite, scale } => verify(ctx, &suite, scale),
        Command::Report { file } => report(ctx, &file),
    }
}

fn positive(v: f64, what: &str) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("{what} must be positive, got {v}")))
    }
}

/// Exact jump times where the family allows it, otherwise a fine grid.
fn sample_mode(spec: &SubordinatorSpec, horizon: f64, dt: Option<f64>) -> SampleMode {
    match dt {
        Some(dt) => SampleMode::Grid { dt },
        None if spec.is_finite_activity() => SampleMode::JumpExact,
        None => SampleMode::Grid { dt: horizon / 1000.0 },
    }
}

fn path_table(paths: &[PathSample]) -> Table {
    let mut t = Table::new(&["path", "t", "x", "weight", "killed"]);
    for (k, p) in paths.iter().enumerate() {
        let n = p.times.len();
        for (i, (&time, &x)) in p.times.iter().zip(&p.values).enumerate() {
            let dead = p.killed && i == n - 1;
            t.push(vec![k.into(), time.into(), x.into(), p.weight.into(), usize::from(dead).into()]);
        }
    }
    t
}

fn collect<T>(v: Vec<condsub::Result<T>>) -> Result<Vec<T>, CliError> {
    Ok(v.into_iter().collect::<condsub::Result<Vec<T>>>()?)
}

fn simulate(ctx: &Context, model: &ModelArgs, params: &SimulateParams) -> Result<i32, CliError> {
    let spec = model.resolve(&ctx.cfg)?;
    let p = overlay(params, ctx.cfg.simulate.as_ref())?;
    let horizon = positive(p.horizon.unwrap_or(1.0), "horizon")?;
    let n = ctx.paths(p.paths, 5)?;
    let mode = sample_mode(&spec, horizon, p.dt);
    let paths = collect(par_map(n, ctx.stream("simulate"), |_, rng| sample_path(&spec, horizon, mode, rng)))?;
    let resolved = json!({ "model": spec, "horizon": horizon, "paths": n, "mode": mode });
    ctx.emit("simulate", resolved, &path_table(&paths))
}

fn potential(ctx: &Context, model: &ModelArgs, params: &PotentialParams) -> Result<i32, CliError> {
    let spec = model.resolve(&ctx.cfg)?;
    let p = overlay(params, ctx.cfg.potential.as_ref())?;
    let q = p.q.unwrap_or(0.0);
    let x_max = positive(p.x_max.unwrap_or(5.0), "x_max")?;
    let points = p.points.unwrap_or(51);
    if points < 2 {
        return Err(CliError::Usage("points must be at least 2".into()));
    }
    let inversion = ctx.cfg.inversion.unwrap_or_default();
    let xs: Vec<f64> = (0..points).map(|k| k as f64 * x_max / (points - 1) as f64).collect();
    let table = potential_table(&spec, q, &xs, &inversion)?;
    let provenance = serde_json::to_value(table.provenance).map_err(|e| CliError::Config(e.to_string()))?;
    let provenance = provenance.as_str().unwrap_or_default().to_string();
    let mut out = Table::new(&["x", "U", "u", "provenance"]);
    for (i, (&x, &u_cap)) in table.xs.iter().zip(&table.values).enumerate() {
        let dens = table.density.as_ref().map(|d| d[i]).filter(|v| v.is_finite());
        out.push(vec![x.into(), u_cap.into(), dens.into(), provenance.clone().into()]);
    }
    let resolved = json!({ "model": spec, "q": q, "xs": xs, "inversion": inversion });
    ctx.emit("potential", resolved, &out)
}

fn strip(ctx: &Context, model: &ModelArgs, params: &StripParams) -> Result<i32, CliError> {
    let spec = model.resolve(&ctx.cfg)?;
    let p = overlay(params, ctx.cfg.strip.as_ref())?;
    let a = p.a.unwrap_or(1.0);
    let x0 = p.x0.unwrap_or(0.0);
    let law = StripLaw::new(spec, a, x0)?;
    let emit = p.emit.unwrap_or(StripEmit::Histogram);
    let n = ctx.paths(p.paths, if emit == StripEmit::Histogram { 10_000 } else { 10 })?;
    let horizon = positive(p.horizon.unwrap_or(1.0), "horizon")?;
    let method = match p.method.unwrap_or(StripMethodArg::Decomposition) {
        StripMethodArg::Decomposition => StripMethod::PathDecomposition,
        StripMethodArg::HTransform => StripMethod::HTransform,
        StripMethodArg::Weight => StripMethod::ImportanceWeight { horizon, mode: sample_mode(&spec, horizon, p.dt) },
    };
    if emit == StripEmit::Histogram && matches!(method, StripMethod::ImportanceWeight { .. }) {
        return Err(CliError::Usage("the terminal histogram needs the decomposition or h-transform method".into()));
    }
    let paths = collect(par_map(n, ctx.stream("strip"), |_, rng| sample_strip(&law, method, rng)))?;
    let bins = p.bins.unwrap_or(20).max(1);
    let resolved = json!({ "model": spec, "a": a, "x0": x0, "method": method, "paths": n, "emit": emit, "bins": bins });
    let table = match emit {
        StripEmit::Paths => path_table(&paths),
        StripEmit::Histogram => {
            let width = (a - x0) / bins as f64;
            let mut counts = vec![0usize; bins];
            for path in &paths {
                let k = ((path.terminal() - x0) / width).floor();
                if k >= 0.0 {
                    counts[(k as usize).min(bins - 1)] += 1;
                }
            }
            let mut t = Table::new(&["bin_lo", "bin_hi", "count", "density", "exact_probability"]);
            for (k, &c) in counts.iter().enumerate() {
                let (lo, hi) = (x0 + k as f64 * width, x0 + (k + 1) as f64 * width);
                // bins are [lo, hi) except the last, matching the counting above
                let lo_cdf = if k == 0 { 0.0 } else { terminal_cdf(&law, lo.next_down())? };
                let hi_cdf = if k + 1 == bins { 1.0 } else { terminal_cdf(&law, hi.next_down())? };
                let exact = hi_cdf - lo_cdf;
                t.push(vec![lo.into(), hi.into(), c.into(), (c as f64 / (n as f64 * width)).into(), exact.into()]);
            }
            t
        }
    };
    ctx.emit("strip", resolved, &table)
}

fn hit(ctx: &Context, model: &ModelArgs, params: &HitParams) -> Result<i32, CliError> {
    let spec = model.resolve(&ctx.cfg)?;
    let p = overlay(params, ctx.cfg.hit.as_ref())?;
    let y = p.y.unwrap_or(1.0);
    let x0 = p.x0.unwrap_or(0.0);
    let law = HitLaw::new(spec, y, x0)?;
    let n = ctx.paths(p.paths, 10)?;
    let horizon = positive(p.horizon.unwrap_or(1.0), "horizon")?;
    let method = match p.method.unwrap_or(HitMethodArg::Exact) {
        HitMethodArg::Exact => HitMethod::Exact,
        HitMethodArg::Weight => HitMethod::ImportanceWeight { horizon, mode: sample_mode(&spec, horizon, p.dt) },
    };
    let paths = collect(par_map(n, ctx.stream("hit"), |_, rng| sample_hit(&law, method, rng)))?;
    let resolved = json!({ "model": spec, "y": y, "x0": x0, "method": method, "paths": n });
    ctx.emit("hit", resolved, &path_table(&paths))
}

fn lamperti(ctx: &Context, params: &LampertiParams) -> Result<i32, CliError> {
    let p = overlay(params, ctx.cfg.lamperti.as_ref())?;
    let alpha = match (p.alpha, &ctx.cfg.model) {
        (Some(a), _) => a,
        (None, Some(SubordinatorSpec::Stable { alpha })) => *alpha,
        (None, _) => 0.5,
    };
    let lambdas = p.lambdas.unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0]);
    let u = p.u.unwrap_or(0.5);
    let n = ctx.paths(p.paths, 10_000)?;
    let est = xi_exponent_estimates(alpha, &lambdas, u, n, ctx.stream("lamperti"))?;
    let mut t = Table::new(&["lambda", "phi", "phi_down", "phi_circ", "empirical", "std_error"]);
    for (&l, e) in lambdas.iter().zip(&est) {
        t.push(vec![
            l.into(),
            phi_xi(l, alpha).into(),
            phi_down(l, alpha).into(),
            phi_circ(l, alpha).into(),
            e.mean.into(),
            e.std_error.into(),
        ]);
    }
    let resolved = json!({ "alpha": alpha, "lambdas": lambdas, "u": u, "paths": n });
    ctx.emit("lamperti", resolved, &t)
}

fn lastpassage(ctx: &Context, params: &LastPassageParams) -> Result<i32, CliError> {
    let p = overlay(params, ctx.cfg.lastpassage.as_ref())?;
    let chain = match (&p.fixture, &ctx.cfg.chain) {
        (Some(name), _) => CtmcSpec::fixture(name)?,
        (None, Some(chain)) => chain.clone(),
        (None, None) => CtmcSpec::fixture("two_state")?,
    };
    let a = positive(p.a.unwrap_or(1.5), "a")?;
    let emit = p.emit.unwrap_or(LastPassageEmit::G);
    let points = p.points.unwrap_or(21).max(2);
    let ex = local_time_normalization(&chain)?;
    let grid: Vec<f64> = (0..points).map(|k| a * k as f64 / (points - 1) as f64).collect();
    let mut resolved = json!({ "chain": chain, "a": a, "emit": emit, "points": points });
    let table = match emit {
        LastPassageEmit::G | LastPassageEmit::Marginal => {
            let law = LastPassageLaw::new(ex, a)?;
            let n = ctx.paths(p.paths, 10_000)?;
            let paths = collect(par_map(n, ctx.stream("lastpassage"), |_, rng| law.sample(rng)))?;
            resolved["paths"] = json!(n);
            if emit == LastPassageEmit::G {
                let mut gs: Vec<f64> = paths.iter().map(|c| c.g).collect();
                gs.sort_by(f64::total_cmp);
                let mut t = Table::new(&["t", "g_cdf_exact", "g_cdf_empirical"]);
                for &s in &grid {
                    let below = gs.partition_point(|&g| g <= s);
                    t.push(vec![s.into(), law.g_cdf(s)?.into(), (below as f64 / n as f64).into()]);
                }
                t
            } else {
                let at = p.t.unwrap_or(a / 2.0);
                resolved["t"] = json!(at);
                let exact = law.marginal_exact(at)?;
                let mut counts = vec![0usize; exact.len() + 1];
                for c in &paths {
                    counts[c.state_at(at).unwrap_or(exact.len())] += 1;
                }
                let mut t = Table::new(&["state", "exact", "empirical"]);
                let dead = 1.0 - exact.iter().sum::<f64>();
                for (j, &c) in counts.iter().enumerate() {
                    let label = if j < exact.len() { j.to_string() } else { "dead".to_string() };
                    let e = exact.get(j).copied().unwrap_or(dead);
                    t.push(vec![label.into(), e.into(), (c as f64 / n as f64).into()]);
                }
                t
            }
        }
        LastPassageEmit::Identities => {
            let q = positive(p.q.unwrap_or(0.5), "q")?;
            resolved["q"] = json!(q);
            let mut t = Table::new(&["x", "t", "lhs", "rhs", "residual", "h_q"]);
            for x in 0..chain.len() {
                for &s in grid.iter().skip(1) {
                    let c = check_excessive_identity(&ex, x, q, s)?;
                    t.push(vec![x.into(), s.into(), c.lhs.into(), c.rhs.into(), c.residual.into(), c.h_q.into()]);
                }
            }
            t
        }
    };
    ctx.emit("lastpassage", resolved, &table)
}

fn ladderbox(ctx: &Context, params: &LadderBoxParams) -> Result<i32, CliError> {
    let p = overlay(params, ctx.cfg.ladderbox.as_ref())?;
    let law = LadderBoxLaw::new(p.a.unwrap_or(1.0), p.b.unwrap_or(1.0), p.dt.unwrap_or(1e-3))?;
    let emit = p.emit.unwrap_or(LadderBoxEmit::Density);
    let (nx, ny) = (p.nx.unwrap_or(20).max(1), p.ny.unwrap_or(20).max(1));
    let mut resolved = json!({ "law": law, "emit": emit, "nx": nx, "ny": ny });
    let table = match emit {
        LadderBoxEmit::Density => {
            let mut t = Table::new(&["s", "y", "density"]);
            for i in 0..nx {
                let s = law.a * (i as f64 + 0.5) / nx as f64;
                for j in 0..ny {
                    let y = law.b * (j as f64 + 0.5) / ny as f64;
                    t.push(vec![s.into(), y.into(), g_S_joint_density(&law, s, y)?.into()]);
                }
            }
            t
        }
        LadderBoxEmit::Histogram => {
            let n = ctx.paths(p.paths, 100_000)?;
            resolved["paths"] = json!(n);
            let pairs: Vec<(f64, f64)> = par_map(n, ctx.stream("ladderbox"), |_, rng| sample_box_pair(&law, rng))
                .into_iter()
                .flatten()
                .collect();
            let binning = skeleton_binning(&law, nx, ny);
            let counts = binning.counts(&pairs);
            let probs = cell_probabilities(&law, &binning)?;
            let mut t = Table::new(&["s0", "s1", "y0", "y1", "count", "expected"]);
            let ny = binning.y_edges.len() - 1;
            for (i, s) in binning.x_edges.windows(2).enumerate() {
                for (j, y) in binning.y_edges.windows(2).enumerate() {
                    let k = i * ny + j;
                    t.push(vec![
                        s[0].into(),
                        s[1].into(),
                        y[0].into(),
                        y[1].into(),
                        (counts[k] as usize).into(),
                        (probs[k] * pairs.len() as f64).into(),
                    ]);
                }
            }
            t
        }
    };
    ctx.emit("ladderbox", resolved, &table)
}

fn verify(ctx: &Context, suite: &str, scale: Option<f64>) -> Result<i32, CliError> {
    let names: Vec<&str> = match suite {
        "all" => SUITES.to_vec(),
        s if SUITES.contains(&s) => vec![s],
        other => {
            return Err(CliError::Usage(format!(
                "unknown suite '{other}'; expected all or one of {}",
                SUITES.join(", ")
            )))
        }
    };
    let opts = SuiteOptions {
        scale: scale.or(ctx.cfg.scale).unwrap_or(1.0),
        thresholds: ctx.cfg.thresholds.unwrap_or_default(),
    };
    opts.validate()?;
    let resolved = json!({ "command": "verify", "suite": suite, "seed": ctx.seed, "options": opts });
    let mut suites = Vec::new();
    for name in names {
        let r = run_suite(name, ctx.seed, &opts)?;
        let failed = r.reports.iter().filter(|t| !t.passed()).count();
        eprintln!(
            "{:<12} {} ({} checks, {} failed)",
            r.suite,
            if r.passed { "PASS" } else { "FAIL" },
            r.reports.len(),
            failed
        );
        suites.push(r);
    }
    let report = VerifyReport {
        seed: ctx.seed,
        config_sha256: crate::output::config_hash(&resolved),
        passed: suites.iter().all(|s| s.passed),
        suites,
    };
    write_report(ctx, &report, Format::Json, "verify")?;
    Ok(if report.passed { 0 } else { 1 })
}

fn report_table(report: &VerifyReport) -> Table {
    let mut t = Table::new(&["suite", "name", "statistic", "p_value", "threshold", "n", "status"]);
    for s in &report.suites {
        for r in &s.reports {
            let status = match r.status {
                Status::Pass => "pass",
                Status::Fail => "fail",
                Status::Underpowered => "underpowered",
            };
            t.push(vec![
                s.suite.as_str().into(),
                r.name.as_str().into(),
                r.statistic.into(),
                r.p_value.into(),
                r.threshold.into(),
                r.n.into(),
                status.into(),
            ]);
        }
    }
    t
}

fn write_report(ctx: &Context, report: &VerifyReport, default: Format, stem: &str) -> Result<(), CliError> {
    match ctx.format.unwrap_or(default) {
        Format::Json => ctx.sink.write(stem, Format::Json, &json_bytes(report)?),
        Format::Csv => {
            let prov =
                Provenance { command: stem.into(), seed: report.seed, config_sha256: report.config_sha256.clone() };
            ctx.sink.table(stem, Format::Csv, &report_table(report), &prov)
        }
    }
}

fn report(ctx: &Context, file: &std::path::Path) -> Result<i32, CliError> {
    let text =
        std::fs::read_to_string(file).map_err(|e| CliError::Config(format!("cannot read {}: {e}", file.display())))?;
    let report: VerifyReport =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("not a verify report: {e}")))?;
    let passed = report.suites.iter().all(|s| s.reports.iter().all(|r| r.passed()));
    if passed != report.passed {
        return Err(CliError::Config("report pass flag disagrees with its checks".into()));
    }
    for s in &report.suites {
        let failed: Vec<&str> = s.reports.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
        eprintln!("{:<12} {} {}", s.suite, if failed.is_empty() { "PASS" } else { "FAIL" }, failed.join("; "));
    }
    write_report(ctx, &report, Format::Csv, "report")?;
    Ok(if passed { 0 } else { 1 })
}

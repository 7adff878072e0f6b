use serde::Serialize;
use serde_json::{json, Value};

use super::settings::{
    CertifySettings, CylinderSettings, DiscreteSettings, GheatSettings, HolderSettings, McSettings, Settings,
};
use crate::cylinder::{dpp_consistency_check, evaluate_cylinder, CylinderPayoff, CylinderResolution};
use crate::discrete::{
    borel_cantelli_check, capacity, choquet_suite, family_membership, family_upper_expectation, markov_bound_check,
    membership_report, monotone_convergence_check, point_capacities, scaled_capacity_decay, tail_functional,
    uniform_integrability_check, upper_expectation, Check, Event, Example, FiniteModel, Metric, ModelConfig,
    ModelFamily, RandomVariable, Tail, DEFAULT_SCHEDULE,
};
use crate::error::{Error, Result};
use crate::gfunction::ThetaSet;
use crate::gheat::{auto_grid, solve_gheat, Resolution, SolveOptions};
use crate::holder::{kolmogorov_report, moment_exponent_fit, SampledPath};
use crate::mc::{bang_bang_policy, policy_value, simulate_grid_paths, ControlPolicy, SimConfig};
use crate::payoff::{certify, parse, PayoffExpr};

/// Numeric results, artifacts and console summary of one command.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub results: Value,
    pub passed: bool,
    /// `(file name, contents)` written to the output directory.
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Vec<String>,
}

pub(super) fn run_command(cfg: &Settings, seed: u64) -> Result<CommandOutput> {
    match cfg {
        Settings::Discrete(s) => discrete(s),
        Settings::Gheat(s) => gheat(s),
        Settings::Cylinder(s) => cylinder(s),
        Settings::Mc(s) => mc(s, seed),
        Settings::Holder(s) => holder(s, seed),
        Settings::Certify(s) => certify_cmd(s),
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialise")
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))
}

fn required<'a>(v: &'a Option<String>, what: &str) -> Result<&'a str> {
    v.as_deref().ok_or_else(|| Error::Config(format!("missing {what}")))
}

fn theta(lo: f64, hi: f64) -> Result<ThetaSet> {
    ThetaSet::interval(lo, hi).map_err(|e| Error::Config(e.to_string()))
}

// ---------------------------------------------------------------- discrete

pub const DISCRETE_CHECKS: [&str; 9] = [
    "upper",
    "tail",
    "capacity",
    "markov",
    "choquet",
    "borel-cantelli",
    "ui",
    "monotone",
    "membership",
];

fn example(name: &str) -> Result<Example> {
    match name {
        "exm1" => Ok(Example::Exm1),
        "exm2" => Ok(Example::Exm2),
        "exm3" => Ok(Example::Exm3),
        _ => Err(Error::Config(format!("unknown example `{name}` (exm1, exm2, exm3)"))),
    }
}

fn load_model(s: &DiscreteSettings) -> Result<(Option<Example>, FiniteModel, RandomVariable)> {
    match (&s.example, &s.model) {
        (Some(_), Some(_)) => Err(Error::Config("give either an example or a model file, not both".into())),
        (None, None) => Err(Error::Config("missing --example or --model".into())),
        (Some(name), None) => {
            let ex = example(name)?;
            if s.n < 4 {
                return Err(Error::Config(format!("example size must be at least 4, got {}", s.n)));
            }
            let (m, x) = ex.build(s.n);
            Ok((Some(ex), m, x))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let (m, vars) = ModelConfig::from_toml(&text)?.build()?;
            let x = match &s.variable {
                Some(v) => vars
                    .get(v)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("model has no variable `{v}`")))?,
                None => m.identity_variable(),
            };
            Ok((None, m, x))
        }
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn info(name: impl Into<String>, v: f64) -> Check {
    Check::new(name, v, v, true)
}

/// The check rows of a `discrete` run, plus the upper expectation.
pub fn discrete_checks(s: &DiscreteSettings) -> Result<(Vec<Check>, f64)> {
    let selected: Vec<&str> = if s.check == "all" {
        DISCRETE_CHECKS.to_vec()
    } else {
        let c = s.check.as_str();
        if !DISCRETE_CHECKS.contains(&c) {
            return Err(Error::Config(format!(
                "unknown check `{c}` ({} or all)",
                DISCRETE_CHECKS.join(", ")
            )));
        }
        vec![c]
    };
    if !(s.p > 0.0) {
        return Err(Error::Config(format!("p must be positive, got {}", s.p)));
    }
    let (ex, m, x) = load_model(s)?;
    let n = m.len();
    let p = s.p;
    let unit_p = p == 1.0;
    let abs_p = x.map(|v| v.abs().powf(p));
    let moment = upper_expectation(&m, &abs_p)?;
    let mut rows = Vec::new();
    let mut upper = moment;

    for check in selected {
        match check {
            "upper" => match ex {
                Some(e @ (Example::Exm2 | Example::Exm3)) => {
                    let limit = family_upper_expectation(&e, p, &DEFAULT_SCHEDULE)?;
                    upper = limit;
                    if unit_p {
                        let reference = if e == Example::Exm2 { 2.0 } else { 25.0 / 16.0 };
                        rows.push(Check::eq("upper_expectation", limit, reference, 1e-12));
                    } else {
                        rows.push(info("upper_expectation", limit));
                    }
                    rows.push(Check::le(format!("upper_expectation[N={}]", s.n), moment, limit));
                }
                Some(Example::Exm1) => rows.push(Check::eq("upper_expectation", moment, 1.0, 1e-12)),
                None => rows.push(info("upper_expectation", moment)),
            },
            "tail" => {
                match ex {
                    Some(Example::Exm2) if unit_p => {
                        for k in 2..s.n {
                            let v = tail_functional(&m, &x, 1.0, k as f64, Tail::Strict)?;
                            rows.push(Check::eq(format!("tail[n={k}]"), v, 1.0, 1e-12));
                        }
                    }
                    Some(Example::Exm3) if unit_p => {
                        for k in [2usize, 4, 8].into_iter().filter(|k| 2 * k <= s.n) {
                            let kf = k as f64;
                            let v = tail_functional(&m, &x, 1.0, kf, Tail::Inclusive)?;
                            rows.push(Check::eq(format!("tail_inclusive[n={k}]"), v, 0.5 + 0.5 / kf, 1e-12));
                            let d = scaled_capacity_decay(&m, &x, kf)?;
                            rows.push(Check::eq(format!("scaled_capacity[n={k}]"), d, 1.0 / kf, 1e-12));
                        }
                    }
                    _ => {
                        let top = x.values().iter().fold(0.0f64, |a, v| a.max(v.abs())).ceil() as usize;
                        let stride = (top / 32).max(1);
                        for k in (0..=top).step_by(stride) {
                            let v = tail_functional(&m, &x, p, k as f64, Tail::Strict)?;
                            rows.push(Check::le(format!("tail[n={k}]"), v, moment));
                        }
                    }
                }
            }
            "capacity" => {
                rows.push(Check::eq("capacity[whole]", capacity(&m, &m.whole())?, 1.0, 1e-12));
                rows.push(Check::eq("capacity[empty]", capacity(&m, &Event::empty())?, 0.0, 0.0));
                if ex == Some(Example::Exm2) {
                    for k in 1..=s.n {
                        let c = capacity(&m, &m.event(&[k as f64])?)?;
                        let reference = if k == 1 { 1.0 } else { 1.0 / k as f64 };
                        rows.push(Check::eq(format!("capacity[{{{k}}}]"), c, reference, 1e-12));
                    }
                } else {
                    for (i, c) in point_capacities(&m).into_iter().enumerate() {
                        rows.push(Check::le(format!("capacity[{{{}}}]", m.points()[i]), c, 1.0));
                    }
                }
            }
            "markov" => {
                for alpha in [1.0, 2.0, 3.0, 4.0] {
                    let r = markov_bound_check(&m, &x, p, alpha)?;
                    rows.push(Check::new(format!("markov[alpha={alpha}]"), r.lhs, r.rhs, r.holds));
                }
                if ex == Some(Example::Exm2) && unit_p {
                    let r = markov_bound_check(&m, &x, 1.0, 3.0)?;
                    rows.push(Check::eq("markov_capacity[alpha=3]", r.lhs, 0.25, 1e-12));
                }
            }
            "choquet" => {
                let k = n.min(8);
                let mut events: Vec<Event> = (0..k).map(|i| Event::new(vec![i])).collect();
                events.extend((1..=k).map(|j| Event::new((0..j).collect())));
                events.push(m.whole());
                rows.extend(choquet_suite(&m, &events)?);
            }
            "borel-cantelli" => {
                let mut families: Vec<(String, Vec<Event>)> = Vec::new();
                if ex == Some(Example::Exm2) {
                    let sq = (1..=s.n)
                        .map(|k| {
                            let v = (k * k) as f64;
                            m.index_of(v).map(|i| Event::new(vec![i])).unwrap_or_else(Event::empty)
                        })
                        .collect();
                    families.push(("A_n={n^2}".into(), sq));
                }
                families.push(("A_n={x_n}".into(), (0..n).map(|i| Event::new(vec![i])).collect()));
                for (label, events) in families {
                    if events.len() < 4 {
                        continue;
                    }
                    let r = borel_cantelli_check(&m, &events, events.len())?;
                    let tail_sum = r.rows.last().map(|t| t.2).unwrap_or(0.0);
                    let mut c = Check::new(format!("borel_cantelli[{label}]"), r.limsup_capacity, tail_sum, r.pass);
                    if let Some(v) = r.precondition_violation {
                        c.pass = true;
                        c.witness = Some(format!("not applicable: {v}"));
                    }
                    rows.push(c);
                }
            }
            "ui" => {
                let r = uniform_integrability_check(&m, &x, 0.1)?;
                rows.push(Check::new("uniform_integrability", r.worst, 0.1, r.holds));
            }
            "monotone" => {
                let top = x.values().iter().fold(0.0f64, |a, v| a.max(v.abs())).ceil() as usize;
                let seq: Vec<RandomVariable> = (0..=top.min(64))
                    .map(|k| x.map(|v| (v.abs() - k as f64).clamp(0.0, 1.0)))
                    .collect();
                let limit = seq.last().cloned().expect("nonempty");
                let r = monotone_convergence_check(&m, &seq, Some(&limit))?;
                rows.push(Check::new(
                    "monotone_convergence",
                    r.final_gap,
                    r.gap_bound,
                    r.converges && r.nonincreasing,
                ));
                if ex == Some(Example::Exm2) {
                    for (k, v) in r.values.iter().enumerate().skip(1).take(5) {
                        rows.push(Check::eq(format!("monotone[n={k}]"), *v, 1.0 / (k as f64 + 1.0), 1e-12));
                    }
                }
            }
            "membership" => match ex {
                Some(e) => {
                    let r = family_membership(&e, p, &DEFAULT_SCHEDULE)?;
                    let expected = match e {
                        Example::Exm2 | Example::Exm3 => (true, false, false),
                        Example::Exm1 => (true, true, false),
                    };
                    let row = |name: &str, got: bool, want: bool| {
                        if unit_p {
                            Check::eq(name, flag(got), flag(want), 0.0)
                        } else {
                            info(name, flag(got))
                        }
                    };
                    rows.push(row("in_lp", r.in_lp, expected.0));
                    rows.push(row("in_lp_b", r.in_lp_b, expected.1));
                    rows.push(row("in_lp_c", r.in_lp_c, expected.2));
                    rows.push(Check::eq("verdict_stable", flag(r.stable), 1.0, 0.0));
                    if let Some(last) = r.rows.last() {
                        rows.push(info(format!("tail_limit[N={}]", last.n), last.tail_limit));
                    }
                }
                None => {
                    let r = membership_report(&m, &x, p, Metric::Discrete)?;
                    rows.push(info("norm_p", r.norm_p));
                    rows.push(info("in_lp", flag(r.in_lp)));
                    rows.push(info("in_lp_b", flag(r.in_lp_b)));
                    rows.push(info("in_lp_c", flag(r.in_lp_c)));
                }
            },
            _ => unreachable!("validated above"),
        }
    }
    Ok((rows, upper))
}

fn discrete(s: &DiscreteSettings) -> Result<CommandOutput> {
    let (rows, upper) = discrete_checks(s)?;
    let passed = rows.iter().all(|r| r.pass);
    let csv = csv_bytes(
        &["name", "lhs", "rhs", "pass", "witness"],
        rows.iter().map(|r| {
            vec![
                r.name.clone(),
                r.lhs.to_string(),
                r.rhs.to_string(),
                r.pass.to_string(),
                r.witness.clone().unwrap_or_default(),
            ]
        }),
    )?;
    let mut summary = Vec::new();
    if s.check == "upper" {
        summary.push(upper.to_string());
    } else {
        for r in &rows {
            summary.push(format!(
                "{:<32} {:>24} {:>24}  {}",
                r.name,
                r.lhs,
                r.rhs,
                if r.pass { "pass" } else { "FAIL" }
            ));
        }
        let ok = rows.iter().filter(|r| r.pass).count();
        summary.push(format!("{ok}/{} checks passed", rows.len()));
    }
    Ok(CommandOutput {
        results: json!({ "upper_expectation": upper, "checks": to_json(&rows) }),
        passed,
        files: vec![("discrete.csv".into(), csv)],
        summary,
    })
}

// ------------------------------------------------------------------- gheat

fn gheat(s: &GheatSettings) -> Result<CommandOutput> {
    let phi = parse(required(&s.payoff, "--payoff")?, 1)?;
    let th = theta(s.theta_min, s.theta_max)?;
    if !(s.t > 0.0) {
        return Err(Error::Config(format!("t must be positive, got {}", s.t)));
    }
    let res = Resolution {
        nx: s.nx,
        cfl: s.cfl,
        domain_width: s.domain_width,
    };
    let grid = auto_grid(&phi, s.theta_max, s.t, s.x, res)?;
    let sol = solve_gheat(&phi, &th, grid, SolveOptions { cfl: s.cfl, snapshot_every: None })?;
    let value = sol.at(s.x);
    let mut files = Vec::new();
    if s.dump {
        let rows = (0..grid.nx).map(|i| vec![grid.x(i).to_string(), sol.values[i].to_string()]);
        files.push(("gheat.csv".to_string(), csv_bytes(&["x", "u"], rows)?));
    }
    let mut summary = vec![value.to_string()];
    summary.extend(sol.warnings.iter().map(|w| format!("warning: {w}")));
    Ok(CommandOutput {
        results: json!({
            "value": value,
            "grid": to_json(&grid),
            "structural_lipschitz": phi.structural_lipschitz(),
            "warnings": sol.warnings,
        }),
        passed: true,
        files,
        summary,
    })
}

// ---------------------------------------------------------------- cylinder

fn cylinder_payoff(times: &[f64], payoff: &Option<String>) -> Result<CylinderPayoff> {
    let phi = parse(required(payoff, "--payoff")?, times.len())?;
    CylinderPayoff::new(times.to_vec(), phi)
}

fn cylinder(s: &CylinderSettings) -> Result<CommandOutput> {
    let cp = cylinder_payoff(&s.times, &s.payoff)?;
    let th = theta(s.theta_min, s.theta_max)?;
    let res = CylinderResolution {
        nx: s.nx,
        nx_per_axis: s.nx_per_axis.clone(),
        cfl: s.cfl,
    };
    let v = evaluate_cylinder(&cp, &th, &res)?;
    let tolerance = 3.0 * v.step_scale() * cp.payoff().structural_lipschitz();
    let mut summary = vec![v.value.to_string()];
    let mut passed = true;
    let dpp = match s.split {
        Some(at) => {
            let d = dpp_consistency_check(&cp, &th, at, &res)?;
            summary.push(format!(
                "split at {at}: direct {} split {} tolerance {} {}",
                d.direct,
                d.split,
                d.tolerance,
                if d.passes { "pass" } else { "FAIL" }
            ));
            passed = d.passes;
            Some(d)
        }
        None => None,
    };
    Ok(CommandOutput {
        results: json!({
            "value": v.value,
            "grids": to_json(&v.grids),
            "step_scale": v.step_scale(),
            "tolerance": tolerance,
            "dpp": to_json(&dpp),
        }),
        passed,
        files: vec![],
        summary,
    })
}

// ---------------------------------------------------------------------- mc

enum PolicySpec {
    BangBang,
    Constant(f64),
}

fn policy_spec(s: &str) -> Result<PolicySpec> {
    if s == "bangbang" {
        return Ok(PolicySpec::BangBang);
    }
    if let Some(v) = s.strip_prefix("const:") {
        return v
            .parse()
            .map(PolicySpec::Constant)
            .map_err(|_| Error::Config(format!("bad volatility in policy `{s}`")));
    }
    Err(Error::Config(format!("unknown policy `{s}` (bangbang or const:<sigma>)")))
}

#[derive(Serialize)]
struct PolicyRow {
    policy: String,
    mean: f64,
    std_error: f64,
    n_paths: usize,
    bound: f64,
    below_bound: bool,
    gap: f64,
    matches_pde: Option<bool>,
}

fn reference_value(cp: &CylinderPayoff, th: &ThetaSet, nx: usize) -> Result<f64> {
    if cp.n() == 1 {
        let res = Resolution {
            nx,
            ..Resolution::default()
        };
        crate::gheat::g_normal_expectation(cp.payoff(), th, cp.times()[0], 0.0, res)
    } else {
        Ok(evaluate_cylinder(cp, th, &CylinderResolution::default())?.value)
    }
}

fn mc(s: &McSettings, seed: u64) -> Result<CommandOutput> {
    let cp = cylinder_payoff(&s.times, &s.payoff)?;
    let th = theta(s.theta_min, s.theta_max)?;
    if s.policies.is_empty() {
        return Err(Error::Config("need at least one policy".into()));
    }
    let shortest = cp.durations().into_iter().fold(f64::INFINITY, f64::min);
    let cfg = SimConfig {
        n_paths: s.paths,
        dt_sim: s.dt_sim.unwrap_or(shortest / 20.0),
        seed,
        antithetic: s.antithetic,
    };
    let res = Resolution {
        nx: s.nx,
        ..Resolution::default()
    };
    let pde = reference_value(&cp, &th, s.nx)?;
    let horizon = *cp.times().last().expect("at least one time");
    let mut policies = Vec::new();
    for spec in &s.policies {
        let p = match policy_spec(spec)? {
            PolicySpec::Constant(v) => ControlPolicy::Constant(v),
            PolicySpec::BangBang => {
                if cp.n() != 1 {
                    return Err(Error::Config("bangbang needs a single payoff time".into()));
                }
                bang_bang_policy(cp.payoff(), &th, horizon, res)?.0
            }
        };
        p.validate(&th, horizon).map_err(|e| Error::Config(e.to_string()))?;
        policies.push(p);
    }
    let mut rows = Vec::new();
    for (spec, p) in s.policies.iter().zip(&policies) {
        let e = policy_value(p, &cp, &cfg)?;
        let slack = 3.0 * e.std_error + s.scheme_tolerance;
        let gap = e.mean - pde;
        rows.push(PolicyRow {
            policy: spec.clone(),
            mean: e.mean,
            std_error: e.std_error,
            n_paths: e.n_paths,
            bound: pde + slack,
            below_bound: e.mean <= pde + slack,
            gap,
            matches_pde: (spec == "bangbang").then_some(gap.abs() <= slack),
        });
    }
    let passed = rows.iter().all(|r| r.below_bound && r.matches_pde.unwrap_or(true));
    let best = rows
        .iter()
        .enumerate()
        .fold(0, |b, (k, r)| if r.mean > rows[b].mean { k } else { b });
    let mut summary: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{:<16} {} ± {} (PDE {pde}, gap {})",
                r.policy, r.mean, r.std_error, r.gap
            )
        })
        .collect();
    summary.push(format!("lower bound {} from {}", rows[best].mean, rows[best].policy));
    let mut files = Vec::new();
    if s.dump_paths > 0 {
        const STEPS: usize = 200;
        let paths = simulate_grid_paths(&policies[0], horizon, STEPS, seed, s.dump_paths)?;
        let mut header = vec!["t".to_string()];
        header.extend((0..paths.len()).map(|k| format!("path_{k}")));
        let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
        let table = (0..=STEPS).map(|i| {
            let mut row = vec![(horizon * i as f64 / STEPS as f64).to_string()];
            row.extend(paths.iter().map(|p| p[i].to_string()));
            row
        });
        files.push(("mc_paths.csv".to_string(), csv_bytes(&header_ref, table)?));
    }
    Ok(CommandOutput {
        results: json!({
            "pde": pde,
            "estimates": to_json(&rows),
            "lower_bound": rows[best].mean,
            "best_policy": rows[best].policy,
            "dt_sim": cfg.dt_sim,
        }),
        passed,
        files,
        summary,
    })
}

// ------------------------------------------------------------------ holder

/// Path ensembles: constant `σ_min`, constant `σ_max`, a policy alternating
/// `σ_max`/`σ_min` on eighths of `[0, 1]`, and optionally bang-bang.
pub fn holder_groups(s: &HolderSettings, seed: u64) -> Result<(Vec<String>, Vec<Vec<SampledPath>>)> {
    let th = theta(s.theta_min, s.theta_max)?;
    let breakpoints: Vec<f64> = (1..8).map(|k| k as f64 / 8.0).collect();
    let sigmas = (0..8).map(|k| if k % 2 == 0 { s.theta_max } else { s.theta_min }).collect();
    let mut labels = vec![
        format!("const:{}", s.theta_min),
        format!("const:{}", s.theta_max),
        "alternating".to_string(),
    ];
    let mut policies = vec![
        ControlPolicy::Constant(s.theta_min),
        ControlPolicy::Constant(s.theta_max),
        ControlPolicy::PiecewiseConstant { breakpoints, sigmas },
    ];
    if let Some(src) = &s.payoff {
        let phi = parse(src, 1)?;
        policies.push(bang_bang_policy(&phi, &th, 1.0, Resolution::default())?.0);
        labels.push("bangbang".into());
    }
    if s.level < 4 || s.level > 20 {
        return Err(Error::Config(format!("level must lie in 4..=20, got {}", s.level)));
    }
    if s.paths < policies.len() {
        return Err(Error::Config(format!("need at least {} paths", policies.len())));
    }
    let steps = 1usize << s.level;
    let groups = policies
        .iter()
        .enumerate()
        .map(|(g, p)| {
            let count = s.paths / policies.len() + usize::from(g < s.paths % policies.len());
            let raw = simulate_grid_paths(p, 1.0, steps, seed.wrapping_add(g as u64), count)?;
            raw.into_iter().map(|v| SampledPath::new(s.level, v)).collect()
        })
        .collect::<Result<Vec<Vec<SampledPath>>>>()?;
    Ok((labels, groups))
}

fn holder(s: &HolderSettings, seed: u64) -> Result<CommandOutput> {
    let (labels, groups) = holder_groups(s, seed)?;
    let all: Vec<SampledPath> = groups.iter().flatten().cloned().collect();
    let report = kolmogorov_report(&all, s.p, s.epsilon, &s.alpha)?;
    let fit = moment_exponent_fit(&groups, s.p)?;
    let rows = report.rows.iter().map(|r| {
        let v = report
            .verdicts
            .iter()
            .find(|v| v.alpha == r.alpha)
            .expect("verdict per alpha");
        vec![
            r.alpha.to_string(),
            r.level.to_string(),
            r.mean_mp.to_string(),
            format!("{:?}", v.verdict).to_lowercase(),
        ]
    });
    let csv = csv_bytes(&["alpha", "level", "mean_mp", "verdict"], rows)?;
    let mut summary: Vec<String> = report
        .verdicts
        .iter()
        .map(|v| {
            format!(
                "alpha {:<6} {:<9} growth {:?}{}",
                v.alpha,
                format!("{:?}", v.verdict).to_lowercase(),
                v.growth,
                if v.inside_window { " (inside guaranteed window)" } else { "" }
            )
        })
        .collect();
    summary.push(format!(
        "moment fit p={}: exponent {} constant {} over {} lags",
        s.p, fit.exponent_hat, fit.c_hat, fit.lags
    ));
    summary.push(format!("note: {}", report.heuristic));
    Ok(CommandOutput {
        results: json!({ "groups": labels, "report": to_json(&report), "fit": to_json(&fit) }),
        passed: true,
        files: vec![("holder.csv".into(), csv)],
        summary,
    })
}

// ----------------------------------------------------------------- certify

/// Parses with the given arity, or with the highest variable index used.
pub fn parse_payoff(src: &str, arity: Option<usize>) -> Result<PayoffExpr> {
    match arity {
        Some(a) => parse(src, a),
        None => {
            const WIDE: usize = 1 << 16;
            let e = parse(src, WIDE)?;
            parse(src, e.root().max_var().map_or(1, |v| v + 1))
        }
    }
}

fn certify_cmd(s: &CertifySettings) -> Result<CommandOutput> {
    let e = parse_payoff(required(&s.expr, "payoff expression")?, s.arity)?;
    let [lo, hi] = s.domain[..] else {
        return Err(Error::Config("--box takes lo,hi".into()));
    };
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Config(format!("bad box [{lo}, {hi}]")));
    }
    let cert = certify(&e, &vec![(lo, hi); e.arity()], s.samples);
    let passed = cert.structural_lipschitz >= cert.lipschitz_estimate - 1e-9;
    let json = serde_json::to_vec_pretty(&cert).map_err(|e| Error::Config(e.to_string()))?;
    Ok(CommandOutput {
        results: to_json(&cert),
        passed,
        files: vec![("certificate.json".into(), json)],
        summary: vec![
            format!("expression           {e}"),
            format!("bound_estimate       {}", cert.bound_estimate),
            format!("lipschitz_estimate   {}", cert.lipschitz_estimate),
            format!("structural_lipschitz {}", cert.structural_lipschitz),
        ],
    })
}

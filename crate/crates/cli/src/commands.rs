//! Subcommand bodies. Each returns what it wrote or printed so the binary
//! and the tests share one code path.

use crate::config::{kv_lines, ScenarioConfig};
use crate::csv::{write_atomic, Table};
use crate::curves;
use crate::verify::{self, Report};
use crate::CliError;
use annuity_core::closed_form::ClosedFormSolution;
use annuity_core::montecarlo::{simulate_objective, simulate_paths, Perturbation, TabulatedPolicy, TerminalRule};
use annuity_core::mortality::{DiscountSpec, MortalityModel};
use annuity_core::policy::consistency_report;
use serde_json::{Map, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub mode: Option<String>,
}

/// Loads the config (baseline when no path is given), applies overrides and
/// validates the result.
pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match path {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(out) = &ov.out {
        cfg.output_dir = out.display().to_string();
    }
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let Some(w) = ov.workers {
        cfg.workers = w;
    }
    if let Some(m) = &ov.mode {
        cfg.mode = m.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ScenarioConfig) -> PathBuf {
    PathBuf::from(&cfg.output_dir)
}

/// Writes summary.txt and summary.kv; returns the text.
pub fn solve(cfg: &ScenarioConfig) -> Result<String, CliError> {
    let m = cfg.mortality_model()?;
    let sols = curves::eval_solutions(cfg)?;
    let mut kv = Map::new();
    let mut text = String::new();
    let first = &sols[0];
    kv.insert("solvency_floor".into(), Value::from(first.solvency_floor));
    kv.insert("gamma1".into(), Value::from(first.gamma1()));
    let _ = writeln!(text, "solvency floor -w b_bar / r = {}", first.solvency_floor);
    let _ = writeln!(text, "gamma1 = 1 - alpha (1 - gamma) = {}", first.gamma1());
    let _ = writeln!(text, "mortality: {m:?}, mode: {}", cfg.mode);
    for s in &sols {
        let age = s.eval_age.unwrap_or(f64::NAN);
        let f = &s.factors;
        let fields = [
            ("rho_eff", s.rho_eff),
            ("c_tilde", s.c_tilde),
            ("c_hat", s.c_hat),
            ("x_tilde", s.x_tilde),
            ("x_star", s.x_star),
            ("a2", s.a2),
            ("b1", s.b1),
            ("b2", s.b2),
            ("k", f.k),
            ("k1", f.k1),
            ("m_plus", f.m_plus),
            ("m_minus", f.m_minus),
            ("n_plus", f.n_plus),
            ("n_minus", f.n_minus),
            ("phi", s.phi),
        ];
        let _ = writeln!(text, "\nage {age}");
        for (name, v) in fields {
            let _ = writeln!(text, "  {name:<8} = {v}");
            kv.insert(format!("age{age}.{name}"), Value::from(v));
        }
        let _ = writeln!(text, "  consistency report:");
        for d in consistency_report(s, 2001)? {
            let _ = writeln!(text, "    {:<42} {:>14.6e}  {}", d.name, d.value, d.note);
            kv.insert(format!("age{age}.check.{}", d.name), Value::from(d.value));
        }
    }
    let dir = out_dir(cfg);
    write_atomic(&dir, "summary.txt", &text)?;
    write_atomic(&dir, "summary.kv", &kv_lines(&kv))?;
    Ok(text)
}

/// Writes every figure CSV that could be produced. Returns (file, error)
/// per curve; the error is `None` for curves written.
pub fn curves(cfg: &ScenarioConfig) -> Result<Vec<(&'static str, Option<String>)>, CliError> {
    let mode = cfg.policy_mode()?;
    let dir = out_dir(cfg);
    let mut out = Vec::new();
    for (name, table) in curves::all_figures(cfg, mode) {
        match table {
            Ok(t) => {
                write_atomic(&dir, name, &t.render())?;
                out.push((name, None));
            }
            Err(e) => out.push((name, Some(e.to_string()))),
        }
    }
    Ok(out)
}

/// Runs the battery and writes verify_report.txt and verify_report.json.
pub fn verify(cfg: &ScenarioConfig) -> Result<Report, CliError> {
    let report = verify::run(cfg)?;
    let dir = out_dir(cfg);
    write_atomic(&dir, "verify_report.txt", &report.render_text())?;
    write_atomic(&dir, "verify_report.json", &report.render_json())?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct FairAnnuityArgs {
    pub beta: f64,
    pub modal_age: f64,
    pub dispersion: f64,
    pub constant_delta: Option<f64>,
    pub ages: Vec<f64>,
}

/// (age, ä, rate) rows. Under a constant hazard every age gives the same row.
pub fn fair_annuity(args: &FairAnnuityArgs) -> Result<Vec<(f64, f64, f64)>, CliError> {
    if args.ages.is_empty() {
        return Err(CliError::Validation("no ages requested".into()));
    }
    args.ages
        .iter()
        .map(|&age| {
            let law = match args.constant_delta {
                Some(d) => MortalityModel::constant(d)?,
                None => MortalityModel::gompertz(args.modal_age, args.dispersion, age)?,
            };
            let q = DiscountSpec::new(args.beta, law)?.annuity_quote(Default::default())?;
            Ok((age, q.factor, q.rate))
        })
        .collect()
}

pub fn render_fair_annuity(rows: &[(f64, f64, f64)]) -> String {
    let mut s = format!("{:>6}  {:>14}  {:>12}\n", "age", "annuity_factor", "rate");
    for (age, f, r) in rows {
        let _ = writeln!(s, "{age:>6}  {f:>14.8}  {r:>12.8}");
    }
    s
}

/// Simulates the closed-form policy from x0 at the first eval age, records
/// a few paths and writes sim_summary.kv and sim_paths.csv.
///
/// The default is the stationary model (hazard frozen at the eval age, the
/// closed-form value credited at the horizon); `gompertz` switches to the
/// full age-dependent hazard.
pub fn simulate(cfg: &ScenarioConfig, gompertz: bool) -> Result<String, CliError> {
    let p = cfg.params();
    let m = cfg.mortality_model()?;
    let mode = cfg.policy_mode()?;
    let age = cfg.eval_ages[0];
    let sol = ClosedFormSolution::at_age(&p, &m, age)?;
    let (law, terminal) = if gompertz {
        (m.at_age(age), TerminalRule::AgeAtRetirement)
    } else {
        (MortalityModel::constant(sol.rho_eff - p.beta)?, TerminalRule::Frozen)
    };
    let pol = TabulatedPolicy::new(&sol, &law, age, mode, Perturbation::None, terminal, 20_000)?;
    let x0 = cfg.x0.unwrap_or(0.5 * (sol.x_tilde + sol.x_star));
    let sim = cfg.sim_config();
    let res = simulate_objective(&p, &law, &pol, x0, &sim)?;
    let paths = simulate_paths(&p, &law, &pol, x0, &sim, cfg.record_paths, cfg.record_stride)?;

    let mut t = Table::new(["path", "t", "x", "c", "b", "pi", "retired"].map(String::from).to_vec());
    for (i, path) in paths.iter().enumerate() {
        for pt in path {
            t.push(vec![i as f64, pt.t, pt.x, pt.c, pt.b, pt.pi, if pt.retired { 1.0 } else { 0.0 }]);
        }
    }
    let mut kv = Map::new();
    kv.insert("model".into(), Value::from(if gompertz { "gompertz" } else { "stationary" }));
    kv.insert("eval_age".into(), Value::from(age));
    kv.insert("x0".into(), Value::from(x0));
    kv.insert("x_star".into(), Value::from(sol.x_star));
    kv.insert("n_paths".into(), Value::from(sim.n_paths));
    kv.insert("dt".into(), Value::from(sim.dt));
    kv.insert("horizon".into(), Value::from(sim.horizon));
    kv.insert("seed".into(), Value::from(sim.seed));
    kv.insert("j_estimate".into(), Value::from(res.j_estimate));
    kv.insert("std_error".into(), Value::from(res.std_error));
    kv.insert("fraction_retired".into(), Value::from(res.fraction_retired));
    kv.insert("fraction_insolvent".into(), Value::from(res.fraction_insolvent));
    let summary = kv_lines(&kv);
    let dir = out_dir(cfg);
    write_atomic(&dir, "sim_paths.csv", &t.render())?;
    write_atomic(&dir, "sim_summary.kv", &summary)?;
    Ok(summary)
}

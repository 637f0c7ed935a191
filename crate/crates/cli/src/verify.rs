//! The acceptance battery.
//!
//! Every criterion produces one [`Check`]. The rendered report contains no
//! timings or paths, so two runs with the same config are byte-identical.

use crate::config::ScenarioConfig;
use crate::curves;
use crate::CliError;
use annuity_core::closed_form::{ClosedFormSolution, Regime};
use annuity_core::market::{derive_gamma1, inverse_map_roots, quadratic_f, quadratic_roots, ModelParameters};
use annuity_core::montecarlo::{simulate_objective, Perturbation, SimConfig, SimResult, TabulatedPolicy, TerminalRule};
use annuity_core::mortality::{DiscountSpec, MortalityModel};
use annuity_core::numerics::{integrate, Tolerance};
use annuity_core::oracle_fd::{detect_free_boundary, solve_vi, FdOptions, Grid};
use annuity_core::policy::{Policy, PolicyMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt::Write as _;

/// Policy tabulation size for the dominance runs.
const TABLE_NODES: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl Status {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIPPED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub title: String,
    pub status: Status,
    pub detail: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<Check>,
}

impl Check {
    fn new(id: &str, title: &str, status: Status, detail: String) -> Self {
        Self { id: id.into(), title: title.into(), status, detail, parts: Vec::new() }
    }

    fn failed(id: &str, title: &str, err: CliError) -> Self {
        Self::new(id, title, Status::Fail, format!("error: {err}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub seed: u64,
    pub mode: String,
    pub criteria: Vec<Check>,
    /// Informational findings that do not gate any criterion.
    pub info: Vec<String>,
}

impl Report {
    /// True when no criterion failed (skipped ones do not count).
    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.status != Status::Fail)
    }

    pub fn get(&self, id: &str) -> Option<&Check> {
        self.criteria.iter().flat_map(|c| std::iter::once(c).chain(&c.parts)).find(|c| c.id == id)
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "verification report (seed {}, mode {})", self.seed, self.mode);
        for c in &self.criteria {
            let _ = writeln!(s, "criterion {:<2} {:<7} {}: {}", c.id, c.status.label(), c.title, c.detail);
            for p in &c.parts {
                let _ = writeln!(s, "  {:<4} {:<7} {}: {}", p.id, p.status.label(), p.title, p.detail);
            }
        }
        for line in &self.info {
            let _ = writeln!(s, "info: {line}");
        }
        let passed = self.criteria.iter().filter(|c| c.status == Status::Pass).count();
        let skipped = self.criteria.iter().filter(|c| c.status == Status::Skipped).count();
        let _ = writeln!(s, "summary: {passed} passed, {skipped} skipped, {} failed", self.criteria.len() - passed - skipped);
        s
    }

    pub fn render_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["all_pass"] = serde_json::Value::Bool(self.all_pass());
        serde_json::to_string_pretty(&v).expect("report serializes") + "\n"
    }
}

/// Runs criteria 1-10. Criterion 10 reruns 1-9 twice at reduced Monte Carlo
/// scale and compares the rendered reports byte for byte.
pub fn run(cfg: &ScenarioConfig) -> Result<Report, CliError> {
    let mut report = run_core(cfg)?;
    let reduced = ScenarioConfig {
        n_paths: cfg.determinism_paths,
        gompertz_check: false,
        ..cfg.clone()
    };
    let a = run_core(&reduced)?.render_text();
    let b = run_core(&reduced)?.render_text();
    let same = a == b;
    report.criteria.push(Check::new(
        "10",
        "determinism",
        Status::from_bool(same),
        format!("two reruns at {} paths per policy are {}", cfg.determinism_paths, if same { "byte-identical" } else { "different" }),
    ));
    Ok(report)
}

/// Criteria 1-9.
pub fn run_core(cfg: &ScenarioConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    let mode = cfg.policy_mode()?;
    let p = cfg.params();
    let mortality = cfg.mortality_model()?;
    let age = cfg.eval_ages[0];
    let sol = ClosedFormSolution::at_age(&p, &mortality, age)?;
    let mut info = Vec::new();
    let criteria = vec![
        baseline_constants(),
        constant_mortality(),
        hazard_quadrature(cfg.seed),
        root_integrity(cfg.seed),
        boundary_residuals(&sol),
        if cfg.oracle {
            oracle_agreement(cfg, &p, &mortality).unwrap_or_else(|e| Check::failed("6", ORACLE, e))
        } else {
            Check::new("6", ORACLE, Status::Skipped, "oracle disabled in config".into())
        },
        if cfg.simulate {
            dominance(cfg, &sol, mode, &mortality, &mut info).unwrap_or_else(|e| Check::failed("7", DOMINANCE, e))
        } else {
            Check::new("7", DOMINANCE, Status::Skipped, "simulation disabled in config".into())
        },
        retired_identities(&sol, cfg.seed).unwrap_or_else(|e| Check::failed("8", RETIRED, e)),
        figure_shapes(cfg, &sol, mode, &mut info),
    ];
    Ok(Report { seed: cfg.seed, mode: cfg.mode.clone(), criteria, info })
}

const ORACLE: &str = "finite-difference oracle agreement";
const DOMINANCE: &str = "policy dominance";
const RETIRED: &str = "post-retirement identities";

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn baseline_constants() -> Check {
    let p = ModelParameters::baseline();
    let floor = p.solvency_floor();
    let g1 = derive_gamma1(&p).unwrap_or(f64::NAN);
    Check::new(
        "1",
        "baseline constants",
        Status::from_bool(floor == -500.0 && g1 == 1.2),
        format!("solvency floor = {floor}, gamma1 = {g1}"),
    )
}

fn constant_mortality() -> Check {
    let mut worst: f64 = 0.0;
    let mut err = None;
    for beta in [0.01, 0.03, 0.06] {
        for delta in [0.0, 0.005, 0.02, 0.05, 0.1] {
            let rate = MortalityModel::constant(delta)
                .and_then(|m| DiscountSpec::new(beta, m))
                .and_then(|d| d.fair_annuity_rate());
            match rate {
                Ok(r) => worst = worst.max((r - (beta + delta)).abs()),
                Err(e) => err = Some(e.to_string()),
            }
        }
    }
    let detail = match &err {
        Some(e) => format!("error: {e}"),
        None => format!("max |rate - (beta + delta)| = {worst:.3e} over 15 pairs"),
    };
    Check::new("2", "constant-mortality annuity rate", Status::from_bool(err.is_none() && worst < 1e-8), detail)
}

fn hazard_quadrature(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3);
    let tol = Tolerance { abs_tol: 1e-15, rel_tol: 1e-13, max_iter: 200 };
    let mut worst: f64 = 0.0;
    let mut err = None;
    for _ in 0..50 {
        let m = rng.random_range(70.0..100.0);
        let l = rng.random_range(5.0..15.0);
        let a = rng.random_range(40.0..90.0);
        let law = match MortalityModel::gompertz(m, l, a) {
            Ok(law) => law,
            Err(e) => {
                err = Some(e.to_string());
                continue;
            }
        };
        for t in [1.0, 5.0, 10.0, 20.0, 40.0] {
            match integrate(|s| law.force_of_mortality(s), 0.0, t, &tol) {
                Ok(q) => worst = worst.max(rel(law.cumulative_hazard(t), q)),
                Err(e) => err = Some(e.to_string()),
            }
        }
    }
    let detail = match &err {
        Some(e) => format!("error: {e}"),
        None => format!("max relative gap {worst:.3e} over 50 laws x 5 horizons"),
    };
    Check::new("3", "analytic hazard against quadrature", Status::from_bool(err.is_none() && worst < 1e-10), detail)
}

fn root_integrity(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4);
    let (mut resid, mut vieta, mut vieta_n): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut err = None;
    for _ in 0..100 {
        let p = ModelParameters {
            theta: rng.random_range(0.05..0.5),
            r: rng.random_range(0.005..0.08),
            ..ModelParameters::baseline()
        };
        let rho = rng.random_range(0.01..0.3);
        let a = 0.5 * p.theta * p.theta;
        match (quadratic_roots(&p, rho), inverse_map_roots(&p, rho)) {
            (Ok((mp, mm)), Ok((np, nm))) => {
                resid = resid.max(quadratic_f(&p, rho, mp).abs()).max(quadratic_f(&p, rho, mm).abs());
                vieta = vieta.max((mp + mm + (rho - p.r + a) / a).abs()).max((mp * mm + rho / a).abs());
                vieta_n = vieta_n.max((np + nm + (rho - p.r + a) / a).abs()).max((np * nm + p.r / a).abs());
            }
            (Err(e), _) | (_, Err(e)) => err = Some(e.to_string()),
        }
    }
    let ok = err.is_none() && resid < 1e-12 && vieta < 1e-10 && vieta_n < 1e-10;
    let detail = match &err {
        Some(e) => format!("error: {e}"),
        None => format!("max |f(m)| = {resid:.3e}, max Vieta gap = {vieta:.3e} (inverse-map roots {vieta_n:.3e}) over 100 draws"),
    };
    Check::new("4", "characteristic root integrity", Status::from_bool(ok), detail)
}

fn boundary_residuals(sol: &ClosedFormSolution) -> Check {
    let gap = sol.x_tilde_gap();
    let v_int = sol.value_at_consumption(sol.c_tilde, Regime::Interior);
    let v_cap = sol.value_at_consumption(sol.c_tilde, Regime::Corner);
    let v_gap = rel(v_int, v_cap);
    let sp = sol.smooth_pasting_residual();
    let vm = sol.value_matching_residual();
    Check::new(
        "5",
        "boundary-condition residuals",
        Status::from_bool(gap < 1e-8 && v_gap < 1e-8 && sp < 1e-6 && vm < 1e-6),
        format!(
            "x_tilde expressions differ by {gap:.3e}, value across x_tilde {v_gap:.3e} (rel), smooth pasting {sp:.3e} (rel), value matching at x* {vm:.3e} (rel)"
        ),
    )
}

fn oracle_agreement(cfg: &ScenarioConfig, p: &ModelParameters, mortality: &MortalityModel) -> Result<Check, CliError> {
    use rayon::prelude::*;
    let rows: Vec<(f64, f64, f64)> = cfg
        .eval_ages
        .par_iter()
        .map(|&age| {
            let sol = ClosedFormSolution::at_age(p, mortality, age)?;
            let grid = Grid::above_floor(p, 2.2 * sol.x_star, cfg.oracle_points)?;
            let gs = solve_vi(p, mortality, age, grid, &FdOptions::default())?;
            let mut worst: f64 = 0.0;
            for (i, &x) in gs.x.iter().enumerate() {
                if x < sol.x_star {
                    worst = worst.max(rel(gs.values[i], sol.value_function(x)?));
                }
            }
            let cells = (detect_free_boundary(&gs)? - sol.x_star) / grid.spacing();
            Ok((age, worst, cells))
        })
        .collect::<Result<_, CliError>>()?;
    let ok = rows.iter().all(|&(_, w, c)| w < 1e-2 && c.abs() <= 2.0);
    let detail = rows
        .iter()
        .map(|(a, w, c)| format!("age {a}: max rel {w:.2e}, boundary off {c:+.2} cells"))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Check::new("6", ORACLE, Status::from_bool(ok), format!("{} points; {detail}", cfg.oracle_points)))
}

/// One dominance comparison: (name, Ĵ difference optimal - perturbed, combined SE, paired SE).
type Comparison = (String, f64, f64, f64);

fn compare_family(
    p: &ModelParameters,
    sol: &ClosedFormSolution,
    law: &MortalityModel,
    age: f64,
    mode: PolicyMode,
    terminal: TerminalRule,
    x0: f64,
    sim: &SimConfig,
) -> Result<(SimResult, Vec<Comparison>), CliError> {
    let run = |pert: Perturbation| -> Result<SimResult, CliError> {
        let pol = TabulatedPolicy::new(sol, law, age, mode, pert, terminal, TABLE_NODES)?;
        Ok(simulate_objective(p, law, &pol, x0, sim)?)
    };
    let base = run(Perturbation::None)?;
    let mut out = Vec::new();
    for (name, pert) in Perturbation::standard_family() {
        let alt = run(pert)?;
        let combined = base.std_error.hypot(alt.std_error);
        out.push((name, base.j_estimate - alt.j_estimate, combined, base.paired_std_error(&alt)));
    }
    Ok((base, out))
}

fn dominance(
    cfg: &ScenarioConfig,
    sol: &ClosedFormSolution,
    mode: PolicyMode,
    mortality: &MortalityModel,
    info: &mut Vec<String>,
) -> Result<Check, CliError> {
    let p = cfg.params();
    let age = cfg.eval_ages[0];
    let x0 = cfg.x0.unwrap_or(0.5 * (sol.x_tilde + sol.x_star));
    // Stationary model: the hazard the policy was solved for, held fixed.
    let frozen = MortalityModel::constant(sol.rho_eff - p.beta)?;
    let sim = cfg.sim_config();
    let (base, rows) = compare_family(&p, sol, &frozen, age, mode, TerminalRule::Frozen, x0, &sim)?;
    let ok = rows.iter().all(|(_, d, se, _)| *d >= -2.0 * se);
    let worst = rows
        .iter()
        .min_by(|a, b| (a.1 / a.2).total_cmp(&(b.1 / b.2)))
        .map(|(n, d, se, _)| format!("closest: {n} at {:+.2} SE", d / se))
        .unwrap_or_default();
    for (name, d, se, pse) in &rows {
        info.push(format!("dominance {name}: J(opt) - J(alt) = {d:+.6}, combined SE {se:.6}, paired SE {pse:.6}"));
    }
    if cfg.gompertz_check {
        let g = SimConfig { n_paths: cfg.gompertz_paths, horizon: cfg.gompertz_horizon, ..sim };
        let law = mortality.at_age(age);
        let (_, grows) = compare_family(&p, sol, &law, age, mode, TerminalRule::AgeAtRetirement, x0, &g)?;
        for (name, d, se, _) in &grows {
            info.push(format!(
                "full Gompertz (age-{age} policy, {} paths, T = {}) {name}: J(opt) - J(alt) = {d:+.6} ({:+.2} combined SE)",
                g.n_paths,
                g.horizon,
                d / se
            ));
        }
    }
    Ok(Check::new(
        "7",
        DOMINANCE,
        Status::from_bool(ok),
        format!(
            "stationary hazard at age {age}, {} paths, dt {}, T = {}, x0 = {x0:.4}; J(opt) = {:.6} (SE {:.6}); {worst}",
            sim.n_paths, sim.dt, sim.horizon, base.j_estimate, base.std_error
        ),
    ))
}

fn retired_identities(sol: &ClosedFormSolution, seed: u64) -> Result<Check, CliError> {
    let pol = Policy::new(sol, PolicyMode::Foc);
    let g1 = sol.gamma1();
    let k = sol.factors.k;
    // φ recovered from retired consumption c* = ρ^(1/γ1) φ^((γ1-1)/γ1) x.
    let phi_gap = rel(pol.phi_identity(sol.x_star), k);
    let merton = sol.params.theta / (sol.params.sigma * g1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x8);
    let (mut pi_gap, mut homog, mut foc, mut phi_x): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..100 {
        let x = sol.x_star * rng.random_range(1.0..4.0);
        let l = rng.random_range(1.0..5.0);
        let c = pol.consumption(x)?;
        pi_gap = pi_gap.max(rel(pol.investment(x)?, merton * x));
        homog = homog.max(rel(pol.consumption(l * x)?, l * c));
        phi_x = phi_x.max(rel(pol.phi_identity(x), k));
        let g_prime = k.powf(1.0 - g1) / sol.rho_eff * x.powf(-g1);
        foc = foc.max(rel(g_prime, c.powf(-g1)));
    }
    let ok = phi_gap < 1e-12 && phi_x < 1e-12 && pi_gap < 1e-12 && homog < 1e-12 && foc < 1e-10;
    Ok(Check::new(
        "8",
        RETIRED,
        Status::from_bool(ok),
        format!(
            "|phi - k|/k = {phi_gap:.2e} at x*; over 100 x: phi {phi_x:.2e}, pi gap {pi_gap:.2e}, c homogeneity {homog:.2e}, G' vs u_c {foc:.2e}"
        ),
    ))
}

fn strictly(values: &[f64], increasing: bool) -> bool {
    values.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

fn list(values: &[f64]) -> String {
    values.iter().map(|v| if v.is_nan() { "none".to_string() } else { format!("{v:.2}") }).collect::<Vec<_>>().join(", ")
}

fn axis(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

fn figure_shapes(cfg: &ScenarioConfig, sol: &ClosedFormSolution, mode: PolicyMode, info: &mut Vec<String>) -> Check {
    let parts = vec![
        consumption_jump(cfg, info, mode).unwrap_or_else(|e| Check::failed("9a", "consumption jumps up at x*", e)),
        labor_shape(sol, mode).unwrap_or_else(|e| Check::failed("9b", "labor shape", e)),
        investment_jump(sol, mode).unwrap_or_else(|e| Check::failed("9c", "investment jumps down at x*", e)),
        discount_and_survival(cfg).unwrap_or_else(|e| Check::failed("9d", "discount rate and survival", e)),
        sweep_shape("9e", "x*(alpha) decreasing", curves::fig3(cfg), "alpha"),
        sweep_shape("9f", "x*(r) decreasing", curves::fig8(cfg), "r"),
        annuity_rate(cfg, sol, mode, info).unwrap_or_else(|e| Check::failed("9g", "annuity payment rate", e)),
    ];
    let failed: Vec<&str> = parts.iter().filter(|c| c.status == Status::Fail).map(|c| &c.id[1..]).collect();
    let detail = if failed.is_empty() { "all shapes hold".to_string() } else { format!("failing: {}", failed.join(", ")) };
    let mut c = Check::new("9", "figure shapes", Status::from_bool(failed.is_empty()), detail);
    c.parts = parts;
    c
}

/// Within each eval age: consumption at x* against the largest working
/// consumption below it. A jump has to clear rounding (1e-9 relative) to
/// count. The cross-age comparison behind the figure (age-a curve below x*
/// against the next eval age at that x*) goes to `info`.
fn consumption_jump(cfg: &ScenarioConfig, info: &mut Vec<String>, mode: PolicyMode) -> Result<Check, CliError> {
    let sols = curves::eval_solutions(cfg)?;
    let mut jumps = Vec::new();
    let mut below_first = 0.0;
    for s in &sols {
        let pol = Policy::new(s, mode);
        let mut below: f64 = 0.0;
        for i in 1..=1000 {
            let x = s.solvency_floor + (s.x_star - s.solvency_floor) * (i as f64 / 1000.0).min(1.0 - 1e-12);
            below = below.max(pol.consumption(x)?);
        }
        if jumps.is_empty() {
            below_first = below;
        }
        jumps.push((pol.consumption(s.x_star)? - below) / below);
    }
    if let Some(next) = sols.get(1) {
        let at = Policy::new(next, mode).consumption(sols[0].x_star)?;
        info.push(format!(
            "consumption across ages: max c below x* at age {} = {below_first:.6}, c at that x* at age {} = {at:.6} ({})",
            cfg.eval_ages[0],
            cfg.eval_ages[1],
            if next.x_star > sols[0].x_star { "still working" } else { "retired" }
        ));
    }
    let ok = jumps.iter().all(|&j| j > 1e-9);
    let detail = cfg
        .eval_ages
        .iter()
        .zip(&jumps)
        .map(|(a, j)| format!("age {a}: (c(x*) - max c below)/c = {j:+.1e}"))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Check::new("9a", "consumption jumps up at x*", Status::from_bool(ok), detail))
}

fn labor_shape(sol: &ClosedFormSolution, mode: PolicyMode) -> Result<Check, CliError> {
    let pol = Policy::new(sol, mode);
    let (mut monotone, mut corner, mut retired) = (true, true, true);
    let mut prev = f64::NEG_INFINITY;
    let n = 3000;
    for i in 1..n {
        let x = sol.solvency_floor + (2.0 * sol.x_star - sol.solvency_floor) * i as f64 / n as f64;
        let (b, _) = pol.labor(x)?;
        match sol.regime(x) {
            Regime::Interior => {
                monotone &= b >= prev;
                prev = b;
            }
            Regime::Corner => corner &= b == sol.params.b_bar,
            Regime::Retired => retired &= b == 0.0,
        }
    }
    Ok(Check::new(
        "9b",
        "labor shape",
        Status::from_bool(monotone && corner && retired),
        format!("nondecreasing below x_tilde: {monotone}; b_bar on [x_tilde, x*): {corner}; zero above x*: {retired}"),
    ))
}

fn investment_jump(sol: &ClosedFormSolution, mode: PolicyMode) -> Result<Check, CliError> {
    let pol = Policy::new(sol, mode);
    let before = pol.investment(sol.x_star * (1.0 - 1e-12))?;
    let after = pol.investment(sol.x_star)?;
    Ok(Check::new(
        "9c",
        "investment jumps down at x*",
        Status::from_bool(before > after),
        format!("pi(x*-) = {before:.6}, pi(x*) = {after:.6}"),
    ))
}

fn discount_and_survival(cfg: &ScenarioConfig) -> Result<Check, CliError> {
    let law = MortalityModel::gompertz(cfg.modal_age, cfg.dispersion, cfg.current_age)?;
    let n = (cfg.age_max - cfg.current_age).floor() as usize;
    let ts: Vec<f64> = (0..=n).map(|i| i as f64).collect();
    let rate: Vec<f64> = ts.iter().map(|&t| cfg.beta + law.force_of_mortality(t)).collect();
    let surv: Vec<f64> = ts.iter().map(|&t| law.survival_probability(t)).collect();
    let (up, down) = (strictly(&rate, true), strictly(&surv, false));
    Ok(Check::new(
        "9d",
        "discount rate and survival",
        Status::from_bool(up && down),
        format!(
            "ages {}..{}: rate {:.4} -> {:.4} strictly increasing: {up}; survival 1 -> {:.3e} strictly decreasing: {down}",
            cfg.current_age,
            cfg.current_age + n as f64,
            rate[0],
            rate[n],
            surv[n]
        ),
    ))
}

fn sweep_shape(id: &str, title: &str, table: Result<crate::csv::Table, CliError>, name: &str) -> Check {
    let t = match table {
        Ok(t) => t,
        Err(e) => return Check::failed(id, title, e),
    };
    let xs = t.column(name).unwrap_or_default();
    let ys = t.column("x_star").unwrap_or_default();
    let missing = ys.iter().any(|v| v.is_nan());
    let ok = !missing && strictly(&ys, false);
    let mut detail = format!("{name} = [{}] gives x* = [{}]", axis(&xs), list(&ys));
    if missing {
        detail.push_str("; no finite retirement boundary at some points");
    }
    Check::new(id, title, Status::from_bool(ok), detail)
}

fn annuity_rate(cfg: &ScenarioConfig, sol: &ClosedFormSolution, mode: PolicyMode, info: &mut Vec<String>) -> Result<Check, CliError> {
    let pol = Policy::new(sol, mode);
    let mut zero_below = true;
    for i in 1..1000 {
        let x = sol.solvency_floor + (sol.x_star - sol.solvency_floor) * i as f64 / 1000.0;
        zero_below &= pol.annuity_payment_rate(x) == 0.0;
    }
    let t = curves::fig9(cfg)?;
    let k = t.column("k").unwrap_or_default();
    let pay = t.column("payment_at_x_star").unwrap_or_default();
    let ages = t.column("age").unwrap_or_default();
    let up = strictly(&k, true);
    info.push(format!("annuity payment at x* by age [{}]: [{}]", axis(&ages), list(&pay)));
    Ok(Check::new(
        "9g",
        "annuity payment rate",
        Status::from_bool(zero_below && up),
        format!("zero below x*: {zero_below}; payout per unit annuitized k over ages [{}] = [{}], increasing: {up}", axis(&ages), k.iter().map(|v| format!("{v:.5}")).collect::<Vec<_>>().join(", ")),
    ))
}

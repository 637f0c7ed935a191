//! Figure data.
//!
//! Column layouts (all numeric; NaN marks a sweep point with no finite
//! retirement boundary):
//!
//! | file | columns |
//! |---|---|
//! | fig1_rho_vs_age.csv | age, rate_l{λ}..., cumulative_l{λ}... |
//! | fig2_survival.csv | age, survival_m{m}_l{λ}... |
//! | fig3_xstar_vs_alpha.csv | alpha, x_tilde, x_star, c_hat |
//! | fig4_consumption.csv | x, c_age{a}... |
//! | fig5_labor.csv | x, b_age{a}... |
//! | fig6_investment.csv | x, pi_age{a}... |
//! | fig7_xstar_vs_elasticity.csv | gamma, elasticity, x_tilde, x_star |
//! | fig8_xstar_vs_r.csv | r, x_tilde, x_star, c_hat |
//! | fig9_annuity_rate_vs_age.csv | age, rho, k, x_star, payment_at_x_star, fair_rate |
//!
//! `rate` is β + δ at that age and `cumulative` is βt + H(t) from the
//! current age. Sweeps solve at the first eval age. In fig4-6 the first eval
//! age column is the pre-retirement policy below its own x*.

use crate::config::ScenarioConfig;
use crate::csv::Table;
use crate::CliError;
use annuity_core::closed_form::{ClosedFormError, ClosedFormSolution};
use annuity_core::market::ModelParameters;
use annuity_core::mortality::{DiscountSpec, MortalityModel};
use annuity_core::policy::{Policy, PolicyMode};
use rayon::prelude::*;

pub const FIGURES: [&str; 9] = [
    "fig1_rho_vs_age.csv",
    "fig2_survival.csv",
    "fig3_xstar_vs_alpha.csv",
    "fig4_consumption.csv",
    "fig5_labor.csv",
    "fig6_investment.csv",
    "fig7_xstar_vs_elasticity.csv",
    "fig8_xstar_vs_r.csv",
    "fig9_annuity_rate_vs_age.csv",
];

fn ages(cfg: &ScenarioConfig) -> Vec<f64> {
    let n = (cfg.age_max - cfg.current_age).floor() as usize;
    (0..=n).map(|i| cfg.current_age + i as f64).collect()
}

pub fn fig1(cfg: &ScenarioConfig) -> Result<Table, CliError> {
    let laws = cfg
        .lambda_sweep
        .iter()
        .map(|&l| MortalityModel::gompertz(cfg.modal_age, l, cfg.current_age))
        .collect::<Result<Vec<_>, _>>()?;
    let mut headers = vec!["age".to_string()];
    headers.extend(cfg.lambda_sweep.iter().map(|l| format!("rate_l{l}")));
    headers.extend(cfg.lambda_sweep.iter().map(|l| format!("cumulative_l{l}")));
    let mut t = Table::new(headers);
    for age in ages(cfg) {
        let s = age - cfg.current_age;
        let mut row = vec![age];
        row.extend(laws.iter().map(|m| cfg.beta + m.force_of_mortality(s)));
        row.extend(laws.iter().map(|m| cfg.beta * s + m.cumulative_hazard(s)));
        t.push(row);
    }
    Ok(t)
}

pub fn fig2(cfg: &ScenarioConfig) -> Result<Table, CliError> {
    let pairs: Vec<(f64, f64)> = cfg.survival_modal_ages.iter().copied().zip(cfg.survival_dispersions.iter().copied()).collect();
    let laws = pairs
        .iter()
        .map(|&(m, l)| MortalityModel::gompertz(m, l, cfg.current_age))
        .collect::<Result<Vec<_>, _>>()?;
    let mut headers = vec!["age".to_string()];
    headers.extend(pairs.iter().map(|(m, l)| format!("survival_m{m}_l{l}")));
    let mut t = Table::new(headers);
    for age in ages(cfg) {
        let mut row = vec![age];
        row.extend(laws.iter().map(|m| m.survival_probability(age - cfg.current_age)));
        t.push(row);
    }
    Ok(t)
}

/// (x̃, x*, ĉ), or NaNs when the boundary does not exist.
fn boundary_point(p: &ModelParameters, mortality: &MortalityModel, age: f64) -> Result<[f64; 3], CliError> {
    match ClosedFormSolution::at_age(p, mortality, age) {
        Ok(s) => Ok([s.x_tilde, s.x_star, s.c_hat]),
        Err(ClosedFormError::NoRetirementBoundary) => Ok([f64::NAN; 3]),
        Err(e) => Err(e.into()),
    }
}

fn sweep<F>(values: &[f64], f: F) -> Result<Vec<Vec<f64>>, CliError>
where
    F: Fn(f64) -> Result<Vec<f64>, CliError> + Sync,
{
    values.par_iter().map(|&v| f(v)).collect()
}

pub fn fig3(cfg: &ScenarioConfig) -> Result<Table, CliError> {
    let m = cfg.mortality_model()?;
    let age = cfg.eval_ages[0];
    let rows = sweep(&cfg.alpha_sweep, |alpha| {
        let [xt, xs, ch] = boundary_point(&ModelParameters { alpha, ..cfg.params() }, &m, age)?;
        Ok(vec![alpha, xt, xs, ch])
    })?;
    Ok(Table { headers: ["alpha", "x_tilde", "x_star", "c_hat"].map(String::from).to_vec(), rows })
}

pub fn fig7(cfg: &ScenarioConfig) -> Result<Table, CliError> {
    let m = cfg.mortality_model()?;
    let age = cfg.eval_ages[0];
    let rows = sweep(&cfg.gamma_sweep, |gamma| {
        let p = ModelParameters { gamma, ..cfg.params() };
        let [xt, xs, _] = boundary_point(&p, &m, age)?;
        Ok(vec![gamma, cfg.elasticity.apply(&p), xt, xs])
    })?;
    Ok(Table { headers: ["gamma", "elasticity", "x_tilde", "x_star"].map(String::from).to_vec(), rows })
}

pub fn fig8(cfg: &ScenarioConfig) -> Result<Table, CliError> {
    let m = cfg.mortality_model()?;
    let age = cfg.eval_ages[0];
    let rows = sweep(&cfg.r_sweep, |r| {
        let [xt, xs, ch] = boundary_point(&ModelParameters { r, ..cfg.params() }, &m, age)?;
        Ok(vec![r, xt, xs, ch])
    })?;
    Ok(Table { headers: ["r", "x_tilde", "x_star", "c_hat"].map(String::from).to_vec(), rows })
}

/// Closed-form solutions at every eval age.
pub fn eval_solutions(cfg: &ScenarioConfig) -> Result<Vec<ClosedFormSolution>, CliError> {
    let m = cfg.mortality_model()?;
    let p = cfg.params();
    cfg.eval_ages
        .par_iter()
        .map(|&a| ClosedFormSolution::at_age(&p, &m, a).map_err(CliError::from))
        .collect()
}

/// Uniform wealth grid strictly above the floor.
pub fn wealth_grid(cfg: &ScenarioConfig, sols: &[ClosedFormSolution]) -> Vec<f64> {
    let floor = cfg.params().solvency_floor();
    let top = cfg.wealth_max.unwrap_or_else(|| 1.5 * sols.iter().map(|s| s.x_star).fold(0.0, f64::max));
    let n = cfg.wealth_points;
    (1..=n).map(|i| floor + (top - floor) * i as f64 / n as f64).collect()
}

/// fig4, fig5 and fig6 from one pass over the grid.
pub fn policy_figures(cfg: &ScenarioConfig, sols: &[ClosedFormSolution], mode: PolicyMode) -> Result<[Table; 3], CliError> {
    let xs = wealth_grid(cfg, sols);
    let rows: Vec<[Vec<f64>; 3]> = xs
        .par_iter()
        .map(|&x| {
            let mut out = [vec![x], vec![x], vec![x]];
            for s in sols {
                let pt = Policy::new(s, mode).point(x)?;
                out[0].push(pt.consumption);
                out[1].push(pt.labor);
                out[2].push(pt.investment);
            }
            Ok(out)
        })
        .collect::<Result<_, CliError>>()?;
    let mut tables = ["c", "b", "pi"].map(|v| {
        let mut h = vec!["x".to_string()];
        h.extend(cfg.eval_ages.iter().map(|a| format!("{v}_age{a}")));
        Table::new(h)
    });
    for r in rows {
        for (t, row) in tables.iter_mut().zip(r) {
            t.push(row);
        }
    }
    Ok(tables)
}

pub fn fig9(cfg: &ScenarioConfig) -> Result<Table, CliError> {
    let m = cfg.mortality_model()?;
    let p = cfg.params();
    let rows = sweep(&cfg.annuity_ages, |age| {
        let s = ClosedFormSolution::at_age(&p, &m, age)?;
        let law = match m.current_age() {
            Some(_) => m.at_age(age),
            None => m,
        };
        let fair = DiscountSpec::new(cfg.beta, law)?.fair_annuity_rate()?;
        Ok(vec![age, s.rho_eff, s.factors.k, s.x_star, s.factors.k * s.x_star, fair])
    })?;
    let headers = ["age", "rho", "k", "x_star", "payment_at_x_star", "fair_rate"].map(String::from).to_vec();
    Ok(Table { headers, rows })
}

/// Every figure, in `FIGURES` order. A failed curve does not stop the others.
pub fn all_figures(cfg: &ScenarioConfig, mode: PolicyMode) -> Vec<(&'static str, Result<Table, CliError>)> {
    let policy = eval_solutions(cfg).and_then(|sols| policy_figures(cfg, &sols, mode));
    let (fig4, fig5, fig6) = match policy {
        Ok([a, b, c]) => (Ok(a), Ok(b), Ok(c)),
        Err(e) => {
            let msg = e.to_string();
            let again = || Err(CliError::Numerical(msg.clone()));
            (Err(e), again(), again())
        }
    };
    let results = [fig1(cfg), fig2(cfg), fig3(cfg), fig4, fig5, fig6, fig7(cfg), fig8(cfg), fig9(cfg)];
    FIGURES.into_iter().zip(results).collect()
}

//! Scenario configuration.
//!
//! Two interchangeable formats are accepted. The canonical one is flat text,
//! one `key = value` per line with `#` comments; lists are comma separated.
//! A file whose first non-blank character is `{` is read as a JSON object
//! with the same keys. Missing keys take the baseline defaults and unknown
//! keys are rejected.

use crate::CliError;
use annuity_core::market::{derive_gamma1, ModelParameters};
use annuity_core::montecarlo::SimConfig;
use annuity_core::mortality::{DiscountSpec, MortalityModel};
use annuity_core::oracle_fd::Grid;
use annuity_core::policy::PolicyMode;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::Path;

/// How the fig7 axis maps γ to an elasticity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElasticityMapping {
    /// 1/γ, the default.
    InverseGamma,
    /// 1/γ1 of the composite.
    InverseGamma1,
    /// γ itself, no reparameterization.
    Gamma,
}

impl ElasticityMapping {
    pub fn apply(self, params: &ModelParameters) -> f64 {
        match self {
            ElasticityMapping::InverseGamma => 1.0 / params.gamma,
            ElasticityMapping::InverseGamma1 => 1.0 / (1.0 - params.alpha * (1.0 - params.gamma)),
            ElasticityMapping::Gamma => params.gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MortalityKind {
    Gompertz,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub r: f64,
    pub sigma: f64,
    pub theta: f64,
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub wage: f64,
    pub b_bar: f64,
    pub b_post: f64,
    pub leisure_cap: f64,
    pub leisure_total: f64,

    pub mortality: MortalityKind,
    pub modal_age: f64,
    pub dispersion: f64,
    pub current_age: f64,
    pub constant_delta: f64,

    /// Ages at which the closed form is evaluated (δ frozen at each).
    pub eval_ages: Vec<f64>,
    pub mode: String,

    pub alpha_sweep: Vec<f64>,
    pub r_sweep: Vec<f64>,
    pub gamma_sweep: Vec<f64>,
    pub elasticity: ElasticityMapping,
    /// Dispersions plotted in fig1.
    pub lambda_sweep: Vec<f64>,
    /// fig2 scenarios, zipped pairwise with `survival_dispersions`.
    pub survival_modal_ages: Vec<f64>,
    pub survival_dispersions: Vec<f64>,
    pub age_max: f64,
    pub annuity_ages: Vec<f64>,
    pub wealth_points: usize,
    /// Top of the fig4-6 wealth grid; 1.5 times the largest x* when unset.
    pub wealth_max: Option<f64>,

    pub output_dir: String,

    pub oracle: bool,
    pub oracle_points: usize,

    pub simulate: bool,
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub antithetic: bool,
    /// Starting wealth; the midpoint of x̃ and x* when unset.
    pub x0: Option<f64>,
    /// Informational full-Gompertz dominance run inside verify.
    pub gompertz_check: bool,
    pub gompertz_paths: usize,
    pub gompertz_horizon: f64,
    /// Paths per policy in the reduced reruns behind the determinism check.
    pub determinism_paths: usize,
    /// Paths recorded by `simulate`.
    pub record_paths: usize,
    pub record_stride: usize,
    pub workers: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let p = ModelParameters::baseline();
        let sim = SimConfig::default();
        Self {
            r: p.r,
            sigma: p.sigma,
            theta: p.theta,
            beta: p.beta,
            gamma: p.gamma,
            alpha: p.alpha,
            wage: p.wage,
            b_bar: p.b_bar,
            b_post: p.b_post,
            leisure_cap: p.leisure_cap,
            leisure_total: p.leisure_total,
            mortality: MortalityKind::Gompertz,
            modal_age: 85.0,
            dispersion: 10.0,
            current_age: 60.0,
            constant_delta: 0.02,
            eval_ages: vec![60.0, 65.0, 70.0, 75.0],
            mode: "foc".into(),
            alpha_sweep: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            r_sweep: vec![0.01, 0.015, 0.02, 0.025, 0.03, 0.035, 0.04, 0.045, 0.05],
            gamma_sweep: vec![1.5, 2.0, 2.5, 3.0, 4.0, 5.0],
            elasticity: ElasticityMapping::InverseGamma,
            lambda_sweep: vec![8.0, 10.0, 12.0],
            survival_modal_ages: vec![80.0, 85.0, 90.0],
            survival_dispersions: vec![10.0, 10.0, 10.0],
            age_max: 100.0,
            annuity_ages: vec![60.0, 65.0, 70.0, 75.0, 80.0, 85.0, 90.0],
            wealth_points: 1001,
            wealth_max: None,
            output_dir: "out".into(),
            oracle: true,
            oracle_points: 2000,
            simulate: true,
            n_paths: sim.n_paths,
            dt: sim.dt,
            horizon: 20.0,
            seed: sim.seed,
            antithetic: sim.antithetic,
            x0: None,
            gompertz_check: true,
            gompertz_paths: 10_000,
            gompertz_horizon: 55.0,
            determinism_paths: 2_000,
            record_paths: 10,
            record_stride: 20,
            workers: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses either format without validating invariants.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim_start().starts_with('{') {
            return serde_json::from_str(text).map_err(|e| CliError::Validation(e.to_string()));
        }
        let defaults = match serde_json::to_value(Self::default()) {
            Ok(Value::Object(m)) => m,
            _ => unreachable!("config serializes to an object"),
        };
        let mut merged = defaults.clone();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| CliError::Validation(format!("line {line_no}: {m}"));
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let template = defaults.get(key).ok_or_else(|| err(format!("unknown key `{key}`")))?;
            let v = parse_value(key, value.trim(), template).map_err(err)?;
            merged.insert(key.to_string(), v);
        }
        serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Validation(e.to_string()))
    }

    /// Renders the flat format; `parse(to_flat())` gives back the same config.
    pub fn to_flat(&self) -> String {
        let Ok(Value::Object(map)) = serde_json::to_value(self) else { unreachable!() };
        let mut out = String::new();
        for (k, v) in map {
            let s = match v {
                Value::Null => continue,
                Value::Array(items) => items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "),
                Value::String(s) => s,
                other => other.to_string(),
            };
            out.push_str(&format!("{k} = {s}\n"));
        }
        out
    }

    pub fn params(&self) -> ModelParameters {
        ModelParameters {
            r: self.r,
            sigma: self.sigma,
            theta: self.theta,
            beta: self.beta,
            gamma: self.gamma,
            alpha: self.alpha,
            wage: self.wage,
            b_bar: self.b_bar,
            b_post: self.b_post,
            leisure_cap: self.leisure_cap,
            leisure_total: self.leisure_total,
        }
    }

    pub fn mortality_model(&self) -> Result<MortalityModel, CliError> {
        Ok(match self.mortality {
            MortalityKind::Gompertz => MortalityModel::gompertz(self.modal_age, self.dispersion, self.current_age)?,
            MortalityKind::Constant => MortalityModel::constant(self.constant_delta)?,
        })
    }

    pub fn policy_mode(&self) -> Result<PolicyMode, CliError> {
        self.mode.parse().map_err(|_| CliError::Validation(format!("mode must be foc or printed, got `{}`", self.mode)))
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig { n_paths: self.n_paths, dt: self.dt, horizon: self.horizon, seed: self.seed, antithetic: self.antithetic }
    }

    /// Re-checks every module invariant the config feeds.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        let p = self.params();
        p.validate()?;
        derive_gamma1(&p)?;
        DiscountSpec::new(self.beta, self.mortality_model()?)?;
        self.policy_mode()?;
        if self.eval_ages.is_empty() {
            return bad("eval_ages must not be empty".into());
        }
        if self.mortality == MortalityKind::Gompertz {
            if let Some(a) = self.eval_ages.iter().find(|&&a| !(a >= self.current_age)) {
                return bad(format!("eval age {a} is below current_age {}", self.current_age));
            }
            if let Some(a) = self.annuity_ages.iter().find(|&&a| !(a >= self.current_age)) {
                return bad(format!("annuity age {a} is below current_age {}", self.current_age));
            }
        }
        if !(self.age_max > self.current_age) {
            return bad(format!("age_max {} must exceed current_age {}", self.age_max, self.current_age));
        }
        for (name, sweep) in [
            ("alpha_sweep", &self.alpha_sweep),
            ("r_sweep", &self.r_sweep),
            ("gamma_sweep", &self.gamma_sweep),
            ("lambda_sweep", &self.lambda_sweep),
            ("annuity_ages", &self.annuity_ages),
        ] {
            if sweep.is_empty() {
                return bad(format!("{name} must not be empty"));
            }
            if sweep.iter().any(|v| !v.is_finite()) {
                return bad(format!("{name} contains a non-finite value"));
            }
        }
        if self.survival_modal_ages.len() != self.survival_dispersions.len() {
            return bad("survival_modal_ages and survival_dispersions differ in length".into());
        }
        for (&m, &l) in self.survival_modal_ages.iter().zip(&self.survival_dispersions) {
            MortalityModel::gompertz(m, l, self.current_age)?;
        }
        for &l in &self.lambda_sweep {
            MortalityModel::gompertz(self.modal_age, l, self.current_age)?;
        }
        if self.wealth_points < 2 {
            return bad("wealth_points must be at least 2".into());
        }
        if let Some(w) = self.wealth_max {
            if !(w > p.solvency_floor()) {
                return bad(format!("wealth_max {w} is not above the solvency floor"));
            }
        }
        if let Some(x0) = self.x0 {
            if !(x0 > p.solvency_floor()) {
                return bad(format!("x0 {x0} is not above the solvency floor {}", p.solvency_floor()));
            }
        }
        Grid::above_floor(&p, 1.0, self.oracle_points)?;
        self.sim_config().validate()?;
        for n in [self.gompertz_paths, self.determinism_paths] {
            SimConfig { n_paths: n, ..self.sim_config() }.validate()?;
        }
        if !(self.gompertz_horizon > 0.0) {
            return bad("gompertz_horizon must be positive".into());
        }
        Ok(())
    }
}

/// Converts one flat value to the JSON type of the key's default.
fn parse_value(key: &str, raw: &str, template: &Value) -> Result<Value, String> {
    let raw = raw.trim_matches('"');
    let number = |s: &str| -> Result<Value, String> {
        let s = s.trim();
        if let Ok(u) = s.parse::<u64>() {
            return Ok(Value::from(u));
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Value::from)
            .ok_or_else(|| format!("`{key}` expects a number, got `{s}`"))
    };
    match template {
        Value::Bool(_) => match raw {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(format!("`{key}` expects true or false, got `{raw}`")),
        },
        Value::Array(_) => {
            if raw.is_empty() {
                return Ok(Value::Array(Vec::new()));
            }
            raw.split(',').map(number).collect::<Result<Vec<_>, _>>().map(Value::Array)
        }
        Value::String(_) => Ok(Value::String(raw.to_string())),
        Value::Number(_) | Value::Null => number(raw),
        Value::Object(_) => Err(format!("`{key}` cannot be set from flat text")),
    }
}

/// Key-value lines for the machine-readable outputs.
pub fn kv_lines(map: &Map<String, Value>) -> String {
    map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

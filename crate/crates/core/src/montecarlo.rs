//! Euler-Maruyama simulation of controlled wealth and Monte Carlo estimates
//! of the lifetime objective.
//!
//! Mortality enters only through the discount weight e^-(βt + H(t)); deaths
//! are not simulated. Every path (or antithetic pair) draws from its own
//! ChaCha stream keyed by its index, so results do not depend on how rayon
//! schedules the work, and runs with the same seed reuse the same shocks
//! across policies.

use crate::closed_form::{retired_value, utility_u1, ClosedFormError, ClosedFormSolution};
use crate::market::{conversion_factors, ModelParameters};
use crate::mortality::{DiscountSpec, MortalityError, MortalityModel};
use crate::policy::{Policy, PolicyError, PolicyMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("initial wealth {x0} is not above the solvency floor {floor}")]
    BelowSolvency { x0: f64, floor: f64 },
    #[error(transparent)]
    Mortality(#[from] MortalityError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Solution(#[from] ClosedFormError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { n_paths: 100_000, dt: 0.005, horizon: 60.0, seed: 20_240_601, antithetic: true }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.n_paths == 0 || (self.antithetic && self.n_paths % 2 == 1) {
            return bad(format!("n_paths = {} must be positive (and even with antithetic pairs)", self.n_paths));
        }
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return bad(format!("dt = {} must lie in (0, 0.01]", self.dt));
        }
        if !(self.horizon > self.dt) {
            return bad(format!("horizon = {} must exceed dt", self.horizon));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub j_estimate: f64,
    pub std_error: f64,
    pub fraction_retired: f64,
    pub fraction_insolvent: f64,
    /// Per-sample objective values (pair averages under antithetic sampling),
    /// kept for paired comparisons.
    pub samples: Vec<f64>,
}

impl SimResult {
    pub fn insolvency_dominant(&self) -> bool {
        self.fraction_insolvent > 0.1
    }

    /// Standard error of the per-sample difference against `other`, which must
    /// come from the same seed and path count.
    pub fn paired_std_error(&self, other: &SimResult) -> f64 {
        let d: Vec<f64> = self.samples.iter().zip(&other.samples).map(|(a, b)| a - b).collect();
        mean_and_se(&d).1
    }
}

/// Controls at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    pub consumption: f64,
    pub labor: f64,
    pub investment: f64,
    /// Flow utility u1(c, b).
    pub utility: f64,
}

/// A feedback policy on (time since start, wealth).
pub trait PolicyEvaluator: Sync {
    fn controls(&self, t: f64, x: f64) -> Controls;
    fn retire(&self, t: f64, x: f64) -> bool;
    /// Value of annuitizing wealth x at time t, before mortality discounting.
    fn terminal_value(&self, t: f64, x: f64) -> f64;
    /// Value credited to a path still working at the horizon, before
    /// mortality discounting.
    fn horizon_value(&self, _t: f64, _x: f64) -> f64 {
        0.0
    }
}

/// Fixed c, b and π forever; never retires.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPolicy {
    pub controls: Controls,
}

impl ConstantPolicy {
    pub fn new(params: &ModelParameters, c: f64, b: f64, pi: f64) -> Self {
        let g1 = 1.0 - params.alpha * (1.0 - params.gamma);
        let utility = if c > 0.0 && b > 0.0 { utility_u1(g1, params.gamma, c, b) } else { 0.0 };
        Self { controls: Controls { consumption: c, labor: b, investment: pi, utility } }
    }
}

impl PolicyEvaluator for ConstantPolicy {
    fn controls(&self, _t: f64, _x: f64) -> Controls {
        self.controls
    }

    fn retire(&self, _t: f64, _x: f64) -> bool {
        false
    }

    fn terminal_value(&self, _t: f64, _x: f64) -> f64 {
        0.0
    }
}

/// Departures from the closed-form policy used in dominance checks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Perturbation {
    #[default]
    None,
    /// Consumption times the factor; labor unchanged.
    ConsumptionScale(f64),
    InvestmentScale(f64),
    /// Retire at this multiple of x*.
    RetireAt(f64),
}

impl Perturbation {
    /// The standard family: c ±10%, ±20%, π ±25%, retire at 0.9x* and 1.1x*.
    pub fn standard_family() -> Vec<(String, Perturbation)> {
        let mut v = Vec::new();
        for s in [0.9, 1.1, 0.8, 1.2] {
            v.push((format!("c x{s}"), Perturbation::ConsumptionScale(s)));
        }
        for s in [0.75, 1.25] {
            v.push((format!("pi x{s}"), Perturbation::InvestmentScale(s)));
        }
        for s in [0.9, 1.1] {
            v.push((format!("retire at {s} x*"), Perturbation::RetireAt(s)));
        }
        v
    }
}

/// How the annuitization value is priced when a path retires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TerminalRule {
    /// G at the rate of the age actually reached.
    #[default]
    AgeAtRetirement,
    /// G at the rate the policy was solved for. Meant for the stationary
    /// model with the hazard frozen at the evaluation age, where the
    /// closed-form V also closes paths still working at the horizon.
    Frozen,
}

/// The closed-form policy tabulated on a uniform wealth grid and
/// interpolated linearly, optionally perturbed.
#[derive(Debug, Clone)]
pub struct TabulatedPolicy {
    params: ModelParameters,
    floor: f64,
    inv_h: f64,
    /// Per node: consumption, labor, investment, flow utility.
    table: Vec<[f64; 4]>,
    /// Closed-form V, filled only under the frozen rule.
    value: Vec<f64>,
    retire_at: f64,
    terminal: TerminalRule,
    mortality: MortalityModel,
    start_age: f64,
    frozen_rho: f64,
    frozen_k: f64,
    gamma1: f64,
}

impl TabulatedPolicy {
    pub fn new(
        sol: &ClosedFormSolution,
        mortality: &MortalityModel,
        start_age: f64,
        mode: PolicyMode,
        perturbation: Perturbation,
        terminal: TerminalRule,
        n_table: usize,
    ) -> Result<Self, SimError> {
        let pol = Policy::new(sol, mode);
        let retire_at = match perturbation {
            Perturbation::RetireAt(s) => s * sol.x_star,
            _ => sol.x_star,
        };
        let (c_scale, pi_scale) = match perturbation {
            Perturbation::ConsumptionScale(s) => (s, 1.0),
            Perturbation::InvestmentScale(s) => (1.0, s),
            _ => (1.0, 1.0),
        };
        let floor = sol.solvency_floor;
        let top = retire_at.max(sol.x_star);
        let h = (top - floor) / n_table as f64;
        let g1 = sol.gamma1();
        let mut table = Vec::with_capacity(n_table + 1);
        let mut value = Vec::new();
        let mut c_hi = sol.c_hat * 1.05;
        for j in 0..=n_table {
            // Node 0 sits half a cell above the floor so every entry is finite.
            let x = floor + h * (j as f64).max(0.5);
            let (c, b, pi) = if x < sol.x_star {
                let (b, _) = pol.labor(x)?;
                (pol.consumption(x)?, b, pol.investment(x)?)
            } else {
                // Working past x*: continue the capped branch.
                while sol.corner.wealth(c_hi) < x {
                    c_hi *= 1.05;
                }
                let c = if x <= sol.x_star {
                    sol.c_hat
                } else {
                    sol.corner.consumption(x, sol.c_hat, c_hi).map_err(ClosedFormError::from)?
                };
                let pi = sol.params.theta / sol.params.sigma * c * sol.corner.wealth_slope(c) / g1;
                (c, sol.params.b_post, pi)
            };
            table.push([c * c_scale, b, pi * pi_scale, utility_u1(g1, sol.params.gamma, c * c_scale, b)]);
            if terminal == TerminalRule::Frozen {
                value.push(sol.value_function(x)?);
            }
        }
        Ok(Self {
            params: sol.params,
            floor,
            inv_h: 1.0 / h,
            table,
            value,
            retire_at,
            terminal,
            mortality: *mortality,
            start_age,
            frozen_rho: sol.rho_eff,
            frozen_k: sol.factors.k,
            gamma1: g1,
        })
    }

    pub fn retirement_threshold(&self) -> f64 {
        self.retire_at
    }

}

impl TabulatedPolicy {
    fn locate(&self, x: f64) -> (usize, f64) {
        let s = ((x - self.floor) * self.inv_h).max(0.0);
        let j = (s as usize).min(self.table.len() - 2);
        (j, (s - j as f64).min(1.0))
    }
}

impl PolicyEvaluator for TabulatedPolicy {
    fn controls(&self, _t: f64, x: f64) -> Controls {
        let (j, f) = self.locate(x);
        let (a, b) = (&self.table[j], &self.table[j + 1]);
        let lerp = |i: usize| a[i] + f * (b[i] - a[i]);
        Controls { consumption: lerp(0), labor: lerp(1), investment: lerp(2), utility: lerp(3) }
    }

    fn retire(&self, _t: f64, x: f64) -> bool {
        x >= self.retire_at
    }

    fn terminal_value(&self, t: f64, x: f64) -> f64 {
        match self.terminal {
            TerminalRule::Frozen => retired_value(self.frozen_k, self.gamma1, self.frozen_rho, x),
            TerminalRule::AgeAtRetirement => {
                let rho = self.params.beta + self.mortality.at_age(self.start_age + t).force_of_mortality(0.0);
                match conversion_factors(&self.params, rho) {
                    Ok((k, _)) => retired_value(k, self.gamma1, rho, x),
                    Err(_) => retired_value(self.frozen_k, self.gamma1, self.frozen_rho, x),
                }
            }
        }
    }

    fn horizon_value(&self, _t: f64, x: f64) -> f64 {
        if self.value.is_empty() {
            return 0.0;
        }
        let (j, f) = self.locate(x);
        self.value[j] + f * (self.value[j + 1] - self.value[j])
    }
}

/// One recorded state along a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub t: f64,
    pub x: f64,
    pub c: f64,
    pub b: f64,
    pub pi: f64,
    pub retired: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Retired,
    Insolvent,
    Survived,
}

struct Engine<'a, P: PolicyEvaluator> {
    params: &'a ModelParameters,
    policy: &'a P,
    cfg: SimConfig,
    /// Mortality-adjusted weight of flow utility over step k.
    flow_weight: Vec<f64>,
    /// e^-(βt_k + H(t_k)).
    discount: Vec<f64>,
}

impl<'a, P: PolicyEvaluator> Engine<'a, P> {
    fn new(params: &'a ModelParameters, mortality: &MortalityModel, policy: &'a P, cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let spec = DiscountSpec::new(params.beta, *mortality)?;
        let n = cfg.steps();
        // Midpoint weights integrate the discount to second order.
        let flow_weight = (0..n).map(|k| spec.discount_factor((k as f64 + 0.5) * cfg.dt) * cfg.dt).collect();
        let discount = (0..=n).map(|k| spec.discount_factor(k as f64 * cfg.dt)).collect();
        Ok(Self { params, policy, cfg, flow_weight, discount })
    }

    /// Objective along N paths that share one stream of shocks, lane i
    /// scaling them by `signs[i]`. Advancing the lanes together lets the
    /// antithetic partners overlap in the pipeline.
    fn run<const N: usize>(
        &self,
        rng: &mut ChaCha8Rng,
        signs: [f64; N],
        x0: f64,
        mut record: Option<(&mut Vec<PathPoint>, usize)>,
    ) -> [(f64, Outcome); N] {
        let p = self.params;
        let (dt, sq) = (self.cfg.dt, self.cfg.dt.sqrt());
        let floor = p.solvency_floor();
        let mut x = [x0; N];
        let mut acc = [Kahan::default(); N];
        let mut done: [Option<Outcome>; N] = [None; N];
        let mut live = N;
        let steps = self.flow_weight.len();
        for k in 0..steps {
            let t = k as f64 * dt;
            let z: f64 = StandardNormal.sample(rng);
            for i in 0..N {
                if done[i].is_some() {
                    continue;
                }
                if self.policy.retire(t, x[i]) {
                    if let Some((rec, _)) = record.as_mut() {
                        rec.push(PathPoint { t, x: x[i], c: 0.0, b: 0.0, pi: 0.0, retired: true });
                    }
                    acc[i].add(self.discount[k] * self.policy.terminal_value(t, x[i]));
                    done[i] = Some(Outcome::Retired);
                    live -= 1;
                    continue;
                }
                let u = self.policy.controls(t, x[i]);
                if let Some((rec, stride)) = record.as_mut() {
                    if k % *stride == 0 {
                        rec.push(PathPoint { t, x: x[i], c: u.consumption, b: u.labor, pi: u.investment, retired: false });
                    }
                }
                acc[i].add(self.flow_weight[k] * u.utility);
                let drift =
                    p.r * x[i] + u.investment * p.sigma * p.theta - u.consumption + p.wage * (p.b_bar - u.labor);
                x[i] += drift * dt + p.sigma * u.investment * sq * signs[i] * z;
                if x[i] <= floor {
                    done[i] = Some(Outcome::Insolvent);
                    live -= 1;
                }
            }
            if live == 0 {
                break;
            }
        }
        std::array::from_fn(|i| match done[i] {
            Some(o) => (acc[i].sum, o),
            None => {
                let mut a = acc[i];
                a.add(self.discount[steps] * self.policy.horizon_value(steps as f64 * dt, x[i]));
                (a.sum, Outcome::Survived)
            }
        })
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mut s = Kahan::default();
    v.iter().for_each(|&a| s.add(a));
    let mean = s.sum / n;
    let mut q = Kahan::default();
    v.iter().for_each(|&a| q.add((a - mean) * (a - mean)));
    let se = if v.len() > 1 { (q.sum / (n - 1.0) / n).sqrt() } else { 0.0 };
    (mean, se)
}

/// Monte Carlo estimate of the objective from x0 under `policy`.
pub fn simulate_objective<P: PolicyEvaluator>(
    params: &ModelParameters,
    mortality: &MortalityModel,
    policy: &P,
    x0: f64,
    cfg: &SimConfig,
) -> Result<SimResult, SimError> {
    let floor = params.solvency_floor();
    if !(x0 > floor) {
        return Err(SimError::BelowSolvency { x0, floor });
    }
    let eng = Engine::new(params, mortality, policy, *cfg)?;
    let n_samples = if cfg.antithetic { cfg.n_paths / 2 } else { cfg.n_paths };
    let runs: Vec<(f64, [Outcome; 2])> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = eng.rng(i);
            if cfg.antithetic {
                let [(j1, o1), (j2, o2)] = eng.run(&mut rng, [1.0, -1.0], x0, None);
                (0.5 * (j1 + j2), [o1, o2])
            } else {
                let [(j1, o1)] = eng.run(&mut rng, [1.0], x0, None);
                (j1, [o1, Outcome::Survived])
            }
        })
        .collect();
    let samples: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let (j_estimate, std_error) = mean_and_se(&samples);
    let per = if cfg.antithetic { 2 } else { 1 };
    let count = |o: Outcome| runs.iter().flat_map(|r| &r.1[..per]).filter(|&&x| x == o).count() as f64;
    let total = (n_samples * per) as f64;
    Ok(SimResult {
        j_estimate,
        std_error,
        fraction_retired: count(Outcome::Retired) / total,
        fraction_insolvent: count(Outcome::Insolvent) / total,
        samples,
    })
}

/// Records the first `n_record` paths every `stride` steps.
pub fn simulate_paths<P: PolicyEvaluator>(
    params: &ModelParameters,
    mortality: &MortalityModel,
    policy: &P,
    x0: f64,
    cfg: &SimConfig,
    n_record: usize,
    stride: usize,
) -> Result<Vec<Vec<PathPoint>>, SimError> {
    let floor = params.solvency_floor();
    if !(x0 > floor) {
        return Err(SimError::BelowSolvency { x0, floor });
    }
    let eng = Engine::new(params, mortality, policy, *cfg)?;
    let stride = stride.max(1);
    Ok((0..n_record)
        .into_par_iter()
        .map(|i| {
            // Antithetic partners share a stream and negate its shocks.
            let (stream, sign) = if cfg.antithetic { ((i / 2) as u64, if i % 2 == 0 { 1.0 } else { -1.0 }) } else { (i as u64, 1.0) };
            let mut rng = eng.rng(stream);
            let mut rec = Vec::new();
            eng.run(&mut rng, [sign], x0, Some((&mut rec, stride)));
            rec
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, Tolerance};

    fn gompertz() -> MortalityModel {
        MortalityModel::gompertz(85.0, 10.0, 60.0).unwrap()
    }

    fn cfg(n_paths: usize) -> SimConfig {
        SimConfig { n_paths, ..SimConfig::default() }
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig { dt: 0.02, ..cfg(10) }.validate().is_err());
        assert!(cfg(11).validate().is_err());
        assert!(SimConfig { antithetic: false, ..cfg(11) }.validate().is_ok());
    }

    #[test]
    fn pure_compounding() {
        let p = ModelParameters::baseline();
        let pol = ConstantPolicy { controls: Controls { consumption: 0.0, labor: p.b_bar, investment: 0.0, utility: 0.0 } };
        let paths = simulate_paths(&p, &gompertz(), &pol, 100.0, &SimConfig { horizon: 10.0, ..cfg(2) }, 1, 200).unwrap();
        let last = paths[0].last().unwrap();
        let exact = 100.0 * (0.02 * last.t).exp();
        assert!((last.x - exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn deterministic_objective_matches_quadrature() {
        let p = ModelParameters::baseline();
        let pol = ConstantPolicy::new(&p, 1.0, 0.5, 0.0);
        let c = SimConfig { horizon: 40.0, ..cfg(2) };
        let res = simulate_objective(&p, &gompertz(), &pol, 100.0, &c).unwrap();
        assert_eq!(res.std_error, 0.0);
        let spec = DiscountSpec::new(p.beta, gompertz()).unwrap();
        let exact = pol.controls.utility * integrate(|t| spec.discount_factor(t), 0.0, 40.0, &Tolerance::default()).unwrap();
        assert!((res.j_estimate - exact).abs() < 1e-4 * exact.abs(), "{} vs {exact}", res.j_estimate);
    }

    #[test]
    fn immediate_retirement_is_exact() {
        let p = ModelParameters::baseline();
        let sol = ClosedFormSolution::at_age(&p, &gompertz(), 60.0).unwrap();
        let pol = TabulatedPolicy::new(&sol, &gompertz(), 60.0, PolicyMode::Foc, Perturbation::None, TerminalRule::default(), 2000).unwrap();
        let x0 = 1.5 * sol.x_star;
        let res = simulate_objective(&p, &gompertz(), &pol, x0, &cfg(100)).unwrap();
        assert_eq!(res.std_error, 0.0);
        assert_eq!(res.fraction_retired, 1.0);
        assert!((res.j_estimate - sol.retired_value(x0)).abs() < 1e-12 * res.j_estimate.abs());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let p = ModelParameters::baseline();
        let sol = ClosedFormSolution::at_age(&p, &gompertz(), 60.0).unwrap();
        let pol = TabulatedPolicy::new(&sol, &gompertz(), 60.0, PolicyMode::Foc, Perturbation::None, TerminalRule::default(), 2000).unwrap();
        let c = SimConfig { horizon: 5.0, ..cfg(200) };
        let a = simulate_objective(&p, &gompertz(), &pol, 50.0, &c).unwrap();
        let b = simulate_objective(&p, &gompertz(), &pol, 50.0, &c).unwrap();
        assert_eq!(a, b);
        let pa = simulate_paths(&p, &gompertz(), &pol, 50.0, &c, 4, 50).unwrap();
        assert_eq!(pa, simulate_paths(&p, &gompertz(), &pol, 50.0, &c, 4, 50).unwrap());
    }

    #[test]
    fn tabulated_policy_matches_closed_form() {
        let p = ModelParameters::baseline();
        let sol = ClosedFormSolution::at_age(&p, &gompertz(), 60.0).unwrap();
        let pol = TabulatedPolicy::new(&sol, &gompertz(), 60.0, PolicyMode::Foc, Perturbation::None, TerminalRule::default(), 20_000).unwrap();
        let exact = Policy::new(&sol, PolicyMode::Foc);
        for x in [-300.0, -81.0, 0.0, 120.0, 181.0] {
            let u = pol.controls(0.0, x);
            assert!((u.consumption - exact.consumption(x).unwrap()).abs() < 1e-4, "c at {x}");
            assert!((u.investment - exact.investment(x).unwrap()).abs() < 1e-2, "pi at {x}");
        }
        let late = TabulatedPolicy::new(&sol, &gompertz(), 60.0, PolicyMode::Foc, Perturbation::RetireAt(1.1), TerminalRule::default(), 2000).unwrap();
        assert!(!late.retire(0.0, 1.05 * sol.x_star));
        assert!(late.controls(0.0, 1.05 * sol.x_star).consumption > sol.c_hat);
    }
}

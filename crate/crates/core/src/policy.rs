//! Optimal controls and utility evaluated on a solved model.
//!
//! `Foc` mode reads every control off the inverse wealth maps, so it is
//! consistent with the constructed value function by definition. `Printed`
//! mode keeps the explicit policy expressions, including labor that is
//! linear in wealth below x̃; [`consistency_report`] measures how far apart
//! the two modes are.

use crate::closed_form::{ClosedFormError, ClosedFormSolution, Diagnostic, Regime};
use crate::market::ModelParameters;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("utility needs positive consumption and labor, got c = {c}, b = {b}")]
    Domain { c: f64, b: f64 },
    #[error(transparent)]
    Solution(#[from] ClosedFormError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolicyMode {
    #[default]
    Foc,
    Printed,
}

impl std::str::FromStr for PolicyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "foc" => Ok(Self::Foc),
            "printed" => Ok(Self::Printed),
            other => Err(format!("unknown policy mode `{other}` (expected foc or printed)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilitySpec {
    pub alpha: f64,
    pub gamma: f64,
    pub gamma1: f64,
    pub wage: f64,
}

impl UtilitySpec {
    pub fn from_params(p: &ModelParameters) -> Self {
        Self { alpha: p.alpha, gamma: p.gamma, gamma1: 1.0 - p.alpha * (1.0 - p.gamma), wage: p.wage }
    }
}

/// u1(c, b) = c^(1-γ1) b^(γ1-γ) / (1-γ1).
pub fn utility_u1(spec: &UtilitySpec, c: f64, b: f64) -> Result<f64, PolicyError> {
    if !(c > 0.0 && b > 0.0) {
        return Err(PolicyError::Domain { c, b });
    }
    Ok(crate::closed_form::utility_u1(spec.gamma1, spec.gamma, c, b))
}

/// Cobb-Douglas form (1/α)(c^α b^(1-α))^(1-γ)/(1-γ); identical to [`utility_u1`].
pub fn utility_cobb_douglas(spec: &UtilitySpec, c: f64, b: f64) -> Result<f64, PolicyError> {
    if !(c > 0.0 && b > 0.0) {
        return Err(PolicyError::Domain { c, b });
    }
    let a = spec.alpha;
    Ok((c.powf(a) * b.powf(1.0 - a)).powf(1.0 - spec.gamma) / (a * (1.0 - spec.gamma)))
}

/// (∂u1/∂c, ∂u1/∂b).
pub fn marginal_utilities(spec: &UtilitySpec, c: f64, b: f64) -> (f64, f64) {
    let g1 = spec.gamma1;
    let e = g1 - spec.gamma;
    (c.powf(-g1) * b.powf(e), e / (1.0 - g1) * c.powf(1.0 - g1) * b.powf(e - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyPoint {
    pub consumption: f64,
    pub labor: f64,
    pub investment: f64,
    pub regime: Regime,
    /// Set when labor had to be clamped into [0, b̄].
    pub clamped: bool,
}

/// Controls of a solved model in one evaluation mode.
#[derive(Debug, Clone, Copy)]
pub struct Policy<'a> {
    pub sol: &'a ClosedFormSolution,
    pub mode: PolicyMode,
}

impl<'a> Policy<'a> {
    pub fn new(sol: &'a ClosedFormSolution, mode: PolicyMode) -> Self {
        Self { sol, mode }
    }

    fn retired_consumption(&self, x: f64) -> f64 {
        let g1 = self.sol.gamma1();
        self.sol.rho_eff.powf(1.0 / g1) * self.sol.factors.k.powf((g1 - 1.0) / g1) * x
    }

    pub fn consumption(&self, x: f64) -> Result<f64, PolicyError> {
        let sol = self.sol;
        let Some((c, regime)) = sol.working_consumption(x)? else {
            return Ok(self.retired_consumption(x));
        };
        Ok(match self.mode {
            PolicyMode::Foc => c,
            PolicyMode::Printed => {
                // Invert V'(x) = K c^-g directly.
                let v1 = sol.marginal_value(x)?;
                let (_, kk, g, _) = sol.branch(c, regime);
                (v1 / kk).powf(-1.0 / g)
            }
        })
    }

    /// Labor and whether it was clamped.
    pub fn labor(&self, x: f64) -> Result<(f64, bool), PolicyError> {
        let sol = self.sol;
        let p = &sol.params;
        let raw = match sol.working_consumption(x)? {
            None => return Ok((0.0, false)),
            Some((_, Regime::Corner)) | Some((_, Regime::Retired)) => return Ok((p.b_post, false)),
            Some((c, Regime::Interior)) => match self.mode {
                PolicyMode::Foc => sol.kappa * c,
                PolicyMode::Printed => {
                    let g1 = sol.gamma1();
                    sol.kappa * (sol.factors.k.powf(1.0 - g1) / sol.rho_eff).powf(-1.0 / g1) * x
                }
            },
        };
        let b = raw.clamp(0.0, p.b_bar);
        Ok((b, b != raw))
    }

    pub fn investment(&self, x: f64) -> Result<f64, PolicyError> {
        let sol = self.sol;
        let p = &sol.params;
        Ok(match sol.working_consumption(x)? {
            None => p.theta / (p.sigma * sol.gamma1()) * x,
            Some((c, regime)) => {
                let (_, _, g, _) = sol.branch(c, regime);
                let map = if regime == Regime::Interior { &sol.interior } else { &sol.corner };
                p.theta / p.sigma * c * map.wealth_slope(c) / g
            }
        })
    }

    pub fn point(&self, x: f64) -> Result<PolicyPoint, PolicyError> {
        let (labor, clamped) = self.labor(x)?;
        Ok(PolicyPoint {
            consumption: self.consumption(x)?,
            labor,
            investment: self.investment(x)?,
            regime: self.sol.regime(x),
            clamped,
        })
    }

    /// Retire (annuitize) now?
    pub fn stopping_rule(&self, x: f64) -> bool {
        x >= self.sol.x_star
    }

    /// Annuity income: zero while working, k x after annuitizing.
    pub fn annuity_payment_rate(&self, x: f64) -> f64 {
        if self.stopping_rule(x) {
            self.sol.factors.k * x
        } else {
            0.0
        }
    }

    /// φ recovered from retired consumption; equals k.
    pub fn phi_identity(&self, x: f64) -> f64 {
        let g1 = self.sol.gamma1();
        (self.retired_consumption(x) / (self.sol.rho_eff.powf(1.0 / g1) * x)).powf(g1 / (g1 - 1.0))
    }
}

fn track(slot: &mut (f64, f64), value: f64, x: f64) {
    if value > slot.0 || slot.0.is_nan() {
        *slot = (value, x);
    }
}

/// Mode divergence and first-order-condition residuals per regime on a
/// wealth grid from just above the floor to 2x*.
pub fn consistency_report(sol: &ClosedFormSolution, n_points: usize) -> Result<Vec<Diagnostic>, PolicyError> {
    let foc = Policy::new(sol, PolicyMode::Foc);
    let printed = Policy::new(sol, PolicyMode::Printed);
    let spec = UtilitySpec::from_params(&sol.params);
    let w = sol.params.wage;
    let lo = sol.solvency_floor + 1e-3 * sol.solvency_floor.abs().max(1.0);
    let hi = 2.0 * sol.x_star;
    let regimes = [Regime::Interior, Regime::Corner, Regime::Retired];
    // Per regime: c gap, b gap, FOC residual, MRS residual, MRS residual with printed sign.
    let mut stats = [[(0.0f64, f64::NAN); 5]; 3];
    for i in 0..n_points {
        let x = lo + (hi - lo) * i as f64 / (n_points - 1) as f64;
        let slot = &mut stats[regimes.iter().position(|&r| r == sol.regime(x)).unwrap()];
        let c = foc.consumption(x)?;
        let (b, _) = foc.labor(x)?;
        track(&mut slot[0], (c - printed.consumption(x)?).abs(), x);
        track(&mut slot[1], (b - printed.labor(x)?.0).abs(), x);
        let v1 = sol.marginal_value(x)?;
        let uc = if b > 0.0 { marginal_utilities(&spec, c, b).0 } else { c.powf(-spec.gamma1) };
        track(&mut slot[2], ((uc - v1) / v1).abs(), x);
        if sol.regime(x) == Regime::Interior {
            let (uc, ub) = marginal_utilities(&spec, c, b);
            track(&mut slot[3], (ub / uc - w).abs(), x);
            track(&mut slot[4], (ub / uc + w).abs(), x);
        }
    }
    let names = ["consumption_mode_gap", "labor_mode_gap", "foc_residual_rel", "mrs_residual", "mrs_residual_printed_sign"];
    let mut out = sol.consistency_report.clone();
    for (r, regime) in regimes.iter().enumerate() {
        for (k, name) in names.iter().enumerate() {
            let (value, at) = stats[r][k];
            if k >= 3 && *regime != Regime::Interior {
                continue;
            }
            let note = if at.is_nan() { "no grid points".to_string() } else { format!("max at x = {at}") };
            out.push(Diagnostic::new(format!("{}_{name}", format!("{regime:?}").to_lowercase()), value, note));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mortality::MortalityModel;

    fn baseline() -> ClosedFormSolution {
        let m = MortalityModel::gompertz(85.0, 10.0, 60.0).unwrap();
        ClosedFormSolution::at_age(&ModelParameters::baseline(), &m, 60.0).unwrap()
    }

    fn spec() -> UtilitySpec {
        UtilitySpec::from_params(&ModelParameters::baseline())
    }

    #[test]
    fn utility_examples() {
        assert!((utility_u1(&spec(), 1.0, 1.0).unwrap() + 5.0).abs() < 1e-12);
        assert!(matches!(utility_u1(&spec(), 0.0, 1.0), Err(PolicyError::Domain { .. })));
        let c: f64 = 3.7;
        let power = c.powf(-0.2) / -0.2;
        assert!((utility_u1(&spec(), c, 1.0).unwrap() - power).abs() < 1e-14);
    }

    #[test]
    fn retired_controls() {
        let sol = baseline();
        let pol = Policy::new(&sol, PolicyMode::Foc);
        let x = 2.0 * sol.x_star;
        let g1 = sol.gamma1();
        let c = pol.consumption(x).unwrap();
        let expect = sol.rho_eff.powf(1.0 / g1) * sol.factors.k.powf((g1 - 1.0) / g1) * x;
        assert!((c - expect).abs() < 1e-12 * expect);
        assert_eq!(pol.labor(x).unwrap(), (0.0, false));
        assert!((pol.investment(x).unwrap() - 0.07 / (0.2 * 1.2) * x).abs() < 1e-9);
        assert!((pol.annuity_payment_rate(x) - sol.factors.k * x).abs() < 1e-12);
        assert!((pol.phi_identity(x) - sol.factors.k).abs() < 1e-12 * sol.factors.k);
    }

    #[test]
    fn stopping_boundary_inclusive() {
        let sol = baseline();
        let pol = Policy::new(&sol, PolicyMode::Foc);
        assert!(pol.stopping_rule(sol.x_star));
        assert!(!pol.stopping_rule(sol.x_star - 1e-9));
        assert!(!pol.stopping_rule(sol.solvency_floor + 1e-6));
        assert_eq!(pol.annuity_payment_rate(sol.x_star - 1.0), 0.0);
    }

    #[test]
    fn labor_branches() {
        let sol = baseline();
        let pol = Policy::new(&sol, PolicyMode::Foc);
        assert_eq!(pol.labor(sol.x_tilde).unwrap().0, 1.0);
        assert!((sol.kappa * sol.c_tilde - 1.0).abs() < 1e-15);
        let (b, clamped) = pol.labor(sol.x_tilde - 50.0).unwrap();
        assert!(b > 0.0 && b < 1.0 && !clamped);
        let (b, clamped) = Policy::new(&sol, PolicyMode::Printed).labor(-300.0).unwrap();
        assert_eq!(b, 0.0);
        assert!(clamped);
    }

    #[test]
    fn inversion_identity() {
        let sol = baseline();
        let pol = Policy::new(&sol, PolicyMode::Foc);
        let c0 = 1.3;
        let x = sol.interior.wealth(c0);
        assert!((pol.consumption(x).unwrap() - c0).abs() < 1e-10);
    }

    #[test]
    fn printed_consumption_agrees_with_foc() {
        let sol = baseline();
        let report = consistency_report(&sol, 400).unwrap();
        let get = |n: &str| report.iter().find(|d| d.name == n).unwrap().value;
        for r in ["interior", "corner", "retired"] {
            assert!(get(&format!("{r}_consumption_mode_gap")) < 1e-9, "{r}");
            assert!(get(&format!("{r}_foc_residual_rel")) < 1e-8, "{r}");
        }
        assert!(get("interior_mrs_residual") < 1e-9);
        assert!((get("interior_mrs_residual_printed_sign") - 20.0).abs() < 1e-9);
        assert!(get("interior_labor_mode_gap") > 0.0);
    }

    #[test]
    fn investment_drops_at_boundary() {
        let sol = baseline();
        let pol = Policy::new(&sol, PolicyMode::Foc);
        let below = pol.investment(sol.x_star * (1.0 - 1e-12)).unwrap();
        let above = pol.investment(sol.x_star).unwrap();
        assert!(below > above, "{below} vs {above}");
    }
}

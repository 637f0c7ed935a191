//! Closed-form solution of the working/retirement problem at one evaluation
//! age.
//!
//! Below the labor cap (x < x̃) labor is tied to consumption by b = κc with
//! κ = (1 - α)/(wα). Between x̃ and x* labor sits at its cap, and above x*
//! the agent annuitizes and retires. On each working branch wealth is an
//! explicit function of consumption,
//!
//! ```text
//! X_int(c) = A2 c^p + c/(αk) - w b̄/r                      (0 < c <= c̃)
//! X_cap(c) = B1 c^q1 + B2 c^q2 + c/k1 - w(b̄ - b_post)/r   (c̃ <= c <= ĉ)
//! ```
//!
//! with p = -γ n-, q1 = -γ1 n+, q2 = -γ1 n-, where n± are the
//! [`inverse_map_roots`](crate::market::inverse_map_roots). The four unknowns
//! (A2, B1, B2, ĉ) are pinned by continuity of X and of V'' at c̃, and by
//! smooth pasting and value matching against G at x* = X_cap(ĉ).

use crate::market::{DerivedFactors, MarketError, ModelParameters};
use crate::mortality::MortalityModel;
use crate::numerics::{find_root, invert_monotone, Bracket, NumericsError, Tolerance};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedFormError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("no retirement boundary: smooth pasting has no solution above the labor cap")]
    NoRetirementBoundary,
    #[error("inverse wealth map on the {0:?} branch is not monotone")]
    NonMonotoneInverse(Regime),
    #[error("the two expressions for x̃ disagree by {0:e}")]
    InconsistentBoundary(f64),
    #[error("wealth {x} is at or below the solvency floor {floor}")]
    BelowSolvency { x: f64, floor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Labor below its cap, tied to consumption.
    Interior,
    /// Labor at its cap, still working.
    Corner,
    /// Annuitized and retired.
    Retired,
}

/// One named entry of a consistency audit.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub name: String,
    pub value: f64,
    pub note: String,
}

impl Diagnostic {
    pub fn new(name: impl Into<String>, value: f64, note: impl Into<String>) -> Self {
        Self { name: name.into(), value, note: note.into() }
    }
}

/// Wealth as a function of consumption on one working branch:
/// sum of a c^e terms plus an affine part.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseWealthMap {
    pub regime: Regime,
    pub terms: Vec<(f64, f64)>,
    pub slope: f64,
    pub shift: f64,
    pub c_lo: f64,
    pub c_hi: f64,
}

impl InverseWealthMap {
    pub fn wealth(&self, c: f64) -> f64 {
        self.terms.iter().map(|&(a, e)| a * c.powf(e)).sum::<f64>() + self.slope * c + self.shift
    }

    pub fn wealth_slope(&self, c: f64) -> f64 {
        self.terms.iter().map(|&(a, e)| a * e * c.powf(e - 1.0)).sum::<f64>() + self.slope
    }

    /// Consumption c with wealth(c) = x on [lo, hi].
    pub fn consumption(&self, x: f64, lo: f64, hi: f64) -> Result<f64, NumericsError> {
        let tol = Tolerance { abs_tol: 1e-13, rel_tol: 1e-14, max_iter: 200 };
        invert_monotone(|c| self.wealth(c), x, Bracket::new(lo, hi)?, &tol)
    }

    /// Checks that the slope keeps its sign on a 1000-point scan.
    pub fn check_monotone(&self) -> Result<(), ClosedFormError> {
        let lo = if self.c_lo > 0.0 { self.c_lo } else { self.c_hi * 1e-6 };
        let n = 1000;
        let ratio = (self.c_hi / lo).ln();
        let mut prev = self.wealth(lo);
        for i in 1..=n {
            let c = lo * (ratio * i as f64 / n as f64).exp();
            let x = self.wealth(c);
            if !(x > prev) || self.wealth_slope(c) <= 0.0 {
                return Err(ClosedFormError::NonMonotoneInverse(self.regime));
            }
            prev = x;
        }
        Ok(())
    }
}

/// Full solution at one evaluation age.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormSolution {
    pub params: ModelParameters,
    pub eval_age: Option<f64>,
    pub rho_eff: f64,
    pub factors: DerivedFactors,
    /// Labor per unit consumption below the cap, (1 - α)/(wα).
    pub kappa: f64,
    /// Marginal-utility prefactors: V' = K_v c^-γ (interior), K' c^-γ1 (cap).
    pub k_v: f64,
    pub k_post: f64,
    pub c_tilde: f64,
    /// Consumption just below x*.
    pub c_hat: f64,
    pub b1: f64,
    pub b2: f64,
    pub a2: f64,
    pub x_tilde: f64,
    pub x_star: f64,
    pub solvency_floor: f64,
    /// x* / ĉ from smooth pasting.
    pub phi: f64,
    pub interior: InverseWealthMap,
    pub corner: InverseWealthMap,
    pub consistency_report: Vec<Diagnostic>,
}

/// c̃ = (wα/(1 - α)) b.
pub fn consumption_threshold(params: &ModelParameters, b_cap: f64) -> f64 {
    params.wage * params.alpha / (1.0 - params.alpha) * b_cap
}

/// Instantaneous effective discount rate at an absolute age.
pub fn rho_at_age(params: &ModelParameters, mortality: &MortalityModel, age: f64) -> f64 {
    params.beta + mortality.at_age(age).force_of_mortality(0.0)
}

/// Intermediate quantities of the boundary system for a trial ĉ.
struct Boundary {
    b1: f64,
    b2: f64,
    a2: f64,
    residual: f64,
}

struct Setup {
    p: ModelParameters,
    f: DerivedFactors,
    kappa: f64,
    k_v: f64,
    k_post: f64,
    c_tilde: f64,
    exp_p: f64,
    q1: f64,
    q2: f64,
    income_cap: f64,
    phi: f64,
}

impl Setup {
    fn new(p: &ModelParameters, rho: f64) -> Result<Self, ClosedFormError> {
        let f = DerivedFactors::new(p, rho)?;
        let g1 = f.gamma1;
        let kappa = (1.0 - p.alpha) / (p.wage * p.alpha);
        let k_post = p.b_post.powf(g1 - p.gamma);
        Ok(Self {
            p: *p,
            f,
            kappa,
            k_v: kappa.powf(g1 - p.gamma),
            k_post,
            c_tilde: p.b_post / kappa,
            exp_p: -p.gamma * f.n_minus,
            q1: -g1 * f.n_plus,
            q2: -g1 * f.n_minus,
            income_cap: p.wage * (p.b_bar - p.b_post),
            phi: (f.k.powf(1.0 - g1) / (rho * k_post)).powf(1.0 / g1),
        })
    }

    fn g(&self, x: f64) -> f64 {
        retired_value(self.f.k, self.f.gamma1, self.f.rho_eff, x)
    }

    fn u_cap(&self, c: f64) -> f64 {
        utility_u1(self.f.gamma1, self.p.gamma, c, self.p.b_post)
    }

    fn boundary(&self, c_hat: f64) -> Boundary {
        let (p, f) = (&self.p, &self.f);
        let g1 = f.gamma1;
        let x_star = self.phi * c_hat;
        // Value matching at x* fixes the slope of X_cap at ĉ.
        let slope_hat = (f.rho_eff * self.g(x_star)
            - self.u_cap(c_hat)
            - (p.r * x_star - c_hat + self.income_cap) * self.k_post * c_hat.powf(-g1))
            * 2.0
            * g1
            / (p.theta * p.theta * self.k_post * c_hat.powf(1.0 - g1));
        // Unknowns scaled as B_i ĉ^q_i keep the 2x2 system well conditioned.
        let level = x_star - c_hat / f.k1 + self.income_cap / p.r;
        let tilt = c_hat * (slope_hat - 1.0 / f.k1);
        let s2 = (tilt - self.q1 * level) / (self.q2 - self.q1);
        let s1 = level - s2;
        let b1 = s1 * c_hat.powf(-self.q1);
        let b2 = s2 * c_hat.powf(-self.q2);
        let ct = self.c_tilde;
        let ratio = ct / c_hat;
        let x_cap = s1 * ratio.powf(self.q1) + s2 * ratio.powf(self.q2) + ct / f.k1 - self.income_cap / p.r;
        let dx_cap = (self.q1 * s1 * ratio.powf(self.q1) + self.q2 * s2 * ratio.powf(self.q2)) / ct + 1.0 / f.k1;
        let a2 = (x_cap - ct / (p.alpha * f.k) + p.wage * p.b_bar / p.r) / ct.powf(self.exp_p);
        let dx_int = self.exp_p * a2 * ct.powf(self.exp_p - 1.0) + 1.0 / (p.alpha * f.k);
        // Continuity of V'' across c̃.
        let residual = dx_cap - g1 / p.gamma * dx_int;
        Boundary { b1, b2, a2, residual }
    }
}

/// G(x) = k^(1-γ1) x^(1-γ1) / (ρ (1-γ1)).
pub fn retired_value(k: f64, gamma1: f64, rho: f64, x: f64) -> f64 {
    k.powf(1.0 - gamma1) * x.powf(1.0 - gamma1) / (rho * (1.0 - gamma1))
}

/// u1(c, b) = c^(1-γ1) b^(γ1-γ) / (1-γ1).
pub fn utility_u1(gamma1: f64, gamma: f64, c: f64, b: f64) -> f64 {
    c.powf(1.0 - gamma1) * b.powf(gamma1 - gamma) / (1.0 - gamma1)
}

impl ClosedFormSolution {
    /// Solves at the instantaneous rate implied by the mortality law at `age`.
    pub fn at_age(params: &ModelParameters, mortality: &MortalityModel, age: f64) -> Result<Self, ClosedFormError> {
        let mut sol = Self::solve(params, rho_at_age(params, mortality, age))?;
        sol.eval_age = Some(age);
        Ok(sol)
    }

    pub fn solve(params: &ModelParameters, rho_eff: f64) -> Result<Self, ClosedFormError> {
        let s = Setup::new(params, rho_eff)?;
        let ct = s.c_tilde;

        // Scan ĉ upward from c̃ for the first sign change of the V'' gap.
        let n_scan = 2400;
        let span = 12.0;
        let at = |i: usize| ct * (span * (i as f64 + 1e-4) / n_scan as f64).exp();
        let mut prev = (at(0), s.boundary(at(0)).residual);
        let mut bracket = None;
        for i in 1..=n_scan {
            let c = at(i);
            let r = s.boundary(c).residual;
            if prev.1.is_finite() && r.is_finite() && prev.1.signum() != r.signum() {
                bracket = Some((prev.0, c));
                break;
            }
            prev = (c, r);
        }
        let (lo, hi) = bracket.ok_or(ClosedFormError::NoRetirementBoundary)?;
        let tol = Tolerance { abs_tol: 1e-300, rel_tol: 1e-15, max_iter: 200 };
        let c_hat = find_root(|c| s.boundary(c).residual, Bracket::new(lo, hi)?, &tol)?;
        let bd = s.boundary(c_hat);

        let p = &s.p;
        let f = s.f;
        let interior = InverseWealthMap {
            regime: Regime::Interior,
            terms: vec![(bd.a2, s.exp_p)],
            slope: 1.0 / (p.alpha * f.k),
            shift: -p.wage * p.b_bar / p.r,
            c_lo: 0.0,
            c_hi: ct,
        };
        let corner = InverseWealthMap {
            regime: Regime::Corner,
            terms: vec![(bd.b1, s.q1), (bd.b2, s.q2)],
            slope: 1.0 / f.k1,
            shift: -s.income_cap / p.r,
            c_lo: ct,
            c_hi: c_hat,
        };
        interior.check_monotone()?;
        corner.check_monotone()?;
        let x_tilde = interior.wealth(ct);
        let gap = (x_tilde - corner.wealth(ct)).abs();
        if gap > 1e-6 * x_tilde.abs().max(1.0) {
            return Err(ClosedFormError::InconsistentBoundary(gap));
        }
        let mut sol = Self {
            params: *p,
            eval_age: None,
            rho_eff,
            factors: f,
            kappa: s.kappa,
            k_v: s.k_v,
            k_post: s.k_post,
            c_tilde: ct,
            c_hat,
            b1: bd.b1,
            b2: bd.b2,
            a2: bd.a2,
            x_tilde,
            x_star: s.phi * c_hat,
            solvency_floor: p.solvency_floor(),
            phi: s.phi,
            interior,
            corner,
            consistency_report: Vec::new(),
        };
        sol.consistency_report = sol.audit();
        Ok(sol)
    }

    pub fn gamma1(&self) -> f64 {
        self.factors.gamma1
    }

    pub fn retired_value(&self, x: f64) -> f64 {
        retired_value(self.factors.k, self.factors.gamma1, self.rho_eff, x)
    }

    pub fn regime(&self, x: f64) -> Regime {
        if x >= self.x_star {
            Regime::Retired
        } else if x >= self.x_tilde {
            Regime::Corner
        } else {
            Regime::Interior
        }
    }

    /// Working-branch consumption and its regime; `None` when retired.
    pub fn working_consumption(&self, x: f64) -> Result<Option<(f64, Regime)>, ClosedFormError> {
        if x <= self.solvency_floor {
            return Err(ClosedFormError::BelowSolvency { x, floor: self.solvency_floor });
        }
        Ok(match self.regime(x) {
            Regime::Retired => None,
            // The branch expressions agree at c̃ only to rounding, so snap to the endpoint.
            Regime::Corner if x <= self.corner.wealth(self.c_tilde) => Some((self.c_tilde, Regime::Corner)),
            Regime::Corner => Some((self.corner.consumption(x, self.c_tilde, self.c_hat)?, Regime::Corner)),
            Regime::Interior if x >= self.interior.wealth(self.c_tilde) => Some((self.c_tilde, Regime::Interior)),
            Regime::Interior => {
                // Near the floor X_int(c) ≈ floor + c/(αk).
                let guess = self.params.alpha * self.factors.k * (x - self.solvency_floor);
                let mut lo = (0.5 * guess).min(0.5 * self.c_tilde);
                while self.interior.wealth(lo) > x {
                    lo *= 0.5;
                    if lo < 1e-300 {
                        return Err(NumericsError::OutOfRange { target: x, lo: self.solvency_floor, hi: self.x_tilde }.into());
                    }
                }
                Some((self.interior.consumption(x, lo, self.c_tilde)?, Regime::Interior))
            }
        })
    }

    /// Labor, marginal-utility prefactor, curvature and net spending at
    /// consumption c on a working branch.
    pub(crate) fn branch(&self, c: f64, regime: Regime) -> (f64, f64, f64, f64) {
        let p = &self.params;
        match regime {
            Regime::Interior => {
                let b = self.kappa * c;
                (b, self.k_v, p.gamma, c - p.wage * (p.b_bar - b))
            }
            _ => (p.b_post, self.k_post, self.gamma1(), c - p.wage * (p.b_bar - p.b_post)),
        }
    }

    fn map(&self, regime: Regime) -> &InverseWealthMap {
        if regime == Regime::Interior {
            &self.interior
        } else {
            &self.corner
        }
    }

    /// Value recovered from the maximised HJB identity at consumption c.
    pub fn value_at_consumption(&self, c: f64, regime: Regime) -> f64 {
        let (b, kk, g, spend) = self.branch(c, regime);
        let m = self.map(regime);
        let x = m.wealth(c);
        let th2 = self.params.theta * self.params.theta;
        (utility_u1(self.gamma1(), self.params.gamma, c, b)
            + (self.params.r * x - spend) * kk * c.powf(-g)
            + th2 * kk * c.powf(1.0 - g) * m.wealth_slope(c) / (2.0 * g))
            / self.rho_eff
    }

    pub fn value_function(&self, x: f64) -> Result<f64, ClosedFormError> {
        Ok(match self.working_consumption(x)? {
            None => self.retired_value(x),
            Some((c, regime)) => self.value_at_consumption(c, regime),
        })
    }

    /// V'(x).
    pub fn marginal_value(&self, x: f64) -> Result<f64, ClosedFormError> {
        Ok(match self.working_consumption(x)? {
            None => self.factors.k.powf(1.0 - self.gamma1()) / self.rho_eff * x.powf(-self.gamma1()),
            Some((c, regime)) => {
                let (_, kk, g, _) = self.branch(c, regime);
                kk * c.powf(-g)
            }
        })
    }

    /// V''(x).
    pub fn curvature(&self, x: f64) -> Result<f64, ClosedFormError> {
        let g1 = self.gamma1();
        Ok(match self.working_consumption(x)? {
            None => -g1 * self.factors.k.powf(1.0 - g1) / self.rho_eff * x.powf(-g1 - 1.0),
            Some((c, regime)) => {
                let (_, kk, g, _) = self.branch(c, regime);
                -g * kk * c.powf(-g - 1.0) / self.map(regime).wealth_slope(c)
            }
        })
    }

    /// Relative smooth-pasting gap |V'(x*-) - G'(x*)| / |G'(x*)|.
    pub fn smooth_pasting_residual(&self) -> f64 {
        let g1 = self.gamma1();
        let left = self.k_post * self.c_hat.powf(-g1);
        let right = self.factors.k.powf(1.0 - g1) / self.rho_eff * self.x_star.powf(-g1);
        ((left - right) / right).abs()
    }

    /// Relative value-matching gap at x*.
    pub fn value_matching_residual(&self) -> f64 {
        let v = self.value_at_consumption(self.c_hat, Regime::Corner);
        let g = self.retired_value(self.x_star);
        ((v - g) / g).abs()
    }

    /// |X_int(c̃) - X_cap(c̃)|.
    pub fn x_tilde_gap(&self) -> f64 {
        (self.interior.wealth(self.c_tilde) - self.corner.wealth(self.c_tilde)).abs()
    }

    fn audit(&self) -> Vec<Diagnostic> {
        let p = &self.params;
        let f = &self.factors;
        let mut out = vec![
            Diagnostic::new("x_tilde_gap", self.x_tilde_gap(), "both branch expressions for x̃"),
            Diagnostic::new("smooth_pasting_rel", self.smooth_pasting_residual(), "V' against G' at x*"),
            Diagnostic::new("value_matching_rel", self.value_matching_residual(), "V against G at x*"),
            Diagnostic::new(
                "m_minus_below_minus_one",
                if f.m_minus_below_minus_one { 1.0 } else { 0.0 },
                format!("m- = {}", f.m_minus),
            ),
            Diagnostic::new(
                "k_v_exponent",
                (1.0 - p.alpha) * (1.0 - p.gamma),
                "printed K_v base is negative; the positive base (1-α)/(wα) is used",
            ),
        ];
        let pb1 = printed::constant_b1(p, f, self.c_tilde);
        out.push(Diagnostic::new("printed_b1", pb1, format!("solver B1 = {}", self.b1)));
        let xs = printed::solve_x_star(p, f, pb1, self.x_tilde.max(1e-9));
        let pb2 = printed::constant_b2(p, f, xs.as_ref().copied().unwrap_or(self.x_star));
        out.push(Diagnostic::new("printed_b2", pb2, format!("solver B2 = {}", self.b2)));
        let pa2 = printed::constant_a2(p, f, self.c_tilde, pb2);
        out.push(Diagnostic::new("printed_a2", pa2, format!("solver A2 = {}", self.a2)));
        let (lhs, rhs) = printed::x_tilde_expressions(p, f, self.c_tilde, pa2, pb1, pb2);
        out.push(Diagnostic::new("printed_x_tilde_gap", (lhs - rhs).abs(), "printed constants in both x̃ expressions"));
        match xs {
            Ok(x) => out.push(Diagnostic::new("printed_x_star", x, format!("solver x* = {}", self.x_star))),
            Err(e) => out.push(Diagnostic::new("printed_x_star", f64::NAN, e.to_string())),
        }
        out
    }
}

/// The textbook closed-form constants B1, B2, A2 and the explicit x*
/// equation, written with the f(m) roots m± and the free symbol b read as
/// `b_post`. The solver does not use them; they feed the consistency report.
pub mod printed {
    use super::*;

    fn common(p: &ModelParameters, f: &DerivedFactors) -> f64 {
        f.rho_eff / (0.5 * p.theta * p.theta * (f.m_plus - f.m_minus))
    }

    pub fn constant_b1(p: &ModelParameters, f: &DerivedFactors, c_tilde: f64) -> f64 {
        let g1 = f.gamma1;
        let th2 = 0.5 * p.theta * p.theta;
        let diff = 1.0 / (p.alpha * f.k) - 1.0 / f.k1;
        common(p, f)
            * c_tilde.powf(g1 * f.m_plus)
            * ((p.r - th2 * f.m_minus) / f.rho_eff * diff * c_tilde - p.wage * p.b_bar / p.r)
            - diff * c_tilde / (1.0 - g1)
    }

    pub fn constant_b2(p: &ModelParameters, f: &DerivedFactors, x_star: f64) -> f64 {
        let g1 = f.gamma1;
        let th2 = 0.5 * p.theta * p.theta;
        let ratio = p.b_bar / p.b_post;
        let corr = 1.0 - ratio.powf(-(g1 - p.gamma) / g1);
        common(p, f)
            * f.k1.powf(g1 * f.m_minus)
            * ratio.powf(-f.m_minus * (g1 - p.gamma))
            * x_star.powf(g1 * f.m_minus)
            * (-(p.r - th2 * f.m_plus) / f.rho_eff * (corr * x_star + p.wage * (p.b_bar - p.b_post) / p.r)
                + corr * x_star / (1.0 - g1))
    }

    pub fn constant_a2(p: &ModelParameters, f: &DerivedFactors, c_tilde: f64, b2: f64) -> f64 {
        let g1 = f.gamma1;
        let th2 = 0.5 * p.theta * p.theta;
        let diff = 1.0 / f.k1 - 1.0 / (p.alpha * f.k);
        b2 * c_tilde.powf(-f.m_minus * (g1 - p.gamma))
            - common(p, f)
                * c_tilde.powf(p.gamma * f.m_minus)
                * ((p.r - th2 * f.m_plus) / f.rho_eff * diff * c_tilde + p.wage * p.b_bar / p.r)
            - diff * c_tilde / (1.0 - g1)
    }

    /// x̃ from the interior branch, A2 c̃^(-γ m-) + c̃/(αk) - w b̄/r.
    pub fn solve_x_tilde(p: &ModelParameters, f: &DerivedFactors, a2: f64, c_tilde: f64) -> f64 {
        a2 * c_tilde.powf(-p.gamma * f.m_minus) + c_tilde / (p.alpha * f.k) - p.wage * p.b_bar / p.r
    }

    /// Both sides of the printed x̃ identity (interior, capped).
    pub fn x_tilde_expressions(
        p: &ModelParameters,
        f: &DerivedFactors,
        c_tilde: f64,
        a2: f64,
        b1: f64,
        b2: f64,
    ) -> (f64, f64) {
        let g1 = f.gamma1;
        let lhs = solve_x_tilde(p, f, a2, c_tilde);
        let rhs = b1 * c_tilde.powf(-g1 * f.m_plus) + b2 * c_tilde.powf(-g1 * f.m_minus) + c_tilde / f.k1
            - p.wage * (p.b_bar - p.b_post) / p.r;
        (lhs, rhs)
    }

    /// Left minus right side of the printed smooth-pasting equation for x*.
    pub fn x_star_residual(p: &ModelParameters, f: &DerivedFactors, b1: f64, x: f64) -> f64 {
        let g1 = f.gamma1;
        let th2 = 0.5 * p.theta * p.theta;
        let ratio = p.b_post / p.b_bar;
        let lead = (p.r - th2 * f.m_minus) / f.rho_eff;
        let lhs = th2 * (f.m_plus - f.m_minus) / f.rho_eff
            * b1
            * f.k.powf(-g1 * f.m_plus)
            * ratio.powf(f.m_plus * (g1 - p.gamma))
            * x.powf(-g1 * f.m_plus);
        let rhs = (lead - (1.0 - ratio.powf(-(g1 - p.gamma) / g1)) / (1.0 - g1)) * x
            + lead * p.wage * (p.b_bar - p.b_post) / p.r;
        lhs - rhs
    }

    /// x* from the printed equation; explicit when b_post = b̄, otherwise by
    /// geometric bracket expansion above `x_lo`.
    pub fn solve_x_star(p: &ModelParameters, f: &DerivedFactors, b1: f64, x_lo: f64) -> Result<f64, ClosedFormError> {
        let g1 = f.gamma1;
        if p.b_post == p.b_bar {
            let th2 = 0.5 * p.theta * p.theta;
            let c1 = th2 * (f.m_plus - f.m_minus) / f.rho_eff * b1 * f.k.powf(-g1 * f.m_plus);
            let c2 = (p.r - th2 * f.m_minus) / f.rho_eff;
            let ratio = c1 / c2;
            if !(ratio > 0.0) {
                return Err(ClosedFormError::NoRetirementBoundary);
            }
            return Ok(ratio.powf(1.0 / (1.0 + g1 * f.m_plus)));
        }
        let cap = 1e6 * p.wage / p.r;
        let mut lo = x_lo.max(1e-9);
        let mut hi = 2.0 * lo;
        let f_lo = x_star_residual(p, f, b1, lo);
        while hi < cap {
            if x_star_residual(p, f, b1, hi).signum() != f_lo.signum() {
                let tol = Tolerance::default();
                return Ok(find_root(|x| x_star_residual(p, f, b1, x), Bracket::new(lo, hi)?, &tol)?);
            }
            lo = hi;
            hi *= 2.0;
        }
        Err(ClosedFormError::NoRetirementBoundary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline() -> ClosedFormSolution {
        let m = MortalityModel::gompertz(85.0, 10.0, 60.0).unwrap();
        ClosedFormSolution::at_age(&ModelParameters::baseline(), &m, 60.0).unwrap()
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(consumption_threshold(&ModelParameters::baseline(), 1.0), 2.5);
        let q = ModelParameters { wage: 1.0, alpha: 0.5, ..ModelParameters::baseline() };
        assert_eq!(consumption_threshold(&q, 1.0), 1.0);
        assert_eq!(consumption_threshold(&q, 0.0), 0.0);
    }

    #[test]
    fn baseline_regression() {
        let s = baseline();
        assert_eq!(s.solvency_floor, -500.0);
        assert!((s.c_tilde - 2.5).abs() < 1e-14);
        assert!((s.c_hat - 6.664_22).abs() < 1e-4, "c_hat {}", s.c_hat);
        assert!((s.x_star - 181.879).abs() < 1e-2, "x* {}", s.x_star);
        assert!((s.x_tilde - (-81.357)).abs() < 1e-2, "x~ {}", s.x_tilde);
        assert!(s.solvency_floor < s.x_tilde && s.x_tilde < s.x_star);
    }

    #[test]
    fn boundary_residuals() {
        let s = baseline();
        assert!(s.x_tilde_gap() < 1e-8);
        assert!(s.smooth_pasting_residual() < 1e-6);
        assert!(s.value_matching_residual() < 1e-6);
    }

    #[test]
    fn value_function_branches() {
        let s = baseline();
        let x = 2.0 * s.x_star;
        assert_eq!(s.value_function(x).unwrap(), s.retired_value(x));
        assert!(s.value_function(100.0).unwrap() < 0.0);
        assert!(matches!(s.value_function(-500.0), Err(ClosedFormError::BelowSolvency { .. })));
        for x in [s.x_tilde, s.x_star] {
            let eps = 1e-7;
            let l = s.value_function(x - eps).unwrap();
            let r = s.value_function(x + eps).unwrap();
            assert!((l - r).abs() < 1e-6 * l.abs(), "jump at {x}");
        }
    }

    #[test]
    fn retired_value_arithmetic() {
        let g = retired_value(0.0356125, 1.2, 0.05, 100.0);
        let expect = -(0.0356125f64.powf(-0.2)) * 100f64.powf(-0.2) / 0.01;
        assert!((g - expect).abs() < 1e-10 * expect.abs());
        assert!(g < 0.0);
    }

    #[test]
    fn inverse_maps_round_trip() {
        let s = baseline();
        for c in [0.3, 1.0, 2.4] {
            let x = s.interior.wealth(c);
            let (back, reg) = s.working_consumption(x).unwrap().unwrap();
            assert_eq!(reg, Regime::Interior);
            assert!((back - c).abs() < 1e-10);
        }
        assert!((s.corner.wealth(s.c_hat) - s.x_star).abs() < 1e-9 * s.x_star);
    }

    #[test]
    fn homogeneous_near_floor() {
        // Close to the floor V scales like (x - floor)^(1-γ).
        let s = baseline();
        let v1 = s.value_function(-499.0).unwrap();
        let v2 = s.value_function(-495.0).unwrap();
        assert!((v1 * 1.0 - v2 * 5.0).abs() < 1e-9 * v1.abs());
    }

    #[test]
    fn printed_b2_vanishes_without_post_labor_gap() {
        let s = baseline();
        assert_eq!(printed::constant_b2(&s.params, &s.factors, s.x_star), 0.0);
    }

    #[test]
    fn printed_x_star_reduction_matches_root_finder() {
        let s = baseline();
        let p = ModelParameters { b_post: 0.999_999_999, ..s.params };
        let b1 = 1.0;
        let explicit = printed::solve_x_star(&s.params, &s.factors, b1, 1e-6).unwrap();
        let searched = printed::solve_x_star(&p, &s.factors, b1, 1e-6).unwrap();
        assert!((explicit - searched).abs() < 1e-5 * explicit);
        assert!(printed::x_star_residual(&s.params, &s.factors, b1, explicit).abs() < 1e-10 * explicit);
    }
}

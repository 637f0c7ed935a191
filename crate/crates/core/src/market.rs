//! Market and preference parameters and the algebraic factors derived from
//! them at a given effective discount rate.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("gamma1 = 1 - alpha(1 - gamma) is zero; utility exponents degenerate")]
    DegenerateGamma1,
    #[error("conversion factor {name} = {value} is not positive")]
    NonPositiveConversionFactor { name: &'static str, value: f64 },
    #[error("theta = 0: the characteristic quadratic collapses to a linear equation")]
    DegenerateDiffusion,
}

/// Market, preference and labor parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParameters {
    pub r: f64,
    pub sigma: f64,
    pub theta: f64,
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub wage: f64,
    pub b_bar: f64,
    /// Labor level on the capped branch; equals `b_bar` unless configured.
    pub b_post: f64,
    /// Leisure bounds; informational only.
    pub leisure_cap: f64,
    pub leisure_total: f64,
}

impl Default for ModelParameters {
    fn default() -> Self {
        Self::baseline()
    }
}

impl ModelParameters {
    pub fn baseline() -> Self {
        Self {
            r: 0.02,
            sigma: 0.2,
            theta: 0.07,
            beta: 0.03,
            gamma: 2.0,
            alpha: 0.2,
            wage: 10.0,
            b_bar: 1.0,
            b_post: 1.0,
            leisure_cap: 0.0,
            leisure_total: 1.0,
        }
    }

    /// Stock drift implied by r + sigma * theta.
    pub fn mu(&self) -> f64 {
        self.r + self.sigma * self.theta
    }

    /// Sets theta from a supplied stock drift.
    pub fn with_mu(mut self, mu: f64) -> Self {
        self.theta = (mu - self.r) / self.sigma;
        self
    }

    pub fn solvency_floor(&self) -> f64 {
        -self.wage * self.b_bar / self.r
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        let bad = |m: &str| Err(MarketError::InvalidParameter(m.to_string()));
        let all = [
            self.r, self.sigma, self.theta, self.beta, self.gamma, self.alpha, self.wage, self.b_bar, self.b_post,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.gamma > 0.0) || self.gamma == 1.0 {
            return bad("gamma must be positive and different from 1");
        }
        if !(self.b_bar > 0.0) {
            return bad("b_bar must be positive");
        }
        if !(self.b_post > 0.0 && self.b_post <= self.b_bar) {
            return bad("b_post must lie in (0, b_bar]");
        }
        if !(self.r > 0.0) {
            return bad("r must be positive");
        }
        if !(self.beta > 0.0) {
            return bad("beta must be positive");
        }
        if !(self.wage >= 0.0) {
            return bad("wage must be nonnegative");
        }
        if !(self.leisure_cap >= 0.0 && self.leisure_cap < self.leisure_total) {
            return bad("leisure bounds must satisfy 0 <= L < L_bar");
        }
        derive_gamma1(self)?;
        Ok(())
    }
}

/// gamma1 = 1 - alpha (1 - gamma).
pub fn derive_gamma1(params: &ModelParameters) -> Result<f64, MarketError> {
    let g1 = 1.0 - params.alpha * (1.0 - params.gamma);
    if g1 == 0.0 {
        return Err(MarketError::DegenerateGamma1);
    }
    Ok(g1)
}

fn conversion_factor(r: f64, rho: f64, theta: f64, g: f64) -> f64 {
    r + (rho - r) / g + (g - 1.0) / (2.0 * g * g) * theta * theta
}

/// Annuity conversion factors (k, k1) for curvature gamma and gamma1.
pub fn conversion_factors(params: &ModelParameters, rho_eff: f64) -> Result<(f64, f64), MarketError> {
    let g1 = derive_gamma1(params)?;
    let k = conversion_factor(params.r, rho_eff, params.theta, params.gamma);
    let k1 = conversion_factor(params.r, rho_eff, params.theta, g1);
    if !(k > 0.0) {
        return Err(MarketError::NonPositiveConversionFactor { name: "k", value: k });
    }
    if !(k1 > 0.0) {
        return Err(MarketError::NonPositiveConversionFactor { name: "k1", value: k1 });
    }
    Ok((k, k1))
}

/// Roots of a theta^2/2 m^2 + (rho - r + theta^2/2) m - c = 0, larger first.
fn characteristic_roots(theta: f64, rho: f64, r: f64, constant: f64) -> Result<(f64, f64), MarketError> {
    if theta == 0.0 {
        return Err(MarketError::DegenerateDiffusion);
    }
    let a = 0.5 * theta * theta;
    let b = rho - r + a;
    let disc = (b * b + 4.0 * a * constant).sqrt();
    // Cancellation-free pair: one root from the formula, the other by Vieta.
    let q = -0.5 * (b + b.signum() * disc);
    let (m1, m2) = if q != 0.0 { (q / a, -constant / q) } else { (disc / (2.0 * a), -disc / (2.0 * a)) };
    Ok(if m1 > m2 { (m1, m2) } else { (m2, m1) })
}

/// f(m) = theta^2/2 m^2 + (rho - r + theta^2/2) m - rho.
pub fn quadratic_f(params: &ModelParameters, rho_eff: f64, m: f64) -> f64 {
    let a = 0.5 * params.theta * params.theta;
    a * m * m + (rho_eff - params.r + a) * m - rho_eff
}

/// Roots (m+, m-) of f(m) = 0.
pub fn quadratic_roots(params: &ModelParameters, rho_eff: f64) -> Result<(f64, f64), MarketError> {
    characteristic_roots(params.theta, rho_eff, params.r, rho_eff)
}

/// Roots of theta^2/2 n^2 + (rho - r + theta^2/2) n - r = 0.
///
/// These are the exponents that make c^(-g n) solve the homogeneous
/// inverse-wealth equation; they differ from [`quadratic_roots`] only in the
/// constant term.
pub fn inverse_map_roots(params: &ModelParameters, rho_eff: f64) -> Result<(f64, f64), MarketError> {
    characteristic_roots(params.theta, rho_eff, params.r, params.r)
}

/// Everything the closed form needs at one effective discount rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedFactors {
    pub gamma1: f64,
    pub k: f64,
    pub k1: f64,
    pub m_plus: f64,
    pub m_minus: f64,
    pub n_plus: f64,
    pub n_minus: f64,
    pub rho_eff: f64,
    /// Whether m- < -1 holds for these parameters.
    pub m_minus_below_minus_one: bool,
}

impl DerivedFactors {
    pub fn new(params: &ModelParameters, rho_eff: f64) -> Result<Self, MarketError> {
        params.validate()?;
        let gamma1 = derive_gamma1(params)?;
        let (k, k1) = conversion_factors(params, rho_eff)?;
        let (m_plus, m_minus) = quadratic_roots(params, rho_eff)?;
        let (n_plus, n_minus) = inverse_map_roots(params, rho_eff)?;
        Ok(Self {
            gamma1,
            k,
            k1,
            m_plus,
            m_minus,
            n_plus,
            n_minus,
            rho_eff,
            m_minus_below_minus_one: m_minus < -1.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(r: f64, theta: f64) -> ModelParameters {
        ModelParameters { r, theta, ..ModelParameters::baseline() }
    }

    #[test]
    fn gamma1_examples() {
        assert!((derive_gamma1(&ModelParameters::baseline()).unwrap() - 1.2).abs() < 1e-15);
        let q = ModelParameters { alpha: 0.5, gamma: 3.0, ..ModelParameters::baseline() };
        assert_eq!(derive_gamma1(&q).unwrap(), 2.0);
        assert!(q.validate().is_ok());
        let unit = ModelParameters { gamma: 1.0, ..ModelParameters::baseline() };
        assert!(unit.validate().is_err());
    }

    #[test]
    fn conversion_factor_examples() {
        let (k, k1) = conversion_factors(&p(0.02, 0.0), 0.02).unwrap();
        assert_eq!((k, k1), (0.02, 0.02));
        let (k, k1) = conversion_factors(&p(0.02, 0.07), 0.05).unwrap();
        assert!((k - 0.0356125).abs() < 1e-12);
        assert!((k1 - 0.0453403).abs() < 1e-7);
    }

    #[test]
    fn conversion_factor_sign_error() {
        let q = ModelParameters { gamma: 0.5, alpha: 0.5, ..p(0.02, 0.07) };
        let e = conversion_factors(&q, 0.0);
        assert!(matches!(e, Err(MarketError::NonPositiveConversionFactor { .. })));
    }

    #[test]
    fn quadratic_root_examples() {
        let (mp, mm) = quadratic_roots(&p(0.02, 0.07), 0.05).unwrap();
        assert!((mp - 1.394_096_02).abs() < 1e-7 && (mm - (-14.638_993_98)).abs() < 1e-7);
        assert!(quadratic_f(&p(0.02, 0.07), 0.05, mp).abs() < 1e-12);
        assert!(quadratic_f(&p(0.02, 0.07), 0.05, 0.0) < 0.0);
        let (a, b) = quadratic_roots(&p(0.02, 0.07), 0.02).unwrap();
        assert!((a * b - (-8.16327)).abs() < 1e-5);
        assert!(matches!(quadratic_roots(&p(0.02, 0.0), 0.05), Err(MarketError::DegenerateDiffusion)));
    }

    #[test]
    fn inverse_map_roots_solve_their_quadratic() {
        let q = ModelParameters::baseline();
        let rho = 0.03 + 0.1 * (-2.5f64).exp();
        let (np, nm) = inverse_map_roots(&q, rho).unwrap();
        let a = 0.5 * q.theta * q.theta;
        for n in [np, nm] {
            assert!((a * n * n + (rho - q.r + a) * n - q.r).abs() < 1e-14);
        }
        assert!(np > 0.0 && nm < -1.0);
    }

    #[test]
    fn validation_rejects_bad_alpha() {
        let q = ModelParameters { alpha: 1.2, ..ModelParameters::baseline() };
        assert!(matches!(q.validate(), Err(MarketError::InvalidParameter(_))));
    }

    #[test]
    fn mu_round_trip() {
        let q = ModelParameters::baseline();
        let back = q.with_mu(q.mu());
        assert!((back.theta - q.theta).abs() < 1e-15);
    }
}

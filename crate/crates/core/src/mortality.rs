//! Gompertz force of mortality, survival and mortality-adjusted discounting.

use crate::numerics::{integrate, NumericsError, Tolerance};
use thiserror::Error;

/// Survival level below which the annuity integral is cut off.
pub const SURVIVAL_CUTOFF: f64 = 1e-12;
/// Longest horizon searched for the survival cutoff.
pub const MAX_TRUNCATION_YEARS: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MortalityError {
    #[error("invalid mortality parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("survival stays above {SURVIVAL_CUTOFF} for {MAX_TRUNCATION_YEARS} years")]
    TruncationFailure,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Mortality law seen from the current age `n0` (t counts years since n0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MortalityModel {
    Gompertz { modal_age: f64, dispersion: f64, current_age: f64 },
    /// Constant force of mortality; the exponential-lifetime special case.
    Constant { delta: f64 },
}

impl MortalityModel {
    pub fn gompertz(modal_age: f64, dispersion: f64, current_age: f64) -> Result<Self, MortalityError> {
        if !(dispersion > 0.0) {
            return Err(MortalityError::InvalidParameter("dispersion lambda must be positive"));
        }
        if !(current_age >= 0.0) {
            return Err(MortalityError::InvalidParameter("current age must be nonnegative"));
        }
        if !(modal_age > 0.0) {
            return Err(MortalityError::InvalidParameter("modal age must be positive"));
        }
        Ok(Self::Gompertz { modal_age, dispersion, current_age })
    }

    pub fn constant(delta: f64) -> Result<Self, MortalityError> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(MortalityError::InvalidParameter("constant hazard must be nonnegative"));
        }
        Ok(Self::Constant { delta })
    }

    pub fn current_age(&self) -> Option<f64> {
        match *self {
            Self::Gompertz { current_age, .. } => Some(current_age),
            Self::Constant { .. } => None,
        }
    }

    /// Same law viewed from a different current age.
    pub fn at_age(&self, age: f64) -> Self {
        match *self {
            Self::Gompertz { modal_age, dispersion, .. } => {
                Self::Gompertz { modal_age, dispersion, current_age: age }
            }
            c @ Self::Constant { .. } => c,
        }
    }

    /// Hazard rate t years after the current age.
    pub fn force_of_mortality(&self, t: f64) -> f64 {
        match *self {
            Self::Gompertz { modal_age, dispersion, current_age } => {
                ((current_age + t - modal_age) / dispersion).exp() / dispersion
            }
            Self::Constant { delta } => delta,
        }
    }

    /// Integrated hazard over [0, t].
    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        match *self {
            Self::Gompertz { modal_age, dispersion, current_age } => {
                ((current_age - modal_age) / dispersion).exp() * (t / dispersion).exp_m1()
            }
            Self::Constant { delta } => delta * t,
        }
    }

    pub fn survival_probability(&self, t: f64) -> f64 {
        (-self.cumulative_hazard(t)).exp()
    }
}

/// How the annuity payout is normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateConvention {
    /// Payout per unit premium, 1/ä.
    #[default]
    PerPremium,
    /// The literal age-over-factor expression, kept for comparison only.
    LiteralAge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnuityQuote {
    /// Present value of a unit life annuity.
    pub factor: f64,
    pub rate: f64,
    /// Horizon at which the integral was truncated.
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountSpec {
    pub beta: f64,
    pub mortality: MortalityModel,
}

impl DiscountSpec {
    pub fn new(beta: f64, mortality: MortalityModel) -> Result<Self, MortalityError> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(MortalityError::InvalidParameter("beta must be positive"));
        }
        Ok(Self { beta, mortality })
    }

    /// (instantaneous rate beta + delta_t, cumulative exponent beta*t + H(t)).
    pub fn effective_discount(&self, t: f64) -> (f64, f64) {
        (
            self.beta + self.mortality.force_of_mortality(t),
            self.beta * t + self.mortality.cumulative_hazard(t),
        )
    }

    pub fn discount_factor(&self, t: f64) -> f64 {
        (-self.effective_discount(t).1).exp()
    }

    pub fn fair_annuity_rate(&self) -> Result<f64, MortalityError> {
        Ok(self.annuity_quote(RateConvention::PerPremium)?.rate)
    }

    /// Actuarially fair life annuity priced by quadrature.
    ///
    /// Gompertz integrals stop where survival drops below [`SURVIVAL_CUTOFF`].
    /// A constant hazard never gets there, so its integral runs to
    /// [`MAX_TRUNCATION_YEARS`] and the exponential tail is added exactly.
    pub fn annuity_quote(&self, convention: RateConvention) -> Result<AnnuityQuote, MortalityError> {
        let tol = Tolerance::default();
        let integrand = |s: f64| (-self.beta * s).exp() * self.mortality.survival_probability(s);
        let (horizon, tail) = match self.mortality {
            MortalityModel::Gompertz { .. } => (self.truncation_horizon()?, 0.0),
            MortalityModel::Constant { delta } => {
                let mu = self.beta + delta;
                (MAX_TRUNCATION_YEARS, (-mu * MAX_TRUNCATION_YEARS).exp() / mu)
            }
        };
        // Split the range so each panel sees a comparable decay.
        let pieces = (horizon / 10.0).ceil().max(1.0) as usize;
        let width = horizon / pieces as f64;
        let mut factor = tail;
        for i in 0..pieces {
            let a = i as f64 * width;
            let b = if i + 1 == pieces { horizon } else { a + width };
            factor += integrate(integrand, a, b, &tol)?;
        }
        let rate = match convention {
            RateConvention::PerPremium => 1.0 / factor,
            RateConvention::LiteralAge => self.mortality.current_age().unwrap_or(0.0) / factor,
        };
        Ok(AnnuityQuote { factor, rate, horizon })
    }

    fn truncation_horizon(&self) -> Result<f64, MortalityError> {
        if self.mortality.survival_probability(MAX_TRUNCATION_YEARS) >= SURVIVAL_CUTOFF {
            return Err(MortalityError::TruncationFailure);
        }
        // H(t) = ln(1/cutoff) has an explicit solution for Gompertz.
        if let MortalityModel::Gompertz { modal_age, dispersion, current_age } = self.mortality {
            let target = -SURVIVAL_CUTOFF.ln();
            let scale = ((current_age - modal_age) / dispersion).exp();
            let t = dispersion * (1.0 + target / scale).ln();
            return Ok(t.min(MAX_TRUNCATION_YEARS));
        }
        Ok(MAX_TRUNCATION_YEARS)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> MortalityModel {
        MortalityModel::gompertz(85.0, 10.0, 60.0).unwrap()
    }

    #[test]
    fn hazard_examples() {
        let at_mode = MortalityModel::gompertz(60.0, 10.0, 60.0).unwrap();
        assert!((at_mode.force_of_mortality(0.0) - 0.1).abs() < 1e-15);
        let later = MortalityModel::gompertz(80.0, 10.0, 60.0).unwrap();
        assert!((later.force_of_mortality(20.0) - 0.1).abs() < 1e-15);
        assert!((base().force_of_mortality(10.0) - 0.0223130).abs() < 1e-7);
    }

    #[test]
    fn cumulative_hazard_examples() {
        assert_eq!(base().cumulative_hazard(0.0), 0.0);
        assert!((base().cumulative_hazard(10.0) - 0.141_045_161_524_531).abs() < 1e-13);
        let at_mode = MortalityModel::gompertz(60.0, 10.0, 60.0).unwrap();
        assert!((at_mode.cumulative_hazard(10.0) - (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn survival_examples() {
        assert_eq!(base().survival_probability(0.0), 1.0);
        assert!((base().survival_probability(10.0) - 0.868_450_090_281_969).abs() < 1e-13);
        let c = MortalityModel::constant(0.02).unwrap();
        assert!((c.survival_probability(7.0) - (-0.14f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn discount_examples() {
        let spec = DiscountSpec::new(0.03, base()).unwrap();
        let (inst, cum) = spec.effective_discount(0.0);
        assert_eq!(cum, 0.0);
        assert!((inst - 0.03 - 0.1 * (-2.5f64).exp()).abs() < 1e-15);
        assert!((spec.effective_discount(10.0).1 - 0.441_045_161_524_531).abs() < 1e-13);
        let at_mode = DiscountSpec::new(0.03, MortalityModel::gompertz(60.0, 10.0, 60.0).unwrap()).unwrap();
        assert!((at_mode.effective_discount(0.0).0 - 0.13).abs() < 1e-15);
    }

    #[test]
    fn constant_hazard_annuity() {
        let spec = DiscountSpec::new(0.03, MortalityModel::constant(0.02).unwrap()).unwrap();
        let q = spec.annuity_quote(RateConvention::PerPremium).unwrap();
        assert!((q.factor - 20.0).abs() < 1e-8);
        assert!((q.rate - 0.05).abs() < 1e-10);
        let no_death = DiscountSpec::new(0.05, MortalityModel::constant(0.0).unwrap()).unwrap();
        assert!((no_death.fair_annuity_rate().unwrap() - 0.05).abs() < 1e-10);
    }

    #[test]
    fn gompertz_annuity_regression() {
        let spec = DiscountSpec::new(0.03, base()).unwrap();
        let q = spec.annuity_quote(RateConvention::PerPremium).unwrap();
        // Frozen from an independent adaptive Gauss-Kronrod evaluation.
        assert!((q.rate - GOMPERTZ_BASE_RATE).abs() < 1e-8, "rate {}", q.rate);
        assert!(q.rate > 0.03);
        let lit = spec.annuity_quote(RateConvention::LiteralAge).unwrap();
        assert!((lit.rate - 60.0 * q.rate).abs() < 1e-9);
    }

    #[test]
    fn gompertz_annuity_matches_trapezoid() {
        let spec = DiscountSpec::new(0.03, base()).unwrap();
        let q = spec.annuity_quote(RateConvention::PerPremium).unwrap();
        let h = 1e-3;
        let n = (q.horizon / h).round() as usize;
        let f = |s: f64| (-0.03 * s).exp() * base().survival_probability(s);
        let mut trap = 0.5 * (f(0.0) + f(n as f64 * h));
        for i in 1..n {
            trap += f(i as f64 * h);
        }
        trap *= h;
        assert!((trap - q.factor).abs() / q.factor < 1e-8);
    }

    #[test]
    fn truncation_failure_for_immortal_gompertz() {
        let slow = MortalityModel::gompertz(5000.0, 1000.0, 0.0).unwrap();
        let spec = DiscountSpec::new(0.03, slow).unwrap();
        assert!(matches!(spec.fair_annuity_rate(), Err(MortalityError::TruncationFailure)));
    }

    const GOMPERTZ_BASE_RATE: f64 = 0.065_575_197_104_85;
}

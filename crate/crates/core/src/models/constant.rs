use crate::{Error, Real, Result};

/// Single risky asset with constant drift and volatility (arithmetic price
/// increments `dS = μ dt + σ dW`) and an investor with constant absolute risk
/// aversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantModel<T> {
    mu_s: T,
    sigma_s: T,
    s0: T,
    risk_aversion: T,
}

impl<T: Real> ConstantModel<T> {
    pub fn new(mu_s: T, sigma_s: T, s0: T, risk_aversion: T) -> Result<Self> {
        for (name, v) in [("mu_s", mu_s), ("sigma_s", sigma_s), ("s0", s0), ("risk_aversion", risk_aversion)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter { name, rule: "must be finite".into() });
            }
        }
        if sigma_s <= T::zero() {
            return Err(Error::InvalidParameter {
                name: "sigma_s",
                rule: "volatility must be > 0".into(),
            });
        }
        if risk_aversion <= T::zero() {
            return Err(Error::InvalidParameter {
                name: "risk_aversion",
                rule: "risk aversion must be > 0".into(),
            });
        }
        Ok(Self { mu_s, sigma_s, s0, risk_aversion })
    }

    pub fn mu_s(&self) -> T {
        self.mu_s
    }

    pub fn sigma_s(&self) -> T {
        self.sigma_s
    }

    pub fn s0(&self) -> T {
        self.s0
    }

    pub fn risk_aversion(&self) -> T {
        self.risk_aversion
    }

    /// Market price of risk `λ = μ/σ`.
    pub fn market_price_of_risk(&self) -> T {
        self.mu_s / self.sigma_s
    }
}

/// The optimal constant share position for the constant-coefficient model
/// with exponential utility: `μ / (r σ²)`.
pub fn merton_strategy<T: Real>(m: &ConstantModel<T>) -> T {
    m.mu_s() / (m.risk_aversion() * m.sigma_s() * m.sigma_s())
}

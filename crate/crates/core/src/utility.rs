//! Exponential utility, the first-order optimality residual linking marginal
//! utility to the dual density, and paired utility-loss estimation.

use crate::estimator::{mean_and_stderr, pairwise_sum};
use crate::{Error, Real, Result};

/// Utility family. Only the exponential member ships; the interface keeps the
/// evaluation points generic so other bounded-risk-aversion utilities can be
/// added without touching callers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityKind {
    Exponential,
}

/// A utility function `U(x) = −e^{−rx}` with constant absolute risk aversion
/// `r = −U''/U' > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilitySpec<T> {
    kind: UtilityKind,
    risk_aversion: T,
}

impl<T: Real> UtilitySpec<T> {
    /// Exponential utility with absolute risk aversion `r > 0`.
    pub fn exponential(risk_aversion: T) -> Result<Self> {
        if !(risk_aversion > T::zero()) || !risk_aversion.is_finite() {
            return Err(Error::InvalidParameter {
                name: "risk_aversion",
                rule: "must be finite and > 0".into(),
            });
        }
        Ok(Self { kind: UtilityKind::Exponential, risk_aversion })
    }

    pub fn kind(&self) -> UtilityKind {
        self.kind
    }

    pub fn risk_aversion(&self) -> T {
        self.risk_aversion
    }

    /// `U(x) = −e^{−rx}`.
    pub fn evaluate(&self, x: T) -> T {
        -(-self.risk_aversion * x).exp()
    }

    /// `U'(x) = r e^{−rx}`.
    pub fn marginal(&self, x: T) -> T {
        self.risk_aversion * (-self.risk_aversion * x).exp()
    }

    /// `U''(x) = −r² e^{−rx}`.
    pub fn second_derivative(&self, x: T) -> T {
        -self.risk_aversion * self.risk_aversion * (-self.risk_aversion * x).exp()
    }
}

/// Pointwise utility evaluation; convenience wrapper over
/// [`UtilitySpec::evaluate`].
pub fn evaluate_utility<T: Real>(u: &UtilitySpec<T>, x: T) -> T {
    u.evaluate(x)
}

/// Monte Carlo statistics of the first-order-condition residual
/// `U'(X_T)/mean(U') − dQ̂/dP`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocStats<T> {
    pub rms: T,
    /// Standard error of the RMS via the delta method on `mean(residual²)`.
    pub rms_stderr: T,
    pub max_abs: T,
    pub n_paths: usize,
}

/// Measures how far an ensemble of terminal wealths is from first-order
/// optimality: for the optimal strategy, normalized marginal utility equals
/// the realized change-of-measure density path by path.
///
/// `terminal_wealth[i]` and `density[i]` must come from the same path, with
/// the density the terminal value of the exponentiated Girsanov log-density
/// simulated under the physical measure.
pub fn foc_residual<T: Real>(
    terminal_wealth: &[T],
    density: &[T],
    u: &UtilitySpec<T>,
) -> Result<FocStats<T>> {
    if terminal_wealth.is_empty() {
        return Err(Error::DegenerateSample("first-order residual of an empty ensemble".into()));
    }
    if terminal_wealth.len() != density.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} wealth samples but {} density samples",
            terminal_wealth.len(),
            density.len()
        )));
    }
    let n = T::of(terminal_wealth.len() as f64);
    let marginals: Vec<T> = terminal_wealth.iter().map(|&x| u.marginal(x)).collect();
    let mean_marginal = pairwise_sum(&marginals) / n;
    if !(mean_marginal > T::zero()) || !mean_marginal.is_finite() {
        return Err(Error::DegenerateSample(format!(
            "mean marginal utility {mean_marginal} is not positive and finite"
        )));
    }
    let residuals: Vec<T> =
        marginals.iter().zip(density).map(|(&m, &q)| m / mean_marginal - q).collect();
    let squares: Vec<T> = residuals.iter().map(|&r| r * r).collect();
    let (mean_sq, mean_sq_se) = mean_and_stderr(&squares)?;
    let rms = mean_sq.max(T::zero()).sqrt();
    let rms_stderr = if rms > T::zero() { mean_sq_se / (T::of(2.0) * rms) } else { T::zero() };
    let max_abs = residuals.iter().fold(T::zero(), |acc, &r| acc.max(r.abs()));
    Ok(FocStats { rms, rms_stderr, max_abs, n_paths: terminal_wealth.len() })
}

/// Paired Monte Carlo estimate of a utility gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEstimate<T> {
    pub loss: T,
    pub stderr: T,
    pub n_paths: usize,
}

/// Estimates `E[U(X^free_T)] − E[U(X^fric_T)]` from ensembles simulated with
/// common random numbers, using paired differences for the error bar.
pub fn utility_loss<T: Real>(
    frictional: &[T],
    frictionless: &[T],
    u: &UtilitySpec<T>,
) -> Result<LossEstimate<T>> {
    if frictional.len() != frictionless.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} frictional vs {} frictionless wealth samples",
            frictional.len(),
            frictionless.len()
        )));
    }
    if frictional.is_empty() {
        return Err(Error::DegenerateSample("utility loss of an empty ensemble".into()));
    }
    let diffs: Vec<T> = frictionless
        .iter()
        .zip(frictional)
        .map(|(&free, &fric)| u.evaluate(free) - u.evaluate(fric))
        .collect();
    let (loss, stderr) = mean_and_stderr(&diffs)?;
    Ok(LossEstimate { loss, stderr, n_paths: frictional.len() })
}

use crate::models::scenario::MarketScenario;
use crate::paths::quadratic_variation;
use crate::{Error, Real, Result};

/// Per-path realizations of the moment quantities whose finiteness the
/// certificate arguments rely on: power integrals of the local target/price
/// coefficients and exponential moments of quadratic variation and of the
/// net target swing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticSample<T> {
    /// `∫₀ᵀ (|μ^θ_t|^p + |σ^θ_t|^p) dt`
    pub target_coeff_lp: T,
    /// `∫₀ᵀ (|μ^S_t|^p + |σ^S_t|^p) dt`
    pub price_coeff_lp: T,
    /// `e^{ι ⟨θ⟩_T}`
    pub exp_qv_target: T,
    /// `e^{ι ⟨S⟩_T}`
    pub exp_qv_price: T,
    /// `e^{ι (θ_T − θ_0)}` — the integral `∫ ξ dθ` with ξ ≡ +1
    pub exp_swing_up: T,
    /// `e^{−ι (θ_T − θ_0)}` — the same integral with ξ ≡ −1
    pub exp_swing_down: T,
}

/// Computes the moment quantities along one simulated scenario, with power
/// `p ≥ 1` for the coefficient integrals and exponent `ι ≥ 0` for the
/// exponential moments. Sums use the left endpoint of each interval.
pub fn diagnostic_sample<T: Real>(
    scenario: &MarketScenario<T>,
    p: T,
    iota: T,
) -> Result<DiagnosticSample<T>> {
    if !(p >= T::one()) || !p.is_finite() {
        return Err(Error::InvalidParameter { name: "p", rule: "must be finite and >= 1".into() });
    }
    if !(iota >= T::zero()) || !iota.is_finite() {
        return Err(Error::InvalidParameter { name: "iota", rule: "must be finite and >= 0".into() });
    }
    let grid = scenario.grid();
    let dt = grid.dt();
    let n = grid.n_steps();
    let mut target_lp = T::zero();
    let mut price_lp = T::zero();
    for k in 0..n {
        target_lp += (scenario.target_drift().scalar_at(k).abs().powf(p)
            + scenario.target_vol().scalar_at(k).abs().powf(p))
            * dt;
        price_lp += (scenario.price_drift().scalar_at(k).abs().powf(p)
            + scenario.price_vol().scalar_at(k).abs().powf(p))
            * dt;
    }
    let qv_target = quadratic_variation(scenario.target()).terminal_scalar();
    let qv_price = quadratic_variation(scenario.price()).terminal_scalar();
    let swing = scenario.target().terminal_scalar() - scenario.target().scalar_at(0);
    Ok(DiagnosticSample {
        target_coeff_lp: target_lp,
        price_coeff_lp: price_lp,
        exp_qv_target: (iota * qv_target).exp(),
        exp_qv_price: (iota * qv_price).exp(),
        exp_swing_up: (iota * swing).exp(),
        exp_swing_down: (-iota * swing).exp(),
    })
}

/// Sample mean with its standard error and a tail-heaviness flag: the flag
/// fires when the top decile of the sample carries more than half of the
/// total mass, a sign that the Monte Carlo average is dominated by rare
/// paths and the corresponding moment may not be finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate<T> {
    pub mean: T,
    pub stderr: T,
    pub tail_heavy: bool,
}

/// Ensemble summary of [`DiagnosticSample`] values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticReport<T> {
    pub target_coeff_lp: MomentEstimate<T>,
    pub price_coeff_lp: MomentEstimate<T>,
    pub exp_qv_target: MomentEstimate<T>,
    pub exp_qv_price: MomentEstimate<T>,
    pub exp_swing_up: MomentEstimate<T>,
    pub exp_swing_down: MomentEstimate<T>,
}

fn moment<T: Real>(values: &mut [T]) -> MomentEstimate<T> {
    let n = T::of(values.len() as f64);
    let mean = values.iter().fold(T::zero(), |acc, &v| acc + v) / n;
    let stderr = if values.len() < 2 {
        T::zero()
    } else {
        let var = values
            .iter()
            .fold(T::zero(), |acc, &v| acc + (v - mean) * (v - mean))
            / (n - T::one());
        (var / n).sqrt()
    };
    values.sort_by(|a, b| b.partial_cmp(a).expect("diagnostic values must be comparable"));
    let top = values.len().div_ceil(10);
    let top_sum = values[..top].iter().fold(T::zero(), |acc, &v| acc + v);
    let total = mean * n;
    let tail_heavy = total > T::zero() && top_sum > T::of(0.5) * total;
    MomentEstimate { mean, stderr, tail_heavy }
}

/// Aggregates per-path samples into mean/standard-error estimates with
/// tail-heaviness flags. Errors on an empty ensemble.
pub fn assumption_diagnostics<T: Real>(
    samples: &[DiagnosticSample<T>],
) -> Result<DiagnosticReport<T>> {
    if samples.is_empty() {
        return Err(Error::DegenerateSample("diagnostics need at least one sample".into()));
    }
    let col = |f: fn(&DiagnosticSample<T>) -> T| -> MomentEstimate<T> {
        let mut v: Vec<T> = samples.iter().map(f).collect();
        moment(&mut v)
    };
    Ok(DiagnosticReport {
        target_coeff_lp: col(|s| s.target_coeff_lp),
        price_coeff_lp: col(|s| s.price_coeff_lp),
        exp_qv_target: col(|s| s.exp_qv_target),
        exp_qv_price: col(|s| s.exp_qv_price),
        exp_swing_up: col(|s| s.exp_swing_up),
        exp_swing_down: col(|s| s.exp_swing_down),
    })
}

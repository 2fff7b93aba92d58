//! Wealth processes with and without proportional costs, and pathwise
//! certificates that dominate turnover and tracking error.
//!
//! For a band-tracking run with half-width `δ` and normalized deviation
//! `Z = (θ − position)/δ`, the realized certificates are
//!
//! ```text
//! turnover:  |ϑ|_t ≤ R_δ(ξ)_t  = 2dδ + ∫ ξᵀ dθ + (1/2δ) ⟨θ⟩_t ,   ξ = Z,
//! tracking:  |X_fric − X_free|_t ≤ R̄_t = δ·|∫ ξᵀ dS| + 2ε·R_δ(ξ')_t ,
//!            ξ = (ϑ − θ)/δ = −Z,  ξ' = Z .
//! ```
//!
//! All integrals are left-endpoint sums and brackets are realized squared
//! increments, which makes the inequalities hold step by step up to floating
//! point rounding (each trade contributes a nonpositive residual). The module
//! also evaluates the monetary-mode certificate, where costs are proportional
//! to currency traded and the bound picks up returns-process terms.

use std::io::Write;

use ndarray::Array2;

use crate::paths::Path;
use crate::tracker::{TradeMode, TrackerRun};
use crate::{Error, Real, Result};

/// Proportional cost rate and the parametrization it applies to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSpec<T> {
    epsilon: T,
    mode: TradeMode,
}

impl<T: Real> CostSpec<T> {
    /// A proportional cost `epsilon ≥ 0` (per share traded in shares mode,
    /// per currency unit traded in monetary mode).
    pub fn new(epsilon: T, mode: TradeMode) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < T::zero() {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                rule: "cost rate must be finite and >= 0".into(),
            });
        }
        Ok(Self { epsilon, mode })
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn mode(&self) -> TradeMode {
        self.mode
    }
}

/// A dominated quantity, its certificate, and summary diagnostics.
#[derive(Debug, Clone)]
pub struct BoundReport<T: Real> {
    /// The quantity being dominated (running turnover, or |wealth gap|).
    lhs: Path<T>,
    /// The certificate path evaluated with the realized processes.
    bound: Path<T>,
    /// `min_t (bound_t − lhs_t)`; nonnegative up to rounding for valid runs.
    slack_min: T,
    /// Signed defect of the underlying pathwise identity at the time where
    /// its magnitude peaks. For in-band starts it is the accumulated
    /// overshoot correction, hence nonpositive, and it vanishes under grid
    /// refinement.
    identity_residual: T,
    /// The realized certificate process (the normalized deviation, clipped).
    xi_used: Path<T>,
}

impl<T: Real> BoundReport<T> {
    pub fn lhs(&self) -> &Path<T> {
        &self.lhs
    }

    pub fn bound(&self) -> &Path<T> {
        &self.bound
    }

    pub fn slack_min(&self) -> T {
        self.slack_min
    }

    pub fn identity_residual(&self) -> T {
        self.identity_residual
    }

    pub fn xi_used(&self) -> &Path<T> {
        &self.xi_used
    }

    /// Writes the time series as CSV with columns `path_id,t,lhs,rhs,slack`.
    pub fn write_csv<W: Write>(&self, path_id: u64, mut out: W) -> std::io::Result<()> {
        writeln!(out, "path_id,t,lhs,rhs,slack")?;
        let grid = self.lhs.grid();
        for k in 0..self.lhs.n_points() {
            let lhs = self.lhs.scalar_at(k);
            let rhs = self.bound.scalar_at(k);
            writeln!(out, "{},{},{},{},{}", path_id, grid.t(k), lhs, rhs, rhs - lhs)?;
        }
        Ok(())
    }
}

fn require_same_shape<T: Real>(a: &Path<T>, b: &Path<T>, what: &str) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!("{what} must share grid and dimension")))
    }
}

/// Wealth of a self-financing frictionless position: `X0 + ∫ θᵀ dS` as a
/// left-endpoint sum.
pub fn wealth_frictionless<T: Real>(theta: &Path<T>, s: &Path<T>, x0: T) -> Result<Path<T>> {
    require_same_shape(theta, s, "strategy and price")?;
    let n = theta.grid().n_steps();
    let d = theta.dim();
    let mut values = Array2::zeros((n + 1, 1));
    let mut acc = x0;
    values[[0, 0]] = acc;
    for k in 0..n {
        for i in 0..d {
            acc += theta.at(k, i) * s.step(k, i);
        }
        values[[k + 1, 0]] = acc;
    }
    Ok(Path::from_values_unchecked(*theta.grid(), values))
}

/// Wealth of the tracking position net of proportional costs.
///
/// Shares mode: `X0 + ∫ ϑᵀ dS − ε·|ϑ|_t − 1_{t=T}·ε·Σ|ϑ_T|`. Monetary mode:
/// the gains term is `∫ (Y/S)ᵀ dS` and the terminal charge is `ε·Σ|Y_T|`.
/// The cost mode must match the run's mode.
pub fn wealth_frictional<T: Real>(
    run: &TrackerRun<T>,
    s: &Path<T>,
    x0: T,
    cost: &CostSpec<T>,
) -> Result<Path<T>> {
    if cost.mode() != run.mode() {
        return Err(Error::InvalidParameter {
            name: "cost.mode",
            rule: "cost parametrization must match the tracking run".into(),
        });
    }
    require_same_shape(run.position(), s, "position and price")?;
    let n = s.grid().n_steps();
    let d = s.dim();
    let eps = cost.epsilon();
    let mut values = Array2::zeros((n + 1, 1));
    let mut gains = T::zero();
    values[[0, 0]] = x0 - eps * run.turnover().scalar_at(0);
    for k in 0..n {
        for i in 0..d {
            let holding = match run.mode() {
                TradeMode::Shares => run.position().at(k, i),
                TradeMode::Monetary => run.position().at(k, i) / s.at(k, i),
            };
            gains += holding * s.step(k, i);
        }
        values[[k + 1, 0]] = x0 + gains - eps * run.turnover().scalar_at(k + 1);
    }
    values[[n, 0]] -= eps * run.terminal_liquidation();
    Ok(Path::from_values_unchecked(*s.grid(), values))
}

/// Shared plumbing for the shares-mode turnover certificate: evaluates the
/// certificate path, the minimal slack and the identity defect.
struct TurnoverCertificate<T: Real> {
    bound: Path<T>,
    slack_min: T,
    identity_residual: T,
}

fn shares_turnover_certificate<T: Real>(
    theta: &Path<T>,
    run: &TrackerRun<T>,
    delta: T,
) -> TurnoverCertificate<T> {
    let n = theta.grid().n_steps();
    let d = theta.dim();
    let two = T::of(2.0);
    let half = T::of(0.5);
    let z = run.xi_realized();

    let mut bound = Array2::zeros((n + 1, 1));
    let constant = two * T::from_usize(d).expect("small dimension") * delta;
    let mut integral = T::zero(); // ∫ ξᵀ dθ
    let mut qv = T::zero(); // ⟨θ⟩
    bound[[0, 0]] = constant;
    let mut slack_min = constant - run.turnover().scalar_at(0);
    // Identity defect: turnover − [δ(φ(Z_0) − φ(Z_t)) + ∫ φ'(Z)dθ + ⟨θ⟩/2δ]
    // with φ(z) = z²/2, summed over components.
    let phi0 = (0..d).fold(T::zero(), |acc, i| acc + half * z.at(0, i) * z.at(0, i));
    // At time zero the identity right-hand side vanishes, so the defect is
    // exactly the initial jump.
    let mut residual_peak = run.turnover().scalar_at(0);
    for k in 0..n {
        for i in 0..d {
            let dtheta = theta.step(k, i);
            integral += z.at(k, i) * dtheta;
            qv += dtheta * dtheta;
        }
        let b = constant + integral + qv / (two * delta);
        bound[[k + 1, 0]] = b;
        let slack = b - run.turnover().scalar_at(k + 1);
        if slack < slack_min {
            slack_min = slack;
        }
        let phi_t = (0..d).fold(T::zero(), |acc, i| {
            acc + half * z.at(k + 1, i) * z.at(k + 1, i)
        });
        let residual = run.turnover().scalar_at(k + 1)
            - (delta * (phi0 - phi_t) + integral + qv / (two * delta));
        if residual.abs() > residual_peak.abs() {
            residual_peak = residual;
        }
    }
    TurnoverCertificate {
        bound: Path::from_values_unchecked(*theta.grid(), bound),
        slack_min,
        identity_residual: residual_peak,
    }
}

fn validate_bound_delta<T: Real>(delta: T, run: &TrackerRun<T>) -> Result<()> {
    if delta <= T::zero() || delta >= T::one() {
        return Err(Error::InvalidParameter {
            name: "delta",
            rule: "certificate evaluation requires delta in (0, 1)".into(),
        });
    }
    if delta != run.delta() {
        return Err(Error::InvalidParameter {
            name: "delta",
            rule: "certificate delta must equal the run's band half-width".into(),
        });
    }
    Ok(())
}

/// Evaluates the turnover certificate `R_δ(ξ)_t` with `ξ = Z` along the run
/// and reports the minimal slack `min_t (R_t − |ϑ|_t)` together with the
/// pathwise identity defect.
pub fn turnover_bound<T: Real>(
    theta: &Path<T>,
    run: &TrackerRun<T>,
    delta: T,
) -> Result<BoundReport<T>> {
    validate_bound_delta(delta, run)?;
    require_same_shape(theta, run.position(), "target and run")?;
    let cert = shares_turnover_certificate(theta, run, delta);
    Ok(BoundReport {
        lhs: run.turnover().clone(),
        bound: cert.bound,
        slack_min: cert.slack_min,
        identity_residual: cert.identity_residual,
        xi_used: run.xi_realized().clone(),
    })
}

/// Evaluates the tracking-error certificate
/// `R̄_t = δ·|∫ ξᵀ dS| + 2ε·R_δ(ξ')_t` against `|X_fric − X_free|` and
/// reports the minimal slack. Shares mode only.
pub fn tracking_bound<T: Real>(
    run: &TrackerRun<T>,
    s: &Path<T>,
    cost: &CostSpec<T>,
    x_fric: &Path<T>,
    x_free: &Path<T>,
) -> Result<BoundReport<T>> {
    if run.mode() != TradeMode::Shares || cost.mode() != TradeMode::Shares {
        return Err(Error::InvalidParameter {
            name: "mode",
            rule: "tracking certificate applies to shares-mode runs".into(),
        });
    }
    let delta = run.delta();
    validate_bound_delta(delta, run)?;
    require_same_shape(run.theta(), s, "target and price")?;
    require_same_shape(x_fric, x_free, "wealth paths")?;
    let theta = run.theta();
    let cert = shares_turnover_certificate(theta, run, delta);
    let n = s.grid().n_steps();
    let d = s.dim();
    let two = T::of(2.0);
    let eps = cost.epsilon();
    let z = run.xi_realized();

    let mut xi = Array2::zeros((n + 1, d));
    for k in 0..=n {
        for i in 0..d {
            xi[[k, i]] = -z.at(k, i);
        }
    }

    let mut bound = Array2::zeros((n + 1, 1));
    let mut lhs = Array2::zeros((n + 1, 1));
    let mut integral = T::zero(); // ∫ ξᵀ dS with ξ = (ϑ − θ)/δ
    lhs[[0, 0]] = (x_fric.scalar_at(0) - x_free.scalar_at(0)).abs();
    bound[[0, 0]] = two * eps * cert.bound.scalar_at(0);
    let mut slack_min = bound[[0, 0]] - lhs[[0, 0]];
    for k in 0..n {
        for i in 0..d {
            integral += xi[[k, i]] * s.step(k, i);
        }
        let b = delta * integral.abs() + two * eps * cert.bound.scalar_at(k + 1);
        bound[[k + 1, 0]] = b;
        lhs[[k + 1, 0]] = (x_fric.scalar_at(k + 1) - x_free.scalar_at(k + 1)).abs();
        let slack = b - lhs[[k + 1, 0]];
        if slack < slack_min {
            slack_min = slack;
        }
    }
    Ok(BoundReport {
        lhs: Path::from_values_unchecked(*s.grid(), lhs),
        bound: Path::from_values_unchecked(*s.grid(), bound),
        slack_min,
        identity_residual: cert.identity_residual,
        xi_used: Path::from_values_unchecked(*s.grid(), xi),
    })
}

/// Cumulative simple-returns path `M` with `M_0 = 0` and
/// `ΔM_k = (S_{k+1} − S_k)/S_k` per component. Requires strictly positive
/// prices.
pub fn returns_path<T: Real>(price: &Path<T>) -> Result<Path<T>> {
    if price.values().iter().any(|&s| s <= T::zero()) {
        return Err(Error::InvalidParameter {
            name: "price",
            rule: "returns require a strictly positive price path".into(),
        });
    }
    let n = price.grid().n_steps();
    let d = price.dim();
    let mut values = Array2::zeros((n + 1, d));
    for i in 0..d {
        let mut acc = T::zero();
        for k in 0..n {
            acc += price.step(k, i) / price.at(k, i);
            values[[k + 1, i]] = acc;
        }
    }
    Ok(Path::from_values_unchecked(*price.grid(), values))
}

/// Evaluates the monetary-mode turnover certificate along a run. With
/// `Z = (θ − Y)/δ` and the returns process `M`, the realized bound is, per
/// component,
///
/// ```text
/// δ·(2 + ∫ Z² dM + ½⟨M⟩) + (∫ Z dθ − ∫ Zθ dM − ∫ Zθ d⟨M⟩ + ∫ Z d⟨M,θ⟩)
///   + (1/δ)·(½⟨θ⟩ + ½∫ θ² d⟨M⟩ − ∫ θ d⟨M,θ⟩) ,
/// ```
///
/// with realized brackets `Δ⟨M⟩ = (ΔM)²`, `Δ⟨M,θ⟩ = ΔM·Δθ`. When the price
/// is constant (`M ≡ 0`) this reduces to the shares-mode certificate.
pub fn monetary_turnover_bound<T: Real>(
    run: &TrackerRun<T>,
    m: &Path<T>,
    theta: &Path<T>,
    delta: T,
) -> Result<BoundReport<T>> {
    if run.mode() != TradeMode::Monetary {
        return Err(Error::InvalidParameter {
            name: "run.mode",
            rule: "monetary certificate requires a monetary-mode run".into(),
        });
    }
    validate_bound_delta(delta, run)?;
    require_same_shape(theta, run.position(), "target and run")?;
    require_same_shape(theta, m, "target and returns")?;

    let n = theta.grid().n_steps();
    let d = theta.dim();
    let two = T::of(2.0);
    let half = T::of(0.5);
    let z = run.xi_realized();

    let two_d = two * T::from_usize(d).expect("small dimension");
    let mut bound = Array2::zeros((n + 1, 1));
    bound[[0, 0]] = two_d * delta;
    let mut delta_group = T::zero(); // ∫ Z² dM + ½⟨M⟩
    let mut mid_group = T::zero(); // the four order-one integrals
    let mut inv_group = T::zero(); // ½⟨θ⟩ + ½∫θ²d⟨M⟩ − ∫θ d⟨M,θ⟩
    let mut slack_min = bound[[0, 0]] - run.turnover().scalar_at(0);

    // Identity defect uses the exact expansion (φ(z) = z²/2): turnover −
    // [δ(φ(Z_0) − φ(Z_t)) + δ∫Z²dM + (δ/2)∫Z²d⟨M⟩ + mid + inv/δ].
    let phi0 = (0..d).fold(T::zero(), |acc, i| acc + half * z.at(0, i) * z.at(0, i));
    let mut exact_delta_group = T::zero(); // ∫ Z² dM + ½∫ Z² d⟨M⟩
    let mut residual_peak = run.turnover().scalar_at(0);

    for k in 0..n {
        for i in 0..d {
            let zi = z.at(k, i);
            let th = theta.at(k, i);
            let dth = theta.step(k, i);
            let dm = m.step(k, i);
            let dqm = dm * dm;
            delta_group += zi * zi * dm + half * dqm;
            exact_delta_group += zi * zi * dm + half * zi * zi * dqm;
            mid_group += zi * dth - zi * th * dm - zi * th * dqm + zi * dm * dth;
            inv_group += half * dth * dth + half * th * th * dqm - th * dm * dth;
        }
        let b = delta * (two_d + delta_group) + mid_group + inv_group / delta;
        bound[[k + 1, 0]] = b;
        let slack = b - run.turnover().scalar_at(k + 1);
        if slack < slack_min {
            slack_min = slack;
        }
        let phi_t = (0..d).fold(T::zero(), |acc, i| {
            acc + half * z.at(k + 1, i) * z.at(k + 1, i)
        });
        let residual = run.turnover().scalar_at(k + 1)
            - (delta * (phi0 - phi_t) + delta * exact_delta_group + mid_group
                + inv_group / delta);
        if residual.abs() > residual_peak.abs() {
            residual_peak = residual;
        }
    }
    Ok(BoundReport {
        lhs: run.turnover().clone(),
        bound: Path::from_values_unchecked(*theta.grid(), bound),
        slack_min,
        identity_residual: residual_peak,
        xi_used: run.xi_realized().clone(),
    })
}

use ndarray::Array2;

use crate::models::constant::{merton_strategy, ConstantModel};
use crate::models::kim_omberg::{ko_strategy, KimOmbergSolved};
use crate::models::measure::girsanov_log_density;
use crate::paths::{brownian_increments, Path, SeedSpec, TimeGrid};
use crate::{Error, Real, Result};

/// Probability measure under which a scenario is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// The measure of the model's stated dynamics.
    Physical,
    /// The martingale measure induced by the optimal strategy; prices are
    /// driftless and the state dynamics pick up the dual drift adjustment.
    DualMartingale,
}

/// Target position process to be tracked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetSpec<T> {
    /// Constant optimal position of the constant-coefficient model.
    Merton,
    /// Affine optimal position of the mean-reverting drift model.
    KimOmberg,
    /// Driftless diffusion target `θ_t = scale · W_t`, independent of the
    /// price noise.
    PureBrownian { scale: T },
    /// Deterministic target `θ_t = slope · t`.
    DeterministicRamp { slope: T },
    /// Deterministic target `θ_t = amplitude · sin(ω t)`.
    DeterministicSine { amplitude: T, angular_freq: T },
}

/// Market model driving the price.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec<T> {
    Constant(ConstantModel<T>),
    KimOmberg(KimOmbergSolved<T>),
}

/// One simulated market path: price, target, their local drift/volatility
/// coefficients, and (under the physical measure) the log density of the
/// dual martingale measure along the path.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketScenario<T> {
    price: Path<T>,
    target: Path<T>,
    target_drift: Path<T>,
    target_vol: Path<T>,
    price_drift: Path<T>,
    price_vol: Path<T>,
    drift_state: Option<Path<T>>,
    dual_log_density: Option<Path<T>>,
}

impl<T: Real> MarketScenario<T> {
    pub fn grid(&self) -> &TimeGrid<T> {
        self.price.grid()
    }

    pub fn price(&self) -> &Path<T> {
        &self.price
    }

    pub fn target(&self) -> &Path<T> {
        &self.target
    }

    /// Drift coefficient of the target at each grid point, under the
    /// simulation measure.
    pub fn target_drift(&self) -> &Path<T> {
        &self.target_drift
    }

    /// Volatility coefficient of the target at each grid point.
    pub fn target_vol(&self) -> &Path<T> {
        &self.target_vol
    }

    /// Drift coefficient of the price at each grid point, under the
    /// simulation measure.
    pub fn price_drift(&self) -> &Path<T> {
        &self.price_drift
    }

    pub fn price_vol(&self) -> &Path<T> {
        &self.price_vol
    }

    /// Latent expected-return state, when the model has one.
    pub fn drift_state(&self) -> Option<&Path<T>> {
        self.drift_state.as_ref()
    }

    /// Log density `N_t` of the dual martingale measure relative to the
    /// physical measure along this path; only available when simulating
    /// under the physical measure.
    pub fn dual_log_density(&self) -> Option<&Path<T>> {
        self.dual_log_density.as_ref()
    }
}

fn unsupported<T>(rule: &str) -> Result<T> {
    Err(Error::InvalidParameter { name: "target", rule: rule.into() })
}

/// Simulates one market path for the given model/target pair under the
/// requested measure. Two independent noise columns are drawn: the first
/// drives the price, the second the target (or the drift state).
pub fn simulate_scenario<T: Real>(
    model: &ModelSpec<T>,
    target: &TargetSpec<T>,
    measure: Measure,
    seed: SeedSpec,
    grid: &TimeGrid<T>,
) -> Result<MarketScenario<T>> {
    match model {
        ModelSpec::Constant(m) => simulate_constant(m, target, measure, seed, grid),
        ModelSpec::KimOmberg(solved) => match target {
            TargetSpec::KimOmberg => simulate_kim_omberg(solved, measure, seed, grid),
            _ => unsupported("the mean-reverting drift model only supports its own optimal target"),
        },
    }
}

fn simulate_constant<T: Real>(
    m: &ConstantModel<T>,
    target: &TargetSpec<T>,
    measure: Measure,
    seed: SeedSpec,
    grid: &TimeGrid<T>,
) -> Result<MarketScenario<T>> {
    if matches!(target, TargetSpec::KimOmberg) {
        return unsupported("the constant-coefficient model has no mean-reverting optimal target");
    }
    let n = grid.n_steps();
    let dt = grid.dt();
    let dw = brownian_increments::<T>(seed, grid, 2);
    let lam = m.market_price_of_risk();

    let mut price = Array2::zeros((n + 1, 1));
    price[[0, 0]] = m.s0();
    let drift = match measure {
        Measure::Physical => m.mu_s(),
        Measure::DualMartingale => T::zero(),
    };
    for k in 0..n {
        price[[k + 1, 0]] = price[[k, 0]] + drift * dt + m.sigma_s() * dw[[k, 0]];
    }

    let mut theta = Array2::zeros((n + 1, 1));
    let mut theta_drift = Array2::zeros((n + 1, 1));
    let mut theta_vol = Array2::zeros((n + 1, 1));
    match *target {
        TargetSpec::Merton => {
            let pos = merton_strategy(m);
            for k in 0..=n {
                theta[[k, 0]] = pos;
            }
        }
        TargetSpec::PureBrownian { scale } => {
            for k in 0..n {
                theta[[k + 1, 0]] = theta[[k, 0]] + scale * dw[[k, 1]];
            }
            for k in 0..=n {
                theta_vol[[k, 0]] = scale;
            }
        }
        TargetSpec::DeterministicRamp { slope } => {
            for k in 0..=n {
                theta[[k, 0]] = slope * grid.t(k);
                theta_drift[[k, 0]] = slope;
            }
        }
        TargetSpec::DeterministicSine { amplitude, angular_freq } => {
            for k in 0..=n {
                let t = grid.t(k);
                theta[[k, 0]] = amplitude * (angular_freq * t).sin();
                theta_drift[[k, 0]] = amplitude * angular_freq * (angular_freq * t).cos();
            }
        }
        TargetSpec::KimOmberg => unreachable!("rejected above"),
    }

    let dual_log_density = match measure {
        Measure::Physical => {
            let lambda = Path::constant(*grid, lam)?;
            let mut wq = Array2::zeros((n, 1));
            for k in 0..n {
                wq[[k, 0]] = dw[[k, 0]] + lam * dt;
            }
            Some(girsanov_log_density(&lambda, &wq, grid)?)
        }
        Measure::DualMartingale => None,
    };

    Ok(MarketScenario {
        price: Path::from_values(*grid, price)?,
        target: Path::from_values(*grid, theta)?,
        target_drift: Path::from_values(*grid, theta_drift)?,
        target_vol: Path::from_values(*grid, theta_vol)?,
        price_drift: Path::constant(*grid, drift)?,
        price_vol: Path::constant(*grid, m.sigma_s())?,
        drift_state: None,
        dual_log_density,
    })
}

fn simulate_kim_omberg<T: Real>(
    solved: &KimOmbergSolved<T>,
    measure: Measure,
    seed: SeedSpec,
    grid: &TimeGrid<T>,
) -> Result<MarketScenario<T>> {
    let m = *solved.model();
    let gh = grid.horizon().to_f64_lossy();
    let mh = m.horizon().to_f64_lossy();
    if (gh - mh).abs() > 1e-9 * mh.abs().max(1.0) {
        return Err(Error::InvalidGrid(format!(
            "simulation horizon {gh} does not match the model horizon {mh}"
        )));
    }
    let n = grid.n_steps();
    let dt = grid.dt();
    let dw = brownian_increments::<T>(seed, grid, 2);
    let rho = m.rho();
    let rho_perp = (T::one() - rho * rho).sqrt();
    let one_minus_rho2 = T::one() - rho * rho;

    let mut price = Array2::zeros((n + 1, 1));
    let mut mu_path = Array2::zeros((n + 1, 1));
    let mut theta = Array2::zeros((n + 1, 1));
    let mut theta_drift = Array2::zeros((n + 1, 1));
    let mut theta_vol = Array2::zeros((n + 1, 1));
    let mut price_drift = Array2::zeros((n + 1, 1));
    // Dual-density bookkeeping (physical measure only): per-factor kernels
    // and the corresponding new-measure Brownian increments.
    let mut kernels = Array2::zeros((n + 1, 2));
    let mut wq = Array2::zeros((n, 2));

    price[[0, 0]] = m.s0();
    mu_path[[0, 0]] = m.mu0();
    let mut mu = m.mu0();
    for k in 0..=n {
        let t = grid.t(k);
        theta[[k, 0]] = ko_strategy(solved, t, mu);
        theta_vol[[k, 0]] = solved.target_vol(t);
        match measure {
            Measure::Physical => {
                theta_drift[[k, 0]] = solved.target_drift_physical(t, mu);
                price_drift[[k, 0]] = mu;
                let lam = mu / m.sigma_s();
                let eta = rho_perp * m.sigma_mu() * (solved.b_at(t) + solved.c_at(t) * mu);
                kernels[[k, 0]] = lam;
                kernels[[k, 1]] = -eta;
                if k < n {
                    wq[[k, 0]] = dw[[k, 0]] + lam * dt;
                    wq[[k, 1]] = dw[[k, 1]] - eta * dt;
                }
            }
            Measure::DualMartingale => {
                theta_drift[[k, 0]] = solved.target_drift_dual(t, mu);
            }
        }
        if k == n {
            break;
        }
        let d_w = dw[[k, 0]];
        let d_wmu = rho * d_w + rho_perp * dw[[k, 1]];
        match measure {
            Measure::Physical => {
                price[[k + 1, 0]] = price[[k, 0]] + mu * dt + m.sigma_s() * d_w;
                mu += m.lambda_rev() * (m.mu_bar() - mu) * dt + m.sigma_mu() * d_wmu;
            }
            Measure::DualMartingale => {
                price[[k + 1, 0]] = price[[k, 0]] + m.sigma_s() * d_w;
                let a = m.lambda_rev() * m.mu_bar()
                    + one_minus_rho2 * m.sigma_mu() * m.sigma_mu() * solved.b_at(t);
                let b = -m.lambda_rev() - rho * m.sigma_mu() / m.sigma_s()
                    + one_minus_rho2 * m.sigma_mu() * m.sigma_mu() * solved.c_at(t);
                mu += (a + b * mu) * dt + m.sigma_mu() * d_wmu;
            }
        }
        if !mu.is_finite() {
            return Err(Error::NonFinite { step: k + 1, component: 1 });
        }
        mu_path[[k + 1, 0]] = mu;
    }

    let dual_log_density = match measure {
        Measure::Physical => {
            let lambda = Path::from_values(*grid, kernels)?;
            Some(girsanov_log_density(&lambda, &wq, grid)?)
        }
        Measure::DualMartingale => None,
    };

    Ok(MarketScenario {
        price: Path::from_values(*grid, price)?,
        target: Path::from_values(*grid, theta)?,
        target_drift: Path::from_values(*grid, theta_drift)?,
        target_vol: Path::from_values(*grid, theta_vol)?,
        price_drift: Path::from_values(*grid, price_drift)?,
        price_vol: Path::constant(*grid, m.sigma_s())?,
        drift_state: Some(Path::from_values(*grid, mu_path)?),
        dual_log_density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::kim_omberg::{riccati_solve, KimOmbergModel};
    use approx::assert_abs_diff_eq;

    fn constant_model() -> ModelSpec<f64> {
        ModelSpec::Constant(ConstantModel::new(0.05, 0.2, 1.0, 1.0).unwrap())
    }

    fn ko_model() -> ModelSpec<f64> {
        let m = KimOmbergModel::new(0.2, 1.0, 0.05, 0.1, -0.5, 1.0, 1.0, 0.05, 1.0, 2000).unwrap();
        ModelSpec::KimOmberg(riccati_solve(&m).unwrap())
    }

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn deterministic_targets_follow_their_formulas() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let model = constant_model();
        let ramp = simulate_scenario(
            &model,
            &TargetSpec::DeterministicRamp { slope: 0.7 },
            Measure::Physical,
            SeedSpec::new(1, 0),
            &grid,
        )
        .unwrap();
        let sine = simulate_scenario(
            &model,
            &TargetSpec::DeterministicSine { amplitude: 2.0, angular_freq: 9.0 },
            Measure::Physical,
            SeedSpec::new(1, 0),
            &grid,
        )
        .unwrap();
        for k in 0..=100 {
            let t = grid.t(k);
            assert_abs_diff_eq!(ramp.target().scalar_at(k), 0.7 * t, epsilon = 1e-14);
            assert_abs_diff_eq!(sine.target().scalar_at(k), 2.0 * (9.0 * t).sin(), epsilon = 1e-14);
        }
        assert_eq!(ramp.target_drift().scalar_at(3), 0.7);
        assert_eq!(ramp.target_vol().scalar_at(3), 0.0);
    }

    #[test]
    fn same_seed_reproduces_the_same_scenario() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let model = ko_model();
        let a = simulate_scenario(&model, &TargetSpec::KimOmberg, Measure::Physical, SeedSpec::new(5, 9), &grid)
            .unwrap();
        let b = simulate_scenario(&model, &TargetSpec::KimOmberg, Measure::Physical, SeedSpec::new(5, 9), &grid)
            .unwrap();
        assert_eq!(a.price().values(), b.price().values());
        assert_eq!(a.target().values(), b.target().values());
        assert_eq!(
            a.dual_log_density().unwrap().values(),
            b.dual_log_density().unwrap().values()
        );
    }

    #[test]
    fn price_is_driftless_under_the_dual_measure() {
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let model = constant_model();
        let mut terminal = Vec::new();
        for p in 0..20_000 {
            let sc = simulate_scenario(
                &model,
                &TargetSpec::Merton,
                Measure::DualMartingale,
                SeedSpec::new(31, p),
                &grid,
            )
            .unwrap();
            terminal.push(sc.price().terminal_scalar() - 1.0);
        }
        let (mean, se) = mean_and_se(&terminal);
        assert!(mean.abs() <= 2.5 * se, "dual price drift {mean:.2e} (se {se:.2e})");
    }

    #[test]
    fn pure_brownian_target_is_centered_under_both_measures() {
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let model = constant_model();
        for measure in [Measure::Physical, Measure::DualMartingale] {
            let mut terminal = Vec::new();
            for p in 0..10_000 {
                let sc = simulate_scenario(
                    &model,
                    &TargetSpec::PureBrownian { scale: 1.0 },
                    measure,
                    SeedSpec::new(77, p),
                    &grid,
                )
                .unwrap();
                terminal.push(sc.target().terminal_scalar());
            }
            let (mean, se) = mean_and_se(&terminal);
            assert!(mean.abs() <= 2.5 * se, "target drift {mean:.2e} (se {se:.2e})");
        }
    }

    /// With constant coefficients, exponential utility, and arithmetic price
    /// increments, the first-order condition is an exact pathwise identity
    /// even in discrete time: the normalized marginal utility of optimal
    /// terminal wealth equals the dual density.
    #[test]
    fn first_order_condition_is_exact_for_the_constant_model() {
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let m = ConstantModel::new(0.05, 0.2, 1.0, 1.0).unwrap();
        let model = ModelSpec::Constant(m);
        let lam: f64 = 0.25;
        let theta_hat = 1.25;
        for p in 0..100 {
            let sc = simulate_scenario(&model, &TargetSpec::Merton, Measure::Physical, SeedSpec::new(13, p), &grid)
                .unwrap();
            let mut wealth = 0.0;
            for k in 0..grid.n_steps() {
                wealth += theta_hat * sc.price().step(k, 0);
            }
            // E[U'(X_T)] = r e^{-r X0 - λ²T/2} with X0 = 0, r = 1.
            let log_ratio = -wealth + 0.5 * lam * lam;
            let n_t = sc.dual_log_density().unwrap().terminal_scalar();
            assert_abs_diff_eq!(log_ratio, n_t, epsilon = 1e-10);
        }
    }

    /// Dual-measure drift-state moments must match the affine moment ODEs
    /// `m' = a(t) + b(t) m`, `V' = 2 b(t) V + σ_μ²`.
    #[test]
    fn dual_state_moments_match_the_ode_oracle() {
        let grid = TimeGrid::new(1.0, 500).unwrap();
        let model = ko_model();
        let solved = match &model {
            ModelSpec::KimOmberg(s) => s,
            _ => unreachable!(),
        };
        let mut terminal = Vec::new();
        for p in 0..4000 {
            let sc = simulate_scenario(&model, &TargetSpec::KimOmberg, Measure::DualMartingale, SeedSpec::new(101, p), &grid)
                .unwrap();
            terminal.push(sc.drift_state().unwrap().terminal_scalar());
        }
        let (mean, se) = mean_and_se(&terminal);
        let n = terminal.len() as f64;
        let var = terminal.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);

        // Fine Euler integration of the moment ODEs.
        let steps = 100_000;
        let h = 1.0 / steps as f64;
        let (mut m_ode, mut v_ode) = (0.05, 0.0);
        for k in 0..steps {
            let t = k as f64 * h;
            let (a, b) = solved.dual_drift_coeffs(t);
            m_ode += (a + b * m_ode) * h;
            v_ode += (2.0 * b * v_ode + 0.1 * 0.1) * h;
        }
        assert_abs_diff_eq!(mean, m_ode, epsilon = 3.0 * se);
        // SE of a Gaussian sample variance is var·√(2/(n−1)).
        let se_var = var * (2.0 / (n - 1.0)).sqrt();
        assert_abs_diff_eq!(var, v_ode, epsilon = 3.0 * se_var);
    }

    /// Reweighting physical-measure paths by the dual density must price a
    /// payoff identically to simulating under the dual measure directly.
    #[test]
    fn cross_measure_pricing_agrees() {
        let grid = TimeGrid::new(1.0, 250).unwrap();
        let model = ko_model();
        let payoff = |s: f64| (s - 1.0).max(0.0);

        let mut weighted = Vec::new();
        for p in 0..30_000 {
            let sc = simulate_scenario(&model, &TargetSpec::KimOmberg, Measure::Physical, SeedSpec::new(202, p), &grid)
                .unwrap();
            let density = sc.dual_log_density().unwrap().terminal_scalar().exp();
            weighted.push(density * payoff(sc.price().terminal_scalar()));
        }
        let mut direct = Vec::new();
        for p in 0..30_000 {
            let sc = simulate_scenario(&model, &TargetSpec::KimOmberg, Measure::DualMartingale, SeedSpec::new(303, p), &grid)
                .unwrap();
            direct.push(payoff(sc.price().terminal_scalar()));
        }
        let (mw, sw) = mean_and_se(&weighted);
        let (md, sd) = mean_and_se(&direct);
        let combined = (sw * sw + sd * sd).sqrt();
        assert!(
            (mw - md).abs() <= 3.0 * combined,
            "physical-reweighted {mw:.5} vs dual {md:.5} (se {combined:.5})"
        );
    }

    /// Pooled regression of drift-state increments on the level recovers the
    /// mean-reversion rate.
    #[test]
    fn increment_regression_recovers_the_reversion_rate() {
        let grid = TimeGrid::new(1.0, 500).unwrap();
        let model = ko_model();
        let (mut sxx, mut sxy, mut sx, mut sy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for p in 0..200 {
            let sc = simulate_scenario(&model, &TargetSpec::KimOmberg, Measure::Physical, SeedSpec::new(404, p), &grid)
                .unwrap();
            let mu = sc.drift_state().unwrap();
            for k in 0..grid.n_steps() {
                let x = mu.scalar_at(k);
                let y = mu.step(k, 0);
                sxx += x * x;
                sxy += x * y;
                sx += x;
                sy += y;
                n += 1.0;
            }
        }
        let slope = (sxy - sx * sy / n) / (sxx - sx * sx / n);
        let rate = -slope / grid.dt();
        assert!((rate - 1.0).abs() < 0.1, "recovered reversion rate {rate}");
    }

    #[test]
    fn unsupported_pairs_and_horizon_mismatch_error() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        assert!(simulate_scenario(&ko_model(), &TargetSpec::Merton, Measure::Physical, SeedSpec::new(1, 0), &grid).is_err());
        assert!(simulate_scenario(&constant_model(), &TargetSpec::KimOmberg, Measure::Physical, SeedSpec::new(1, 0), &grid).is_err());
        let short = TimeGrid::new(0.5, 16).unwrap();
        assert!(simulate_scenario(&ko_model(), &TargetSpec::KimOmberg, Measure::Physical, SeedSpec::new(1, 0), &short).is_err());
    }
}

use crate::paths::TimeGrid;
use crate::{Error, Real, Result};

/// Single risky asset whose expected return mean-reverts around a long-run
/// level (arithmetic price increments with a stochastic drift):
///
/// ```text
/// dS_t  = μ_t dt + σ_S dW_t
/// dμ_t  = λ (μ̄ − μ_t) dt + σ_μ dW^μ_t,      d⟨W, W^μ⟩_t = ρ dt
/// ```
///
/// With exponential utility `−e^{−r x}` the value function is exponentially
/// affine-quadratic in the drift state, `−exp(−r x + A(t) + B(t) μ + ½ C(t) μ²)`,
/// and the optimal share position is affine in μ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KimOmbergModel<T> {
    sigma_s: T,
    lambda_rev: T,
    mu_bar: T,
    sigma_mu: T,
    rho: T,
    risk_aversion: T,
    s0: T,
    mu0: T,
    horizon: T,
    riccati_steps: usize,
}

impl<T: Real> KimOmbergModel<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sigma_s: T,
        lambda_rev: T,
        mu_bar: T,
        sigma_mu: T,
        rho: T,
        risk_aversion: T,
        s0: T,
        mu0: T,
        horizon: T,
        riccati_steps: usize,
    ) -> Result<Self> {
        for (name, v) in [
            ("sigma_s", sigma_s),
            ("lambda_rev", lambda_rev),
            ("mu_bar", mu_bar),
            ("sigma_mu", sigma_mu),
            ("rho", rho),
            ("risk_aversion", risk_aversion),
            ("s0", s0),
            ("mu0", mu0),
            ("horizon", horizon),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter { name, rule: "must be finite".into() });
            }
        }
        if sigma_s <= T::zero() {
            return Err(Error::InvalidParameter { name: "sigma_s", rule: "must be > 0".into() });
        }
        if sigma_mu < T::zero() {
            return Err(Error::InvalidParameter { name: "sigma_mu", rule: "must be >= 0".into() });
        }
        if lambda_rev < T::zero() {
            return Err(Error::InvalidParameter { name: "lambda_rev", rule: "must be >= 0".into() });
        }
        if mu_bar < T::zero() && lambda_rev > T::zero() {
            return Err(Error::InvalidParameter {
                name: "mu_bar",
                rule: "must be >= 0; a negative long-run drift level makes the hedging coefficient B turn positive".into(),
            });
        }
        if rho.abs() > T::one() {
            return Err(Error::InvalidParameter { name: "rho", rule: "must lie in [-1, 1]".into() });
        }
        if risk_aversion <= T::zero() {
            return Err(Error::InvalidParameter { name: "risk_aversion", rule: "must be > 0".into() });
        }
        if horizon <= T::zero() {
            return Err(Error::InvalidParameter { name: "horizon", rule: "must be > 0".into() });
        }
        if riccati_steps < 2 {
            return Err(Error::InvalidParameter { name: "riccati_steps", rule: "must be >= 2".into() });
        }
        Ok(Self {
            sigma_s,
            lambda_rev,
            mu_bar,
            sigma_mu,
            rho,
            risk_aversion,
            s0,
            mu0,
            horizon,
            riccati_steps,
        })
    }

    pub fn sigma_s(&self) -> T {
        self.sigma_s
    }

    pub fn lambda_rev(&self) -> T {
        self.lambda_rev
    }

    pub fn mu_bar(&self) -> T {
        self.mu_bar
    }

    pub fn sigma_mu(&self) -> T {
        self.sigma_mu
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn risk_aversion(&self) -> T {
        self.risk_aversion
    }

    pub fn s0(&self) -> T {
        self.s0
    }

    pub fn mu0(&self) -> T {
        self.mu0
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn riccati_steps(&self) -> usize {
        self.riccati_steps
    }
}

/// Model plus the tabulated value-function coefficients `A, B, C` on the ODE
/// grid. Built once by [`riccati_solve`] and then shared read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct KimOmbergSolved<T> {
    model: KimOmbergModel<T>,
    grid: TimeGrid<T>,
    a: Vec<T>,
    b: Vec<T>,
    c: Vec<T>,
}

/// Solves the coefficient ODE system backward from the horizon with a
/// classical fourth-order Runge-Kutta scheme. With a terminal condition of
/// zero the system is
///
/// ```text
/// C' = (1 + ρ σ_S σ_μ C)² / σ_S² + 2 λ C − σ_μ² C²
/// B' = (1 + ρ σ_S σ_μ C) (ρ σ_μ / σ_S) B + λ B − λ μ̄ C − σ_μ² B C
/// A' = ½ (ρ² − 1) σ_μ² B² − λ μ̄ B − ½ σ_μ² C
/// ```
///
/// For `|ρ| ≤ 1` the quadratic term in `C'` keeps `C` trapped between its
/// negative stationary root and zero, so the system cannot blow up; the
/// integrator still guards every step and reports [`Error::OdeBlowUp`] if the
/// state leaves a safe range.
pub fn riccati_solve<T: Real>(model: &KimOmbergModel<T>) -> Result<KimOmbergSolved<T>> {
    let grid = TimeGrid::new(model.horizon, model.riccati_steps)?;
    let m = *model;
    let rhs = move |_t: T, y: &[T], out: &mut [T]| {
        let (db, dc) = riccati_rhs_bc(&m, y[1], y[2]);
        out[0] = riccati_rhs_a(&m, y[1], y[2]);
        out[1] = db;
        out[2] = dc;
    };
    let table = rk4_backward(rhs, &[T::zero(), T::zero(), T::zero()], &grid)?;
    let mut a = Vec::with_capacity(table.len());
    let mut b = Vec::with_capacity(table.len());
    let mut c = Vec::with_capacity(table.len());
    for row in &table {
        a.push(row[0]);
        b.push(row[1]);
        c.push(row[2]);
    }
    let tol = T::of(1e-10);
    if b.iter().chain(c.iter()).any(|&v| v > tol) {
        return Err(Error::InvalidParameter {
            name: "mu_bar",
            rule: "solved hedging coefficients B, C must be nonpositive".into(),
        });
    }
    Ok(KimOmbergSolved { model: *model, grid, a, b, c })
}

fn riccati_rhs_bc<T: Real>(m: &KimOmbergModel<T>, b: T, c: T) -> (T, T) {
    let coupling = T::one() + m.rho * m.sigma_s * m.sigma_mu * c;
    let sig_mu2 = m.sigma_mu * m.sigma_mu;
    let dc = coupling * coupling / (m.sigma_s * m.sigma_s) + T::of(2.0) * m.lambda_rev * c
        - sig_mu2 * c * c;
    let db = coupling * (m.rho * m.sigma_mu / m.sigma_s) * b + m.lambda_rev * b
        - m.lambda_rev * m.mu_bar * c
        - sig_mu2 * b * c;
    (db, dc)
}

fn riccati_rhs_a<T: Real>(m: &KimOmbergModel<T>, b: T, c: T) -> T {
    let sig_mu2 = m.sigma_mu * m.sigma_mu;
    let half = T::of(0.5);
    half * (m.rho * m.rho - T::one()) * sig_mu2 * b * b - m.lambda_rev * m.mu_bar * b
        - half * sig_mu2 * c
}

impl<T: Real> KimOmbergSolved<T> {
    pub fn model(&self) -> &KimOmbergModel<T> {
        &self.model
    }

    pub fn riccati_grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    fn interp(&self, table: &[T], t: T) -> T {
        let horizon = self.model.horizon;
        let t = if t < T::zero() {
            T::zero()
        } else if t > horizon {
            horizon
        } else {
            t
        };
        let u = t / self.grid.dt();
        let i = u.floor().to_f64_lossy() as usize;
        if i + 1 >= table.len() {
            return table[table.len() - 1];
        }
        let frac = u - T::of(i as f64);
        table[i] + frac * (table[i + 1] - table[i])
    }

    pub fn a_at(&self, t: T) -> T {
        self.interp(&self.a, t)
    }

    pub fn b_at(&self, t: T) -> T {
        self.interp(&self.b, t)
    }

    pub fn c_at(&self, t: T) -> T {
        self.interp(&self.c, t)
    }

    /// Myopic position `μ / (r σ_S²)` that ignores drift predictability.
    pub fn myopic(&self, mu: T) -> T {
        mu / (self.model.risk_aversion * self.model.sigma_s * self.model.sigma_s)
    }

    /// Sensitivity of the optimal position to the drift state,
    /// `∂_μ θ̂ = 1/(r σ_S²) + ρ σ_μ C(t) / (r σ_S)`.
    pub fn strategy_slope(&self, t: T) -> T {
        let m = &self.model;
        T::one() / (m.risk_aversion * m.sigma_s * m.sigma_s)
            + m.rho * m.sigma_mu * self.c_at(t) / (m.risk_aversion * m.sigma_s)
    }

    /// Time sensitivity `∂_t θ̂ = (ρ σ_μ / (r σ_S)) (B'(t) + C'(t) μ)`, with
    /// the derivatives evaluated through the ODE right-hand side.
    pub fn strategy_time_drift(&self, t: T, mu: T) -> T {
        let m = &self.model;
        let (db, dc) = riccati_rhs_bc(m, self.b_at(t), self.c_at(t));
        m.rho * m.sigma_mu / (m.risk_aversion * m.sigma_s) * (db + dc * mu)
    }

    /// Instantaneous volatility of the optimal position.
    pub fn target_vol(&self, t: T) -> T {
        self.strategy_slope(t) * self.model.sigma_mu
    }

    /// Drift of the optimal position when μ evolves under the physical
    /// dynamics.
    pub fn target_drift_physical(&self, t: T, mu: T) -> T {
        self.strategy_time_drift(t, mu)
            + self.strategy_slope(t) * self.model.lambda_rev * (self.model.mu_bar - mu)
    }

    /// Affine drift coefficients `(a(t), b(t))` of μ under the martingale
    /// measure induced by the optimal strategy: `dμ = (a + b μ) dt + σ_μ dW̃`.
    pub fn dual_drift_coeffs(&self, t: T) -> (T, T) {
        let m = &self.model;
        let one_minus_rho2 = T::one() - m.rho * m.rho;
        let sig_mu2 = m.sigma_mu * m.sigma_mu;
        let a = m.lambda_rev * m.mu_bar + one_minus_rho2 * sig_mu2 * self.b_at(t);
        let b = -m.lambda_rev - m.rho * m.sigma_mu / m.sigma_s + one_minus_rho2 * sig_mu2 * self.c_at(t);
        (a, b)
    }

    /// Drift of the optimal position when μ evolves under the dual martingale
    /// measure.
    pub fn target_drift_dual(&self, t: T, mu: T) -> T {
        let (a, b) = self.dual_drift_coeffs(t);
        self.strategy_time_drift(t, mu) + self.strategy_slope(t) * (a + b * mu)
    }
}

/// Optimal share position `θ̂(t, μ) = μ/(r σ_S²) + (ρ σ_μ/(r σ_S)) (B(t) + C(t) μ)`.
pub fn ko_strategy<T: Real>(solved: &KimOmbergSolved<T>, t: T, mu: T) -> T {
    let m = solved.model();
    solved.myopic(mu)
        + m.rho() * m.sigma_mu() / (m.risk_aversion() * m.sigma_s()) * (solved.b_at(t) + solved.c_at(t) * mu)
}

/// Integrates `y' = f(t, y)` backward from `y(T) = terminal` to `t = 0` on the
/// given grid with classical RK4, returning the state at every grid point
/// (index k holds `y(t_k)`). Any non-finite value or a component exceeding
/// 1e10 in magnitude aborts with [`Error::OdeBlowUp`].
fn rk4_backward<T, F>(rhs: F, terminal: &[T], grid: &TimeGrid<T>) -> Result<Vec<Vec<T>>>
where
    T: Real,
    F: Fn(T, &[T], &mut [T]),
{
    let dim = terminal.len();
    let n = grid.n_steps();
    let h = -grid.dt();
    let half = T::of(0.5);
    let sixth = T::of(1.0 / 6.0);
    let two = T::of(2.0);
    let cap = T::of(1e10);

    let mut out = vec![vec![T::zero(); dim]; n + 1];
    out[n] = terminal.to_vec();
    let mut k1 = vec![T::zero(); dim];
    let mut k2 = vec![T::zero(); dim];
    let mut k3 = vec![T::zero(); dim];
    let mut k4 = vec![T::zero(); dim];
    let mut stage = vec![T::zero(); dim];

    for k in (0..n).rev() {
        let t = grid.t(k + 1);
        let y = out[k + 1].clone();
        rhs(t, &y, &mut k1);
        for i in 0..dim {
            stage[i] = y[i] + half * h * k1[i];
        }
        rhs(t + half * h, &stage, &mut k2);
        for i in 0..dim {
            stage[i] = y[i] + half * h * k2[i];
        }
        rhs(t + half * h, &stage, &mut k3);
        for i in 0..dim {
            stage[i] = y[i] + h * k3[i];
        }
        rhs(t + h, &stage, &mut k4);
        for i in 0..dim {
            out[k][i] = y[i] + sixth * h * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
        }
        if out[k].iter().any(|v| !v.is_finite() || v.abs() > cap) {
            return Err(Error::OdeBlowUp { time: grid.t(k).to_f64_lossy() });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{brownian_increments, SeedSpec};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn base_model() -> KimOmbergModel<f64> {
        KimOmbergModel::new(0.2, 1.0, 0.05, 0.1, -0.5, 1.0, 1.0, 0.05, 1.0, 2000).unwrap()
    }

    #[test]
    fn terminal_coefficients_vanish() {
        let solved = riccati_solve(&base_model()).unwrap();
        assert_eq!(solved.a_at(1.0), 0.0);
        assert_eq!(solved.b_at(1.0), 0.0);
        assert_eq!(solved.c_at(1.0), 0.0);
    }

    /// Backward integration of `y' = −(1 + y²)` from `y(2) = 0` follows
    /// `y(t) = tan(2 − t)` and explodes at `t = 2 − π/2`; the guard must stop
    /// there instead of returning garbage.
    #[test]
    fn blow_up_is_detected_at_the_tangent_singularity() {
        let grid = TimeGrid::new(2.0, 20_000).unwrap();
        let rhs = |_t: f64, y: &[f64], out: &mut [f64]| {
            out[0] = -(1.0 + y[0] * y[0]);
        };
        let err = rk4_backward(rhs, &[0.0], &grid).unwrap_err();
        match err {
            Error::OdeBlowUp { time } => {
                assert_abs_diff_eq!(time, 2.0 - std::f64::consts::FRAC_PI_2, epsilon = 0.01)
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    /// With σ_μ = 0 the C equation is linear, `C' = 1/σ² + 2λC`, whose
    /// solution with C(T) = 0 is `−(1 − e^{−2λ(T−t)})/(2λσ²)`.
    #[test]
    fn linear_limit_matches_the_closed_form() {
        let m = KimOmbergModel::new(0.2, 1.5, 0.05, 0.0, -0.5, 1.0, 1.0, 0.05, 1.0, 4000).unwrap();
        let solved = riccati_solve(&m).unwrap();
        for &t in &[0.0f64, 0.25, 0.5, 0.9] {
            let expect = -(1.0 - (-2.0 * 1.5 * (1.0 - t)).exp()) / (2.0 * 1.5 * 0.04);
            assert_abs_diff_eq!(solved.c_at(t), expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn strategy_is_affine_in_the_drift_state() {
        let solved = riccati_solve(&base_model()).unwrap();
        let t = 0.3;
        let (y0, y1, y2) = (
            ko_strategy(&solved, t, 0.0),
            ko_strategy(&solved, t, 0.1),
            ko_strategy(&solved, t, 0.2),
        );
        assert_abs_diff_eq!(y2 - 2.0 * y1 + y0, 0.0, epsilon = 1e-12);
        assert_relative_eq!((y1 - y0) / 0.1, solved.strategy_slope(t), epsilon = 1e-9);
    }

    #[test]
    fn zero_correlation_reduces_to_the_myopic_position() {
        let m = KimOmbergModel::new(0.2, 1.0, 0.05, 0.1, 0.0, 2.0, 1.0, 0.05, 1.0, 2000).unwrap();
        let solved = riccati_solve(&m).unwrap();
        for &(t, mu) in &[(0.0, 0.05), (0.4, -0.02), (0.9, 0.2)] {
            assert_eq!(ko_strategy(&solved, t, mu), solved.myopic(mu));
        }
    }

    /// A deterministic drift state removes the hedging motive even though the
    /// tabulated C stays strictly negative (its source term 1/σ² does not
    /// vanish); the ρσ_μ prefactor is what kills the correction.
    #[test]
    fn deterministic_drift_reduces_to_the_myopic_position() {
        let m = KimOmbergModel::new(0.2, 1.0, 0.05, 0.0, -0.5, 1.0, 1.0, 0.05, 1.0, 2000).unwrap();
        let solved = riccati_solve(&m).unwrap();
        assert!(solved.c_at(0.0) < -1e-3);
        for &(t, mu) in &[(0.0, 0.05), (0.5, 0.1)] {
            assert_eq!(ko_strategy(&solved, t, mu), solved.myopic(mu));
        }
    }

    #[test]
    fn at_the_horizon_the_strategy_is_myopic() {
        let solved = riccati_solve(&base_model()).unwrap();
        assert_relative_eq!(ko_strategy(&solved, 1.0, 0.08), solved.myopic(0.08), epsilon = 1e-14);
    }

    #[test]
    fn doubling_the_ode_grid_moves_the_tables_by_less_than_1e6() {
        let coarse = riccati_solve(&base_model()).unwrap();
        let fine_model =
            KimOmbergModel::new(0.2, 1.0, 0.05, 0.1, -0.5, 1.0, 1.0, 0.05, 1.0, 4000).unwrap();
        let fine = riccati_solve(&fine_model).unwrap();
        let mut sup: f64 = 0.0;
        for k in 0..=2000 {
            let t = coarse.riccati_grid().t(k);
            sup = sup
                .max((coarse.a_at(t) - fine.a_at(t)).abs())
                .max((coarse.b_at(t) - fine.b_at(t)).abs())
                .max((coarse.c_at(t) - fine.c_at(t)).abs());
        }
        assert!(sup < 1e-6, "sup-norm change {sup:e} between ODE refinements");
    }

    #[test]
    fn negative_long_run_drift_is_rejected() {
        let err = KimOmbergModel::new(0.2, 1.0, -0.05, 0.1, -0.5, 1.0, 1.0, 0.0, 1.0, 100)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "mu_bar", .. }));
    }

    #[test]
    fn time_drift_matches_a_finite_difference() {
        let m = KimOmbergModel::new(0.2, 1.0, 0.05, 0.1, -0.5, 1.0, 1.0, 0.05, 1.0, 20_000).unwrap();
        let solved = riccati_solve(&m).unwrap();
        let (t, mu, h) = (0.4, 0.07, 1e-2);
        let fd = (ko_strategy(&solved, t + h, mu) - ko_strategy(&solved, t - h, mu)) / (2.0 * h);
        assert_relative_eq!(solved.strategy_time_drift(t, mu), fd, max_relative = 1e-4);
    }

    #[test]
    fn dual_drift_coefficients_at_the_horizon_drop_the_hedging_terms() {
        let solved = riccati_solve(&base_model()).unwrap();
        let (a, b) = solved.dual_drift_coeffs(1.0);
        assert_relative_eq!(a, 1.0 * 0.05, epsilon = 1e-14);
        assert_relative_eq!(b, -1.0 - (-0.5) * 0.1 / 0.2, epsilon = 1e-14);
    }

    /// Paired-path comparison: following the affine strategy must yield a
    /// higher expected exponential utility than the myopic one when the drift
    /// is persistent and correlated with returns. Antithetic pairs keep the
    /// Monte Carlo error small enough to resolve the gap.
    #[test]
    fn strategy_beats_myopic_under_common_noise() {
        let m = KimOmbergModel::new(0.2, 1.0, 0.05, 0.2, -0.8, 1.0, 1.0, 0.05, 1.0, 2000).unwrap();
        let solved = riccati_solve(&m).unwrap();
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let dt = grid.dt();
        let n_pairs = 12_000;
        let mut diffs = Vec::with_capacity(n_pairs);
        for p in 0..n_pairs {
            let dw = brownian_increments::<f64>(SeedSpec::new(20_240_811, p as u64), &grid, 2);
            let mut pair = 0.0;
            for sign in [1.0, -1.0] {
                let mut mu = m.mu0();
                let mut x_opt = 0.0;
                let mut x_myo = 0.0;
                for k in 0..grid.n_steps() {
                    let t = grid.t(k);
                    let d_w = sign * dw[[k, 0]];
                    let d_wmu =
                        m.rho() * d_w + (1.0 - m.rho() * m.rho()).sqrt() * sign * dw[[k, 1]];
                    let ds = mu * dt + m.sigma_s() * d_w;
                    x_opt += ko_strategy(&solved, t, mu) * ds;
                    x_myo += solved.myopic(mu) * ds;
                    mu += m.lambda_rev() * (m.mu_bar() - mu) * dt + m.sigma_mu() * d_wmu;
                }
                pair += 0.5 * (-(-x_opt).exp() - -(-x_myo).exp());
            }
            diffs.push(pair);
        }
        let mean = diffs.iter().sum::<f64>() / n_pairs as f64;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n_pairs - 1) as f64;
        let se = (var / n_pairs as f64).sqrt();
        assert!(mean > 2.0 * se, "utility improvement {mean:.3e} not significant (se {se:.3e})");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Across the admissible parameter range the hedging coefficients
        /// stay nonpositive and finite.
        #[test]
        fn hedging_coefficients_are_nonpositive(
            sigma_mu in 0.0f64..0.5,
            rho in -1.0f64..1.0,
            lambda in 0.1f64..3.0,
            mu_bar in 0.0f64..0.2,
            sigma_s in 0.1f64..0.5,
            r in 0.5f64..4.0,
            horizon in 0.5f64..2.0,
        ) {
            let m = KimOmbergModel::new(sigma_s, lambda, mu_bar, sigma_mu, rho, r, 1.0, mu_bar, horizon, 400).unwrap();
            let solved = riccati_solve(&m).unwrap();
            for k in 0..=400usize {
                let t = solved.riccati_grid().t(k);
                prop_assert!(solved.b_at(t) <= 1e-12);
                prop_assert!(solved.c_at(t) <= 1e-12);
                prop_assert!(solved.a_at(t).is_finite());
            }
        }
    }
}

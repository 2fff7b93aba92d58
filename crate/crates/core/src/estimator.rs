//! Monte Carlo aggregation: L_p norms with bootstrap error bars,
//! scaling-exponent regressions, and the deterministic parallel fan-out and
//! reduction used by every experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::paths::{brownian_increments, Path, SeedSpec, TimeGrid};
use crate::tracker::{track_shares, BandConfig, TradeMode};
use crate::{Error, Real, Result};

/// Fixed seed for bootstrap resampling, so repeated aggregation of the same
/// samples yields bit-identical error bars.
const BOOTSTRAP_SEED: u64 = 0x9E37_79B9_7F4A_7C15;
const BOOTSTRAP_RESAMPLES: usize = 256;

/// Sums in a fixed pairwise tree order. The order depends only on the slice
/// layout, never on thread scheduling, so reductions are reproducible across
/// worker counts (and more accurate than naive left-to-right accumulation).
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    if xs.len() <= 32 {
        return xs.iter().fold(T::zero(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and its standard error (zero for fewer than two samples).
pub fn mean_and_stderr<T: Real>(xs: &[T]) -> Result<(T, T)> {
    if xs.is_empty() {
        return Err(Error::DegenerateSample("mean of an empty sample".into()));
    }
    let n = T::of(xs.len() as f64);
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return Ok((mean, T::zero()));
    }
    let sq: Vec<T> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - T::one());
    Ok((mean, (var / n).sqrt()))
}

/// Runs one closure per path index on a dedicated thread pool and returns the
/// results in path order. Because each path derives its randomness from its
/// own index and the reduction happens afterwards in slice order, the output
/// is identical for any worker count.
pub fn map_paths<R, F>(workers: usize, n_paths: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(u64) -> R + Send + Sync,
{
    if workers <= 1 {
        (0..n_paths as u64).map(f).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("failed to build worker pool");
        pool.install(|| (0..n_paths as u64).into_par_iter().map(f).collect())
    }
}

/// An estimated L_p norm `(mean |x|^p)^{1/p}` with a bootstrap standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpEstimate<T> {
    pub p: T,
    pub value: T,
    pub stderr: T,
    pub n_paths: usize,
}

/// Estimates `‖X‖_p = (mean |x|^p)^{1/p}` over the sample, with a standard
/// error from 256 bootstrap resamples drawn with a fixed seed.
pub fn estimate_lp<T: Real>(samples: &[T], p: T) -> Result<LpEstimate<T>> {
    if samples.is_empty() {
        return Err(Error::DegenerateSample("L_p estimate of an empty sample".into()));
    }
    if !(p >= T::one()) || !p.is_finite() {
        return Err(Error::InvalidParameter { name: "p", rule: "must be finite and >= 1".into() });
    }
    let n = samples.len();
    let powered: Vec<T> = samples.iter().map(|&x| x.abs().powf(p)).collect();
    let value = (pairwise_sum(&powered) / T::of(n as f64)).powf(T::one() / p);

    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut stats = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let mut acc = T::zero();
        for _ in 0..n {
            acc += powered[rng.gen_range(0..n)];
        }
        stats.push((acc / T::of(n as f64)).powf(T::one() / p));
    }
    let m = pairwise_sum(&stats) / T::of(BOOTSTRAP_RESAMPLES as f64);
    let sq: Vec<T> = stats.iter().map(|&s| (s - m) * (s - m)).collect();
    let stderr = (pairwise_sum(&sq) / T::of((BOOTSTRAP_RESAMPLES - 1) as f64)).sqrt();
    Ok(LpEstimate { p, value, stderr, n_paths: n })
}

/// Weighted least-squares fit of `ln value` against `ln x` over an ε/δ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit<T> {
    pub slope: T,
    pub slope_stderr: T,
    pub intercept: T,
    pub r_squared: T,
    /// The fitted grid as (x, value, value_stderr).
    pub points: Vec<(T, T, T)>,
}

/// Straight-line fit `y = intercept + slope · x` with optional
/// inverse-variance weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit<T> {
    pub slope: T,
    pub slope_stderr: T,
    pub intercept: T,
    pub r_squared: T,
}

/// Core weighted least squares on already-transformed coordinates. Points
/// are (x, y, weight); weights must be positive. `inverse_variance_weights`
/// says whether the weights are 1/Var(y), which unlocks the known-variance
/// slope error formula.
fn weighted_least_squares<T: Real>(
    points: &[(T, T, T)],
    inverse_variance_weights: bool,
) -> LinearFit<T> {
    let mut sw = T::zero();
    let mut swx = T::zero();
    let mut swy = T::zero();
    for &(x, y, w) in points {
        sw += w;
        swx += w * x;
        swy += w * y;
    }
    let xbar = swx / sw;
    let ybar = swy / sw;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for &(x, y, w) in points {
        sxx += w * (x - xbar) * (x - xbar);
        sxy += w * (x - xbar) * (y - ybar);
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let mut ss_res = T::zero();
    let mut ss_tot = T::zero();
    for &(x, y, w) in points {
        let fitted = intercept + slope * x;
        ss_res += w * (y - fitted) * (y - fitted);
        ss_tot += w * (y - ybar) * (y - ybar);
    }
    let r_squared = if ss_tot > T::zero() { T::one() - ss_res / ss_tot } else { T::one() };
    // Residual-based slope variance σ̂²/Sxx with σ̂² = SS_res/(n−2); with true
    // inverse-variance weights Var(slope) = 1/Sxx is also valid, and we take
    // the larger of the two so error bars stay honest when residuals exceed
    // the stated stderrs.
    let residual_var = if points.len() > 2 {
        ss_res / T::of((points.len() - 2) as f64) / sxx
    } else {
        T::zero()
    };
    let slope_var = if inverse_variance_weights {
        residual_var.max(T::one() / sxx)
    } else {
        residual_var
    };
    LinearFit { slope, slope_stderr: slope_var.sqrt(), intercept, r_squared }
}

fn log_weights<T: Real>(grid: &[(T, T, T)]) -> (Vec<(T, T, T)>, bool) {
    // Weight by the inverse variance of ln(value); se(ln y) ≈ stderr / value.
    // If any stderr is nonpositive the weights degenerate, so fall back to an
    // unweighted fit.
    let usable = grid.iter().all(|&(_, _, se)| se > T::zero());
    let pts = grid
        .iter()
        .map(|&(x, y, se)| {
            let w = if usable {
                let se_log = se / y;
                T::one() / (se_log * se_log)
            } else {
                T::one()
            };
            (x.ln(), y.ln(), w)
        })
        .collect();
    (pts, usable)
}

/// Fits `ln value = intercept + slope · ln x` across a grid of positive
/// estimates. Requires at least 4 grid points spanning at least 1.5 decades.
pub fn fit_scaling<T: Real>(grid: &[(T, LpEstimate<T>)]) -> Result<ScalingFit<T>> {
    if grid.len() < 4 {
        return Err(Error::DegenerateSample(format!(
            "scaling fit needs at least 4 grid points, got {}",
            grid.len()
        )));
    }
    let mut xmin = T::infinity();
    let mut xmax = T::zero();
    for &(x, ref est) in grid {
        if !(x > T::zero()) || !x.is_finite() {
            return Err(Error::InvalidParameter { name: "x", rule: "grid abscissae must be positive and finite".into() });
        }
        if !(est.value > T::zero()) {
            return Err(Error::DegenerateSample(
                "scaling fit requires strictly positive estimates".into(),
            ));
        }
        xmin = xmin.min(x);
        xmax = xmax.max(x);
    }
    let decades = (xmax / xmin).log10();
    if decades < T::of(1.5 - 1e-9) {
        return Err(Error::InvalidParameter {
            name: "grid",
            rule: format!("must span at least 1.5 decades, spans {:.3}", decades.to_f64_lossy()),
        });
    }
    let pts: Vec<(T, T, T)> = grid.iter().map(|&(x, ref e)| (x, e.value, e.stderr)).collect();
    let (logged, usable) = log_weights(&pts);
    let fit = weighted_least_squares(&logged, usable);
    Ok(ScalingFit {
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        points: pts,
    })
}

/// Fits `y = intercept + slope · x` on untransformed coordinates with
/// inverse-variance weights (or an unweighted fit when any stderr is zero).
pub fn fit_linear<T: Real>(points: &[(T, T, T)]) -> Result<LinearFit<T>> {
    if points.len() < 2 {
        return Err(Error::DegenerateSample("linear fit needs at least 2 points".into()));
    }
    let usable = points.iter().all(|&(_, _, se)| se > T::zero());
    let weighted: Vec<(T, T, T)> = points
        .iter()
        .map(|&(x, y, se)| {
            let w = if usable { T::one() / (se * se) } else { T::one() };
            (x, y, w)
        })
        .collect();
    Ok(weighted_least_squares(&weighted, usable))
}

/// Target process swept by [`turnover_vs_delta`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepTarget<T> {
    /// `dim` independent standard Brownian components.
    Brownian { dim: usize },
    /// Deterministic ramp `θ_t = slope · t` (finite variation, so turnover
    /// stays bounded as δ shrinks).
    Ramp { slope: T },
}

/// Configuration for the turnover-versus-band-width sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnoverSweepConfig<T> {
    pub horizon: T,
    pub deltas: Vec<T>,
    pub n_paths: usize,
    pub master_seed: u64,
    pub target: SweepTarget<T>,
    /// Steps per band width: each run uses `dt = δ² / dt_divisor`.
    pub dt_divisor: T,
    pub workers: usize,
}

/// One band width's aggregate in the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnoverRow<T> {
    pub delta: T,
    pub dt: T,
    pub n_steps: usize,
    pub n_paths: usize,
    pub mean_turnover: T,
    pub stderr: T,
    /// Leading-order prediction `d · T / (2δ)` for the Brownian target.
    pub expected: T,
}

/// Result of sweeping the band width: per-δ turnover means and a straight-
/// line fit of mean turnover against 1/δ.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnoverSweep<T> {
    pub rows: Vec<TurnoverRow<T>>,
    pub fit: LinearFit<T>,
}

/// Measures expected turnover of the band tracker across a grid of band
/// widths and fits it linearly against 1/δ. For a `dim`-component Brownian
/// target the slope approaches `dim · T / 2`; for finite-variation targets it
/// is asymptotically flat.
pub fn turnover_vs_delta<T: Real>(cfg: &TurnoverSweepConfig<T>) -> Result<TurnoverSweep<T>> {
    if cfg.deltas.is_empty() {
        return Err(Error::InvalidParameter { name: "deltas", rule: "grid must be nonempty".into() });
    }
    for &d in &cfg.deltas {
        if !(d > T::zero() && d < T::one()) {
            return Err(Error::InvalidParameter { name: "deltas", rule: "band widths must lie in (0,1)".into() });
        }
    }
    let dmin = cfg.deltas.iter().cloned().fold(T::infinity(), T::min);
    let dmax = cfg.deltas.iter().cloned().fold(T::zero(), T::max);
    if (dmax / dmin).log10() < T::of(1.0 - 1e-12) {
        return Err(Error::InvalidParameter {
            name: "deltas",
            rule: "grid must span at least one decade of band widths".into(),
        });
    }
    if cfg.n_paths < 2 {
        return Err(Error::InvalidParameter { name: "n_paths", rule: "need at least 2 paths".into() });
    }
    if !(cfg.dt_divisor >= T::of(1.0)) {
        return Err(Error::InvalidParameter { name: "dt_divisor", rule: "must be >= 1".into() });
    }

    let mut rows = Vec::with_capacity(cfg.deltas.len());
    for &delta in &cfg.deltas {
        let dt_target = delta * delta / cfg.dt_divisor;
        let n_steps = (cfg.horizon / dt_target).to_f64_lossy().ceil() as usize;
        let grid = TimeGrid::new(cfg.horizon, n_steps)?;
        let band = BandConfig::new(delta, TradeMode::Shares)?;
        let (dim, samples) = match cfg.target {
            SweepTarget::Brownian { dim } => {
                if dim == 0 {
                    return Err(Error::InvalidParameter { name: "dim", rule: "must be >= 1".into() });
                }
                let samples = map_paths(cfg.workers, cfg.n_paths, |path_index| {
                    let dw = brownian_increments::<T>(
                        SeedSpec::new(cfg.master_seed, path_index),
                        &grid,
                        dim,
                    );
                    let mut values = ndarray::Array2::zeros((n_steps + 1, dim));
                    for k in 0..n_steps {
                        for j in 0..dim {
                            values[[k + 1, j]] = values[[k, j]] + dw[[k, j]];
                        }
                    }
                    let theta = Path::from_values(grid, values).expect("finite Brownian path");
                    let run = track_shares(&theta, &band).expect("tracker on valid path");
                    run.turnover_terminal()
                });
                (dim, samples)
            }
            SweepTarget::Ramp { slope } => {
                let theta = Path::from_fn(grid, |t| slope * t)?;
                let run = track_shares(&theta, &band)?;
                let turnover = run.turnover_terminal();
                (1, vec![turnover; cfg.n_paths])
            }
        };
        let (mean, stderr) = mean_and_stderr(&samples)?;
        rows.push(TurnoverRow {
            delta,
            dt: grid.dt(),
            n_steps,
            n_paths: cfg.n_paths,
            mean_turnover: mean,
            stderr,
            expected: T::of(dim as f64) * cfg.horizon / (T::of(2.0) * delta),
        });
    }
    let pts: Vec<(T, T, T)> =
        rows.iter().map(|r| (T::one() / r.delta, r.mean_turnover, r.stderr)).collect();
    let fit = fit_linear(&pts)?;
    Ok(TurnoverSweep { rows, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn pairwise_sum_matches_naive_summation() {
        let xs: Vec<f64> = (0..10_000).map(|i| ((i * 37 % 101) as f64 - 50.0) / 7.0).collect();
        let naive: f64 = xs.iter().sum();
        assert_relative_eq!(pairwise_sum(&xs), naive, max_relative = 1e-12);
        assert_eq!(pairwise_sum::<f64>(&[]), 0.0);
    }

    #[test]
    fn constant_samples_have_exact_lp_norm_and_zero_error() {
        for p in [1.0, 2.0, 3.7] {
            let est = estimate_lp(&[-2.5f64; 100], p).unwrap();
            assert_relative_eq!(est.value, 2.5, epsilon = 1e-12);
            assert_abs_diff_eq!(est.stderr, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn standard_normal_l2_norm_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(12345);
        let xs: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let est = estimate_lp(&xs, 2.0).unwrap();
        assert!(
            (est.value - 1.0).abs() <= 3.0 * est.stderr,
            "L2 {} with stderr {}",
            est.value,
            est.stderr
        );
    }

    #[test]
    fn bootstrap_error_bars_are_reproducible() {
        let xs: Vec<f64> = (0..500).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = estimate_lp(&xs, 2.0).unwrap();
        let b = estimate_lp(&xs, 2.0).unwrap();
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn empty_samples_and_bad_orders_error() {
        assert!(estimate_lp::<f64>(&[], 2.0).is_err());
        assert!(estimate_lp(&[1.0f64], 0.5).is_err());
        assert!(mean_and_stderr::<f64>(&[]).is_err());
    }

    #[test]
    fn exact_square_root_law_is_recovered() {
        let grid: Vec<(f64, LpEstimate<f64>)> = [1e-4, 1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&x: &f64| (x, LpEstimate { p: 2.0, value: x.sqrt(), stderr: 0.0, n_paths: 1 }))
            .collect();
        let fit = fit_scaling(&grid).unwrap();
        assert_relative_eq!(fit.slope, 0.5, epsilon = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn two_thirds_law_with_prefactor_is_recovered() {
        let grid: Vec<(f64, LpEstimate<f64>)> = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2]
            .iter()
            .map(|&x: &f64| {
                (x, LpEstimate { p: 2.0, value: 3.0 * x.powf(2.0 / 3.0), stderr: 0.0, n_paths: 1 })
            })
            .collect();
        let fit = fit_scaling(&grid).unwrap();
        assert_relative_eq!(fit.slope, 2.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(fit.intercept, 3.0f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn scaling_fit_rejects_bad_grids() {
        let mk = |x: f64, v: f64| -> (f64, LpEstimate<f64>) {
            (x, LpEstimate { p: 2.0, value: v, stderr: 0.01, n_paths: 10 })
        };
        // Too few points.
        assert!(fit_scaling(&[mk(1e-3, 0.1), mk(1e-2, 0.2), mk(1e-1, 0.4)]).is_err());
        // Too narrow a span.
        assert!(fit_scaling(&[mk(1e-3, 0.1), mk(2e-3, 0.12), mk(4e-3, 0.15), mk(8e-3, 0.2)]).is_err());
        // Nonpositive value.
        assert!(fit_scaling(&[mk(1e-4, 0.1), mk(1e-3, -0.2), mk(1e-2, 0.4), mk(1e-1, 0.8)]).is_err());
    }

    #[test]
    fn rescaling_the_grid_shifts_only_the_intercept() {
        let grid: Vec<(f64, LpEstimate<f64>)> = [1e-4, 1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&x: &f64| {
                (x, LpEstimate { p: 2.0, value: 2.0 * x.powf(0.7), stderr: 0.01, n_paths: 10 })
            })
            .collect();
        let scaled: Vec<(f64, LpEstimate<f64>)> =
            grid.iter().map(|&(x, e)| (10.0 * x, e)).collect();
        let f1 = fit_scaling(&grid).unwrap();
        let f2 = fit_scaling(&scaled).unwrap();
        assert_relative_eq!(f1.slope, f2.slope, epsilon = 1e-9);
        assert_relative_eq!(f2.intercept, f1.intercept - f1.slope * 10.0f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn inverse_variance_weights_downweight_a_noisy_outlier() {
        // Four clean points on y = √x plus one badly biased point whose
        // stderr honestly reports its unreliability.
        let mut grid: Vec<(f64, LpEstimate<f64>)> = [1e-4, 1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&x: &f64| {
                (x, LpEstimate { p: 2.0, value: x.sqrt(), stderr: 1e-4 * x.sqrt(), n_paths: 100 })
            })
            .collect();
        grid.push((
            3e-3,
            LpEstimate { p: 2.0, value: 10.0 * 3e-3f64.sqrt(), stderr: 50.0, n_paths: 100 },
        ));
        let weighted = fit_scaling(&grid).unwrap();
        let unweighted_grid: Vec<(f64, LpEstimate<f64>)> = grid
            .iter()
            .map(|&(x, e)| (x, LpEstimate { stderr: 0.0, ..e }))
            .collect();
        let unweighted = fit_scaling(&unweighted_grid).unwrap();
        assert!(
            (weighted.slope - 0.5).abs() < (unweighted.slope - 0.5).abs(),
            "weighted {} vs unweighted {}",
            weighted.slope,
            unweighted.slope
        );
        assert_abs_diff_eq!(weighted.slope, 0.5, epsilon = 1e-3);
    }

    #[test]
    fn brownian_turnover_grows_like_half_t_over_delta() {
        let cfg: TurnoverSweepConfig<f64> = TurnoverSweepConfig {
            horizon: 1.0,
            deltas: vec![0.3, 0.1, 0.05, 0.03],
            n_paths: 300,
            master_seed: 2024,
            target: SweepTarget::Brownian { dim: 1 },
            dt_divisor: 100.0,
            workers: 1,
        };
        let sweep = turnover_vs_delta(&cfg).unwrap();
        assert!(
            (sweep.fit.slope - 0.5).abs() <= 0.05,
            "slope vs 1/δ is {}, expected 0.5 ± 0.05",
            sweep.fit.slope
        );
        // The 1/(2δ) prediction is leading-order; at wide bands the O(δ)
        // correction is visible, so check the 10% window where it is small.
        for row in sweep.rows.iter().filter(|r| r.delta <= 0.2) {
            assert!(
                (row.mean_turnover - row.expected).abs() <= 0.10 * row.expected,
                "δ={}: turnover {} vs {}",
                row.delta,
                row.mean_turnover,
                row.expected
            );
        }
    }

    #[test]
    fn two_components_double_the_slope() {
        let base: TurnoverSweepConfig<f64> = TurnoverSweepConfig {
            horizon: 1.0,
            deltas: vec![0.3, 0.1, 0.03],
            n_paths: 200,
            master_seed: 9,
            target: SweepTarget::Brownian { dim: 1 },
            dt_divisor: 100.0,
            workers: 1,
        };
        let one = turnover_vs_delta(&base).unwrap();
        let two = turnover_vs_delta(&TurnoverSweepConfig {
            target: SweepTarget::Brownian { dim: 2 },
            ..base
        })
        .unwrap();
        let ratio = two.fit.slope / one.fit.slope;
        assert!((1.8..=2.2).contains(&ratio), "slope ratio {ratio}");
    }

    #[test]
    fn finite_variation_targets_have_flat_turnover() {
        let cfg: TurnoverSweepConfig<f64> = TurnoverSweepConfig {
            horizon: 1.0,
            deltas: vec![0.3, 0.1, 0.05, 0.03],
            n_paths: 2,
            master_seed: 1,
            target: SweepTarget::Ramp { slope: 1.0 },
            dt_divisor: 100.0,
            workers: 1,
        };
        let sweep = turnover_vs_delta(&cfg).unwrap();
        assert!(sweep.fit.slope.abs() < 0.05, "ramp slope vs 1/δ is {}", sweep.fit.slope);
        for row in &sweep.rows {
            assert!(row.mean_turnover <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn narrow_delta_grids_are_rejected() {
        let cfg: TurnoverSweepConfig<f64> = TurnoverSweepConfig {
            horizon: 1.0,
            deltas: vec![0.2, 0.15],
            n_paths: 8,
            master_seed: 1,
            target: SweepTarget::Brownian { dim: 1 },
            dt_divisor: 100.0,
            workers: 1,
        };
        assert!(matches!(
            turnover_vs_delta(&cfg).unwrap_err(),
            Error::InvalidParameter { name: "deltas", .. }
        ));
    }

    #[test]
    fn worker_count_does_not_change_a_single_bit() {
        let mk = |workers| -> TurnoverSweepConfig<f64> { TurnoverSweepConfig {
            horizon: 1.0,
            deltas: vec![0.3, 0.03],
            n_paths: 64,
            master_seed: 77,
            target: SweepTarget::Brownian { dim: 1 },
            dt_divisor: 50.0,
            workers,
        } };
        let serial = turnover_vs_delta(&mk(1)).unwrap();
        let parallel = turnover_vs_delta(&mk(4)).unwrap();
        for (a, b) in serial.rows.iter().zip(&parallel.rows) {
            assert_eq!(a.mean_turnover.to_bits(), b.mean_turnover.to_bits());
            assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        }
        assert_eq!(serial.fit.slope.to_bits(), parallel.fit.slope.to_bits());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Jensen: the L_p norm is nondecreasing in p on a fixed sample.
        #[test]
        fn lp_norms_are_monotone_in_p(
            xs in prop::collection::vec(-50.0f64..50.0, 1..200),
            p1 in 1.0f64..6.0,
            bump in 0.1f64..4.0,
        ) {
            let lo = estimate_lp(&xs, p1).unwrap().value;
            let hi = estimate_lp(&xs, p1 + bump).unwrap().value;
            prop_assert!(lo <= hi + 1e-9 * hi.max(1.0));
        }
    }
}

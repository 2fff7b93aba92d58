use ndarray::Array2;

use crate::paths::{Path, TimeGrid};
use crate::{Error, Real, Result};

/// Accumulates the log of the measure-change density along one path.
///
/// For a change of measure with kernel `λ_t` per noise factor, the density
/// relative to the original measure is `e^{N_t}` with
///
/// ```text
/// N_t = Σ_j ( ½ ∫₀ᵗ λ²_{j,s} ds − ∫₀ᵗ λ_{j,s} dw̃_{j,s} )
/// ```
///
/// where `w̃_j = w_j + ∫ λ_j ds` are the Brownian motions of the *new*
/// measure. `wq_increments` must therefore contain the increments of the
/// new-measure Brownian motions; a caller simulating under the original
/// measure obtains them by adding `λ_t Δt` to each raw increment.
///
/// Sums use the left endpoint of each interval. The accumulation happens in
/// log space and is exponentiated only at the end, so intermediate values
/// cannot overflow.
pub fn girsanov_log_density<T: Real>(
    lambda: &Path<T>,
    wq_increments: &Array2<T>,
    grid: &TimeGrid<T>,
) -> Result<Path<T>> {
    let n = grid.n_steps();
    let d = lambda.dim();
    if lambda.n_points() != n + 1 || lambda.grid() != grid {
        return Err(Error::ShapeMismatch(format!(
            "kernel path has {} points for a grid with {}",
            lambda.n_points(),
            n + 1
        )));
    }
    if wq_increments.nrows() != n || wq_increments.ncols() != d {
        return Err(Error::ShapeMismatch(format!(
            "increments are {}x{}, expected {}x{}",
            wq_increments.nrows(),
            wq_increments.ncols(),
            n,
            d
        )));
    }
    let dt = grid.dt();
    let half = T::of(0.5);
    let mut values = Array2::zeros((n + 1, 1));
    let mut log_n = T::zero();
    for k in 0..n {
        for j in 0..d {
            let lam = lambda.at(k, j);
            log_n += half * lam * lam * dt - lam * wq_increments[[k, j]];
        }
        if !log_n.is_finite() {
            return Err(Error::NonFinite { step: k + 1, component: 0 });
        }
        values[[k + 1, 0]] = log_n;
    }
    Path::from_values(*grid, values)
}

/// Density path `e^{N_t}` of the measure change; see
/// [`girsanov_log_density`] for the convention on `wq_increments`.
pub fn girsanov_density<T: Real>(
    lambda: &Path<T>,
    wq_increments: &Array2<T>,
    grid: &TimeGrid<T>,
) -> Result<Path<T>> {
    let log_density = girsanov_log_density(lambda, wq_increments, grid)?;
    let values = log_density.values().mapv(|x| x.exp());
    Path::from_values(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{brownian_increments, quadratic_variation, SeedSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_kernel_gives_the_constant_density_one() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let lambda = Path::constant(grid, 0.0).unwrap();
        let dw = brownian_increments::<f64>(SeedSpec::new(7, 0), &grid, 1);
        let density = girsanov_density(&lambda, &dw, &grid).unwrap();
        for k in 0..=64 {
            assert_eq!(density.scalar_at(k), 1.0);
        }
    }

    /// Under the original measure the density must be a unit-mean
    /// martingale; with a constant kernel its terminal variance is
    /// `e^{λ²T} − 1`.
    #[test]
    fn constant_kernel_density_has_unit_mean_and_lognormal_variance() {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let lam = 0.25;
        let lambda = Path::constant(grid, lam).unwrap();
        let n_paths = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut sum_q = 0.0; // fourth-moment accumulation for the variance error bar
        for p in 0..n_paths {
            let mut dw = brownian_increments::<f64>(SeedSpec::new(99, p), &grid, 1);
            dw.mapv_inplace(|x| x + lam * grid.dt());
            let z = girsanov_density(&lambda, &dw, &grid).unwrap().terminal_scalar();
            sum += z;
            sum_sq += z * z;
            sum_q += z * z * z * z;
        }
        let n = n_paths as f64;
        let mean = sum / n;
        let se_mean = ((sum_sq / n - mean * mean) / n).sqrt();
        assert_abs_diff_eq!(mean, 1.0, epsilon = 2.0 * se_mean);

        let horizon = 1.0;
        let var = sum_sq / n - mean * mean;
        let expected_var = (lam * lam * horizon).exp() - 1.0;
        let se_var = ((sum_q / n - (sum_sq / n).powi(2)) / n).sqrt();
        assert_abs_diff_eq!(var, expected_var, epsilon = 3.0 * se_var);
        assert_abs_diff_eq!(expected_var, 0.06449, epsilon = 5e-5);
    }

    /// The log density is a semimartingale whose quadratic variation is
    /// `∫ λ² dt` up to discretization error.
    #[test]
    fn log_density_quadratic_variation_matches_the_kernel() {
        let grid = TimeGrid::new(1.0, 10_000).unwrap();
        let lam = 0.5;
        let lambda = Path::constant(grid, lam).unwrap();
        let mut dw = brownian_increments::<f64>(SeedSpec::new(3, 11), &grid, 1);
        dw.mapv_inplace(|x| x + lam * grid.dt());
        let log_density = girsanov_log_density(&lambda, &dw, &grid).unwrap();
        let qv = quadratic_variation(&log_density).terminal_scalar();
        assert_abs_diff_eq!(qv, lam * lam, epsilon = 0.05 * lam * lam);
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let other = TimeGrid::new(1.0, 8).unwrap();
        let lambda = Path::constant(other, 0.1).unwrap();
        let dw = brownian_increments::<f64>(SeedSpec::new(1, 0), &grid, 1);
        assert!(girsanov_density(&lambda, &dw, &grid).is_err());

        let lambda2 = Path::constant_columns(grid, &[0.1, 0.2]).unwrap();
        assert!(girsanov_density(&lambda2, &dw, &grid).is_err());
    }

    /// Two independent factors multiply: running the two kernels jointly
    /// equals the product of the one-factor densities.
    #[test]
    fn factors_compose_multiplicatively() {
        let grid = TimeGrid::new(0.5, 128).unwrap();
        let lambda = Path::constant_columns(grid, &[0.3, -0.7]).unwrap();
        let dw = brownian_increments::<f64>(SeedSpec::new(42, 5), &grid, 2);
        let joint = girsanov_density(&lambda, &dw, &grid).unwrap();

        let l0 = Path::constant(grid, 0.3).unwrap();
        let l1 = Path::constant(grid, -0.7).unwrap();
        let d0 = girsanov_density(&l0, &dw.column(0).to_owned().insert_axis(ndarray::Axis(1)), &grid).unwrap();
        let d1 = girsanov_density(&l1, &dw.column(1).to_owned().insert_axis(ndarray::Axis(1)), &grid).unwrap();
        for k in 0..=128 {
            assert_abs_diff_eq!(joint.scalar_at(k), d0.scalar_at(k) * d1.scalar_at(k), epsilon = 1e-12);
        }
    }
}

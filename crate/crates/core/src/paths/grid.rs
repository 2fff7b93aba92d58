use ndarray::Array2;

use crate::{Error, Real, Result};

/// Uniform time grid `t_k = k·Δt` on `[0, T]` with `Δt = T / n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    horizon: T,
    n_steps: usize,
}

impl<T: Real> TimeGrid<T> {
    /// Builds a grid over `[0, horizon]` with `n_steps` uniform steps.
    pub fn new(horizon: T, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be >= 1".into()));
        }
        if !(horizon.is_finite() && horizon > T::zero()) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be finite and positive, got {horizon}"
            )));
        }
        Ok(Self { horizon, n_steps })
    }

    /// Final time `T`.
    pub fn horizon(&self) -> T {
        self.horizon
    }

    /// Number of steps (the grid has `n_steps + 1` points, starting at 0).
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Step size `Δt = T / n_steps`.
    pub fn dt(&self) -> T {
        self.horizon / T::of(self.n_steps as f64)
    }

    /// Grid time `t_k = k·Δt` for `k = 0, ..., n_steps`.
    pub fn t(&self, k: usize) -> T {
        debug_assert!(k <= self.n_steps);
        T::of(k as f64) * self.dt()
    }

    /// All grid times, `n_steps + 1` of them.
    pub fn times(&self) -> Vec<T> {
        (0..=self.n_steps).map(|k| self.t(k)).collect()
    }
}

/// A `d`-component path sampled on a [`TimeGrid`]: row `k` holds the state at
/// `t_k`, so there are `n_steps + 1` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Path<T> {
    grid: TimeGrid<T>,
    values: Array2<T>,
}

impl<T: Real> Path<T> {
    /// Wraps a value matrix, checking the shape against the grid and that all
    /// entries are finite.
    pub fn from_values(grid: TimeGrid<T>, values: Array2<T>) -> Result<Self> {
        if values.nrows() != grid.n_steps() + 1 || values.ncols() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "path needs {} rows and >= 1 column, got {}x{}",
                grid.n_steps() + 1,
                values.nrows(),
                values.ncols()
            )));
        }
        for ((k, i), v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { step: k, component: i });
            }
        }
        Ok(Self { grid, values })
    }

    /// Internal constructor for values already produced by a validated kernel.
    pub(crate) fn from_values_unchecked(grid: TimeGrid<T>, values: Array2<T>) -> Self {
        debug_assert_eq!(values.nrows(), grid.n_steps() + 1);
        Self { grid, values }
    }

    /// Single-component path sampled from a function of time.
    pub fn from_fn(grid: TimeGrid<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let values =
            Array2::from_shape_fn((grid.n_steps() + 1, 1), |(k, _)| f(grid.t(k)));
        Self::from_values(grid, values)
    }

    /// Single-component path constant in time.
    pub fn constant(grid: TimeGrid<T>, value: T) -> Result<Self> {
        Self::from_fn(grid, |_| value)
    }

    /// Multi-component path constant in time, one column per entry.
    pub fn constant_columns(grid: TimeGrid<T>, values: &[T]) -> Result<Self> {
        let array =
            Array2::from_shape_fn((grid.n_steps() + 1, values.len()), |(_, i)| values[i]);
        Self::from_values(grid, array)
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    /// Number of components `d`.
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Number of grid points (`n_steps + 1`).
    pub fn n_points(&self) -> usize {
        self.values.nrows()
    }

    /// Value of component `i` at grid index `k`.
    #[inline]
    pub fn at(&self, k: usize, i: usize) -> T {
        self.values[[k, i]]
    }

    /// Value at grid index `k` of a single-component path.
    #[inline]
    pub fn scalar_at(&self, k: usize) -> T {
        debug_assert_eq!(self.dim(), 1);
        self.values[[k, 0]]
    }

    /// Increment of component `i` over step `k`, `x_{k+1} - x_k`.
    #[inline]
    pub fn step(&self, k: usize, i: usize) -> T {
        self.values[[k + 1, i]] - self.values[[k, i]]
    }

    /// Terminal value of component `i`.
    pub fn terminal(&self, i: usize) -> T {
        self.values[[self.values.nrows() - 1, i]]
    }

    /// Terminal value of a single-component path.
    pub fn terminal_scalar(&self) -> T {
        debug_assert_eq!(self.dim(), 1);
        self.terminal(0)
    }

    /// Raw value matrix.
    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    /// True when `other` lives on the same grid with the same dimension.
    pub fn same_shape(&self, other: &Path<T>) -> bool {
        self.grid == other.grid && self.dim() == other.dim()
    }
}

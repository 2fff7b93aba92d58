use ndarray::Array2;

use crate::{Error, Real, Result};

use super::{Path, TimeGrid};

/// Euler–Maruyama integration of `dX^i = a_i(t, X) dt + b_i(t, X) dW^i`.
///
/// `drift` and `diffusion` write the coefficient vector for state `x` at time
/// `t` into the provided buffer (one entry per component; each component is
/// driven by its own increment column, so correlated noise is expressed by
/// pre-mixing the increment matrix). The scheme is the plain left-endpoint
/// update
///
/// ```text
/// X_{k+1} = X_k + a(t_k, X_k)·Δt + b(t_k, X_k)·ΔW_k .
/// ```
///
/// Integration aborts with [`Error::NonFinite`] as soon as any state
/// component stops being finite.
pub fn integrate_sde<T, F, G>(
    x0: &[T],
    drift: F,
    diffusion: G,
    increments: &Array2<T>,
    grid: &TimeGrid<T>,
) -> Result<Path<T>>
where
    T: Real,
    F: Fn(T, &[T], &mut [T]),
    G: Fn(T, &[T], &mut [T]),
{
    let d = x0.len();
    if d == 0 {
        return Err(Error::ShapeMismatch("state must have >= 1 component".into()));
    }
    if increments.nrows() != grid.n_steps() || increments.ncols() != d {
        return Err(Error::ShapeMismatch(format!(
            "increments must be {}x{}, got {}x{}",
            grid.n_steps(),
            d,
            increments.nrows(),
            increments.ncols()
        )));
    }

    let dt = grid.dt();
    let mut values = Array2::zeros((grid.n_steps() + 1, d));
    let mut state = x0.to_vec();
    let mut a = vec![T::zero(); d];
    let mut b = vec![T::zero(); d];

    for (i, &v) in x0.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { step: 0, component: i });
        }
        values[[0, i]] = v;
    }
    for k in 0..grid.n_steps() {
        let t = grid.t(k);
        drift(t, &state, &mut a);
        diffusion(t, &state, &mut b);
        for i in 0..d {
            let next = state[i] + a[i] * dt + b[i] * increments[[k, i]];
            if !next.is_finite() {
                return Err(Error::NonFinite { step: k + 1, component: i });
            }
            state[i] = next;
            values[[k + 1, i]] = next;
        }
    }
    Ok(Path::from_values_unchecked(*grid, values))
}

/// Left-endpoint stochastic integral `I_t = Σ_i ∫_0^t f^i dG^i`, summed over
/// components and returned as a running single-component path with `I_0 = 0`:
///
/// ```text
/// I_{k+1} = I_k + Σ_i f_k^i · (g_{k+1}^i − g_k^i) .
/// ```
pub fn stochastic_integral<T: Real>(
    integrand: &Path<T>,
    integrator: &Path<T>,
) -> Result<Path<T>> {
    if !integrand.same_shape(integrator) {
        return Err(Error::ShapeMismatch(
            "integrand and integrator must share grid and dimension".into(),
        ));
    }
    let d = integrand.dim();
    let n = integrand.grid().n_steps();
    let mut values = Array2::zeros((n + 1, 1));
    let mut acc = T::zero();
    for k in 0..n {
        for i in 0..d {
            acc += integrand.at(k, i) * integrator.step(k, i);
        }
        values[[k + 1, 0]] = acc;
    }
    Ok(Path::from_values_unchecked(*integrand.grid(), values))
}

/// Running realized quadratic variation `⟨X⟩_t`, summed over components:
/// `⟨X⟩_{k+1} = ⟨X⟩_k + Σ_i (x_{k+1}^i − x_k^i)²`.
pub fn quadratic_variation<T: Real>(path: &Path<T>) -> Path<T> {
    let d = path.dim();
    let n = path.grid().n_steps();
    let mut values = Array2::zeros((n + 1, 1));
    let mut acc = T::zero();
    for k in 0..n {
        for i in 0..d {
            let dx = path.step(k, i);
            acc += dx * dx;
        }
        values[[k + 1, 0]] = acc;
    }
    Path::from_values_unchecked(*path.grid(), values)
}

//! Time grids, sampled paths and the simulation primitives built on them.
//!
//! Everything downstream consumes the same three building blocks:
//!
//! * a uniform [`TimeGrid`] on `[0, T]`,
//! * a [`Path`] holding `n_steps + 1` rows of `d` components,
//! * counter-seeded Gaussian increments ([`brownian_increments`]) that are a
//!   pure function of `(master_seed, path_index)` so results never depend on
//!   how work is scheduled across threads.
//!
//! Stochastic integrals use the left endpoint of each step (the predictable
//! convention: positions chosen at `t_k` ride the move over `[t_k, t_{k+1}]`),
//! and quadratic variation is the running sum of squared increments over all
//! components.

mod grid;
mod rng;
mod sde;

pub use grid::{Path, TimeGrid};
pub use rng::{brownian_increments, SeedSpec};
pub use sde::{integrate_sde, quadratic_variation, stochastic_integral};

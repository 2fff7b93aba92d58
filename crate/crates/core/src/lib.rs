//! Monte Carlo laboratory for band tracking of trading targets under
//! proportional transaction costs.
//!
//! The library simulates a trading target `θ` (shares or monetary units of a
//! risky asset), follows it with the minimal "band" control `ϑ` that keeps the
//! deviation inside `[-δ, δ]` per asset, and evaluates pathwise certificates
//! for the turnover and wealth shortfall of that control:
//!
//! ```text
//! |ϑ|_t  ≤  2dδ + ∫ ξ·dθ + (1/2δ)⟨θ⟩_t                  (turnover certificate)
//! |X^{ϑ,ε}_t − X^θ_t|  ≤  δ|∫ ξ·dS| + 2ε·(turnover rhs)  (tracking certificate)
//! ```
//!
//! together with the scaling laws those certificates imply: turnover grows
//! like `1/δ`, the wealth shortfall of a `δ = √ε` band is `O(√ε)`, and the
//! utility loss of a `δ = ε^{1/3}` band stays within `O(ε^{2/3})` of the
//! frictionless optimum.
//!
//! Module map:
//!
//! * [`paths`] — time grids, sampled paths, seeded Gaussian increments,
//!   Euler–Maruyama integration, stochastic integrals, quadratic variation.
//! * [`models`] — market models (constant-coefficient and mean-reverting
//!   drift), frictionless targets, change-of-measure densities, scenario
//!   simulation and integrability diagnostics.
//! * [`tracker`] — the band control itself in shares and monetary modes.
//! * [`bounds`] — wealth ledgers and the pathwise certificates above.
//! * [`utility`] — exponential utility, first-order-condition residuals and
//!   utility-loss estimates.
//! * [`estimator`] — L^p norms with bootstrap errors, scaling-law fits.
//! * [`experiments`] — the named end-to-end experiments driven by the CLI and
//!   the acceptance suite.
//!
//! All numerical kernels are generic over the scalar type through [`Real`];
//! concrete `f64` aliases ([`Path64`], [`Grid64`], …) are exported at the
//! crate root and are what the experiments use.

use std::fmt::{Debug, Display, LowerExp};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub mod bounds;
pub mod estimator;
pub mod experiments;
pub mod models;
pub mod paths;
pub mod tracker;
pub mod utility;

/// Floating-point scalar the numerical kernels are generic over.
///
/// Implemented for `f32` and `f64`. Random normal variates are always drawn
/// in `f64` and converted, so the draw sequence is identical for every
/// scalar type and differs only in the final rounding.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Shorthand for converting an `f64` constant into `Self`.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant must convert")
    }

    /// Lossy conversion back to `f64` (exact for `f64`, widening for `f32`).
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Errors surfaced by the numerical layers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A time grid failed validation (empty, non-positive step, ...).
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    /// Two paths that must share a grid/shape do not.
    #[error("incompatible paths: {0}")]
    ShapeMismatch(String),
    /// A parameter failed validation.
    #[error("invalid parameter `{name}`: {rule}")]
    InvalidParameter { name: &'static str, rule: String },
    /// A simulated state stopped being finite.
    #[error("non-finite state at step {step}, component {component}")]
    NonFinite { step: usize, component: usize },
    /// A backward ODE solution exploded before reaching the initial time.
    #[error("ODE solution blew up at t = {time}")]
    OdeBlowUp { time: f64 },
    /// An estimator was handed an empty or degenerate sample.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// `f64` time grid.
pub type Grid64 = paths::TimeGrid<f64>;
/// `f64` sampled path.
pub type Path64 = paths::Path<f64>;
/// `f64` band-tracker run.
pub type TrackerRun64 = tracker::TrackerRun<f64>;
/// `f64` pathwise bound report.
pub type BoundReport64 = bounds::BoundReport<f64>;

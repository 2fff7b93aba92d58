//! Market models, optimal targets, measure changes, and moment diagnostics.
//!
//! Two price models are provided: a constant-coefficient model whose optimal
//! position is the classical constant allocation, and a mean-reverting drift
//! model whose optimal position is affine in the drift state with
//! coefficients obtained from a backward Riccati system. Scenarios can be
//! simulated under the physical measure or directly under the martingale
//! measure induced by the optimal strategy; under the physical measure the
//! corresponding density is tracked pathwise.

mod constant;
mod diagnostics;
mod kim_omberg;
mod measure;
mod scenario;

pub use constant::{merton_strategy, ConstantModel};
pub use diagnostics::{
    assumption_diagnostics, diagnostic_sample, DiagnosticReport, DiagnosticSample, MomentEstimate,
};
pub use kim_omberg::{ko_strategy, riccati_solve, KimOmbergModel, KimOmbergSolved};
pub use measure::{girsanov_density, girsanov_log_density};
pub use scenario::{simulate_scenario, MarketScenario, Measure, ModelSpec, TargetSpec};

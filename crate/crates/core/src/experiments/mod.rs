//! Named experiments: configuration, deterministic parallel execution, and
//! tabular results ready for CSV emission.
//!
//! Every experiment follows the same recipe: fan path simulation out with
//! [`map_paths`](crate::estimator::map_paths) (per-path randomness comes from
//! the path index, never from thread identity), collect per-path statistics
//! in path order, and reduce with fixed-order pairwise summation. Outputs are
//! therefore byte-identical for any worker count.

mod io;

pub use io::{write_outputs, write_summary_csv, write_table_csv};

use std::path::PathBuf;

use crate::bounds::{
    monetary_turnover_bound, returns_path, tracking_bound, turnover_bound, wealth_frictional,
    wealth_frictionless, CostSpec,
};
use crate::estimator::{
    estimate_lp, fit_linear, fit_scaling, map_paths, mean_and_stderr, LpEstimate,
};
use crate::models::{
    assumption_diagnostics, diagnostic_sample, merton_strategy, riccati_solve, simulate_scenario,
    ConstantModel, KimOmbergModel, Measure, ModelSpec, TargetSpec,
};
use crate::paths::{brownian_increments, Path, SeedSpec, TimeGrid};
use crate::tracker::{track_monetary, track_shares, BandConfig, TradeMode};
use crate::utility::{foc_residual, utility_loss, UtilitySpec};
use crate::{Error, Result};

/// Tolerance constant for pathwise certificate checks: slack may dip below
/// zero by at most `K·√Δt` (in practice the discrete certificates are exact
/// and the observed dip is rounding noise).
const PATHWISE_SLACK_K: f64 = 1.0;

/// The experiments the driver knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Sharpness,
    PathwiseBound,
    TrackingError,
    UtilityLoss,
    MonetaryBound,
    FocCheck,
    Diagnostics,
}

impl ExperimentKind {
    pub fn all() -> &'static [ExperimentKind] {
        &[
            ExperimentKind::Sharpness,
            ExperimentKind::PathwiseBound,
            ExperimentKind::TrackingError,
            ExperimentKind::UtilityLoss,
            ExperimentKind::MonetaryBound,
            ExperimentKind::FocCheck,
            ExperimentKind::Diagnostics,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Sharpness => "sharpness",
            ExperimentKind::PathwiseBound => "pathwise_bound",
            ExperimentKind::TrackingError => "tracking_error",
            ExperimentKind::UtilityLoss => "utility_loss",
            ExperimentKind::MonetaryBound => "monetary_bound",
            ExperimentKind::FocCheck => "foc_check",
            ExperimentKind::Diagnostics => "diagnostics",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ExperimentKind::all().iter().copied().find(|k| k.name() == s)
    }

    /// One-line description for `list`-style output.
    pub fn describe(&self) -> &'static str {
        match self {
            ExperimentKind::Sharpness => {
                "expected turnover of the band tracker vs 1/δ on a Brownian target"
            }
            ExperimentKind::PathwiseBound => {
                "pathwise turnover certificate slack and identity-residual refinement"
            }
            ExperimentKind::TrackingError => {
                "L_p tracking error vs cost rate ε with δ=√ε, plus the martingale identity"
            }
            ExperimentKind::UtilityLoss => {
                "utility loss of the band tracker vs ε with δ=ε^{1/3} under common random numbers"
            }
            ExperimentKind::MonetaryBound => {
                "monetary-mode turnover certificate on geometric prices and the constant-price reduction"
            }
            ExperimentKind::FocCheck => {
                "first-order-condition residual linking marginal utility to the dual density"
            }
            ExperimentKind::Diagnostics => {
                "integrability and exponential-moment diagnostics of simulated scenarios"
            }
        }
    }
}

/// A resolved experiment configuration. Outputs are a pure function of this
/// struct plus the master seed it contains; worker count and output
/// directory affect only where and how fast results appear.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub horizon: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    /// Norm order for L_p aggregation where the experiment uses one.
    pub p: f64,
    pub delta_grid: Vec<f64>,
    pub epsilon_grid: Vec<f64>,
    /// Step-size override. `None` applies the coupling rule `dt = δ²/100`
    /// per run (with δ derived from ε where the experiment dictates).
    pub dt: Option<f64>,
    pub mu_s: f64,
    pub sigma_s: f64,
    pub s0: f64,
    pub risk_aversion: f64,
    /// Market price of risk override; when set, the price drift becomes
    /// `λ·σ_S`.
    pub lambda: Option<f64>,
    /// Exponential-moment tilt for diagnostics.
    pub iota: f64,
    /// Include mean-reverting-drift (Ornstein–Uhlenbeck) rows where the
    /// experiment supports them.
    pub kim_omberg: bool,
    pub lambda_rev: f64,
    pub mu_bar: f64,
    pub sigma_mu: f64,
    pub rho: f64,
    pub mu0: f64,
    pub riccati_steps: usize,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Baseline configuration for an experiment, matching the scales the
    /// acceptance checks run at.
    pub fn defaults(experiment: ExperimentKind) -> Self {
        let half_decade: Vec<f64> = vec![1e-4, 10f64.powf(-3.5), 1e-3, 10f64.powf(-2.5), 1e-2];
        let (n_paths, p, delta_grid, epsilon_grid) = match experiment {
            ExperimentKind::Sharpness => (10_000, 1.0, vec![0.2, 0.1, 0.05], vec![]),
            ExperimentKind::PathwiseBound => (1_000, 1.0, vec![0.1], vec![]),
            ExperimentKind::TrackingError => (10_000, 2.0, vec![], half_decade.clone()),
            ExperimentKind::UtilityLoss => (100_000, 1.0, vec![], half_decade.clone()),
            ExperimentKind::MonetaryBound => (10_000, 1.0, vec![0.1], vec![]),
            ExperimentKind::FocCheck => (100_000, 2.0, vec![], vec![]),
            ExperimentKind::Diagnostics => (2_000, 2.0, vec![], vec![]),
        };
        let kim_omberg = matches!(
            experiment,
            ExperimentKind::PathwiseBound | ExperimentKind::UtilityLoss
        );
        ExperimentConfig {
            experiment,
            horizon: 1.0,
            n_paths,
            master_seed: 7,
            p,
            delta_grid,
            epsilon_grid,
            dt: None,
            mu_s: 0.05,
            sigma_s: 0.2,
            s0: 1.0,
            risk_aversion: 1.0,
            lambda: None,
            iota: 0.1,
            kim_omberg,
            lambda_rev: 1.0,
            mu_bar: 0.05,
            sigma_mu: 0.1,
            rho: -0.5,
            mu0: 0.05,
            riccati_steps: 400,
            output_dir: None,
        }
    }

    /// Step size for a run tracked at band width `delta`.
    fn run_dt(&self, delta: f64) -> f64 {
        self.dt.unwrap_or(delta * delta / 100.0)
    }

    /// The band widths this experiment will actually track at (δ grids are
    /// used directly; ε grids map through the experiment's δ(ε) rule).
    pub fn effective_deltas(&self) -> Vec<f64> {
        match self.experiment {
            ExperimentKind::Sharpness
            | ExperimentKind::PathwiseBound
            | ExperimentKind::MonetaryBound => self.delta_grid.clone(),
            ExperimentKind::TrackingError => {
                self.epsilon_grid.iter().map(|e| e.sqrt()).collect()
            }
            ExperimentKind::UtilityLoss => self.epsilon_grid.iter().map(|e| e.cbrt()).collect(),
            ExperimentKind::FocCheck | ExperimentKind::Diagnostics => vec![],
        }
    }

    /// Checks every invariant and returns one violation per broken rule.
    pub fn validate(&self) -> Vec<ConfigViolation> {
        let mut out = Vec::new();
        let mut bad = |field: &str, rule: String| {
            out.push(ConfigViolation { field: field.to_string(), rule });
        };
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            bad("horizon", "must be finite and > 0".into());
        }
        if self.n_paths < 2 {
            bad("n_paths", "must be at least 2".into());
        }
        if !(self.p >= 1.0) || !self.p.is_finite() {
            bad("p", "must be finite and >= 1".into());
        }
        for &d in &self.delta_grid {
            if !(d > 0.0 && d < 1.0) {
                bad("delta_grid", format!("delta must lie in (0,1), got {d}"));
            }
        }
        for &e in &self.epsilon_grid {
            if !(e > 0.0 && e < 1.0) {
                bad("epsilon_grid", format!("epsilon must lie in (0,1), got {e}"));
            }
        }
        let needs_deltas = matches!(
            self.experiment,
            ExperimentKind::Sharpness | ExperimentKind::PathwiseBound | ExperimentKind::MonetaryBound
        );
        if needs_deltas && self.delta_grid.is_empty() {
            bad("delta_grid", "this experiment requires at least one delta".into());
        }
        let needs_epsilons = matches!(
            self.experiment,
            ExperimentKind::TrackingError | ExperimentKind::UtilityLoss
        );
        if needs_epsilons && self.epsilon_grid.is_empty() {
            bad("epsilon_grid", "this experiment requires at least one epsilon".into());
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                bad("dt", "must be finite and > 0".into());
            } else {
                let deltas = self.effective_deltas();
                let dmin = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
                if dmin.is_finite() && dt > dmin * dmin / 100.0 + 1e-15 {
                    bad(
                        "dt",
                        format!(
                            "violates the grid coupling rule dt <= delta_min^2/100: \
                             dt={dt} but delta_min^2/100={}",
                            dmin * dmin / 100.0
                        ),
                    );
                }
            }
        }
        if !(self.sigma_s > 0.0) || !self.sigma_s.is_finite() {
            bad("sigma_s", "must be finite and > 0".into());
        }
        if !(self.s0 > 0.0) || !self.s0.is_finite() {
            bad("s0", "must be finite and > 0".into());
        }
        if !(self.risk_aversion > 0.0) || !self.risk_aversion.is_finite() {
            bad("risk_aversion", "must be finite and > 0".into());
        }
        if let Some(l) = self.lambda {
            if !l.is_finite() {
                bad("lambda", "must be finite".into());
            }
        }
        if !(self.iota >= 0.0) || !self.iota.is_finite() {
            bad("iota", "must be finite and >= 0".into());
        }
        if self.kim_omberg {
            if !(self.sigma_mu >= 0.0) || !self.sigma_mu.is_finite() {
                bad("sigma_mu", "must be finite and >= 0".into());
            }
            if !(self.rho.abs() <= 1.0) {
                bad("rho", "must lie in [-1,1]".into());
            }
            if !(self.lambda_rev >= 0.0) || !self.lambda_rev.is_finite() {
                bad("lambda_rev", "must be finite and >= 0".into());
            }
            if self.lambda_rev > 0.0 && self.mu_bar < 0.0 {
                bad("mu_bar", "must be >= 0 when lambda_rev > 0".into());
            }
            if self.riccati_steps < 2 {
                bad("riccati_steps", "must be at least 2".into());
            }
        }
        out
    }

    /// Resolved key=value pairs for CSV provenance headers, sorted by key.
    /// Worker count and output directory are deliberately absent: outputs
    /// must not depend on either.
    pub fn resolved_pairs(&self) -> Vec<(String, String)> {
        let join = |xs: &[f64]| {
            xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
        };
        let mut pairs = vec![
            ("experiment".to_string(), self.experiment.name().to_string()),
            ("horizon".to_string(), fmt_f64(self.horizon)),
            ("n_paths".to_string(), self.n_paths.to_string()),
            ("master_seed".to_string(), self.master_seed.to_string()),
            ("p".to_string(), fmt_f64(self.p)),
            ("delta_grid".to_string(), join(&self.delta_grid)),
            ("epsilon_grid".to_string(), join(&self.epsilon_grid)),
            (
                "dt".to_string(),
                self.dt.map(fmt_f64).unwrap_or_else(|| "auto".to_string()),
            ),
            ("mu_s".to_string(), fmt_f64(self.mu_s)),
            ("sigma_s".to_string(), fmt_f64(self.sigma_s)),
            ("s0".to_string(), fmt_f64(self.s0)),
            ("risk_aversion".to_string(), fmt_f64(self.risk_aversion)),
            (
                "lambda".to_string(),
                self.lambda.map(fmt_f64).unwrap_or_else(|| "auto".to_string()),
            ),
            ("iota".to_string(), fmt_f64(self.iota)),
            ("kim_omberg".to_string(), self.kim_omberg.to_string()),
        ];
        if self.kim_omberg {
            pairs.extend([
                ("lambda_rev".to_string(), fmt_f64(self.lambda_rev)),
                ("mu_bar".to_string(), fmt_f64(self.mu_bar)),
                ("sigma_mu".to_string(), fmt_f64(self.sigma_mu)),
                ("rho".to_string(), fmt_f64(self.rho)),
                ("mu0".to_string(), fmt_f64(self.mu0)),
                ("riccati_steps".to_string(), self.riccati_steps.to_string()),
            ]);
        }
        pairs.sort();
        pairs
    }
}

/// One broken configuration invariant: which field, and which rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigViolation {
    pub field: String,
    pub rule: String,
}

impl std::fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Shortest round-trip decimal formatting; deterministic across runs and
/// worker counts.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// A named result table (one CSV file).
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

/// One row of `summary.csv`: a named check with its observed value, the
/// reference value, the tolerance, and whether it passed. One-sided checks
/// (floors, thresholds) record the binding side in `pass`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionRow {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Everything an experiment produces: result tables plus summary rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub tables: Vec<Table>,
    pub criteria: Vec<CriterionRow>,
}

impl ExperimentOutput {
    /// True iff every summary row passed.
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

/// Runs the configured experiment on `workers` threads. The worker count
/// affects wall-clock time only, never results.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    let violations = cfg.validate();
    if let Some(v) = violations.first() {
        return Err(Error::InvalidParameter { name: "config", rule: v.to_string() });
    }
    let output = match cfg.experiment {
        ExperimentKind::Sharpness => run_sharpness(cfg, workers)?,
        ExperimentKind::PathwiseBound => run_pathwise_bound(cfg, workers)?,
        ExperimentKind::TrackingError => run_tracking_error(cfg, workers)?,
        ExperimentKind::UtilityLoss => run_utility_loss(cfg, workers)?,
        ExperimentKind::MonetaryBound => run_monetary_bound(cfg, workers)?,
        ExperimentKind::FocCheck => run_foc_check(cfg, workers)?,
        ExperimentKind::Diagnostics => run_diagnostics(cfg, workers)?,
    };
    for c in &output.criteria {
        if !c.observed.is_finite() || !c.tolerance.is_finite() {
            return Err(Error::DegenerateSample(format!(
                "non-finite statistic in summary row {}",
                c.name
            )));
        }
    }
    Ok(output)
}

/// Cumulative sum of per-step increments into a path starting at zero.
fn brownian_path(seed: SeedSpec, grid: &TimeGrid<f64>, dim: usize) -> Path<f64> {
    let dw = brownian_increments::<f64>(seed, grid, dim);
    let n = grid.n_steps();
    let mut values = ndarray::Array2::zeros((n + 1, dim));
    for k in 0..n {
        for j in 0..dim {
            values[[k + 1, j]] = values[[k, j]] + dw[[k, j]];
        }
    }
    Path::from_values_unchecked(*grid, values)
}

fn collect_paths<R: Send>(
    workers: usize,
    n_paths: usize,
    f: impl Fn(u64) -> Result<R> + Send + Sync,
) -> Result<Vec<R>> {
    map_paths(workers, n_paths, f).into_iter().collect()
}

fn grid_for(horizon: f64, dt: f64) -> Result<TimeGrid<f64>> {
    let n_steps = (horizon / dt).ceil().max(1.0) as usize;
    TimeGrid::new(horizon, n_steps)
}

fn percentile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let idx = ((v.len() as f64 - 1.0) * q).ceil() as usize;
    v[idx.min(v.len() - 1)]
}

fn short_sci(x: f64) -> String {
    format!("{x:.1e}")
}

// ---------------------------------------------------------------------------
// Sharpness: expected turnover against 1/δ on a driftless Brownian target.
// ---------------------------------------------------------------------------

fn run_sharpness(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    let mut rows = Vec::new();
    let mut criteria = Vec::new();
    let mut fit_pts: Vec<(f64, f64, f64)> = Vec::new();

    for &delta in &cfg.delta_grid {
        let grid = grid_for(cfg.horizon, cfg.run_dt(delta))?;
        let band = BandConfig::new(delta, TradeMode::Shares)?;
        let samples = collect_paths(workers, cfg.n_paths, |idx| {
            let theta = brownian_path(SeedSpec::new(cfg.master_seed, idx), &grid, 1);
            Ok(track_shares(&theta, &band)?.turnover_terminal())
        })?;
        let (mean, stderr) = mean_and_stderr(&samples)?;
        let expected = cfg.horizon / (2.0 * delta);
        rows.push(vec![
            fmt_f64(delta),
            fmt_f64(grid.dt()),
            grid.n_steps().to_string(),
            cfg.n_paths.to_string(),
            fmt_f64(mean),
            fmt_f64(stderr),
            fmt_f64(expected),
        ]);
        fit_pts.push((1.0 / delta, mean, stderr));
        criteria.push(CriterionRow {
            name: format!("sharpness_turnover_delta_{}", fmt_f64(delta)),
            observed: mean,
            expected,
            tolerance: 0.10 * expected,
            pass: (mean - expected).abs() <= 0.10 * expected,
        });
        if (delta - 0.1).abs() < 1e-12 && (cfg.horizon - 1.0).abs() < 1e-12 {
            // Floor from the exact expectation identity: the band correction
            // can only pull E|ϑ|_1 below 1/(2δ) by at most δ-order terms.
            let floor = 4.5;
            criteria.push(CriterionRow {
                name: "sharpness_floor_delta_0.1".to_string(),
                observed: mean,
                expected: floor,
                tolerance: 2.0 * stderr,
                pass: mean >= floor - 2.0 * stderr,
            });
        }
    }

    if fit_pts.len() >= 2 {
        let fit = fit_linear(&fit_pts)?;
        criteria.push(CriterionRow {
            name: "sharpness_slope_vs_inverse_delta".to_string(),
            observed: fit.slope,
            expected: cfg.horizon / 2.0,
            tolerance: 0.05,
            pass: (fit.slope - cfg.horizon / 2.0).abs() <= 0.05,
        });
    }

    Ok(ExperimentOutput {
        tables: vec![Table {
            name: "sharpness".to_string(),
            columns: vec!["delta", "dt", "n_steps", "n_paths", "mean_turnover", "stderr", "expected"],
            rows,
        }],
        criteria,
    })
}

// ---------------------------------------------------------------------------
// Pathwise bound: certificate slack and identity-residual refinement.
// ---------------------------------------------------------------------------

/// Certificate experiments track targets centered at their initial value:
/// the band bound's `2dδ` anchor covers positions that start inside the
/// band, while the one-off initial acquisition is a separate, bounded cost
/// with no bearing on the band dynamics being certified.
fn centered(path: &Path<f64>) -> Path<f64> {
    let n = path.grid().n_steps();
    let d = path.dim();
    let values = ndarray::Array2::from_shape_fn((n + 1, d), |(k, i)| {
        path.at(k, i) - path.at(0, i)
    });
    Path::from_values_unchecked(*path.grid(), values)
}

fn run_pathwise_bound(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    let delta = cfg.delta_grid[0];
    let band = BandConfig::new(delta, TradeMode::Shares)?;
    let base_dt = cfg.run_dt(delta);

    let mut rows = Vec::new();
    let mut criteria = Vec::new();

    let mut targets: Vec<(&str, Option<ModelSpec<f64>>)> = vec![("brownian", None)];
    if cfg.kim_omberg {
        let model = KimOmbergModel::new(
            cfg.sigma_s,
            cfg.lambda_rev,
            cfg.mu_bar,
            cfg.sigma_mu,
            cfg.rho,
            cfg.risk_aversion,
            cfg.s0,
            cfg.mu0,
            cfg.horizon,
            cfg.riccati_steps,
        )?;
        targets.push(("mean_reverting", Some(ModelSpec::KimOmberg(riccati_solve(&model)?))));
    }

    for (label, model) in &targets {
        let mut p99_by_resolution = Vec::new();
        let mut slack_by_resolution = Vec::new();
        for refine in [1usize, 4] {
            let grid = grid_for(cfg.horizon, base_dt / refine as f64)?;
            let stats = collect_paths(workers, cfg.n_paths, |idx| {
                let seed = SeedSpec::new(cfg.master_seed, idx);
                let theta = match model {
                    None => brownian_path(seed, &grid, 1),
                    Some(spec) => centered(
                        simulate_scenario(spec, &TargetSpec::KimOmberg, Measure::Physical, seed, &grid)?
                            .target(),
                    ),
                };
                let run = track_shares(&theta, &band)?;
                let report = turnover_bound(&theta, &run, delta)?;
                Ok((report.slack_min(), report.identity_residual().abs()))
            })?;
            let min_slack =
                stats.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
            let residuals: Vec<f64> = stats.iter().map(|s| s.1).collect();
            let p99 = percentile(&residuals, 0.99);
            let max_res = residuals.iter().cloned().fold(0.0, f64::max);
            rows.push(vec![
                label.to_string(),
                fmt_f64(delta),
                fmt_f64(grid.dt()),
                cfg.n_paths.to_string(),
                fmt_f64(min_slack),
                fmt_f64(p99),
                fmt_f64(max_res),
            ]);
            p99_by_resolution.push(p99);
            slack_by_resolution.push((min_slack, grid.dt()));
        }
        // Slack may dip below zero by at most K·√Δt at each resolution.
        let mut slack_pass = true;
        let mut worst_slack = f64::INFINITY;
        let mut worst_tol = 0.0;
        for &(slack, dt) in &slack_by_resolution {
            let tol = PATHWISE_SLACK_K * dt.sqrt();
            if slack < -tol {
                slack_pass = false;
            }
            if slack < worst_slack {
                worst_slack = slack;
                worst_tol = tol;
            }
        }
        criteria.push(CriterionRow {
            name: format!("pathwise_min_slack_{label}"),
            observed: worst_slack,
            expected: 0.0,
            tolerance: worst_tol,
            pass: slack_pass,
        });
        let ratio = if p99_by_resolution[1] > 0.0 {
            p99_by_resolution[0] / p99_by_resolution[1]
        } else {
            f64::INFINITY
        };
        criteria.push(CriterionRow {
            name: format!("pathwise_residual_p99_ratio_{label}"),
            observed: if ratio.is_finite() { ratio } else { 1e9 },
            expected: 1.5,
            tolerance: 0.0,
            pass: ratio >= 1.5,
        });
    }

    Ok(ExperimentOutput {
        tables: vec![Table {
            name: "pathwise_bound".to_string(),
            columns: vec![
                "target",
                "delta",
                "dt",
                "n_paths",
                "min_slack",
                "p99_identity_residual",
                "max_identity_residual",
            ],
            rows,
        }],
        criteria,
    })
}

// ---------------------------------------------------------------------------
// Tracking error: L_p of the wealth gap vs ε, plus the martingale identity.
// ---------------------------------------------------------------------------

fn run_tracking_error(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    let model = ConstantModel::new(cfg.mu_s, cfg.sigma_s, cfg.s0, cfg.risk_aversion)?;
    let spec = ModelSpec::Constant(model);
    let eps_max = cfg.epsilon_grid.iter().cloned().fold(0.0, f64::max);

    let mut rows = Vec::new();
    let mut criteria = Vec::new();
    let mut scaling_grid: Vec<(f64, LpEstimate<f64>)> = Vec::new();
    let mut tracking_slack_min = f64::INFINITY;
    let mut tracking_slack_tol: f64 = 0.0;

    for &eps in &cfg.epsilon_grid {
        let delta = eps.sqrt();
        let grid = grid_for(cfg.horizon, cfg.run_dt(delta))?;
        let band = BandConfig::new(delta, TradeMode::Shares)?;
        let cost = CostSpec::new(eps, TradeMode::Shares)?;
        let stats = collect_paths(workers, cfg.n_paths, |idx| {
            let scenario = simulate_scenario(
                &spec,
                &TargetSpec::PureBrownian { scale: 1.0 },
                Measure::DualMartingale,
                SeedSpec::new(cfg.master_seed, idx),
                &grid,
            )?;
            let run = track_shares(scenario.target(), &band)?;
            let x_free = wealth_frictionless(scenario.target(), scenario.price(), 0.0)?;
            let x_fric = wealth_frictional(&run, scenario.price(), 0.0, &cost)?;
            let report = tracking_bound(&run, scenario.price(), &cost, &x_fric, &x_free)?;
            let gap = x_fric.terminal_scalar() - x_free.terminal_scalar();
            let identity =
                gap + eps * (run.turnover_terminal() + run.terminal_liquidation());
            Ok((gap.abs(), identity, report.slack_min()))
        })?;
        let gaps: Vec<f64> = stats.iter().map(|s| s.0).collect();
        let est = estimate_lp(&gaps, cfg.p)?;
        let slack = stats.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
        tracking_slack_tol = tracking_slack_tol.max(PATHWISE_SLACK_K * grid.dt().sqrt());
        tracking_slack_min = tracking_slack_min.min(slack);
        rows.push(vec![
            fmt_f64(eps),
            fmt_f64(delta),
            fmt_f64(grid.dt()),
            cfg.n_paths.to_string(),
            fmt_f64(cfg.p),
            fmt_f64(est.value),
            fmt_f64(est.stderr),
            fmt_f64(slack),
        ]);
        scaling_grid.push((eps, est));

        if (eps - eps_max).abs() < 1e-18 {
            let identities: Vec<f64> = stats.iter().map(|s| s.1).collect();
            let (mean, stderr) = mean_and_stderr(&identities)?;
            criteria.push(CriterionRow {
                name: "martingale_identity_mean".to_string(),
                observed: mean,
                expected: 0.0,
                tolerance: 2.0 * stderr,
                pass: mean.abs() <= 2.0 * stderr,
            });
        }
    }

    criteria.push(CriterionRow {
        name: "tracking_bound_min_slack".to_string(),
        observed: tracking_slack_min,
        expected: 0.0,
        tolerance: tracking_slack_tol,
        pass: tracking_slack_min >= -tracking_slack_tol,
    });

    if scaling_grid.len() >= 4 {
        let fit = fit_scaling(&scaling_grid)?;
        criteria.push(CriterionRow {
            name: "tracking_error_slope".to_string(),
            observed: fit.slope,
            expected: 0.5,
            tolerance: 0.05,
            pass: (fit.slope - 0.5).abs() <= 0.05,
        });
    }

    Ok(ExperimentOutput {
        tables: vec![Table {
            name: "tracking_error".to_string(),
            columns: vec![
                "epsilon", "delta", "dt", "n_paths", "p", "lp_value", "lp_stderr", "min_slack",
            ],
            rows,
        }],
        criteria,
    })
}

// ---------------------------------------------------------------------------
// Utility loss: paired frictional-vs-frictionless utility gap vs ε.
// ---------------------------------------------------------------------------

fn run_utility_loss(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    let model = ConstantModel::new(cfg.mu_s, cfg.sigma_s, cfg.s0, cfg.risk_aversion)?;
    let u = UtilitySpec::exponential(cfg.risk_aversion)?;
    let coeff = merton_strategy(&model);

    let mut rows = Vec::new();
    let mut criteria = Vec::new();
    let mut scaling_grid: Vec<(f64, LpEstimate<f64>)> = Vec::new();

    // Constant target: after the initial acquisition the tracker never
    // trades, and wealth is a function of the terminal price alone, whose
    // Gaussian law the one-step grid samples exactly. No discretization
    // error enters, so the step-size coupling rule is vacuous here.
    let one_step = TimeGrid::new(cfg.horizon, 1)?;
    for &eps in &cfg.epsilon_grid {
        let delta = eps.cbrt();
        let position = if coeff.abs() > delta { coeff - delta * coeff.signum() } else { 0.0 };
        let acquisition = position.abs();
        let pairs = collect_paths(workers, cfg.n_paths, |idx| {
            let dw = brownian_increments::<f64>(
                SeedSpec::new(cfg.master_seed, idx),
                &one_step,
                1,
            )[[0, 0]];
            let ds = cfg.mu_s * cfg.horizon + cfg.sigma_s * dw;
            let x_free = coeff * ds;
            let x_fric = position * ds - eps * (acquisition + position.abs());
            Ok((x_fric, x_free))
        })?;
        let fric: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let free: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let est = utility_loss(&fric, &free, &u)?;
        rows.push(vec![
            "merton".to_string(),
            fmt_f64(eps),
            fmt_f64(delta),
            cfg.n_paths.to_string(),
            fmt_f64(est.loss),
            fmt_f64(est.stderr),
        ]);
        criteria.push(CriterionRow {
            name: format!("utility_loss_nonneg_eps_{}", short_sci(eps)),
            observed: est.loss,
            expected: 0.0,
            tolerance: 2.0 * est.stderr,
            pass: est.loss >= -2.0 * est.stderr,
        });
        if est.loss > 0.0 {
            scaling_grid.push((
                eps,
                LpEstimate { p: 1.0, value: est.loss, stderr: est.stderr, n_paths: est.n_paths },
            ));
        }
    }

    if scaling_grid.len() >= 4 {
        let fit = fit_scaling(&scaling_grid)?;
        criteria.push(CriterionRow {
            name: "utility_loss_slope".to_string(),
            observed: fit.slope,
            expected: 0.70,
            tolerance: 0.10,
            pass: (0.60..=0.80).contains(&fit.slope),
        });
    }

    if cfg.kim_omberg {
        let (ko_rows, ko_criteria) = run_utility_loss_mean_reverting(cfg, workers, &u)?;
        rows.extend(ko_rows);
        criteria.extend(ko_criteria);
    }

    Ok(ExperimentOutput {
        tables: vec![Table {
            name: "utility_loss".to_string(),
            columns: vec!["model", "epsilon", "delta", "n_paths", "loss", "stderr"],
            rows,
        }],
        criteria,
    })
}

/// The same paired loss measurement on the mean-reverting-drift model, where
/// the frictionless optimum genuinely diffuses and the tracker trades
/// continuously. Runs at a tenth of the configured path count.
fn run_utility_loss_mean_reverting(
    cfg: &ExperimentConfig,
    workers: usize,
    u: &UtilitySpec<f64>,
) -> Result<(Vec<Vec<String>>, Vec<CriterionRow>)> {
    let model = KimOmbergModel::new(
        cfg.sigma_s,
        cfg.lambda_rev,
        cfg.mu_bar,
        cfg.sigma_mu,
        cfg.rho,
        cfg.risk_aversion,
        cfg.s0,
        cfg.mu0,
        cfg.horizon,
        cfg.riccati_steps,
    )?;
    let spec = ModelSpec::KimOmberg(riccati_solve(&model)?);
    let n_paths = (cfg.n_paths / 10).max(100);

    let mut rows = Vec::new();
    let mut criteria = Vec::new();
    let mut scaling_grid: Vec<(f64, LpEstimate<f64>)> = Vec::new();

    for &eps in &cfg.epsilon_grid {
        let delta = eps.cbrt();
        let grid = grid_for(cfg.horizon, cfg.run_dt(delta))?;
        let band = BandConfig::new(delta, TradeMode::Shares)?;
        let cost = CostSpec::new(eps, TradeMode::Shares)?;
        let pairs = collect_paths(workers, n_paths, |idx| {
            let scenario = simulate_scenario(
                &spec,
                &TargetSpec::KimOmberg,
                Measure::Physical,
                SeedSpec::new(cfg.master_seed, idx),
                &grid,
            )?;
            let run = track_shares(scenario.target(), &band)?;
            let x_free = wealth_frictionless(scenario.target(), scenario.price(), 0.0)?;
            let x_fric = wealth_frictional(&run, scenario.price(), 0.0, &cost)?;
            Ok((x_fric.terminal_scalar(), x_free.terminal_scalar()))
        })?;
        let fric: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let free: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let est = utility_loss(&fric, &free, u)?;
        rows.push(vec![
            "mean_reverting".to_string(),
            fmt_f64(eps),
            fmt_f64(delta),
            n_paths.to_string(),
            fmt_f64(est.loss),
            fmt_f64(est.stderr),
        ]);
        if est.loss > 0.0 {
            scaling_grid.push((
                eps,
                LpEstimate { p: 1.0, value: est.loss, stderr: est.stderr, n_paths: est.n_paths },
            ));
        }
    }

    if scaling_grid.len() >= 4 {
        let fit = fit_scaling(&scaling_grid)?;
        criteria.push(CriterionRow {
            name: "utility_loss_slope_mean_reverting".to_string(),
            observed: fit.slope,
            expected: 0.70,
            tolerance: 0.10,
            pass: (0.60..=0.80).contains(&fit.slope),
        });
    }

    Ok((rows, criteria))
}

// ---------------------------------------------------------------------------
// Monetary bound: certificate on geometric prices + constant-price reduction.
// ---------------------------------------------------------------------------

fn run_monetary_bound(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    let delta = cfg.delta_grid[0];
    let grid = grid_for(cfg.horizon, cfg.run_dt(delta))?;
    let band = BandConfig::new(delta, TradeMode::Monetary)?;

    let stats = collect_paths(workers, cfg.n_paths, |idx| {
        let dw = brownian_increments::<f64>(SeedSpec::new(cfg.master_seed, idx), &grid, 2);
        let n = grid.n_steps();
        let mut price_values = ndarray::Array2::zeros((n + 1, 1));
        let mut target_values = ndarray::Array2::zeros((n + 1, 1));
        price_values[[0, 0]] = cfg.s0;
        for k in 0..n {
            let s = price_values[[k, 0]];
            price_values[[k + 1, 0]] =
                s * (1.0 + cfg.mu_s * grid.dt() + cfg.sigma_s * dw[[k, 0]]);
            target_values[[k + 1, 0]] = target_values[[k, 0]] + dw[[k, 1]];
        }
        let price = Path::from_values(grid, price_values)?;
        let target = Path::from_values(grid, target_values)?;
        let run = track_monetary(&target, &price, &band)?;
        let m = returns_path(&price)?;
        let report = monetary_turnover_bound(&run, &m, &target, delta)?;
        Ok((report.slack_min(), report.identity_residual().abs()))
    })?;

    let min_slack = stats.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let max_residual = stats.iter().map(|s| s.1).fold(0.0, f64::max);
    let tol = PATHWISE_SLACK_K * grid.dt().sqrt();

    let mut criteria = vec![CriterionRow {
        name: "monetary_min_slack".to_string(),
        observed: min_slack,
        expected: 0.0,
        tolerance: tol,
        pass: min_slack >= -tol,
    }];

    // Constant price: monetary tracking must coincide with shares-mode
    // tracking of the same target values, ledger byte for byte.
    let flat_grid = grid_for(cfg.horizon, cfg.run_dt(delta))?;
    let flat_price = Path::constant(flat_grid, cfg.s0)?;
    let target = brownian_path(SeedSpec::new(cfg.master_seed, 0), &flat_grid, 1);
    let monetary_run = track_monetary(&target, &flat_price, &band)?;
    let shares_run = track_shares(&target, &BandConfig::new(delta, TradeMode::Shares)?)?;
    let mut ledger_monetary = Vec::new();
    let mut ledger_shares = Vec::new();
    monetary_run
        .write_trade_ledger(&mut ledger_monetary)
        .map_err(|e| Error::DegenerateSample(format!("ledger write failed: {e}")))?;
    shares_run
        .write_trade_ledger(&mut ledger_shares)
        .map_err(|e| Error::DegenerateSample(format!("ledger write failed: {e}")))?;
    let ledgers_match = ledger_monetary == ledger_shares;
    criteria.push(CriterionRow {
        name: "monetary_ledger_equivalence".to_string(),
        observed: if ledgers_match { 1.0 } else { 0.0 },
        expected: 1.0,
        tolerance: 0.0,
        pass: ledgers_match,
    });

    Ok(ExperimentOutput {
        tables: vec![Table {
            name: "monetary_bound".to_string(),
            columns: vec![
                "delta",
                "dt",
                "n_paths",
                "min_slack",
                "max_identity_residual",
                "ledger_match",
            ],
            rows: vec![vec![
                fmt_f64(delta),
                fmt_f64(grid.dt()),
                cfg.n_paths.to_string(),
                fmt_f64(min_slack),
                fmt_f64(max_residual),
                ledgers_match.to_string(),
            ]],
        }],
        criteria,
    })
}

// ---------------------------------------------------------------------------
// First-order condition: marginal utility against the dual density.
// ---------------------------------------------------------------------------

fn run_foc_check(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    let lambda = cfg.lambda.unwrap_or(cfg.mu_s / cfg.sigma_s);
    let mu_s = lambda * cfg.sigma_s;
    let model = ConstantModel::new(mu_s, cfg.sigma_s, cfg.s0, cfg.risk_aversion)?;
    let spec = ModelSpec::Constant(model.clone());
    let u = UtilitySpec::exponential(cfg.risk_aversion)?;
    let coeff = merton_strategy(&model);
    let grid = grid_for(cfg.horizon, cfg.dt.unwrap_or(1e-4))?;

    let stats = collect_paths(workers, cfg.n_paths, |idx| {
        let scenario = simulate_scenario(
            &spec,
            &TargetSpec::Merton,
            Measure::Physical,
            SeedSpec::new(cfg.master_seed, idx),
            &grid,
        )?;
        let ds = scenario.price().terminal_scalar() - scenario.price().scalar_at(0);
        let density = scenario
            .dual_log_density()
            .expect("physical-measure scenario carries a density")
            .terminal_scalar()
            .exp();
        Ok((coeff * ds, 2.0 * coeff * ds, density))
    })?;
    let wealth_opt: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let wealth_sub: Vec<f64> = stats.iter().map(|s| s.1).collect();
    let density: Vec<f64> = stats.iter().map(|s| s.2).collect();

    let optimal = foc_residual(&wealth_opt, &density, &u)?;
    let mut criteria = Vec::new();
    let mut sub_rms = f64::NAN;
    if lambda == 0.0 {
        criteria.push(CriterionRow {
            name: "foc_rms_zero_premium".to_string(),
            observed: optimal.rms,
            expected: 0.0,
            tolerance: 1e-12,
            pass: optimal.rms <= 1e-12,
        });
    } else {
        let suboptimal = foc_residual(&wealth_sub, &density, &u)?;
        sub_rms = suboptimal.rms;
        criteria.push(CriterionRow {
            name: "foc_rms".to_string(),
            observed: optimal.rms,
            expected: 0.0,
            tolerance: 0.02,
            pass: optimal.rms < 0.02,
        });
        let ratio = suboptimal.rms / optimal.rms.max(f64::MIN_POSITIVE);
        criteria.push(CriterionRow {
            name: "foc_suboptimal_ratio".to_string(),
            observed: ratio,
            expected: 5.0,
            tolerance: 0.0,
            pass: ratio >= 5.0,
        });
    }

    Ok(ExperimentOutput {
        tables: vec![Table {
            name: "foc_check".to_string(),
            columns: vec![
                "lambda",
                "dt",
                "n_paths",
                "rms",
                "rms_stderr",
                "max_abs",
                "rms_suboptimal",
            ],
            rows: vec![vec![
                fmt_f64(lambda),
                fmt_f64(grid.dt()),
                cfg.n_paths.to_string(),
                fmt_f64(optimal.rms),
                fmt_f64(optimal.rms_stderr),
                fmt_f64(optimal.max_abs),
                if sub_rms.is_nan() { "-".to_string() } else { fmt_f64(sub_rms) },
            ]],
        }],
        criteria,
    })
}

// ---------------------------------------------------------------------------
// Diagnostics: integrability and exponential-moment report.
// ---------------------------------------------------------------------------

fn run_diagnostics(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    let grid = grid_for(cfg.horizon, cfg.dt.unwrap_or(1e-3))?;
    let spec = if cfg.kim_omberg {
        let model = KimOmbergModel::new(
            cfg.sigma_s,
            cfg.lambda_rev,
            cfg.mu_bar,
            cfg.sigma_mu,
            cfg.rho,
            cfg.risk_aversion,
            cfg.s0,
            cfg.mu0,
            cfg.horizon,
            cfg.riccati_steps,
        )?;
        ModelSpec::KimOmberg(riccati_solve(&model)?)
    } else {
        ModelSpec::Constant(ConstantModel::new(cfg.mu_s, cfg.sigma_s, cfg.s0, cfg.risk_aversion)?)
    };
    let target = match &spec {
        ModelSpec::Constant(_) => TargetSpec::Merton,
        ModelSpec::KimOmberg(_) => TargetSpec::KimOmberg,
    };

    let samples = collect_paths(workers, cfg.n_paths, |idx| {
        let scenario = simulate_scenario(
            &spec,
            &target,
            Measure::Physical,
            SeedSpec::new(cfg.master_seed, idx),
            &grid,
        )?;
        diagnostic_sample(&scenario, cfg.p, cfg.iota)
    })?;
    let report = assumption_diagnostics(&samples)?;

    let named = [
        ("target_coeff_lp", &report.target_coeff_lp),
        ("price_coeff_lp", &report.price_coeff_lp),
        ("exp_qv_target", &report.exp_qv_target),
        ("exp_qv_price", &report.exp_qv_price),
        ("exp_swing_up", &report.exp_swing_up),
        ("exp_swing_down", &report.exp_swing_down),
    ];
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (name, m) in named {
        rows.push(vec![
            name.to_string(),
            fmt_f64(m.mean),
            fmt_f64(m.stderr),
            m.tail_heavy.to_string(),
        ]);
        worst = worst.max(m.mean.abs());
    }
    let finite = worst.is_finite();
    let criteria = vec![CriterionRow {
        name: "diagnostics_all_finite".to_string(),
        observed: worst,
        expected: worst,
        tolerance: 0.0,
        pass: finite,
    }];

    Ok(ExperimentOutput {
        tables: vec![Table {
            name: "diagnostics".to_string(),
            columns: vec!["moment", "mean", "stderr", "tail_heavy"],
            rows,
        }],
        criteria,
    })
}

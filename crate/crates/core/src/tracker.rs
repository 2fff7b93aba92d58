//! Band tracking of a target position by reflection at a tolerance band.
//!
//! Given a target path `θ` and a half-width `δ`, the tracker holds a
//! controlled position that starts from zero and trades only when the
//! deviation from the target would leave `[−δ, δ]` (componentwise). Each
//! trade is minimal: it moves the position exactly back onto the band
//! boundary. Two parametrizations are supported:
//!
//! * **shares** — the position is a number of shares `ϑ`, adjusted at the end
//!   of every step in which `|θ_{k+1} − ϑ_k| > δ`;
//! * **monetary** — the position is a currency amount `Y` that first drifts
//!   with the asset's simple return over the step and is then reflected, so
//!   that `θ − Y` stays in the band. The cumulative transfer process plays
//!   the role of `ϑ`.
//!
//! Turnover accumulates the absolute traded amounts (shares or currency,
//! respectively), including a minimal initial trade when `|θ_0| > δ`.

use std::io::Write;

use ndarray::Array2;

use crate::paths::{Path, TimeGrid};
use crate::{Error, Real, Result};

/// Which quantity is kept inside the band and what turnover is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TradeMode {
    /// Track share counts; costs will be proportional to shares traded.
    Shares,
    /// Track currency amounts; costs will be proportional to money traded.
    Monetary,
}

/// Band half-width and trading parametrization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandConfig<T> {
    delta: T,
    mode: TradeMode,
}

impl<T: Real> BandConfig<T> {
    /// A band of half-width `delta > 0` in the given mode.
    pub fn new(delta: T, mode: TradeMode) -> Result<Self> {
        if !delta.is_finite() || delta <= T::zero() {
            return Err(Error::InvalidParameter {
                name: "delta",
                rule: "band half-width must be finite and > 0".into(),
            });
        }
        Ok(Self { delta, mode })
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn mode(&self) -> TradeMode {
        self.mode
    }
}

/// The full record of one tracking run: target, control, the position kept in
/// the band, running turnover, and the realized normalized deviation.
#[derive(Debug, Clone)]
pub struct TrackerRun<T: Real> {
    mode: TradeMode,
    delta: T,
    theta: Path<T>,
    /// Cumulative traded amount with sign (shares mode: the position itself;
    /// monetary mode: the cumulative currency transfer).
    vartheta: Path<T>,
    /// What is actually held inside the band (shares mode: `vartheta`;
    /// monetary mode: the drifting currency position `Y`).
    position: Path<T>,
    /// Running total of absolute traded amounts, summed over assets
    /// (single-component path; includes any initial trade).
    turnover: Path<T>,
    /// `(θ − position)/δ` clipped to `[−1, 1]`, one column per asset.
    xi_realized: Path<T>,
    terminal_liquidation: T,
    initial_jump: T,
}

impl<T: Real> TrackerRun<T> {
    pub fn mode(&self) -> TradeMode {
        self.mode
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn theta(&self) -> &Path<T> {
        &self.theta
    }

    pub fn vartheta(&self) -> &Path<T> {
        &self.vartheta
    }

    pub fn position(&self) -> &Path<T> {
        &self.position
    }

    pub fn turnover(&self) -> &Path<T> {
        &self.turnover
    }

    /// Total turnover over the whole horizon.
    pub fn turnover_terminal(&self) -> T {
        self.turnover.terminal_scalar()
    }

    pub fn xi_realized(&self) -> &Path<T> {
        &self.xi_realized
    }

    /// Absolute size of the terminal position, summed over assets — the
    /// amount that a terminal liquidation must trade.
    pub fn terminal_liquidation(&self) -> T {
        self.terminal_liquidation
    }

    /// Absolute size of the minimal initial trade (zero when the target
    /// starts inside the band).
    pub fn initial_jump(&self) -> T {
        self.initial_jump
    }

    /// Writes the per-step trade ledger as CSV with columns
    /// `t,asset,trade,position,target,turnover`.
    pub fn write_trade_ledger<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,asset,trade,position,target,turnover")?;
        let d = self.theta.dim();
        let grid = self.theta.grid();
        for k in 0..self.theta.n_points() {
            for i in 0..d {
                let trade = if k == 0 {
                    self.vartheta.at(0, i)
                } else {
                    self.vartheta.at(k, i) - self.vartheta.at(k - 1, i)
                };
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    grid.t(k),
                    i,
                    trade,
                    self.position.at(k, i),
                    self.theta.at(k, i),
                    self.turnover.scalar_at(k),
                )?;
            }
        }
        Ok(())
    }
}

/// Minimal trade moving `deviation = target − held` back into `[−δ, δ]`.
/// Returns the signed trade (zero when already inside the band).
fn reflect<T: Real>(deviation: T, delta: T) -> T {
    if deviation > delta {
        deviation - delta
    } else if deviation < -delta {
        deviation + delta
    } else {
        T::zero()
    }
}

/// Tracks `theta` with a share position starting from zero.
///
/// Per component and per step: if `θ_{k+1} − ϑ_k` leaves `[−δ, δ]`, the
/// position jumps to `θ_{k+1} ∓ δ` (the nearest band edge); otherwise it is
/// left alone. If `|θ_0| > δ`, a minimal initial trade moves the position to
/// the boundary and is charged to turnover.
pub fn track_shares<T: Real>(theta: &Path<T>, cfg: &BandConfig<T>) -> Result<TrackerRun<T>> {
    if cfg.mode() != TradeMode::Shares {
        return Err(Error::InvalidParameter {
            name: "cfg.mode",
            rule: "track_shares requires TradeMode::Shares".into(),
        });
    }
    run_band(theta, None, cfg)
}

/// Tracks `theta` with a currency position starting from zero.
///
/// Each step the held amount first drifts with the asset's simple return,
/// `Y_{k+1}^{pre} = Y_k · S_{k+1}/S_k`, then a minimal currency transfer
/// reflects `θ_{k+1} − Y_{k+1}` back into the band. Requires a strictly
/// positive price path of the same shape as `theta`.
pub fn track_monetary<T: Real>(
    theta: &Path<T>,
    price: &Path<T>,
    cfg: &BandConfig<T>,
) -> Result<TrackerRun<T>> {
    if cfg.mode() != TradeMode::Monetary {
        return Err(Error::InvalidParameter {
            name: "cfg.mode",
            rule: "track_monetary requires TradeMode::Monetary".into(),
        });
    }
    if !theta.same_shape(price) {
        return Err(Error::ShapeMismatch(
            "target and price must share grid and dimension".into(),
        ));
    }
    if price.values().iter().any(|&s| s <= T::zero()) {
        return Err(Error::InvalidParameter {
            name: "price",
            rule: "price must be strictly positive for monetary tracking".into(),
        });
    }
    run_band(theta, Some(price), cfg)
}

fn run_band<T: Real>(
    theta: &Path<T>,
    price: Option<&Path<T>>,
    cfg: &BandConfig<T>,
) -> Result<TrackerRun<T>> {
    let delta = cfg.delta();
    let d = theta.dim();
    let n = theta.grid().n_steps();
    let mut vartheta = Array2::zeros((n + 1, d));
    let mut position = Array2::zeros((n + 1, d));
    let mut turnover = Array2::zeros((n + 1, 1));
    let mut xi = Array2::zeros((n + 1, d));

    let mut initial_jump = T::zero();
    for i in 0..d {
        let trade = reflect(theta.at(0, i), delta);
        vartheta[[0, i]] = trade;
        position[[0, i]] = trade;
        initial_jump += trade.abs();
    }
    turnover[[0, 0]] = initial_jump;

    for k in 0..n {
        let mut traded = T::zero();
        for i in 0..d {
            let held = match price {
                None => position[[k, i]],
                // Currency drifts with the simple return over the step.
                Some(s) => position[[k, i]] * (s.at(k + 1, i) / s.at(k, i)),
            };
            let trade = reflect(theta.at(k + 1, i) - held, delta);
            position[[k + 1, i]] = held + trade;
            vartheta[[k + 1, i]] = vartheta[[k, i]] + trade;
            traded += trade.abs();
        }
        turnover[[k + 1, 0]] = turnover[[k, 0]] + traded;
    }

    let one = T::one();
    for k in 0..=n {
        for i in 0..d {
            let z = (theta.at(k, i) - position[[k, i]]) / delta;
            xi[[k, i]] = z.min(one).max(-one);
        }
    }

    let terminal_liquidation = (0..d).map(|i| position[[n, i]].abs()).fold(T::zero(), |a, b| a + b);
    let grid = *theta.grid();
    Ok(TrackerRun {
        mode: cfg.mode(),
        delta,
        theta: theta.clone(),
        vartheta: Path::from_values_unchecked(grid, vartheta),
        position: Path::from_values_unchecked(grid, position),
        turnover: Path::from_values_unchecked(grid, turnover),
        xi_realized: Path::from_values_unchecked(grid, xi),
        terminal_liquidation,
        initial_jump,
    })
}

/// One row of a discretization-refinement table: total turnover obtained for
/// a given step size, and the gap to the previous (coarser) row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineRow<T> {
    pub dt: T,
    pub n_steps: usize,
    pub turnover: T,
    /// `|turnover − previous turnover|`; `None` on the first row.
    pub cauchy_gap: Option<T>,
}

/// Reruns the tracker on successively finer grids and tabulates how total
/// turnover converges. `target` must produce the same underlying path on
/// every grid (deterministic function of time, or a refinement-coupled
/// simulation). `dt_list` must be strictly decreasing.
pub fn refine_check<T, F>(
    target: F,
    horizon: T,
    cfg: &BandConfig<T>,
    dt_list: &[T],
) -> Result<Vec<RefineRow<T>>>
where
    T: Real,
    F: Fn(&TimeGrid<T>) -> Result<Path<T>>,
{
    if dt_list.is_empty() {
        return Err(Error::InvalidParameter {
            name: "dt_list",
            rule: "at least one step size required".into(),
        });
    }
    if dt_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter {
            name: "dt_list",
            rule: "step sizes must be strictly decreasing".into(),
        });
    }
    let mut rows: Vec<RefineRow<T>> = Vec::with_capacity(dt_list.len());
    for &dt in dt_list {
        let n_steps = (horizon / dt).round().to_f64_lossy() as usize;
        let grid = TimeGrid::new(horizon, n_steps.max(1))?;
        let theta = target(&grid)?;
        let run = match cfg.mode() {
            TradeMode::Shares => track_shares(&theta, cfg)?,
            TradeMode::Monetary => {
                let price = Path::constant(grid, T::one())?;
                track_monetary(&theta, &price, cfg)?
            }
        };
        let turnover = run.turnover_terminal();
        let cauchy_gap = rows.last().map(|prev| (turnover - prev.turnover).abs());
        rows.push(RefineRow { dt: grid.dt(), n_steps: grid.n_steps(), turnover, cauchy_gap });
    }
    Ok(rows)
}

//! Simulation and grid optimization of rebasing stablecoin supply rules.
//!
//! A market cap follows exact-scheme GBM; each step the token supply is
//! rebased by `dP / B` whenever the relative price deviation `dP` leaves the
//! inactive band `[-A, A]`. Policies are scored by the loss
//! `E[Σ dP_t² + λ Σ dS_t²]` and ranked over (A, B) grids using common random
//! numbers. Historical rebase data can be replayed under alternative rules.

pub mod gbm;
pub mod histdata;
pub mod model;
pub mod montecarlo;
pub mod rebase;
pub mod simulate;
pub mod sweep;

pub use gbm::{derive_stream, generate_cap_path, NormalStream, PathSeed};
pub use histdata::{
    counterfactual_replay, load_history, realized_series, replay, HistError, PolicySchedule, RebaseRecord,
    ReplayReport, ScheduleEntry,
};
pub use model::{validate_policy, InvalidParam, LossBreakdown, LossWeights, MarketParams, PolicyParams, SimPath};
pub use montecarlo::{estimate_loss, estimate_loss_crn, ComponentStats, EstimateError, EstimateResult};
pub use rebase::{in_band, rebase_step, RebaseError};
pub use simulate::{path_loss, run_path, run_path_with, SimError};
pub use sweep::{
    lambda_frontier, optimal_policy, robustness_battery, sweep_grid, FrontierPoint, GridSpec, LossSurface,
    MarketVariant, RobustnessBase, RobustnessOutcome, SweepError,
};

//! Task-oriented prediction/communication co-design for haptic teleoperation
//! links.
//!
//! The crate combines three closed-form reliability models — finite
//! blocklength decoding error, effective-bandwidth queuing-delay violation,
//! and an empirical prediction-error surface — into an overall-error upper
//! bound, then optimizes per-link bandwidth and data rate against it and
//! validates the analytics with a slot-level Monte Carlo simulator.
//!
//! Modules:
//! - [`special`]: Q-function, Lambert W (-1 branch), Gauss quadrature.
//! - [`comm`]: link budget, decoding error, queuing-delay violation.
//! - [`reliability`]: three-case experienced delay and the overall bound.
//! - [`prediction`]: trajectory generation, AR predictor, tradeoff table.
//! - [`optimizer`]: two-dimensional binary search and multi-user allocation.
//! - [`simulator`]: Monte Carlo validation of the analytic bound.

pub mod comm;
pub mod error;
pub mod optimizer;
mod parallel;
pub mod prediction;
pub mod reliability;
pub mod simulator;
pub mod special;
pub mod units;

pub use comm::{FadingMode, LinkBudget, LinkParams, QueueLaw};
pub use error::{Error, Result};
pub use optimizer::{
    AllocationMode, AllocationResult, MultiUserAllocation, SearchConfig, ToleranceRule,
};
pub use prediction::{
    FitReport, LookupMode, PredictorModel, TradeoffTable, TrajectoryDataset, TrajectoryProcess,
};
pub use reliability::{Criticality, DelayCase, ErrorBreakdown, ExperiencedDelay, TaskSpec};
pub use simulator::{Placement, SimReport, SimScenario};

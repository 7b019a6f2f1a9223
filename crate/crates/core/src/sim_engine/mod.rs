//! Scenario-driven closed-loop simulation: loading and validation, the
//! fixed-step runner, CSV logging and summary metrics.

pub mod engine;
pub mod logging;
pub mod metrics;
pub mod scenario;

pub use engine::{run, EngineError, PlantModel};
pub use logging::{ForceBreakdown, Record, TimeSeriesLog, CSV_COLUMNS};
pub use metrics::{metrics, GammaRateStats, LogMode, Metrics, TurnStats};
pub use scenario::{
    ControllerMode, ControllerSpec, Scenario, ScenarioConfig, ScenarioError, ValidationIssue,
};

impl Scenario {
    /// Log mode matching this scenario's controller.
    pub fn log_mode(&self) -> LogMode {
        match self.controller {
            ControllerMode::Setpoint { .. } => LogMode::Setpoint,
            ControllerMode::PathFollowing { .. } => LogMode::PathFollowing {
                domain_end_known: true,
            },
            ControllerMode::TrajectoryTracking { .. } => LogMode::TrajectoryTracking,
        }
    }
}

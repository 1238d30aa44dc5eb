//! Scenario configuration, the simulation driver, metrics and experiments.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod sim;

pub use config::{
    ArrivalProcess, ConfigError, MeetingSpec, ResourceSpec, ScenarioConfig, Strategy,
};
pub use experiment::{
    compare_strategies, sensitivity_sweep, simulate_strategy, ComparisonRow, ExperimentError,
    PairedRun, StrategyComparison, Sweep, SweepParameter, SweepRow,
};
pub use metrics::{DelayKind, DelaySample, DelayStats, RunReport};
pub use sim::{
    arrival_times, run_scenario, run_scenario_traced, Fault, RunOutcome, SimError, Simulation,
};

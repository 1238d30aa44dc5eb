//! Discrete-event simulation of cancer case management in which care-team
//! members coordinate through a versioned, access-controlled case record.
//!
//! Time is an integer count of microseconds. Runs are reproducible from the
//! configuration and seed alone.

pub mod collaboration;
pub mod ids;
pub mod kernel;
pub mod record;
pub mod resources;
pub mod scenario;
pub mod time;

pub use scenario::{run_scenario, ScenarioConfig, Strategy};

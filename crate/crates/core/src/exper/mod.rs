//! Scenario configuration, sweeps and the command-line front end.

pub mod cli;
pub mod config;
pub mod sweep;

pub use config::{
    GridConfig, OutageCurveConfig, ScenarioConfig, SchemeSpec, SweepAxes, SweepPoint, TableConfig, TrafficConfig,
};
pub use sweep::{
    allocate_drop, drop_channel, mean_embb_power_dbm, run_sweep, run_sweep_to_dir, table_file_name, EmbbPowerRecord,
    OutageCurveRecord, Resources, SweepOutput, SweepRecord,
};

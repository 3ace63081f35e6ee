//! Laterally averaged two-dimensional reservoir simulator for temperature and
//! dissolved oxygen.

// `!(x > 0.0)` is how NaN gets rejected along with the rest
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod calibration;
pub mod column;
pub mod config;
pub mod contour;
pub mod engine;
pub mod forcing;
pub mod grid;
pub mod hydro;
pub mod oxygen;
pub mod scenario;
pub mod synth;
pub mod thermal;

pub use calibration::{ame, calibrate, match_profiles, rmse, CalibrationError, CalibrationResult, CalibrationSpec, StationProfileSet};
pub use column::{Column, ColumnMap};
pub use config::{ConfigError, RunConfig};
pub use engine::{run, run_prepared, EngineError, PreparedRun, RunOutput, Snapshot, State};
pub use forcing::{ForcingError, ForcingSeries, InflowRecord, MetRecord, WithdrawalRecord};
pub use grid::{AreaVolumeCurve, Grid, GridError};
pub use hydro::{CellField, Constituent, FlowField, HydroError, HydroParams, SurfaceState};
pub use oxygen::{OxygenError, OxygenParams};
pub use thermal::{HeatFluxBreakdown, ThermalError, ThermalParams};

//! Efficiency and energy accounting, the latency/bandwidth cost model and
//! report emission.

mod formulas;
mod profiles;
mod report;

pub use formulas::{comm_time, efficiency_hybrid, efficiency_mpi, power_per_iteration, predict_comm_time};
pub use profiles::{MachineProfile, B510, BGQ, PROFILES, XE6};
pub use report::{emit_report, read_records, write_records, Report, RunRecord};

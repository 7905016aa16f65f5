//! Experiment plumbing: wires generators, passes, the timing engine and the
//! GPU model together, sweeps knobs, and assembles reports.

pub mod experiment;
pub mod report;
pub mod reproduce;
pub mod sweep;

pub use experiment::{
    run, run_full, Experiment, GraphSpec, Knobs, Optimization, Primitive, ResultRow, RunOutput, DESK_GRAPHS,
    SSGEMM_ELEMENT_SPARSITY, SSGEMM_ROW_SPARSITY,
};
pub use report::{plot_data, plot_data_csv, report, Report, Summary};
pub use reproduce::{aggregate, aggregate_rows, reproduce, Aggregate, Figure};
pub use sweep::{sweep, Knob};

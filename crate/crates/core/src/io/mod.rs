//! Workload specs, counter traces and result files.

mod results;
mod trace;
mod workload;

pub use results::{
    ccdf_rows, load_ccdf, load_results, read_ccdf, read_results, save_ccdf, save_results, write_ccdf, write_results,
    CcdfRow, ResultRow, ResultsError, CCDF_COLUMNS, RESULT_COLUMNS,
};
pub use trace::{
    group_trace, load_trace, read_trace, read_trace_rows, run_trace_rows, save_trace, write_trace_rows, Trace,
    TraceError, TraceRow, TRACE_COLUMNS,
};
pub use workload::{
    generate_workloads, load_workloads, save_workloads, validate_workloads, workloads_from_json, workloads_to_json,
    WorkloadCounts, WorkloadError, WorkloadKind, WorkloadSpec, WORKLOAD_SIZE,
};

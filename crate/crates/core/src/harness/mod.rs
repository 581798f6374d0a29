//! Episode driver, seeded clusters, comparative metrics and trace export.

mod cluster;
mod episode;
mod export;
mod metrics;

pub use cluster::{run_cluster, run_cluster_with_traces, ClusterReport, EpisodeSummary, Timing};
pub use episode::{run_episode, Outcome, PolicyScore, StepRecord, TwinTrace};
pub use export::{
    export_trace, import_trace, read_document, read_rows, row_header, write_document, write_rows,
    TraceFormat,
};
pub use metrics::{action_delay, first_action_after, ActionDelay, Delay};

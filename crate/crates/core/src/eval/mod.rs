//! Two-session evaluation protocol, the four experiment designs, reports, and
//! a synthetic corpus generator.

mod corpus;
mod protocol;
mod report;
pub mod synth;

pub use corpus::{
    read_manifest, write_manifest, Corpus, Speaker, Utterance, UtteranceKey, UtteranceSource,
    REPETITIONS,
};
pub use protocol::{
    run_all_experiments, run_experiment, ExperimentKind, ExperimentReport, ExperimentSpec,
    GroupAverage, ReportRow,
};
pub use report::{format_percent, report_csv};

//! Vector ingestion, episode sampling and sweep orchestration.

pub mod config;
pub mod dataset;
pub mod episode;
pub mod sweep;

pub use config::{ExperimentConfig, HarnessError};
pub use dataset::{
    read_table, synthetic_clusters, write_table, DataError, LabeledVector, SynthConfig,
    VectorFormat, VectorTable,
};
pub use episode::{sample_episode, Episode};
pub use sweep::{
    encode_table, mean_ci95, run_episode, run_sweep, run_sweep_on, simulate, EpisodeOutcome,
    QueryTrace, SweepReport, SweepRow,
};

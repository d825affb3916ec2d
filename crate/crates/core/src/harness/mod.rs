//! Episode executor, batch statistics, output files and the command line.

pub mod batch;
pub mod cli;
pub mod episode;
pub mod output;

pub use batch::{run_batch, success_rate, BatchRun, BatchStats, DEFAULT_EPISODES};
pub use episode::{
    min_distance_update, run_episode, run_episode_observed, substream_seed, EpisodeResult,
    RunOverrides, TerminationReason, TickRow, TickView, CSV_SCHEMA_VERSION,
};
pub use output::{
    emit_outputs, render_detection_svg, write_detection_svg, write_episode_csv, Summary,
    CSV_COLUMNS, SUMMARY_SCHEMA_VERSION,
};

use crate::edge_ai::ChannelError;
use crate::scenarios::ScenarioError;
use crate::world::WorldError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("world setup failed: {0}")]
    World(#[from] WorldError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("invalid override: {0}")]
    InvalidOverride(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

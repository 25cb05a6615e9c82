//! Falsification campaigns and their results table.
//!
//! A campaign repeats: sampler point, scenario sample, episode, robustness,
//! row, feedback. Rows are appended to a JSON-lines file as they complete.

mod analysis;
mod campaign;
mod export;
mod table;

use thiserror::Error;

pub use analysis::{binned_stats, filter_counterexamples, svg_plot, Bin, DEFAULT_BIN_WIDTH};
pub use campaign::{
    episode_seed, replay, run_campaign, run_campaign_with, BuiltinTarget, CampaignConfig, CampaignOptions,
    CampaignResult, Override, TargetFactory, TargetSpec,
};
pub use export::{export_training_configs, learned_distribution, write_configs_jsonl, MAX_REJECT_RATE};
pub use table::{ResultRow, ResultTable, Verdict};

use crate::monitor::MonitorError;
use crate::samplers::SamplerError;
use crate::scenario::ScenarioError;
use crate::simbridge::BridgeError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("specification: {0}")]
    Spec(#[from] MonitorError),
    #[error("sampler: {0}")]
    Sampler(#[from] SamplerError),
    #[error("simulator: {0}")]
    Bridge(#[from] BridgeError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("invalid campaign configuration: {0}")]
    Config(String),
    #[error("results table: {0}")]
    Table(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("parameter `{0}` is not numeric")]
    NonNumeric(String),
    #[error("{rejected} of {attempts} samples were rejected; check the scenario's require constraints")]
    TooManyRejections { rejected: usize, attempts: usize },
}

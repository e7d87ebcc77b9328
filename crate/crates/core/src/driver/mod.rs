// SPDX-License-Identifier: MIT OR Apache-2.0

//! Experiment orchestration: identification over sampled sentences, steered
//! generation, grids, ablations and the files they produce.

mod commands;
mod config;
mod experiment;
mod report;

pub use commands::*;
pub use config::{default_alpha_grid, ExperimentConfig, GridCell};
pub use experiment::{
    eval_pairs, identify, run_control, sample_sentences, with_workers, AblationRow, CellResult, Context, ControlRun,
    EvalPair, Generation, GridResult, IdentificationData, Identified, RunRow, Sample, TextGenerator,
};
pub use report::*;

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Identify and steer language-specific dimensions of transformer hidden
//! states.
//!
//! A handful of sentences is enough to find the few hidden dimensions that
//! carry output-language identity: average token states per sentence, then
//! per corpus, contrast either two layers of one language
//! ([`stats::Setting::Monolingual`]) or the final layers of translation
//! pairs ([`stats::Setting::Parallel`]), and keep the `K` dimensions with the
//! largest absolute difference. Overwriting those dimensions with a scaled
//! target-language mean at one intermediate layer switches the output
//! language while leaving content dimensions alone.
//!
//! Modules:
//!
//! - [`store`]: LDIM activation files and sentence metadata.
//! - [`stats`]: means, difference vectors, top-K selection, overlaps.
//! - [`intervention`]: the overwrite and the hook contract for models.
//! - [`toy`]: a planted-dimension model with exact ground truth.
//! - [`metrics`]: language identification, BLEU, control evaluation.
//! - [`driver`]: experiments (identify, intervene, grid, ablations).
//! - [`bridge`]: the contract for exporting real-model activations.

pub mod bridge;
pub mod driver;
pub mod error;
pub mod intervention;
pub mod metrics;
pub mod stats;
pub mod store;
pub mod toy;

pub use error::{Error, Result};

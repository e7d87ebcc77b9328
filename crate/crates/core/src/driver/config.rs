// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervention::PositionPolicy;
use crate::metrics::TokenizerPolicy;
use crate::stats::{Setting, TokenFilter};

/// One `(layer, alpha)` cell of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub layer: usize,
    pub alpha: f64,
}

/// `0.1, 0.2, ..., 1.2`, each computed as `i / 10` so values are exact
/// decimal literals.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=12).map(|i| f64::from(i) / 10.0).collect()
}

/// Every hyperparameter of an experiment. Loadable from TOML; command-line
/// flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Language the prompts are written in (the English side of pairs).
    pub source_lang: String,
    /// Target languages to identify and steer toward.
    pub languages: Vec<String>,
    pub setting: Setting,
    pub k: usize,
    pub anchor_layer: u32,
    /// Layer treated as final; defaults to the deepest stored layer.
    pub final_layer: Option<u32>,
    /// Intervention layer.
    pub layer: usize,
    pub alpha: f64,
    pub alphas: Vec<f64>,
    /// Grid layers; empty means every layer of the model.
    pub layers: Vec<usize>,
    /// Grid cells left unevaluated.
    pub skip_cells: Vec<GridCell>,
    pub seeds: Vec<u64>,
    pub sample_size: usize,
    pub token_filter: TokenFilter,
    pub position_policy: PositionPolicy,
    pub tokenizer: TokenizerPolicy,
    /// Worker threads; results do not depend on this.
    pub workers: usize,
    /// Generation length; defaults to the prompt length.
    pub max_len: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source_lang: "en".into(),
            languages: Vec::new(),
            setting: Setting::Parallel,
            k: 400,
            anchor_layer: 20,
            final_layer: None,
            layer: 19,
            alpha: 0.4,
            alphas: default_alpha_grid(),
            layers: Vec::new(),
            skip_cells: Vec::new(),
            seeds: vec![1, 2, 3],
            sample_size: 50,
            token_filter: TokenFilter::default(),
            position_policy: PositionPolicy::AllPositions,
            tokenizer: TokenizerPolicy::Whitespace,
            workers: 1,
            max_len: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Checks that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        if self.languages.is_empty() {
            return Err(Error::config("no target languages configured"));
        }
        if self.languages.contains(&self.source_lang) {
            return Err(Error::config(format!(
                "source language {:?} cannot also be a target",
                self.source_lang
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.k == 0 {
            return Err(Error::config("K must be at least 1"));
        }
        if self.sample_size == 0 {
            return Err(Error::config("sample size must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers must be at least 1"));
        }
        if self.max_len == Some(0) {
            return Err(Error::config("max_len must be at least 1"));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) || self.alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::config("alpha values must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Checks against the hidden size and layer count of the data.
    pub fn validate_against(&self, hidden_size: usize, final_layer: u32) -> Result<()> {
        if self.k > hidden_size {
            return Err(Error::config(format!(
                "K = {} exceeds the hidden size {hidden_size}",
                self.k
            )));
        }
        if self.setting == Setting::Monolingual && self.anchor_layer >= final_layer {
            return Err(Error::config(format!(
                "anchor layer {} must be below the final layer {final_layer}",
                self.anchor_layer
            )));
        }
        Ok(())
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Corpus statistics over hidden states and language-specific dimension
//! selection.
//!
//! The pipeline is:
//!
//! 1. [`sentence_mean`] averages token states of one sentence at one layer.
//! 2. [`corpus_mean`] averages sentence vectors, every sentence weighted
//!    equally, summed in ascending sentence-id order.
//! 3. [`diff_monolingual`] contrasts a language's final layer with an
//!    anchor layer; [`diff_parallel`] contrasts two languages at the final
//!    layer. Both produce per-dimension absolute differences.
//! 4. [`topk_select`] keeps the `K` largest differences.
//!
//! [`overlap_count`], [`overlap_matrix`] and [`agreement_rate`] compare
//! selected sets.

mod mean;
mod overlap;
mod record;
mod select;

use serde::{Deserialize, Serialize};

use crate::store::LangCode;

pub use mean::{corpus_mean, sentence_mean, sentence_means, SentenceVector, TokenFilter};
pub use overlap::{agreement_rate, overlap_count, overlap_matrix, OverlapMatrix};
pub use record::{load_corpus_mean, load_dimension_set, save_corpus_mean, save_dimension_set};
pub use select::{boundary_tied, diff_monolingual, diff_parallel, topk_select};

/// How a difference vector was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Final layer against an intermediate anchor layer of the same language.
    Monolingual,
    /// Final layer of a language against the final layer of its translations.
    Parallel,
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Monolingual => "monolingual",
            Self::Parallel => "parallel",
        })
    }
}

impl std::str::FromStr for Setting {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "monolingual" | "mono" => Ok(Self::Monolingual),
            "parallel" | "para" => Ok(Self::Parallel),
            other => Err(crate::Error::config(format!("unknown setting {other:?}"))),
        }
    }
}

/// Mean hidden state of one language at one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusMeanVector {
    pub(crate) lang: LangCode,
    pub(crate) layer: u32,
    pub(crate) values: Vec<f64>,
    pub(crate) num_sentences: usize,
}

impl CorpusMeanVector {
    pub fn new(lang: LangCode, layer: u32, values: Vec<f64>, num_sentences: usize) -> crate::Result<Self> {
        if num_sentences == 0 {
            return Err(crate::Error::EmptyCorpus);
        }
        if values.is_empty() {
            return Err(crate::Error::Validation("mean vector is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(crate::Error::DataIntegrity("non-finite mean value".into()));
        }
        Ok(Self {
            lang,
            layer,
            values,
            num_sentences,
        })
    }

    pub fn lang(&self) -> LangCode {
        self.lang
    }

    pub fn layer(&self) -> u32 {
        self.layer
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn hidden_size(&self) -> usize {
        self.values.len()
    }

    pub fn num_sentences(&self) -> usize {
        self.num_sentences
    }
}

/// Per-dimension absolute difference between two mean vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffVector {
    pub(crate) values: Vec<f64>,
    pub(crate) setting: Setting,
    pub(crate) lang: LangCode,
    /// Final layer of the contrast.
    pub(crate) layer: u32,
    /// Anchor layer (monolingual) or reference language (parallel).
    pub(crate) anchor_layer: Option<u32>,
    pub(crate) reference_lang: Option<LangCode>,
}

impl DiffVector {
    /// Wrap raw scores. Entries must be finite and nonnegative.
    pub fn from_scores(values: Vec<f64>, setting: Setting, lang: LangCode, layer: u32) -> crate::Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(crate::Error::Validation(
                "difference scores must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            values,
            setting,
            lang,
            layer,
            anchor_layer: None,
            reference_lang: None,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn setting(&self) -> Setting {
        self.setting
    }

    pub fn lang(&self) -> LangCode {
        self.lang
    }

    pub fn layer(&self) -> u32 {
        self.layer
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The `K` dimensions judged language-specific for one language.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionSet {
    pub(crate) lang: LangCode,
    pub(crate) setting: Setting,
    pub(crate) hidden_size: usize,
    pub(crate) layer: u32,
    pub(crate) anchor_layer: Option<u32>,
    pub(crate) reference_lang: Option<LangCode>,
    /// Strictly ascending.
    pub(crate) indices: Vec<usize>,
    /// `scores[i]` is the difference score of `indices[i]`.
    pub(crate) scores: Vec<f64>,
}

impl DimensionSet {
    /// Build a set from explicit indices, checking the structural
    /// invariants. Scores default to zero when not known.
    pub fn from_indices(
        lang: LangCode,
        setting: Setting,
        hidden_size: usize,
        mut indices: Vec<usize>,
        scores: Option<Vec<f64>>,
    ) -> crate::Result<Self> {
        let scores = match scores {
            Some(s) => {
                if s.len() != indices.len() {
                    return Err(crate::Error::DimensionMismatch {
                        expected: indices.len(),
                        got: s.len(),
                    });
                }
                let mut paired: Vec<(usize, f64)> = indices.iter().copied().zip(s).collect();
                paired.sort_by_key(|p| p.0);
                indices = paired.iter().map(|p| p.0).collect();
                paired.into_iter().map(|p| p.1).collect()
            }
            None => {
                indices.sort_unstable();
                vec![0.0; indices.len()]
            }
        };
        let set = Self {
            lang,
            setting,
            hidden_size,
            layer: 0,
            anchor_layer: None,
            reference_lang: None,
            indices,
            scores,
        };
        set.validate()?;
        Ok(set)
    }

    pub(crate) fn validate(&self) -> crate::Result<()> {
        if self.indices.is_empty() {
            return Err(crate::Error::Range("dimension set must not be empty".into()));
        }
        if self.indices.len() > self.hidden_size {
            return Err(crate::Error::Range(format!(
                "K = {} exceeds hidden size {}",
                self.indices.len(),
                self.hidden_size
            )));
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(crate::Error::Validation("dimension indices must be unique".into()));
        }
        if let Some(&last) = self.indices.last() {
            if last >= self.hidden_size {
                return Err(crate::Error::Range(format!(
                    "dimension index {last} out of range for hidden size {}",
                    self.hidden_size
                )));
            }
        }
        if self.scores.len() != self.indices.len() {
            return Err(crate::Error::DimensionMismatch {
                expected: self.indices.len(),
                got: self.scores.len(),
            });
        }
        if self.scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(crate::Error::Validation(
                "dimension scores must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn lang(&self) -> LangCode {
        self.lang
    }

    pub fn setting(&self) -> Setting {
        self.setting
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn layer(&self) -> u32 {
        self.layer
    }

    pub fn anchor_layer(&self) -> Option<u32> {
        self.anchor_layer
    }

    pub fn reference_lang(&self) -> Option<LangCode> {
        self.reference_lang
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn contains(&self, dim: usize) -> bool {
        self.indices.binary_search(&dim).is_ok()
    }

    /// Short label used in overlap tables, e.g. `ja/parallel`.
    pub fn label(&self) -> String {
        format!("{}/{}", self.lang, self.setting)
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::CorpusMeanVector;
use crate::store::{ActivationCorpus, ActivationFileHeader, LangCode, SentenceActivationRecord};

/// Token positions excluded from sentence means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenFilter {
    /// Number of leading positions to drop (BOS and similar).
    pub skip_leading: usize,
}

impl Default for TokenFilter {
    fn default() -> Self {
        Self { skip_leading: 1 }
    }
}

impl TokenFilter {
    pub const KEEP_ALL: Self = Self { skip_leading: 0 };
}

/// Mean of one sentence's token states at `layer`, accumulated in `f64`.
pub fn sentence_mean(
    header: &ActivationFileHeader,
    record: &SentenceActivationRecord,
    layer: u32,
    filter: &TokenFilter,
) -> Result<Vec<f64>> {
    let slot = header.layer_slot(layer)?;
    let d = header.hidden_size as usize;
    let tokens = record.num_tokens as usize;
    if filter.skip_leading >= tokens {
        return Err(Error::EmptySentence(record.sentence_id));
    }
    let block = record.layer_block(slot, d);
    let mut acc = vec![0.0f64; d];
    for row in block.chunks_exact(d).skip(filter.skip_leading) {
        for (a, &x) in acc.iter_mut().zip(row) {
            *a += f64::from(x);
        }
    }
    let n = (tokens - filter.skip_leading) as f64;
    for a in &mut acc {
        *a /= n;
    }
    Ok(acc)
}

/// A sentence mean tagged with its sentence id.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceVector {
    pub sentence_id: u32,
    pub values: Vec<f64>,
}

/// Sentence means for `ids` at `layer`, computed in parallel on the
/// current rayon pool and returned in the order of `ids`.
pub fn sentence_means(
    corpus: &ActivationCorpus,
    ids: &[u32],
    layer: u32,
    filter: &TokenFilter,
) -> Result<Vec<SentenceVector>> {
    corpus.header.layer_slot(layer)?;
    ids.par_iter()
        .map(|&id| {
            let record = corpus
                .record(id)
                .ok_or_else(|| Error::Validation(format!("sentence {id} not in activation corpus")))?;
            Ok(SentenceVector {
                sentence_id: id,
                values: sentence_mean(&corpus.header, record, layer, filter)?,
            })
        })
        .collect()
}

/// Unweighted mean of sentence vectors, summed in ascending sentence-id
/// order regardless of input order.
pub fn corpus_mean(vectors: &[SentenceVector], lang: LangCode, layer: u32) -> Result<CorpusMeanVector> {
    let first = vectors.first().ok_or(Error::EmptyCorpus)?;
    let d = first.values.len();
    if let Some(bad) = vectors.iter().find(|v| v.values.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.values.len(),
        });
    }
    let mut order: Vec<&SentenceVector> = vectors.iter().collect();
    order.sort_by_key(|v| v.sentence_id);
    if let Some(w) = order.windows(2).find(|w| w[0].sentence_id == w[1].sentence_id) {
        return Err(Error::Validation(format!(
            "sentence {} contributes twice",
            w[0].sentence_id
        )));
    }
    let mut acc = vec![0.0f64; d];
    for v in &order {
        for (a, &x) in acc.iter_mut().zip(&v.values) {
            *a += x;
        }
    }
    let n = order.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    CorpusMeanVector::new(lang, layer, acc, order.len())
}

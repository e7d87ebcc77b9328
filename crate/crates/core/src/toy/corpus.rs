// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{ActivationCorpus, ActivationFileHeader, SentenceActivationRecord, SentenceMeta};
use crate::toy::{PlantedModel, ToyLang};

/// Inclusive range of sentence lengths in words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthRange {
    pub min: usize,
    pub max: usize,
}

impl Default for LengthRange {
    fn default() -> Self {
        Self { min: 5, max: 15 }
    }
}

/// Random translation pairs: pair `i` is sentence `2i` in toyA and
/// sentence `2i + 1` in toyB, both carrying `pair_id = i`.
pub fn generate_toy_pairs(
    model: &PlantedModel,
    num_pairs: usize,
    lengths: LengthRange,
    seed: u64,
) -> Result<Vec<SentenceMeta>> {
    if num_pairs == 0 {
        return Err(Error::config("at least one sentence pair is required"));
    }
    if lengths.min == 0 || lengths.min > lengths.max {
        return Err(Error::config(format!(
            "invalid sentence length range {}..={}",
            lengths.min, lengths.max
        )));
    }
    if num_pairs > (u32::MAX / 2) as usize {
        return Err(Error::config("too many sentence pairs"));
    }
    let vocab = model.vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut metas = Vec::with_capacity(2 * num_pairs);
    for pair in 0..num_pairs {
        let len = rng.random_range(lengths.min..=lengths.max);
        let content: Vec<usize> = (0..len).map(|_| rng.random_range(0..vocab.content_size())).collect();
        for (k, lang) in ToyLang::ALL.into_iter().enumerate() {
            metas.push(SentenceMeta {
                sentence_id: (2 * pair + k) as u32,
                lang: lang.tag().to_string(),
                text: vocab.render(lang, &content),
                pair_id: Some(pair as u32),
            });
        }
    }
    Ok(metas)
}

/// Translation pairs together with the model's hidden states at every
/// layer for every sentence.
pub fn generate_toy_corpus(
    model: &PlantedModel,
    num_pairs: usize,
    lengths: LengthRange,
    seed: u64,
) -> Result<(Vec<SentenceMeta>, ActivationCorpus)> {
    let metas = generate_toy_pairs(model, num_pairs, lengths, seed)?;
    let spec = model.spec();
    let header = ActivationFileHeader::new(spec.hidden_size as u32, (0..=spec.depth as u32).collect())?;
    let records = metas
        .par_iter()
        .map(|meta| {
            let tokens = model.vocab().encode(&meta.text)?;
            let taps = model.forward_with_taps(&tokens)?;
            Ok(SentenceActivationRecord {
                sentence_id: meta.sentence_id,
                lang: meta.lang.parse()?,
                num_tokens: tokens.len() as u32,
                data: taps.data,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((metas, ActivationCorpus { header, records }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::{build_planted_model, PlantedModelSpec};

    #[test]
    fn pairs_are_translations() {
        let model = build_planted_model(&PlantedModelSpec::default()).unwrap();
        let metas = generate_toy_pairs(&model, 10, LengthRange::default(), 3).unwrap();
        assert_eq!(metas.len(), 20);
        for pair in metas.chunks(2) {
            assert_eq!(pair[0].pair_id, pair[1].pair_id);
            assert_eq!(pair[0].lang, "toyA");
            assert_eq!(pair[1].lang, "toyB");
            let a = model.vocab().encode(&pair[0].text).unwrap();
            let b = model.vocab().encode(&pair[1].text).unwrap();
            assert!((5..=15).contains(&a.len()));
            let content = |t: &u32| model.vocab().content_of(*t).unwrap();
            assert_eq!(
                a.iter().map(content).collect::<Vec<_>>(),
                b.iter().map(content).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn corpus_matches_meta() {
        let model = build_planted_model(&PlantedModelSpec::default()).unwrap();
        let (metas, corpus) = generate_toy_corpus(&model, 3, LengthRange { min: 2, max: 4 }, 9).unwrap();
        assert_eq!(corpus.header.layer_indices, (0..=12).collect::<Vec<u32>>());
        assert_eq!(corpus.records.len(), metas.len());
        for (m, r) in metas.iter().zip(&corpus.records) {
            assert_eq!(m.sentence_id, r.sentence_id);
            assert_eq!(r.lang.as_str(), m.lang);
            assert_eq!(r.data.len(), 13 * r.num_tokens as usize * 64);
        }
        assert!(generate_toy_pairs(&model, 0, LengthRange::default(), 1).is_err());
        assert!(generate_toy_pairs(&model, 1, LengthRange { min: 3, max: 2 }, 1).is_err());
    }
}

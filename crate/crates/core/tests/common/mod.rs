// SPDX-License-Identifier: MIT OR Apache-2.0

//! Brute-force reference implementations and seeded data shared by the
//! integration tests.

#![allow(dead_code)]

use langdim::driver::{ExperimentConfig, IdentificationData};
use langdim::stats::{DiffVector, Setting};
use langdim::store::{ActivationCorpus, ActivationFileHeader, LangCode, SentenceActivationRecord};
use langdim::toy::{build_planted_model, generate_toy_corpus, LengthRange, PlantedModel, PlantedModelSpec};
use rand::Rng;

pub fn lang(tag: &str) -> LangCode {
    LangCode::new(tag).unwrap()
}

pub fn diff(values: Vec<f64>) -> DiffVector {
    DiffVector::from_scores(values, Setting::Parallel, lang("toyB"), 12).unwrap()
}

/// Top-K by full sort: score descending, index ascending, then the first
/// `k` indices in ascending order.
pub fn topk_by_sort(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    let mut top = order[..k].to_vec();
    top.sort();
    top
}

/// Scores with many exact ties when `ties` is set.
pub fn random_scores<R: Rng>(rng: &mut R, d: usize, ties: bool) -> Vec<f64> {
    (0..d)
        .map(|_| {
            if ties {
                f64::from(rng.random_range(0..8u32)) * 0.25
            } else {
                rng.random_range(0.0..10.0)
            }
        })
        .collect()
}

fn ngrams(tokens: &[String], n: usize) -> Vec<&[String]> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n).map(|i| &tokens[i..i + n]).collect()
}

/// Corpus BLEU from plain n-gram lists and linear scans.
pub fn bleu_brute(cands: &[Vec<String>], refs: &[Vec<String>]) -> f64 {
    let mut matches = [0u64; 4];
    let mut totals = [0u64; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (cand, reference) in cands.iter().zip(refs) {
        c += cand.len();
        r += reference.len();
        for n in 1..=4 {
            let cg = ngrams(cand, n);
            let rg = ngrams(reference, n);
            totals[n - 1] += cg.len() as u64;
            let mut seen: Vec<&[String]> = Vec::new();
            for g in &cg {
                if seen.contains(g) {
                    continue;
                }
                seen.push(g);
                let in_cand = cg.iter().filter(|x| *x == g).count();
                let in_ref = rg.iter().filter(|x| *x == g).count();
                matches[n - 1] += in_cand.min(in_ref) as u64;
            }
        }
    }
    if c == 0 {
        return if r == 0 { 100.0 } else { 0.0 };
    }
    let mut logs = Vec::new();
    for n in 0..4 {
        if totals[n] == 0 {
            continue;
        }
        let p = if matches[n] == 0 {
            1.0 / (2.0 * c as f64)
        } else {
            matches[n] as f64 / totals[n] as f64
        };
        logs.push(p.ln());
    }
    let bp = if c >= r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * (logs.iter().sum::<f64>() / logs.len() as f64).exp()
}

/// Small corpus over a four-word alphabet so n-grams collide often.
pub fn random_token_corpus<R: Rng>(rng: &mut R, n: usize) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let words = ["a", "b", "c", "d"];
    let sentence = |rng: &mut R| -> Vec<String> {
        let len = rng.random_range(0..8);
        (0..len)
            .map(|_| words[rng.random_range(0..words.len())].to_string())
            .collect()
    };
    let cands = (0..n).map(|_| sentence(rng)).collect();
    let refs = (0..n).map(|_| sentence(rng)).collect();
    (cands, refs)
}

/// Random LDIM corpus with ascending, gappy sentence ids.
pub fn random_corpus<R: Rng>(rng: &mut R) -> ActivationCorpus {
    let d = rng.random_range(1..=16u32);
    let num_layers = rng.random_range(1..=4u32);
    let mut layers: Vec<u32> = (0..num_layers).map(|i| i * 3 + rng.random_range(0..3)).collect();
    layers.dedup();
    let header = ActivationFileHeader::new(d, layers).unwrap();
    let tags = ["en", "ja", "zh-Hans", "toyA"];
    let mut id = 0u32;
    let records = (0..rng.random_range(0..6))
        .map(|_| {
            id += rng.random_range(1..5);
            let num_tokens = rng.random_range(1..6u32);
            let len = header.num_layers() * num_tokens as usize * d as usize;
            SentenceActivationRecord {
                sentence_id: id,
                lang: lang(tags[rng.random_range(0..tags.len())]),
                num_tokens,
                data: (0..len).map(|_| rng.random_range(-100.0f32..100.0)).collect(),
            }
        })
        .collect();
    ActivationCorpus { header, records }
}

/// A planted model with its translation corpus.
pub fn planted(spec: PlantedModelSpec, pairs: usize, corpus_seed: u64) -> (PlantedModel, IdentificationData) {
    let model = build_planted_model(&spec).unwrap();
    let (meta, corpus) = generate_toy_corpus(&model, pairs, LengthRange::default(), corpus_seed).unwrap();
    let data = IdentificationData::new(corpus, meta).unwrap();
    (model, data)
}

pub fn toy_config(k: usize, sample_size: usize) -> ExperimentConfig {
    ExperimentConfig {
        source_lang: "toyA".into(),
        languages: vec!["toyB".into()],
        k,
        anchor_layer: 5,
        layer: 6,
        alpha: 1.0,
        sample_size,
        ..Default::default()
    }
}

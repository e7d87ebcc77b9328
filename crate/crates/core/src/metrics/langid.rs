// SPDX-License-Identifier: MIT OR Apache-2.0

//! Naive Bayes language identification over character unigrams and bigrams
//! with add-one smoothing and uniform priors.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

const ORDERS: [usize; 2] = [1, 2];

#[derive(Debug, Clone, Default)]
struct NgramCounts {
    counts: HashMap<String, u64>,
    total: u64,
}

#[derive(Debug, Clone)]
pub struct LangIdModel {
    languages: Vec<String>,
    /// `tables[lang][order]`
    tables: Vec<[NgramCounts; 2]>,
    /// Distinct n-grams of each order across all languages, plus one slot
    /// for unseen n-grams.
    support: [u64; 2],
}

fn ngrams(chars: &[char], n: usize) -> impl Iterator<Item = String> + '_ {
    chars.windows(n).map(|w| w.iter().collect())
}

/// Fit one n-gram table per language. `corpora` maps a language tag to its
/// training sentences.
pub fn train_langid<S: AsRef<str>>(corpora: &[(String, Vec<S>)]) -> Result<LangIdModel> {
    if corpora.len() < 2 {
        return Err(Error::config("language identification needs at least two languages"));
    }
    let mut seen_langs = HashSet::new();
    let mut tables = Vec::with_capacity(corpora.len());
    let mut vocab: [HashSet<String>; 2] = Default::default();
    for (lang, sentences) in corpora {
        if !seen_langs.insert(lang.as_str()) {
            return Err(Error::config(format!("language {lang:?} listed twice")));
        }
        let mut table: [NgramCounts; 2] = Default::default();
        for sentence in sentences {
            let chars: Vec<char> = sentence.as_ref().chars().collect();
            for (k, &n) in ORDERS.iter().enumerate() {
                for g in ngrams(&chars, n) {
                    vocab[k].insert(g.clone());
                    *table[k].counts.entry(g).or_default() += 1;
                    table[k].total += 1;
                }
            }
        }
        if table[0].total == 0 {
            return Err(Error::config(format!("no training text for language {lang:?}")));
        }
        tables.push(table);
    }
    Ok(LangIdModel {
        languages: corpora.iter().map(|(l, _)| l.clone()).collect(),
        tables,
        support: [vocab[0].len() as u64 + 1, vocab[1].len() as u64 + 1],
    })
}

impl LangIdModel {
    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    fn log_likelihood(&self, lang: usize, chars: &[char]) -> f64 {
        let mut ll = 0.0;
        for (k, &n) in ORDERS.iter().enumerate() {
            let table = &self.tables[lang][k];
            let denom = (table.total + self.support[k]) as f64;
            for g in ngrams(chars, n) {
                let count = table.counts.get(&g).copied().unwrap_or(0);
                ll += ((count + 1) as f64 / denom).ln();
            }
        }
        ll
    }

    /// Posterior probability of each language, in training order.
    pub fn posteriors(&self, text: &str) -> Result<Vec<f64>> {
        if text.trim().is_empty() {
            return Err(Error::Input("cannot classify empty text".into()));
        }
        let chars: Vec<char> = text.chars().collect();
        let lls: Vec<f64> = (0..self.languages.len())
            .map(|i| self.log_likelihood(i, &chars))
            .collect();
        let max = lls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = lls.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / total).collect())
    }

    /// Most probable language and its posterior. Ties go to the language
    /// listed first in training.
    pub fn classify(&self, text: &str) -> Result<(&str, f64)> {
        let post = self.posteriors(text)?;
        let mut best = 0;
        for (i, &p) in post.iter().enumerate() {
            if p > post[best] {
                best = i;
            }
        }
        Ok((self.languages[best].as_str(), post[best]))
    }
}

/// Free-function form of [`LangIdModel::classify`].
pub fn classify<'m>(model: &'m LangIdModel, text: &str) -> Result<(&'m str, f64)> {
    model.classify(text)
}

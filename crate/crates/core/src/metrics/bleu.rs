// SPDX-License-Identifier: MIT OR Apache-2.0

//! Corpus-level BLEU with clipped n-gram precisions up to order 4 and the
//! usual brevity penalty.
//!
//! A zero precision is replaced by `1 / (2 * c)`, `c` being the total
//! candidate length. Orders for which the candidates contain no n-gram at
//! all have an undefined precision and are left out of the geometric mean.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;

/// Sufficient statistics of corpus BLEU. Sums over sentences, so the
/// score does not depend on sentence order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub candidate_len: u64,
    pub reference_len: u64,
}

fn counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut map = HashMap::new();
    for w in tokens.windows(n) {
        *map.entry(w).or_insert(0) += 1;
    }
    map
}

impl BleuStats {
    pub fn add<T: Eq + Hash>(&mut self, candidate: &[T], reference: &[T]) {
        self.candidate_len += candidate.len() as u64;
        self.reference_len += reference.len() as u64;
        for n in 1..=MAX_ORDER {
            if candidate.len() < n {
                break;
            }
            let cand = counts(candidate, n);
            let refs = counts(reference, n);
            let clipped: u64 = cand
                .iter()
                .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
                .sum();
            self.matches[n - 1] += clipped;
            self.totals[n - 1] += (candidate.len() + 1 - n) as u64;
        }
    }

    /// Brevity penalty, 1 when the candidates are at least as long as the
    /// references.
    pub fn brevity_penalty(&self) -> f64 {
        let (c, r) = (self.candidate_len as f64, self.reference_len as f64);
        if c >= r || c == 0.0 {
            1.0
        } else {
            (1.0 - r / c).exp()
        }
    }

    /// Score on a 0 to 100 scale.
    pub fn score(&self) -> f64 {
        if self.candidate_len == 0 {
            return if self.reference_len == 0 { 100.0 } else { 0.0 };
        }
        let floor = 1.0 / (2.0 * self.candidate_len as f64);
        let mut log_sum = 0.0;
        let mut orders = 0;
        for n in 0..MAX_ORDER {
            if self.totals[n] == 0 {
                continue;
            }
            let p = if self.matches[n] == 0 {
                floor
            } else {
                self.matches[n] as f64 / self.totals[n] as f64
            };
            log_sum += p.ln();
            orders += 1;
        }
        100.0 * self.brevity_penalty() * (log_sum / orders as f64).exp()
    }
}

/// Corpus BLEU of tokenized `candidates` against one reference each.
pub fn bleu<T: Eq + Hash, C: AsRef<[T]>, R: AsRef<[T]>>(candidates: &[C], references: &[R]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::Input("BLEU needs at least one sentence".into()));
    }
    if candidates.len() != references.len() {
        return Err(Error::Input(format!(
            "{} candidates but {} references",
            candidates.len(),
            references.len()
        )));
    }
    let mut stats = BleuStats::default();
    for (c, r) in candidates.iter().zip(references) {
        stats.add(c.as_ref(), r.as_ref());
    }
    Ok(stats.score())
}

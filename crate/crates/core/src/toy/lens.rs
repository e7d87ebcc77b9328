// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{Error, Result};
use crate::stats::CorpusMeanVector;
use crate::toy::PlantedModel;

/// Decode an arbitrary hidden state through the unembedding and return the
/// `top_n` best tokens with their scores, best first. Equal scores are
/// ordered by token id.
pub fn logit_lens(model: &PlantedModel, h: &[f32], top_n: usize) -> Result<Vec<(u32, f64)>> {
    let logits = model.logits(h)?;
    if top_n > logits.len() {
        return Err(Error::Range(format!(
            "top_n = {top_n} exceeds vocabulary size {}",
            logits.len()
        )));
    }
    let mut ranked: Vec<(u32, f64)> = logits.into_iter().enumerate().map(|(i, s)| (i as u32, s)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(top_n);
    Ok(ranked)
}

/// Per-dimension absolute difference between two mean vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeProfile {
    pub values: Vec<f64>,
}

impl SpikeProfile {
    /// The `n` largest entries' dimensions, ascending; ties to lower index.
    pub fn top(&self, n: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        order.truncate(n);
        order.sort_unstable();
        order
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("dim,abs_diff\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }
}

pub fn spike_profile(mu_a: &CorpusMeanVector, mu_b: &CorpusMeanVector) -> Result<SpikeProfile> {
    if mu_a.hidden_size() != mu_b.hidden_size() {
        return Err(Error::DimensionMismatch {
            expected: mu_a.hidden_size(),
            got: mu_b.hidden_size(),
        });
    }
    Ok(SpikeProfile {
        values: mu_a
            .values()
            .iter()
            .zip(mu_b.values())
            .map(|(a, b)| (a - b).abs())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::LangCode;
    use crate::toy::{build_planted_model, PlantedModelSpec, ToyLang};

    #[test]
    fn self_match() {
        let model = build_planted_model(&PlantedModelSpec {
            mixing_scale: 0.0,
            ..Default::default()
        })
        .unwrap();
        for tok in [0u32, 9, 64, 100] {
            let row = model.unembedding_row(tok).unwrap().to_vec();
            assert_eq!(logit_lens(&model, &row, 1).unwrap()[0].0, tok);
        }
    }

    #[test]
    fn ranking_and_range() {
        let model = build_planted_model(&PlantedModelSpec::default()).unwrap();
        let h = model.embedding(3).to_vec();
        let top = logit_lens(&model, &h, 128).unwrap();
        assert_eq!(top.len(), 128);
        assert!(top.windows(2).all(|w| w[0].1 >= w[1].1));
        // No language signal: toyA and toyB rows tie, lower id first.
        assert_eq!(top[0].0, model.vocab().token(ToyLang::A, 3));
        assert_eq!(top[1].0, model.vocab().token(ToyLang::B, 3));
        assert!(matches!(logit_lens(&model, &h, 129), Err(Error::Range(_))));
        assert!(logit_lens(&model, &h[..10], 1).is_err());
    }

    #[test]
    fn spike_identical_and_mismatch() {
        let en = LangCode::new("en").unwrap();
        let a = CorpusMeanVector::new(en, 1, vec![1.0, -2.0, 3.0], 1).unwrap();
        let p = spike_profile(&a, &a).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
        assert_eq!(p.to_csv(), "dim,abs_diff\n0,0\n1,0\n2,0\n");
        let b = CorpusMeanVector::new(en, 1, vec![1.0, 2.0], 1).unwrap();
        assert!(spike_profile(&a, &b).is_err());
        let c = CorpusMeanVector::new(en, 1, vec![1.5, 2.0, 3.0], 1).unwrap();
        assert_eq!(spike_profile(&a, &c).unwrap().top(1), vec![1]);
    }
}

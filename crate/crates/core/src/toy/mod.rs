// SPDX-License-Identifier: MIT OR Apache-2.0

//! A planted-dimension language model with known ground truth.
//!
//! Two toy languages share a content vocabulary. A word `(lang, id)` embeds
//! as `g_id`, a unit vector that is zero on the planted set `S`, so the
//! early residual stream is language-agnostic. Each layer applies a small
//! residual map `h <- h + A_l h` whose rows and columns on `S` are zero.
//! At the injection layer the token's language signal `v_lang` (`+c` on `S`
//! for toyA, `-c` for toyB, zero elsewhere) is added once. The unembedding
//! row of `(lang, id)` is `g_id + v_lang`, so the content of the final state
//! picks the word and the sign of `S` picks the language.
//!
//! The model has no attention. Decoding treats it as a fixed-lag echo
//! transducer: output step `t` is read from the final state at sequence
//! position `t`, where the sequence is the prompt followed by the tokens
//! generated so far. A prompt of `n` tokens therefore yields its own
//! rendering in whichever language the final states encode; past `n`
//! steps the model re-reads its own output.

mod corpus;
mod lens;
mod vocab;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervention::{HookedGenerator, LayerHook, PositionKind};

pub use corpus::{generate_toy_corpus, generate_toy_pairs, LengthRange};
pub use lens::{logit_lens, spike_profile, SpikeProfile};
pub use vocab::{ToyLang, ToyVocab};

/// Largest pairwise dot product allowed between content embeddings.
pub const MAX_EMBEDDING_DOT: f64 = 0.5;
const EMBEDDING_ATTEMPTS: usize = 10_000;
/// Upper bound on stored weights, so a model description cannot request an
/// arbitrarily large allocation.
pub const MAX_MODEL_PARAMS: u128 = 1 << 28;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedModelSpec {
    pub hidden_size: usize,
    /// Number of residual layers; hidden states run from layer 0
    /// (embedding) to layer `depth`.
    pub depth: usize,
    /// Size of the planted set when it is drawn at random.
    pub num_planted: usize,
    /// Explicit planted set; overrides `num_planted`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planted_dims: Option<Vec<usize>>,
    pub injection_layer: usize,
    pub magnitude: f64,
    pub content_vocab: usize,
    /// Spectral norm of every residual map.
    pub mixing_scale: f64,
    /// Let residual maps touch the planted dimensions.
    pub leaky: bool,
    pub seed: u64,
}

impl Default for PlantedModelSpec {
    fn default() -> Self {
        Self {
            hidden_size: 64,
            depth: 12,
            num_planted: 8,
            planted_dims: None,
            injection_layer: 6,
            magnitude: 4.0,
            content_vocab: 64,
            mixing_scale: 0.05,
            leaky: false,
            seed: 1,
        }
    }
}

impl PlantedModelSpec {
    pub fn validate(&self) -> Result<()> {
        let d = self.hidden_size;
        let p = self.planted_dims.as_ref().map_or(self.num_planted, Vec::len);
        if p == 0 || p >= d {
            return Err(Error::config(format!("planted set size {p} must lie in 1..{d}")));
        }
        if let Some(dims) = &self.planted_dims {
            let mut sorted = dims.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != dims.len() || sorted.last().is_some_and(|&x| x >= d) {
                return Err(Error::config(
                    "planted dimensions must be distinct and below the hidden size",
                ));
            }
        }
        if self.depth == 0 || self.injection_layer >= self.depth {
            return Err(Error::config(format!(
                "injection layer {} must be below depth {}",
                self.injection_layer, self.depth
            )));
        }
        if !(self.magnitude.is_finite() && self.magnitude > 0.0) {
            return Err(Error::config("magnitude must be positive"));
        }
        if !(self.mixing_scale >= 0.0 && self.mixing_scale < 1.0) {
            return Err(Error::config("mixing scale must lie in [0, 1)"));
        }
        if self.content_vocab == 0 {
            return Err(Error::config("content vocabulary must not be empty"));
        }
        let params = (d as u128) * (d as u128) * (self.depth as u128) + 4 * (self.content_vocab as u128) * (d as u128);
        if params > MAX_MODEL_PARAMS {
            return Err(Error::config(format!(
                "model would need {params} parameters, more than {MAX_MODEL_PARAMS}"
            )));
        }
        Ok(())
    }
}

/// The built model. Immutable; forward passes are pure.
#[derive(Debug, Clone)]
pub struct PlantedModel {
    spec: PlantedModelSpec,
    planted: Vec<usize>,
    vocab: ToyVocab,
    /// `content_vocab x d`, row-major.
    embeddings: Vec<f32>,
    /// One `d x d` row-major map per layer; empty when mixing is disabled.
    mixing: Vec<Vec<f32>>,
    /// Language signals for toyA and toyB.
    lang_vectors: [Vec<f32>; 2],
    /// `2 * content_vocab x d`, row-major.
    unembedding: Vec<f32>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Build the model described by `spec`. Every random draw comes from one
/// ChaCha8 stream seeded by `spec.seed`.
pub fn build_planted_model(spec: &PlantedModelSpec) -> Result<PlantedModel> {
    spec.validate()?;
    let d = spec.hidden_size;
    let m = spec.content_vocab;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut planted = match &spec.planted_dims {
        Some(dims) => dims.clone(),
        None => index::sample(&mut rng, d, spec.num_planted).into_vec(),
    };
    planted.sort_unstable();
    let mut on_s = vec![false; d];
    for &i in &planted {
        on_s[i] = true;
    }
    let free: Vec<usize> = (0..d).filter(|&i| !on_s[i]).collect();

    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(m);
    while accepted.len() < m {
        let mut placed = false;
        for _ in 0..EMBEDDING_ATTEMPTS {
            let mut g = vec![0.0f64; d];
            for &i in &free {
                g[i] = normal(&mut rng);
            }
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            g.iter_mut().for_each(|x| *x /= norm);
            let close = accepted
                .iter()
                .any(|o| o.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() >= MAX_EMBEDDING_DOT);
            if !close {
                accepted.push(g);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::config(format!(
                "could not place {m} content embeddings with pairwise dot below {MAX_EMBEDDING_DOT} in {} free dimensions",
                free.len()
            )));
        }
    }
    let embeddings: Vec<f32> = accepted.iter().flatten().map(|&x| x as f32).collect();

    let mut mixing = Vec::new();
    if spec.mixing_scale > 0.0 {
        for _ in 0..spec.depth {
            let mut a = DMatrix::<f64>::from_fn(d, d, |_, _| 0.0);
            for r in 0..d {
                for c in 0..d {
                    a[(r, c)] = normal(&mut rng);
                }
            }
            if !spec.leaky {
                for &s in &planted {
                    a.row_mut(s).fill(0.0);
                    a.column_mut(s).fill(0.0);
                }
            }
            let sigma = a.singular_values().max();
            let scale = if sigma > 0.0 { spec.mixing_scale / sigma } else { 0.0 };
            let mut flat = Vec::with_capacity(d * d);
            for r in 0..d {
                for c in 0..d {
                    flat.push((a[(r, c)] * scale) as f32);
                }
            }
            mixing.push(flat);
        }
    }

    let c = spec.magnitude as f32;
    let mut lang_vectors = [vec![0.0f32; d], vec![0.0f32; d]];
    for &s in &planted {
        lang_vectors[0][s] = c;
        lang_vectors[1][s] = -c;
    }

    let mut unembedding = Vec::with_capacity(2 * m * d);
    for v in &lang_vectors {
        for id in 0..m {
            let g = &embeddings[id * d..(id + 1) * d];
            unembedding.extend(g.iter().zip(v).map(|(a, b)| a + b));
        }
    }

    Ok(PlantedModel {
        spec: spec.clone(),
        planted,
        vocab: ToyVocab::new(m),
        embeddings,
        mixing,
        lang_vectors,
        unembedding,
    })
}

/// Hidden states of a token sequence at every layer, layer-major then
/// token-major, matching the LDIM record payload layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTaps {
    pub num_tokens: usize,
    pub num_layers: usize,
    pub hidden_size: usize,
    pub data: Vec<f32>,
}

impl LayerTaps {
    pub fn state(&self, layer: usize, token: usize) -> &[f32] {
        let d = self.hidden_size;
        let start = (layer * self.num_tokens + token) * d;
        &self.data[start..start + d]
    }
}

impl PlantedModel {
    pub fn spec(&self) -> &PlantedModelSpec {
        &self.spec
    }

    /// The planted dimension set, ascending.
    pub fn planted_dims(&self) -> &[usize] {
        &self.planted
    }

    pub fn vocab(&self) -> &ToyVocab {
        &self.vocab
    }

    pub fn injection_layer(&self) -> usize {
        self.spec.injection_layer
    }

    /// Index of the last hidden state, `depth`.
    pub fn final_layer(&self) -> usize {
        self.spec.depth
    }

    pub fn embedding(&self, content: usize) -> &[f32] {
        let d = self.spec.hidden_size;
        &self.embeddings[content * d..(content + 1) * d]
    }

    pub fn lang_vector(&self, lang: ToyLang) -> &[f32] {
        &self.lang_vectors[lang as usize]
    }

    pub fn unembedding_row(&self, token: u32) -> Result<&[f32]> {
        self.vocab.lang_of(token)?;
        let d = self.spec.hidden_size;
        let t = token as usize;
        Ok(&self.unembedding[t * d..(t + 1) * d])
    }

    /// Residual-map matrix of layer `l` (1-based), if mixing is enabled.
    pub fn mixing_matrix(&self, layer: usize) -> Option<&[f32]> {
        layer.checked_sub(1).and_then(|i| self.mixing.get(i)).map(Vec::as_slice)
    }

    /// Run one token through every layer. `visit` sees each hidden state
    /// after it is final for that layer (post-hook).
    fn run_token(
        &self,
        token: u32,
        hook: Option<(&LayerHook, PositionKind)>,
        mut visit: impl FnMut(usize, &[f32]),
    ) -> Result<Vec<f32>> {
        let lang = self.vocab.lang_of(token)?;
        let content = self.vocab.content_of(token)?;
        let d = self.spec.hidden_size;
        let mut h = self.embedding(content).to_vec();
        let mut delta = vec![0.0f32; d];
        for layer in 0..=self.spec.depth {
            if layer > 0 {
                if let Some(a) = self.mixing_matrix(layer) {
                    for (r, out) in delta.iter_mut().enumerate() {
                        let row = &a[r * d..(r + 1) * d];
                        *out = row.iter().zip(&h).map(|(w, x)| w * x).sum();
                    }
                    h.iter_mut().zip(&delta).for_each(|(x, dx)| *x += dx);
                }
            }
            if layer == self.spec.injection_layer {
                let v = self.lang_vector(lang);
                h.iter_mut().zip(v).for_each(|(x, dv)| *x += dv);
            }
            if let Some((hook, kind)) = hook {
                hook.apply(layer, kind, &mut h)?;
            }
            visit(layer, &h);
        }
        Ok(h)
    }

    /// Hidden states `h_0..=h_depth` for every position.
    pub fn forward_with_taps(&self, tokens: &[u32]) -> Result<LayerTaps> {
        let d = self.spec.hidden_size;
        let n = tokens.len();
        let num_layers = self.spec.depth + 1;
        let mut data = vec![0.0f32; num_layers * n * d];
        for (t, &tok) in tokens.iter().enumerate() {
            self.run_token(tok, None, |layer, h| {
                let start = (layer * n + t) * d;
                data[start..start + d].copy_from_slice(h);
            })?;
        }
        Ok(LayerTaps {
            num_tokens: n,
            num_layers,
            hidden_size: d,
            data,
        })
    }

    /// Final hidden state of one token, optionally with a hook active.
    pub fn final_state(&self, token: u32, hook: Option<(&LayerHook, PositionKind)>) -> Result<Vec<f32>> {
        self.run_token(token, hook, |_, _| {})
    }

    /// Unembedding scores `U h`, accumulated in `f64`.
    pub fn logits(&self, h: &[f32]) -> Result<Vec<f64>> {
        let d = self.spec.hidden_size;
        if h.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: h.len(),
            });
        }
        Ok(self
            .unembedding
            .chunks_exact(d)
            .map(|row| row.iter().zip(h).map(|(&w, &x)| f64::from(w) * f64::from(x)).sum())
            .collect())
    }

    /// Highest-scoring token; ties go to the lowest token id.
    pub fn argmax(&self, h: &[f32]) -> Result<u32> {
        let logits = self.logits(h)?;
        let mut best = 0;
        for (i, &s) in logits.iter().enumerate() {
            if s > logits[best] {
                best = i;
            }
        }
        Ok(best as u32)
    }
}

impl HookedGenerator for PlantedModel {
    fn depth(&self) -> usize {
        self.spec.depth
    }

    fn hidden_size(&self) -> usize {
        self.spec.hidden_size
    }

    fn generate(&self, prompt: &[u32], max_len: usize, hook: Option<&LayerHook>) -> Result<Vec<u32>> {
        if prompt.is_empty() {
            return Err(Error::Input("prompt must not be empty".into()));
        }
        for &t in prompt {
            self.vocab.lang_of(t)?;
        }
        let n = prompt.len();
        let mut seq = prompt.to_vec();
        let mut out = Vec::with_capacity(max_len);
        for t in 0..max_len {
            let kind = if t < n {
                PositionKind::Prompt
            } else {
                PositionKind::Generated
            };
            let h = self.final_state(seq[t], hook.map(|h| (h, kind)))?;
            let next = self.argmax(&h)?;
            out.push(next);
            seq.push(next);
        }
        Ok(out)
    }
}

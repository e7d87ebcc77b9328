// SPDX-License-Identifier: MIT OR Apache-2.0

//! Inference-time overwrite of language-specific dimensions.
//!
//! At a chosen layer `j`, every selected dimension `i` of the hidden state
//! is replaced by `alpha * mu[i]`, where `mu` is the target language's
//! final-layer corpus mean. All other dimensions pass through untouched.
//! The overwrite is idempotent and its output on the selected dimensions
//! does not depend on the input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{CorpusMeanVector, DimensionSet};

/// Which sequence positions the hook rewrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionPolicy {
    /// Prompt and generated positions alike.
    #[default]
    AllPositions,
    /// Only positions holding tokens produced during decoding.
    GeneratedOnly,
}

impl std::str::FromStr for PositionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_positions" | "all" => Ok(Self::AllPositions),
            "generated_only" | "generated" => Ok(Self::GeneratedOnly),
            other => Err(Error::config(format!("unknown position policy {other:?}"))),
        }
    }
}

/// Whether a position belongs to the prompt or was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionKind {
    Prompt,
    Generated,
}

/// Complete configuration of one single-layer intervention.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionSpec {
    dims: DimensionSet,
    target_mean: CorpusMeanVector,
    layer: usize,
    alpha: f64,
    policy: PositionPolicy,
}

impl InterventionSpec {
    pub fn new(
        dims: DimensionSet,
        target_mean: CorpusMeanVector,
        layer: usize,
        alpha: f64,
        policy: PositionPolicy,
    ) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::config(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if dims.hidden_size() != target_mean.hidden_size() {
            return Err(Error::config(format!(
                "dimension set is for hidden size {} but the mean has {} entries",
                dims.hidden_size(),
                target_mean.hidden_size()
            )));
        }
        if dims.lang() != target_mean.lang() {
            return Err(Error::config(format!(
                "dimension set targets {} but the mean is for {}",
                dims.lang(),
                target_mean.lang()
            )));
        }
        Ok(Self {
            dims,
            target_mean,
            layer,
            alpha,
            policy,
        })
    }

    pub fn dims(&self) -> &DimensionSet {
        &self.dims
    }

    pub fn target_mean(&self) -> &CorpusMeanVector {
        &self.target_mean
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn policy(&self) -> PositionPolicy {
        self.policy
    }

    pub fn hidden_size(&self) -> usize {
        self.target_mean.hidden_size()
    }

    /// `(dimension, new value)` pairs written by the overwrite.
    fn overwrite_values(&self) -> Vec<(usize, f32)> {
        let mu = self.target_mean.values();
        self.dims
            .indices()
            .iter()
            .map(|&i| (i, (self.alpha * mu[i]) as f32))
            .collect()
    }
}

/// Apply the overwrite to a single hidden state. The input is not mutated.
pub fn apply_intervention(h: &[f32], spec: &InterventionSpec) -> Result<Vec<f32>> {
    if h.len() != spec.hidden_size() {
        return Err(Error::DimensionMismatch {
            expected: spec.hidden_size(),
            got: h.len(),
        });
    }
    let mut out = h.to_vec();
    for (i, v) in spec.overwrite_values() {
        out[i] = v;
    }
    Ok(out)
}

/// A pure per-layer transform handed to a hooked model.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerHook {
    layer: usize,
    policy: PositionPolicy,
    hidden_size: usize,
    overwrite: Vec<(usize, f32)>,
}

impl LayerHook {
    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn policy(&self) -> PositionPolicy {
        self.policy
    }

    /// Whether the hook rewrites a position of `kind` at `layer`.
    pub fn fires(&self, layer: usize, kind: PositionKind) -> bool {
        layer == self.layer
            && match self.policy {
                PositionPolicy::AllPositions => true,
                PositionPolicy::GeneratedOnly => kind == PositionKind::Generated,
            }
    }

    /// The overwrite itself, independent of layer and position.
    pub fn transform(&self, h: &[f32]) -> Result<Vec<f32>> {
        let mut out = h.to_vec();
        self.rewrite(&mut out)?;
        Ok(out)
    }

    /// Rewrite `h` in place if the hook fires for this layer and position.
    pub fn apply(&self, layer: usize, kind: PositionKind, h: &mut [f32]) -> Result<()> {
        if self.fires(layer, kind) {
            self.rewrite(h)?;
        }
        Ok(())
    }

    fn rewrite(&self, h: &mut [f32]) -> Result<()> {
        if h.len() != self.hidden_size {
            return Err(Error::DimensionMismatch {
                expected: self.hidden_size,
                got: h.len(),
            });
        }
        for &(i, v) in &self.overwrite {
            h[i] = v;
        }
        Ok(())
    }
}

pub fn make_hook(spec: &InterventionSpec) -> LayerHook {
    LayerHook {
        layer: spec.layer,
        policy: spec.policy,
        hidden_size: spec.hidden_size(),
        overwrite: spec.overwrite_values(),
    }
}

/// A language model that exposes its per-layer hidden states to a hook
/// during greedy decoding.
pub trait HookedGenerator {
    /// Number of transformer layers; valid hook layers are `0..depth`.
    fn depth(&self) -> usize;

    fn hidden_size(&self) -> usize;

    /// Greedy decoding of up to `max_len` tokens with `hook` active.
    fn generate(&self, prompt: &[u32], max_len: usize, hook: Option<&LayerHook>) -> Result<Vec<u32>>;
}

/// Greedy generation with the intervention described by `spec` active.
pub fn steered_generate<G: HookedGenerator + ?Sized>(
    model: &G,
    prompt: &[u32],
    spec: &InterventionSpec,
    max_len: usize,
) -> Result<Vec<u32>> {
    if spec.layer >= model.depth() {
        return Err(Error::config(format!(
            "intervention layer {} is outside a model of depth {}",
            spec.layer,
            model.depth()
        )));
    }
    if spec.hidden_size() != model.hidden_size() {
        return Err(Error::config(format!(
            "intervention is for hidden size {} but the model has {}",
            spec.hidden_size(),
            model.hidden_size()
        )));
    }
    if prompt.is_empty() {
        return Err(Error::Input("prompt must not be empty".into()));
    }
    model.generate(prompt, max_len, Some(&make_hook(spec)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Setting;
    use crate::store::LangCode;

    fn spec(indices: &[usize], mu: Vec<f64>, alpha: f64) -> InterventionSpec {
        let lang = LangCode::new("ja").unwrap();
        let d = mu.len();
        let dims = DimensionSet::from_indices(lang, Setting::Parallel, d, indices.to_vec(), None).unwrap();
        let mean = CorpusMeanVector::new(lang, 12, mu, 50).unwrap();
        InterventionSpec::new(dims, mean, 3, alpha, PositionPolicy::AllPositions).unwrap()
    }

    #[test]
    fn overwrite_example() {
        let s = spec(&[0, 2], vec![10.0, 20.0, 30.0, 40.0], 0.5);
        let h = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(apply_intervention(&h, &s).unwrap(), vec![5.0, 2.0, 15.0, 4.0]);
        assert_eq!(h, [1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn zero_alpha_zeroes_selected() {
        let s = spec(&[1], vec![10.0, 20.0, 30.0], 0.0);
        assert_eq!(apply_intervention(&[1.0, 2.0, 3.0], &s).unwrap(), vec![1.0, 0.0, 3.0]);
    }

    #[test]
    fn full_overwrite_is_mean() {
        let s = spec(&[0, 1, 2], vec![0.25, -1.5, 3.0], 1.0);
        assert_eq!(apply_intervention(&[9.0, 9.0, 9.0], &s).unwrap(), vec![0.25, -1.5, 3.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let s = spec(&[0], vec![1.0, 2.0], 1.0);
        assert!(matches!(
            apply_intervention(&[1.0], &s),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn spec_validation() {
        let lang = LangCode::new("ja").unwrap();
        let dims = DimensionSet::from_indices(lang, Setting::Parallel, 3, vec![0], None).unwrap();
        let mean = CorpusMeanVector::new(lang, 12, vec![1.0, 2.0], 1).unwrap();
        assert!(matches!(
            InterventionSpec::new(dims.clone(), mean, 0, 1.0, PositionPolicy::AllPositions),
            Err(Error::Config(_))
        ));
        let mean = CorpusMeanVector::new(lang, 12, vec![1.0, 2.0, 3.0], 1).unwrap();
        assert!(InterventionSpec::new(dims.clone(), mean.clone(), 0, -0.1, PositionPolicy::AllPositions).is_err());
        let other = CorpusMeanVector::new(LangCode::new("fr").unwrap(), 12, vec![1.0, 2.0, 3.0], 1).unwrap();
        assert!(InterventionSpec::new(dims, other, 0, 1.0, PositionPolicy::AllPositions).is_err());
    }

    #[test]
    fn hook_matches_apply_and_respects_layer() {
        let s = spec(&[0, 2], vec![10.0, 20.0, 30.0, 40.0], 0.5);
        let hook = make_hook(&s);
        let h = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(hook.transform(&h).unwrap(), apply_intervention(&h, &s).unwrap());

        let mut same = h;
        hook.apply(2, PositionKind::Prompt, &mut same).unwrap();
        assert_eq!(same, h);
        hook.apply(3, PositionKind::Prompt, &mut same).unwrap();
        assert_eq!(same, [5.0, 2.0, 15.0, 4.0]);
    }

    #[test]
    fn hook_is_idempotent() {
        let s = spec(&[1, 3], vec![-1.0, 2.5, 0.0, 7.0], 0.3);
        let hook = make_hook(&s);
        let once = hook.transform(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(hook.transform(&once).unwrap(), once);
    }

    #[test]
    fn generated_only_policy() {
        let lang = LangCode::new("ja").unwrap();
        let dims = DimensionSet::from_indices(lang, Setting::Parallel, 2, vec![0], None).unwrap();
        let mean = CorpusMeanVector::new(lang, 12, vec![4.0, 0.0], 1).unwrap();
        let s = InterventionSpec::new(dims, mean, 1, 1.0, PositionPolicy::GeneratedOnly).unwrap();
        let hook = make_hook(&s);
        assert!(!hook.fires(1, PositionKind::Prompt));
        assert!(hook.fires(1, PositionKind::Generated));
        assert!(!hook.fires(0, PositionKind::Generated));
    }
}

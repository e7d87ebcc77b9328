// SPDX-License-Identifier: MIT OR Apache-2.0

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::stats::{CorpusMeanVector, DiffVector, DimensionSet, Setting};

fn abs_diff(a: &CorpusMeanVector, b: &CorpusMeanVector) -> Result<Vec<f64>> {
    if a.hidden_size() != b.hidden_size() {
        return Err(Error::DimensionMismatch {
            expected: a.hidden_size(),
            got: b.hidden_size(),
        });
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect())
}

/// Final-layer mean against an anchor-layer mean of the same language.
pub fn diff_monolingual(mu_final: &CorpusMeanVector, mu_anchor: &CorpusMeanVector) -> Result<DiffVector> {
    if mu_final.lang != mu_anchor.lang {
        return Err(Error::config(format!(
            "monolingual contrast needs one language, got {} and {}",
            mu_final.lang, mu_anchor.lang
        )));
    }
    if mu_final.layer <= mu_anchor.layer {
        return Err(Error::config(format!(
            "anchor layer {} must precede final layer {}",
            mu_anchor.layer, mu_final.layer
        )));
    }
    Ok(DiffVector {
        values: abs_diff(mu_final, mu_anchor)?,
        setting: Setting::Monolingual,
        lang: mu_final.lang,
        layer: mu_final.layer,
        anchor_layer: Some(mu_anchor.layer),
        reference_lang: None,
    })
}

/// Final-layer mean of a language against the final-layer mean of the
/// reference language over translation-equivalent sentences.
pub fn diff_parallel(
    mu_lang_final: &CorpusMeanVector,
    mu_ref_final: &CorpusMeanVector,
    final_layer: u32,
) -> Result<DiffVector> {
    if mu_lang_final.lang == mu_ref_final.lang {
        return Err(Error::config(format!(
            "parallel contrast needs two languages, got {} twice",
            mu_lang_final.lang
        )));
    }
    for mu in [mu_lang_final, mu_ref_final] {
        if mu.layer != final_layer {
            return Err(Error::config(format!(
                "parallel contrast uses the final layer {final_layer}, got a {} mean at layer {}",
                mu.lang, mu.layer
            )));
        }
    }
    Ok(DiffVector {
        values: abs_diff(mu_lang_final, mu_ref_final)?,
        setting: Setting::Parallel,
        lang: mu_lang_final.lang,
        layer: final_layer,
        anchor_layer: None,
        reference_lang: Some(mu_ref_final.lang),
    })
}

/// Larger score first; equal scores resolve to the lower index.
fn rank(values: &[f64], a: usize, b: usize) -> Ordering {
    values[b].total_cmp(&values[a]).then(a.cmp(&b))
}

/// The `k` highest-scoring dimensions, ties resolved toward lower indices,
/// returned in ascending index order.
pub fn topk_select(diff: &DiffVector, k: usize) -> Result<DimensionSet> {
    let d = diff.values.len();
    if k == 0 || k > d {
        return Err(Error::Range(format!("K = {k} must lie in 1..={d}")));
    }
    let values = &diff.values;
    let mut order: Vec<usize> = (0..d).collect();
    if k < d {
        order.select_nth_unstable_by(k - 1, |&a, &b| rank(values, a, b));
    }
    let mut indices = order[..k].to_vec();
    indices.sort_unstable();
    let scores = indices.iter().map(|&i| values[i]).collect();
    Ok(DimensionSet {
        lang: diff.lang,
        setting: diff.setting,
        hidden_size: d,
        layer: diff.layer,
        anchor_layer: diff.anchor_layer,
        reference_lang: diff.reference_lang,
        indices,
        scores,
    })
}

/// Whether the `k`-th and `(k+1)`-th largest scores are equal, so that the
/// selection depends on the tie-break rule rather than on the data.
pub fn boundary_tied(diff: &DiffVector, k: usize) -> bool {
    let d = diff.values.len();
    if k == 0 || k >= d {
        return false;
    }
    let mut sorted = diff.values.clone();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    sorted[k - 1] == sorted[k]
}

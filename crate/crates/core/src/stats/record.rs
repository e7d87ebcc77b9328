// SPDX-License-Identifier: MIT OR Apache-2.0

//! Self-describing JSON records for dimension sets and corpus means, so
//! interventions can be configured from files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{CorpusMeanVector, DimensionSet, Setting};
use crate::store::LangCode;

const DIMENSION_SET_KIND: &str = "dimension_set";
const CORPUS_MEAN_KIND: &str = "corpus_mean";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DimensionSetRecord {
    kind: String,
    lang: LangCode,
    setting: Setting,
    layer: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anchor_layer: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference_lang: Option<LangCode>,
    hidden_size: usize,
    k: usize,
    indices: Vec<usize>,
    scores: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusMeanRecord {
    kind: String,
    lang: LangCode,
    layer: u32,
    num_sentences: usize,
    values: Vec<f64>,
}

fn parse_err(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        message: e.to_string(),
    }
}

fn check_kind(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Validation(format!(
            "expected a {expected} record, found {found:?}"
        )));
    }
    Ok(())
}

impl DimensionSet {
    pub fn to_json(&self) -> String {
        let rec = DimensionSetRecord {
            kind: DIMENSION_SET_KIND.into(),
            lang: self.lang,
            setting: self.setting,
            layer: self.layer,
            anchor_layer: self.anchor_layer,
            reference_lang: self.reference_lang,
            hidden_size: self.hidden_size,
            k: self.k(),
            indices: self.indices.clone(),
            scores: self.scores.clone(),
        };
        let mut s = serde_json::to_string_pretty(&rec).expect("record serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: DimensionSetRecord = serde_json::from_str(text).map_err(parse_err)?;
        check_kind(&rec.kind, DIMENSION_SET_KIND)?;
        if rec.k != rec.indices.len() {
            return Err(Error::Validation(format!(
                "record declares K = {} but lists {} indices",
                rec.k,
                rec.indices.len()
            )));
        }
        if rec.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("record indices must be strictly ascending".into()));
        }
        let set = Self {
            lang: rec.lang,
            setting: rec.setting,
            hidden_size: rec.hidden_size,
            layer: rec.layer,
            anchor_layer: rec.anchor_layer,
            reference_lang: rec.reference_lang,
            indices: rec.indices,
            scores: rec.scores,
        };
        set.validate()?;
        Ok(set)
    }
}

impl CorpusMeanVector {
    pub fn to_json(&self) -> String {
        let rec = CorpusMeanRecord {
            kind: CORPUS_MEAN_KIND.into(),
            lang: self.lang,
            layer: self.layer,
            num_sentences: self.num_sentences,
            values: self.values.clone(),
        };
        let mut s = serde_json::to_string_pretty(&rec).expect("record serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: CorpusMeanRecord = serde_json::from_str(text).map_err(parse_err)?;
        check_kind(&rec.kind, CORPUS_MEAN_KIND)?;
        Self::new(rec.lang, rec.layer, rec.values, rec.num_sentences)
    }
}

pub fn save_dimension_set(path: &Path, set: &DimensionSet) -> Result<()> {
    fs::write(path, set.to_json())?;
    Ok(())
}

pub fn load_dimension_set(path: &Path) -> Result<DimensionSet> {
    DimensionSet::from_json(&fs::read_to_string(path)?)
}

pub fn save_corpus_mean(path: &Path, mean: &CorpusMeanVector) -> Result<()> {
    fs::write(path, mean.to_json())?;
    Ok(())
}

pub fn load_corpus_mean(path: &Path) -> Result<CorpusMeanVector> {
    CorpusMeanVector::from_json(&fs::read_to_string(path)?)
}

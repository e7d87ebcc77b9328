// SPDX-License-Identifier: MIT OR Apache-2.0

//! Contract between this crate and an external real-model exporter.
//!
//! The exporter itself lives outside the crate. What it must produce is
//! pinned down here: an LDIM file plus a JSON sidecar, hook test vectors
//! checked against [`apply_intervention`], and a pluggable language
//! classifier. [`PlantedModel`] implements [`ActivationSource`] so the whole
//! path runs without a real model.
//!
//! Layer indexing: 0 is the embedding output, `j >= 1` is the output of
//! block `j`.

use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervention::{apply_intervention, InterventionSpec, PositionPolicy};
use crate::metrics::{is_success, LangIdModel};
use crate::stats::{CorpusMeanVector, DimensionSet, Setting};
use crate::store::{write_corpus, ActivationFileHeader, LangCode, SentenceActivationRecord, SentenceMeta};
use crate::toy::PlantedModel;

pub const LAYER_INDEXING: &str = "0 = embedding output, j >= 1 = output of block j";

/// Prompt used for steered generation on real models.
pub const PROMPT_TEMPLATE: &str = "Translate an English sentence into a target language.";

/// Largest allowed elementwise gap between a hook and [`apply_intervention`].
pub const HOOK_TOLERANCE: f32 = 1e-6;

/// Which hidden state is tapped at each layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    #[default]
    PostBlockResidual,
    /// Residual stream everywhere except the last layer, which is taken
    /// after the final normalization.
    PostFinalNormLastLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeConfig {
    pub model: String,
    pub layers: Vec<u32>,
    #[serde(default)]
    pub convention: Convention,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub device: Option<String>,
    pub output: PathBuf,
}

fn default_batch_size() -> usize {
    8
}

impl BridgeConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    /// Check the config against a model with `depth` blocks.
    pub fn validate(&self, depth: usize) -> Result<()> {
        if self.model.trim().is_empty() {
            return Err(Error::config("model identifier is empty"));
        }
        if self.layers.is_empty() {
            return Err(Error::config("no layers requested"));
        }
        if self.layers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("layers must be strictly ascending"));
        }
        if let Some(&l) = self.layers.iter().find(|&&l| l as usize > depth) {
            return Err(Error::config(format!("layer {l} is outside a model of depth {depth}")));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        Ok(())
    }

    /// Path of the JSON sidecar written next to the LDIM file.
    pub fn sidecar_path(&self) -> PathBuf {
        let mut name = self.output.as_os_str().to_owned();
        name.push(".json");
        PathBuf::from(name)
    }
}

/// A model that can report its hidden states for tokenized text.
pub trait ActivationSource {
    fn hidden_size(&self) -> usize;

    /// Number of blocks; valid layers are `0..=depth`.
    fn depth(&self) -> usize;

    fn tokenize(&self, text: &str) -> Result<Vec<u32>>;

    /// Positions that are special tokens (BOS and the like).
    fn special_mask(&self, tokens: &[u32]) -> Vec<bool> {
        vec![false; tokens.len()]
    }

    /// Layer-major `layers.len() * tokens.len() * hidden_size` values.
    fn hidden_states(&self, tokens: &[u32], layers: &[u32], convention: Convention) -> Result<Vec<f32>>;
}

impl ActivationSource for PlantedModel {
    fn hidden_size(&self) -> usize {
        self.spec().hidden_size
    }

    fn depth(&self) -> usize {
        self.spec().depth
    }

    fn tokenize(&self, text: &str) -> Result<Vec<u32>> {
        self.vocab().encode(text)
    }

    fn hidden_states(&self, tokens: &[u32], layers: &[u32], convention: Convention) -> Result<Vec<f32>> {
        if convention != Convention::PostBlockResidual {
            return Err(Error::config("the toy model has no final normalization"));
        }
        let taps = self.forward_with_taps(tokens)?;
        let block = taps.num_tokens * taps.hidden_size;
        let mut out = Vec::with_capacity(layers.len() * block);
        for &l in layers {
            let l = l as usize;
            if l >= taps.num_layers {
                return Err(Error::MissingLayer(l as u32));
            }
            out.extend_from_slice(&taps.data[l * block..(l + 1) * block]);
        }
        Ok(out)
    }
}

/// Written next to every exported LDIM file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportSidecar {
    pub model: String,
    pub convention: Convention,
    pub layer_indexing: String,
    pub layers: Vec<u32>,
    pub hidden_size: usize,
    pub exported: Vec<u32>,
    /// Sentences that tokenized to nothing.
    pub skipped: Vec<u32>,
    /// Per exported sentence, the special-token positions.
    pub special_positions: Vec<Vec<usize>>,
}

/// Export hidden states for `sentences` to `cfg.output`. Both the LDIM file
/// and the sidecar are written to a temporary name and renamed, so readers
/// never see a partial file.
pub fn export_activations<S: ActivationSource + ?Sized>(
    source: &S,
    cfg: &BridgeConfig,
    sentences: &[SentenceMeta],
) -> Result<ExportSidecar> {
    cfg.validate(source.depth())?;
    if sentences.is_empty() {
        return Err(Error::Input("no sentences to export".into()));
    }
    let d = source.hidden_size();
    let header = ActivationFileHeader::new(d as u32, cfg.layers.clone())?;
    let mut sorted: Vec<&SentenceMeta> = sentences.iter().collect();
    sorted.sort_by_key(|s| s.sentence_id);

    let mut records = Vec::with_capacity(sorted.len());
    let mut sidecar = ExportSidecar {
        model: cfg.model.clone(),
        convention: cfg.convention,
        layer_indexing: LAYER_INDEXING.into(),
        layers: cfg.layers.clone(),
        hidden_size: d,
        exported: Vec::new(),
        skipped: Vec::new(),
        special_positions: Vec::new(),
    };
    for s in sorted {
        let tokens = source.tokenize(&s.text)?;
        if tokens.is_empty() {
            sidecar.skipped.push(s.sentence_id);
            continue;
        }
        let data = source.hidden_states(&tokens, &cfg.layers, cfg.convention)?;
        records.push(SentenceActivationRecord {
            sentence_id: s.sentence_id,
            lang: LangCode::new(&s.lang)?,
            num_tokens: tokens.len() as u32,
            data,
        });
        let mask = source.special_mask(&tokens);
        sidecar.exported.push(s.sentence_id);
        sidecar
            .special_positions
            .push(mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect());
    }

    let mut bytes = Vec::new();
    write_corpus(&records, &header, &mut bytes)?;
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Input(e.to_string()))?;
    write_atomic(&cfg.output, &bytes)?;
    write_atomic(&cfg.sidecar_path(), json.as_bytes())?;
    Ok(sidecar)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = BufWriter::new(fs::File::create(&tmp)?);
        f.write_all(bytes)?;
        f.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// One `(h, spec) -> expected` case shared with an external hook
/// implementation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HookTestVector {
    pub h: Vec<f32>,
    pub indices: Vec<usize>,
    pub mean: Vec<f64>,
    pub alpha: f64,
    pub expected: Vec<f32>,
}

impl HookTestVector {
    /// Case whose `expected` is computed by [`apply_intervention`].
    pub fn new(h: Vec<f32>, indices: Vec<usize>, mean: Vec<f64>, alpha: f64) -> Result<Self> {
        let mut v = Self {
            h,
            indices,
            mean,
            alpha,
            expected: Vec::new(),
        };
        v.expected = v.primary()?;
        Ok(v)
    }

    fn primary(&self) -> Result<Vec<f32>> {
        let lang = LangCode::new("x")?;
        let d = self.mean.len();
        let dims = DimensionSet::from_indices(lang, Setting::Parallel, d, self.indices.clone(), None)?;
        let mean = CorpusMeanVector::new(lang, 0, self.mean.clone(), 1)?;
        let spec = InterventionSpec::new(dims, mean, 0, self.alpha, PositionPolicy::AllPositions)?;
        apply_intervention(&self.h, &spec)
    }

    /// Largest elementwise gap between `expected` and the primary result.
    pub fn max_error(&self) -> Result<f32> {
        let primary = self.primary()?;
        if primary.len() != self.expected.len() {
            return Err(Error::DimensionMismatch {
                expected: primary.len(),
                got: self.expected.len(),
            });
        }
        Ok(primary
            .iter()
            .zip(&self.expected)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max))
    }
}

pub fn write_hook_vectors<W: Write>(vectors: &[HookTestVector], mut sink: W) -> Result<()> {
    for v in vectors {
        let line = serde_json::to_string(v).map_err(|e| Error::Input(e.to_string()))?;
        writeln!(sink, "{line}")?;
    }
    Ok(())
}

/// Parse JSON lines; blank lines are skipped.
pub fn read_hook_vectors<R: BufRead>(source: R) -> Result<Vec<HookTestVector>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Worst error over all vectors; fails if any exceeds [`HOOK_TOLERANCE`].
pub fn check_hook_vectors(vectors: &[HookTestVector]) -> Result<f32> {
    let mut worst = 0.0f32;
    for (i, v) in vectors.iter().enumerate() {
        let e = v.max_error()?;
        if e > HOOK_TOLERANCE {
            return Err(Error::Validation(format!("hook vector {i} differs by {e}")));
        }
        worst = worst.max(e);
    }
    Ok(worst)
}

/// A language identifier, built in or external.
pub trait LanguageClassifier {
    /// Most probable language and its score in `[0, 1]`.
    fn classify(&self, text: &str) -> Result<(String, f64)>;
}

impl LanguageClassifier for LangIdModel {
    fn classify(&self, text: &str) -> Result<(String, f64)> {
        LangIdModel::classify(self, text).map(|(l, p)| (l.to_owned(), p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangIdOutcome {
    pub lang: String,
    pub score: f64,
    pub success: bool,
}

/// Classify each text and apply the shared success rule. Empty texts are
/// an input error.
pub fn external_langid<C: LanguageClassifier + ?Sized>(
    classifier: &C,
    texts: &[&str],
    target_lang: &str,
) -> Result<Vec<LangIdOutcome>> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.trim().is_empty() {
                return Err(Error::Input(format!("text {i} is empty")));
            }
            let (lang, score) = classifier.classify(t)?;
            let success = is_success(&lang, score, target_lang);
            Ok(LangIdOutcome { lang, score, success })
        })
        .collect()
}

/// Fails with a dependency error when an external classifier file is absent.
pub fn require_classifier_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Dependency(format!(
            "classifier file {} not found",
            path.display()
        )))
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! In-memory experiments. Everything here is a pure function of its inputs
//! and seeds; parallel sections collect results in input order and every
//! floating-point reduction runs sequentially in a fixed order.

use std::collections::{BTreeMap, HashMap};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::driver::ExperimentConfig;
use crate::error::{Error, Result};
use crate::intervention::{steered_generate, HookedGenerator, InterventionSpec};
use crate::metrics::{evaluate_control, train_langid, EvalResult, LangIdModel};
use crate::stats::{
    boundary_tied, corpus_mean, diff_monolingual, diff_parallel, sentence_means, topk_select, CorpusMeanVector,
    DiffVector, DimensionSet, Setting,
};
use crate::store::{ActivationCorpus, LangCode, SentenceMeta};
use crate::toy::PlantedModel;

/// A hooked generator that also maps between text and tokens.
pub trait TextGenerator: HookedGenerator + Sync {
    fn encode(&self, text: &str) -> Result<Vec<u32>>;

    fn decode(&self, tokens: &[u32]) -> Result<String>;

    /// Ground-truth language dimensions, when the model has them.
    fn planted_dims(&self) -> Option<&[usize]> {
        None
    }
}

impl TextGenerator for PlantedModel {
    fn encode(&self, text: &str) -> Result<Vec<u32>> {
        self.vocab().encode(text)
    }

    fn decode(&self, tokens: &[u32]) -> Result<String> {
        self.vocab().decode(tokens)
    }

    fn planted_dims(&self) -> Option<&[usize]> {
        Some(PlantedModel::planted_dims(self))
    }
}

/// Run `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Activations and metadata used for identification.
#[derive(Debug, Clone)]
pub struct IdentificationData {
    pub corpus: ActivationCorpus,
    pub meta: Vec<SentenceMeta>,
}

impl IdentificationData {
    /// Pair metadata with activations. Metadata lines without a record (for
    /// instance sentences an exporter skipped) are dropped; a record whose
    /// language disagrees with its metadata is an error.
    pub fn new(corpus: ActivationCorpus, meta: Vec<SentenceMeta>) -> Result<Self> {
        let mut kept = Vec::with_capacity(meta.len());
        for m in meta {
            if let Some(rec) = corpus.record(m.sentence_id) {
                if rec.lang.as_str() != m.lang {
                    return Err(Error::Validation(format!(
                        "sentence {} is {} in the metadata but {} in the activations",
                        m.sentence_id, m.lang, rec.lang
                    )));
                }
                kept.push(m);
            }
        }
        Ok(Self { corpus, meta: kept })
    }

    pub fn final_layer(&self, cfg: &ExperimentConfig) -> Result<u32> {
        let layer = cfg.final_layer.unwrap_or_else(|| self.corpus.final_layer());
        self.corpus.header.layer_slot(layer)?;
        Ok(layer)
    }

    /// Training text per language, in first-appearance order.
    pub fn texts_by_lang(&self) -> Vec<(String, Vec<String>)> {
        let mut order: Vec<String> = Vec::new();
        let mut texts: HashMap<&str, Vec<String>> = HashMap::new();
        for m in &self.meta {
            if !texts.contains_key(m.lang.as_str()) {
                order.push(m.lang.clone());
            }
            texts.entry(m.lang.as_str()).or_default().push(m.text.clone());
        }
        order
            .into_iter()
            .map(|l| {
                let t = texts.remove(l.as_str()).unwrap_or_default();
                (l, t)
            })
            .collect()
    }

    /// Language classifier trained on the identification texts.
    pub fn train_langid(&self) -> Result<LangIdModel> {
        train_langid(&self.texts_by_lang())
    }
}

/// Sentences drawn for one identification run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub target_ids: Vec<u32>,
    /// Translations of the target sentences (parallel setting only).
    pub source_ids: Vec<u32>,
}

/// Uniform sample without replacement. Parallel runs draw pairs that have
/// both a source and a target sentence; monolingual runs draw target
/// sentences. Ids come back ascending.
pub fn sample_sentences(data: &IdentificationData, cfg: &ExperimentConfig, lang: &str, seed: u64) -> Result<Sample> {
    let n = cfg.sample_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match cfg.setting {
        Setting::Monolingual => {
            let mut pool: Vec<u32> = data
                .meta
                .iter()
                .filter(|m| m.lang == lang)
                .map(|m| m.sentence_id)
                .collect();
            pool.sort_unstable();
            if pool.len() < n {
                return Err(Error::Sample(format!(
                    "{n} sentences requested but only {} are in {lang}",
                    pool.len()
                )));
            }
            let mut ids: Vec<u32> = index::sample(&mut rng, pool.len(), n)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            ids.sort_unstable();
            Ok(Sample {
                target_ids: ids,
                source_ids: Vec::new(),
            })
        }
        Setting::Parallel => {
            let mut pairs: BTreeMap<u32, (Option<u32>, Option<u32>)> = BTreeMap::new();
            for m in &data.meta {
                let Some(p) = m.pair_id else { continue };
                if m.lang == lang {
                    pairs.entry(p).or_default().0 = Some(m.sentence_id);
                } else if m.lang == cfg.source_lang {
                    pairs.entry(p).or_default().1 = Some(m.sentence_id);
                }
            }
            let complete: Vec<(u32, u32)> = pairs.values().filter_map(|&(t, s)| Some((t?, s?))).collect();
            if complete.len() < n {
                return Err(Error::Sample(format!(
                    "{n} pairs requested but only {} {}-{lang} pairs exist",
                    complete.len(),
                    cfg.source_lang
                )));
            }
            let mut picked: Vec<(u32, u32)> = index::sample(&mut rng, complete.len(), n)
                .into_iter()
                .map(|i| complete[i])
                .collect();
            picked.sort_unstable();
            let mut source_ids: Vec<u32> = picked.iter().map(|p| p.1).collect();
            source_ids.sort_unstable();
            Ok(Sample {
                target_ids: picked.iter().map(|p| p.0).collect(),
                source_ids,
            })
        }
    }
}

/// Outcome of identification for one language and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Identified {
    pub dims: DimensionSet,
    /// Target-language mean at the final layer.
    pub mean: CorpusMeanVector,
    pub diff: DiffVector,
    pub sample: Sample,
    /// The K-th and (K+1)-th scores tie, so the set rests on tie-breaking.
    pub degenerate: bool,
}

impl Identified {
    /// Fraction of `truth` recovered by the selected set.
    pub fn recall(&self, truth: &[usize]) -> f64 {
        if truth.is_empty() {
            return 1.0;
        }
        truth.iter().filter(|&&i| self.dims.contains(i)).count() as f64 / truth.len() as f64
    }
}

fn layer_mean(
    data: &IdentificationData,
    cfg: &ExperimentConfig,
    ids: &[u32],
    lang: LangCode,
    layer: u32,
) -> Result<CorpusMeanVector> {
    let vectors = sentence_means(&data.corpus, ids, layer, &cfg.token_filter)?;
    corpus_mean(&vectors, lang, layer)
}

/// Identify the language-specific dimensions of `lang`. Sentence means are
/// computed on the current rayon pool.
pub fn identify(data: &IdentificationData, cfg: &ExperimentConfig, lang: &str, seed: u64) -> Result<Identified> {
    let final_layer = data.final_layer(cfg)?;
    cfg.validate_against(data.corpus.hidden_size(), final_layer)?;
    let code = LangCode::new(lang)?;
    let sample = sample_sentences(data, cfg, lang, seed)?;
    let mean = layer_mean(data, cfg, &sample.target_ids, code, final_layer)?;
    let diff = match cfg.setting {
        Setting::Monolingual => {
            let anchor = layer_mean(data, cfg, &sample.target_ids, code, cfg.anchor_layer)?;
            diff_monolingual(&mean, &anchor)?
        }
        Setting::Parallel => {
            let source = layer_mean(
                data,
                cfg,
                &sample.source_ids,
                LangCode::new(&cfg.source_lang)?,
                final_layer,
            )?;
            diff_parallel(&mean, &source, final_layer)?
        }
    };
    let dims = topk_select(&diff, cfg.k)?;
    let degenerate = boundary_tied(&diff, cfg.k);
    Ok(Identified {
        dims,
        mean,
        diff,
        sample,
        degenerate,
    })
}

/// A prompt and the translation it should turn into.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalPair {
    pub pair_id: u32,
    pub prompt: String,
    pub reference: String,
}

/// Source-language prompts with their target-language references, ordered
/// by pair id.
pub fn eval_pairs(meta: &[SentenceMeta], source: &str, target: &str) -> Result<Vec<EvalPair>> {
    let mut by_pair: BTreeMap<u32, (Option<&str>, Option<&str>)> = BTreeMap::new();
    for m in meta {
        let Some(p) = m.pair_id else { continue };
        if m.lang == source {
            by_pair.entry(p).or_default().0 = Some(&m.text);
        } else if m.lang == target {
            by_pair.entry(p).or_default().1 = Some(&m.text);
        }
    }
    let pairs: Vec<EvalPair> = by_pair
        .into_iter()
        .filter_map(|(pair_id, (s, t))| {
            Some(EvalPair {
                pair_id,
                prompt: s?.to_string(),
                reference: t?.to_string(),
            })
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::Sample(format!("no {source}-{target} evaluation pairs")));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Generation {
    pub pair_id: u32,
    pub lang: String,
    pub prompt: String,
    pub output: String,
    pub reference: String,
}

/// Steered generations for every pair and their evaluation.
pub fn run_control<G: TextGenerator>(
    model: &G,
    spec: &InterventionSpec,
    pairs: &[EvalPair],
    langid: &LangIdModel,
    cfg: &ExperimentConfig,
) -> Result<(Vec<Generation>, EvalResult)> {
    let lang = spec.dims().lang().to_string();
    let generations = pairs
        .par_iter()
        .map(|p| {
            let prompt = model.encode(&p.prompt)?;
            let max_len = cfg.max_len.unwrap_or(prompt.len());
            let tokens = steered_generate(model, &prompt, spec, max_len)?;
            Ok(Generation {
                pair_id: p.pair_id,
                lang: lang.clone(),
                prompt: p.prompt.clone(),
                output: model.decode(&tokens)?,
                reference: p.reference.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let outputs: Vec<&str> = generations.iter().map(|g| g.output.as_str()).collect();
    let references: Vec<&str> = generations.iter().map(|g| g.reference.as_str()).collect();
    let result = evaluate_control(&outputs, &references, &lang, langid, cfg.tokenizer)?;
    Ok((generations, result))
}

/// Inputs shared by every steering experiment.
pub struct Context<'a, G: TextGenerator> {
    pub data: &'a IdentificationData,
    pub model: &'a G,
    /// Held-out translation pairs used as prompts.
    pub eval_meta: &'a [SentenceMeta],
    pub langid: &'a LangIdModel,
}

impl<G: TextGenerator> Context<'_, G> {
    fn check_model(&self, cfg: &ExperimentConfig) -> Result<()> {
        if self.model.hidden_size() != self.data.corpus.hidden_size() {
            return Err(Error::config(format!(
                "activations have hidden size {} but the model has {}",
                self.data.corpus.hidden_size(),
                self.model.hidden_size()
            )));
        }
        if cfg.layer >= self.model.depth() {
            return Err(Error::config(format!(
                "intervention layer {} is outside a model of depth {}",
                cfg.layer,
                self.model.depth()
            )));
        }
        Ok(())
    }

    fn pairs_by_lang(&self, cfg: &ExperimentConfig) -> Result<Vec<Vec<EvalPair>>> {
        cfg.languages
            .iter()
            .map(|l| eval_pairs(self.eval_meta, &cfg.source_lang, l))
            .collect()
    }

    /// Identification for every `(language, seed)`, language-major.
    pub fn identify_all(&self, cfg: &ExperimentConfig) -> Result<Vec<Vec<Identified>>> {
        cfg.languages
            .iter()
            .map(|l| cfg.seeds.iter().map(|&s| identify(self.data, cfg, l, s)).collect())
            .collect()
    }

    fn spec(&self, ident: &Identified, layer: usize, alpha: f64, cfg: &ExperimentConfig) -> Result<InterventionSpec> {
        InterventionSpec::new(
            ident.dims.clone(),
            ident.mean.clone(),
            layer,
            alpha,
            cfg.position_policy,
        )
    }

    /// Seed-averaged result per language followed by the unweighted mean
    /// over languages, for one intervention setting.
    fn evaluate_setting(
        &self,
        cfg: &ExperimentConfig,
        idents: &[Vec<Identified>],
        pairs: &[Vec<EvalPair>],
    ) -> Result<(Vec<EvalResult>, EvalResult)> {
        let jobs: Vec<(usize, usize)> = (0..cfg.languages.len())
            .flat_map(|l| (0..cfg.seeds.len()).map(move |s| (l, s)))
            .collect();
        let results = jobs
            .par_iter()
            .map(|&(l, s)| {
                let spec = self.spec(&idents[l][s], cfg.layer, cfg.alpha, cfg)?;
                Ok(run_control(self.model, &spec, &pairs[l], self.langid, cfg)?.1)
            })
            .collect::<Result<Vec<_>>>()?;
        let per_lang: Vec<EvalResult> = results
            .chunks(cfg.seeds.len())
            .map(|c| EvalResult::mean(c).expect("seeds are nonempty"))
            .collect();
        let overall = EvalResult::weighted_mean(&per_lang).expect("languages are nonempty");
        Ok((per_lang, overall))
    }

    fn recall(&self, idents: &[Vec<Identified>]) -> Option<f64> {
        let truth = self.model.planted_dims()?;
        let all: Vec<f64> = idents.iter().flatten().map(|i| i.recall(truth)).collect();
        Some(all.iter().sum::<f64>() / all.len() as f64)
    }

    /// One steering run per `(language, seed)` at the configured layer and
    /// alpha.
    pub fn intervene(&self, cfg: &ExperimentConfig) -> Result<Vec<ControlRun>> {
        cfg.validate()?;
        self.check_model(cfg)?;
        let idents = self.identify_all(cfg)?;
        let pairs = self.pairs_by_lang(cfg)?;
        let mut runs = Vec::new();
        for (l, lang) in cfg.languages.iter().enumerate() {
            for (s, &seed) in cfg.seeds.iter().enumerate() {
                let spec = self.spec(&idents[l][s], cfg.layer, cfg.alpha, cfg)?;
                let (generations, result) = run_control(self.model, &spec, &pairs[l], self.langid, cfg)?;
                runs.push(ControlRun {
                    lang: lang.clone(),
                    seed,
                    layer: cfg.layer,
                    alpha: cfg.alpha,
                    result,
                    generations,
                });
            }
        }
        Ok(runs)
    }

    /// Sweep intervention layer and alpha.
    pub fn grid(&self, cfg: &ExperimentConfig) -> Result<GridResult> {
        cfg.validate()?;
        let layers: Vec<usize> = if cfg.layers.is_empty() {
            (0..self.model.depth()).collect()
        } else {
            cfg.layers.clone()
        };
        if layers.is_empty() || cfg.alphas.is_empty() {
            return Err(Error::config("the grid has no cells"));
        }
        if let Some(&bad) = layers.iter().find(|&&l| l >= self.model.depth()) {
            return Err(Error::config(format!(
                "grid layer {bad} is outside a model of depth {}",
                self.model.depth()
            )));
        }
        self.check_model(&ExperimentConfig {
            layer: layers[0],
            ..cfg.clone()
        })?;
        let idents = self.identify_all(cfg)?;
        let pairs = self.pairs_by_lang(cfg)?;

        let skipped = |layer: usize, alpha: f64| cfg.skip_cells.iter().any(|c| c.layer == layer && c.alpha == alpha);
        let mut jobs = Vec::new();
        for &layer in &layers {
            for &alpha in &cfg.alphas {
                if skipped(layer, alpha) {
                    continue;
                }
                for l in 0..cfg.languages.len() {
                    for s in 0..cfg.seeds.len() {
                        jobs.push((layer, alpha, l, s));
                    }
                }
            }
        }
        let results = jobs
            .par_iter()
            .map(|&(layer, alpha, l, s)| {
                let spec = self.spec(&idents[l][s], layer, alpha, cfg)?;
                Ok(run_control(self.model, &spec, &pairs[l], self.langid, cfg)?.1)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut runs = Vec::with_capacity(jobs.len());
        for (&(layer, alpha, l, s), result) in jobs.iter().zip(&results) {
            runs.push(RunRow {
                lang: cfg.languages[l].clone(),
                layer,
                alpha,
                seed: cfg.seeds[s],
                result: *result,
            });
        }
        let mut cells = Vec::new();
        let mut cursor = results.chunks(cfg.seeds.len());
        for &layer in &layers {
            for &alpha in &cfg.alphas {
                if skipped(layer, alpha) {
                    cells.push(CellResult {
                        layer,
                        alpha,
                        per_lang: vec![None; cfg.languages.len()],
                        overall: None,
                    });
                    continue;
                }
                let per_lang: Vec<EvalResult> = (0..cfg.languages.len())
                    .map(|_| EvalResult::mean(cursor.next().expect("one chunk per language")).expect("seeds nonempty"))
                    .collect();
                let overall = EvalResult::weighted_mean(&per_lang);
                cells.push(CellResult {
                    layer,
                    alpha,
                    per_lang: per_lang.into_iter().map(Some).collect(),
                    overall,
                });
            }
        }
        Ok(GridResult {
            layers,
            alphas: cfg.alphas.clone(),
            languages: cfg.languages.clone(),
            n_seeds: cfg.seeds.len(),
            cells,
            runs,
        })
    }

    /// Vary K at the configured layer and alpha.
    pub fn ablate_k(&self, cfg: &ExperimentConfig, ks: &[usize]) -> Result<Vec<AblationRow>> {
        self.ablate(
            cfg,
            ks.iter().map(|&k| (k as f64, ExperimentConfig { k, ..cfg.clone() })),
        )
    }

    /// Vary the anchor layer of the monolingual setting.
    pub fn ablate_anchor(&self, cfg: &ExperimentConfig, anchors: &[u32]) -> Result<Vec<AblationRow>> {
        self.ablate(
            cfg,
            anchors.iter().map(|&a| {
                (
                    f64::from(a),
                    ExperimentConfig {
                        anchor_layer: a,
                        setting: Setting::Monolingual,
                        ..cfg.clone()
                    },
                )
            }),
        )
    }

    /// Vary the number of identification sentences.
    pub fn ablate_datasize(&self, cfg: &ExperimentConfig, sizes: &[usize]) -> Result<Vec<AblationRow>> {
        self.ablate(
            cfg,
            sizes.iter().map(|&n| {
                (
                    n as f64,
                    ExperimentConfig {
                        sample_size: n,
                        ..cfg.clone()
                    },
                )
            }),
        )
    }

    fn ablate(
        &self,
        base: &ExperimentConfig,
        variants: impl Iterator<Item = (f64, ExperimentConfig)>,
    ) -> Result<Vec<AblationRow>> {
        base.validate()?;
        self.check_model(base)?;
        let pairs = self.pairs_by_lang(base)?;
        let mut rows = Vec::new();
        for (value, cfg) in variants {
            cfg.validate()?;
            let idents = self.identify_all(&cfg)?;
            let (_, overall) = self.evaluate_setting(&cfg, &idents, &pairs)?;
            rows.push(AblationRow {
                value,
                result: overall,
                planted_recall: self.recall(&idents),
                degenerate: idents.iter().flatten().any(|i| i.degenerate),
                dimension_sets: idents.iter().flatten().map(|i| i.dims.indices().to_vec()).collect(),
            });
        }
        Ok(rows)
    }
}

/// One steering run with its generations.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlRun {
    pub lang: String,
    pub seed: u64,
    pub layer: usize,
    pub alpha: f64,
    pub result: EvalResult,
    pub generations: Vec<Generation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub lang: String,
    pub layer: usize,
    pub alpha: f64,
    pub seed: u64,
    pub result: EvalResult,
}

/// Seed-averaged results of one grid cell; `None` when not evaluated. The
/// overall entry weights languages by sample count, which is the plain mean
/// when every language has the same number of prompts.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub layer: usize,
    pub alpha: f64,
    pub per_lang: Vec<Option<EvalResult>>,
    pub overall: Option<EvalResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub layers: Vec<usize>,
    pub alphas: Vec<f64>,
    pub languages: Vec<String>,
    pub n_seeds: usize,
    /// Layer-major, alphas in configured order.
    pub cells: Vec<CellResult>,
    /// Per-seed results in `(layer, alpha, language, seed)` order.
    pub runs: Vec<RunRow>,
}

impl GridResult {
    pub fn cell(&self, layer: usize, alpha: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.layer == layer && c.alpha == alpha)
    }

    /// Smallest alpha at `layer` whose overall ACC reaches `threshold`.
    pub fn min_successful_alpha(&self, layer: usize, threshold: f64) -> Option<f64> {
        self.cells
            .iter()
            .filter(|c| c.layer == layer)
            .filter(|c| c.overall.is_some_and(|r| r.acc >= threshold))
            .map(|c| c.alpha)
            .min_by(f64::total_cmp)
    }
}

/// One row of an ablation: the varied value and the overall result.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub value: f64,
    pub result: EvalResult,
    /// Mean fraction of planted dimensions recovered, for planted models.
    pub planted_recall: Option<f64>,
    pub degenerate: bool,
    /// Selected indices per `(language, seed)`.
    pub dimension_sets: Vec<Vec<usize>>,
}

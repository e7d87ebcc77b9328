// SPDX-License-Identifier: MIT OR Apache-2.0

//! File-level commands. Each reads a data directory, writes its outputs
//! into a fresh output directory and finishes with `manifest.json`.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::driver::{
    ablation_csv, grid_csv, heatmap_svg, identify, run_control, runs_csv, spike_svg, with_workers, Context, ControlRun,
    ExperimentConfig, IdentificationData, InputFile, Manifest, Metric,
};
use crate::error::{Error, Result};
use crate::intervention::{HookedGenerator, InterventionSpec};
use crate::metrics::{csv_row, EVAL_CSV_HEADER};
use crate::stats::{
    agreement_rate, corpus_mean, load_corpus_mean, load_dimension_set, overlap_matrix, save_corpus_mean,
    save_dimension_set, sentence_means, DimensionSet, Setting,
};
use crate::store::{read_corpus, read_meta, write_meta, LangCode, SentenceMeta};
use crate::toy::{
    build_planted_model, generate_toy_corpus, generate_toy_pairs, spike_profile, LengthRange, PlantedModel,
    PlantedModelSpec,
};

pub const CORPUS_FILE: &str = "corpus.ldim";
pub const META_FILE: &str = "meta.jsonl";
pub const EVAL_FILE: &str = "eval.jsonl";
pub const MODEL_FILE: &str = "model.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Where a command finds its inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPaths {
    pub corpus: PathBuf,
    pub meta: PathBuf,
    pub eval: PathBuf,
    /// Planted-model description; without it only identification works.
    pub model: Option<PathBuf>,
}

impl DataPaths {
    /// Standard file names inside `dir`. The model is used when present.
    pub fn in_dir(dir: &Path) -> Self {
        let model = dir.join(MODEL_FILE);
        Self {
            corpus: dir.join(CORPUS_FILE),
            meta: dir.join(META_FILE),
            eval: dir.join(EVAL_FILE),
            model: model.exists().then_some(model),
        }
    }
}

/// Everything loaded from a [`DataPaths`].
pub struct LoadedData {
    pub data: IdentificationData,
    pub eval_meta: Option<Vec<SentenceMeta>>,
    pub model: Option<PlantedModel>,
    pub inputs: Vec<InputFile>,
}

fn read_meta_file(path: &Path) -> Result<Vec<SentenceMeta>> {
    read_meta(BufReader::new(fs::File::open(path)?))
}

pub fn load_model(path: &Path) -> Result<PlantedModel> {
    let text = fs::read_to_string(path)?;
    let spec: PlantedModelSpec =
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    build_planted_model(&spec)
}

pub fn load_data(paths: &DataPaths) -> Result<LoadedData> {
    let mut inputs = vec![InputFile::hash(&paths.corpus)?, InputFile::hash(&paths.meta)?];
    let corpus = read_corpus(BufReader::new(fs::File::open(&paths.corpus)?))?;
    let data = IdentificationData::new(corpus, read_meta_file(&paths.meta)?)?;
    let eval_meta = if paths.eval.exists() {
        inputs.push(InputFile::hash(&paths.eval)?);
        Some(read_meta_file(&paths.eval)?)
    } else {
        None
    };
    let model = match &paths.model {
        Some(p) => {
            inputs.push(InputFile::hash(p)?);
            Some(load_model(p)?)
        }
        None => None,
    };
    Ok(LoadedData {
        data,
        eval_meta,
        model,
        inputs,
    })
}

/// Run `f` with a steering context; needs a model and evaluation pairs.
fn with_context<T>(loaded: &LoadedData, f: impl FnOnce(&Context<'_, PlantedModel>) -> Result<T>) -> Result<T> {
    let model = loaded
        .model
        .as_ref()
        .ok_or_else(|| Error::config("steering needs a model description next to the activations"))?;
    let eval_meta = loaded
        .eval_meta
        .as_deref()
        .ok_or_else(|| Error::config("steering needs an evaluation file"))?;
    let langid = loaded.data.train_langid()?;
    f(&Context {
        data: &loaded.data,
        model,
        eval_meta,
        langid: &langid,
    })
}

/// Output directory with manifest bookkeeping.
pub struct OutputDir {
    dir: PathBuf,
    manifest: Manifest,
}

impl OutputDir {
    pub fn create(dir: &Path, command: &str, cfg: serde_json::Value, inputs: Vec<InputFile>) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut manifest = Manifest::new(command, cfg);
        manifest.inputs = inputs;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    /// Note a file written through [`OutputDir::path`].
    pub fn record(&mut self, name: &str) {
        self.manifest.outputs.push(name.to_string());
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.manifest.outputs.push(MANIFEST_FILE.to_string());
        fs::write(self.dir.join(MANIFEST_FILE), self.manifest.to_json())?;
        Ok(self.dir)
    }
}

/// Options for the synthetic data set.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ToyGenOptions {
    pub model: PlantedModelSpec,
    pub num_pairs: usize,
    pub num_eval: usize,
    pub lengths: LengthRange,
    /// Sentence seed; evaluation pairs use `seed + 1`.
    pub seed: u64,
}

impl Default for ToyGenOptions {
    fn default() -> Self {
        Self {
            model: PlantedModelSpec::default(),
            num_pairs: 200,
            num_eval: 100,
            lengths: LengthRange::default(),
            seed: 1,
        }
    }
}

/// Build a planted model and write its description, an activation corpus
/// of translation pairs, the metadata and held-out evaluation pairs.
pub fn toy_gen(opts: &ToyGenOptions, out: &Path) -> Result<PathBuf> {
    let model = build_planted_model(&opts.model)?;
    let (metas, corpus) = generate_toy_corpus(&model, opts.num_pairs, opts.lengths, opts.seed)?;
    let eval = generate_toy_pairs(&model, opts.num_eval, opts.lengths, opts.seed.wrapping_add(1))?;
    let cfg = serde_json::to_value(opts).expect("options serialize");
    let mut dir = OutputDir::create(out, "toy-gen", cfg, Vec::new())?;
    let mut spec_json = serde_json::to_string_pretty(&opts.model).expect("spec serializes");
    spec_json.push('\n');
    dir.write(MODEL_FILE, spec_json.as_bytes())?;
    dir.write(CORPUS_FILE, &corpus.to_bytes()?)?;
    let mut buf = Vec::new();
    write_meta(&metas, &mut buf)?;
    dir.write(META_FILE, &buf)?;
    buf.clear();
    write_meta(&eval, &mut buf)?;
    dir.write(EVAL_FILE, &buf)?;
    dir.finish()
}

pub fn dims_file(lang: &str, seed: u64) -> String {
    format!("dims_{lang}_seed{seed}.json")
}

pub fn mean_file(lang: &str, seed: u64) -> String {
    format!("mean_{lang}_seed{seed}.json")
}

/// Identify dimensions for every configured language and seed. Writes one
/// dimension-set and one mean record per run plus `identify.csv`.
pub fn cmd_identify(paths: &DataPaths, cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let loaded = load_data(paths)?;
    let mut dir = OutputDir::create(out, "identify", cfg.to_json(), loaded.inputs.clone())?;
    let runs = with_workers(cfg.workers, || {
        cfg.languages
            .iter()
            .flat_map(|l| cfg.seeds.iter().map(move |&s| (l, s)))
            .map(|(l, s)| Ok((l, s, identify(&loaded.data, cfg, l, s)?)))
            .collect::<Result<Vec<_>>>()
    })??;
    let truth = loaded.model.as_ref().map(|m| m.planted_dims());
    let mut table = String::from("lang,seed,setting,k,degenerate,planted_recall\n");
    for (lang, seed, ident) in &runs {
        save_dimension_set(&dir.path(&dims_file(lang, *seed)), &ident.dims)?;
        dir.record(&dims_file(lang, *seed));
        save_corpus_mean(&dir.path(&mean_file(lang, *seed)), &ident.mean)?;
        dir.record(&mean_file(lang, *seed));
        let recall = truth.map_or_else(String::new, |t| ident.recall(t).to_string());
        table.push_str(&format!(
            "{lang},{seed},{},{},{},{recall}\n",
            cfg.setting, cfg.k, ident.degenerate
        ));
    }
    dir.write("identify.csv", table.as_bytes())?;
    dir.finish()
}

fn write_runs(dir: &mut OutputDir, runs: &[ControlRun]) -> Result<()> {
    let mut table = format!("{EVAL_CSV_HEADER}\n");
    let mut gens = BufWriter::new(fs::File::create(dir.path("generations.jsonl"))?);
    for run in runs {
        table.push_str(&csv_row(&run.lang, run.layer, run.alpha, &run.result, run.seed));
        table.push('\n');
        for g in &run.generations {
            serde_json::to_writer(
                &mut gens,
                &serde_json::json!({
                    "lang": g.lang,
                    "seed": run.seed,
                    "pair_id": g.pair_id,
                    "prompt": g.prompt,
                    "output": g.output,
                    "reference": g.reference,
                }),
            )
            .map_err(|e| Error::Io(e.into()))?;
            gens.write_all(b"\n")?;
        }
    }
    gens.flush()?;
    dir.record("generations.jsonl");
    dir.write("results.csv", table.as_bytes())
}

/// Steer generation at the configured layer and alpha. With `from`, the
/// dimension sets and means written by [`cmd_identify`] are reused;
/// otherwise identification runs in-process.
pub fn cmd_intervene(paths: &DataPaths, cfg: &ExperimentConfig, from: Option<&Path>, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let loaded = load_data(paths)?;
    let mut inputs = loaded.inputs.clone();
    let runs = with_context(&loaded, |ctx| {
        let Some(from) = from else {
            return with_workers(cfg.workers, || ctx.intervene(cfg))?;
        };
        let mut runs = Vec::new();
        for lang in &cfg.languages {
            let pairs = crate::driver::eval_pairs(ctx.eval_meta, &cfg.source_lang, lang)?;
            for &seed in &cfg.seeds {
                let dims_path = from.join(dims_file(lang, seed));
                let mean_path = from.join(mean_file(lang, seed));
                inputs.push(InputFile::hash(&dims_path)?);
                inputs.push(InputFile::hash(&mean_path)?);
                let dims = load_dimension_set(&dims_path)?;
                let mean = load_corpus_mean(&mean_path)?;
                if dims.hidden_size() != ctx.model.hidden_size() {
                    return Err(Error::config(format!(
                        "{} has hidden size {} but the model has {}",
                        dims_path.display(),
                        dims.hidden_size(),
                        ctx.model.hidden_size()
                    )));
                }
                if cfg.layer >= ctx.model.depth() {
                    return Err(Error::config(format!(
                        "intervention layer {} is outside a model of depth {}",
                        cfg.layer,
                        ctx.model.depth()
                    )));
                }
                let spec = InterventionSpec::new(dims, mean, cfg.layer, cfg.alpha, cfg.position_policy)?;
                let (generations, result) =
                    with_workers(cfg.workers, || run_control(ctx.model, &spec, &pairs, ctx.langid, cfg))??;
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
    })?;
    let mut dir = OutputDir::create(out, "intervene", cfg.to_json(), inputs)?;
    write_runs(&mut dir, &runs)?;
    dir.finish()
}

/// Layer by alpha sweep with CSV tables and heatmaps.
pub fn cmd_grid(paths: &DataPaths, cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let loaded = load_data(paths)?;
    let grid = with_context(&loaded, |ctx| with_workers(cfg.workers, || ctx.grid(cfg))?)?;
    let mut cfg_json = cfg.to_json();
    cfg_json["overall_aggregation"] = "mean over languages weighted by sample count".into();
    let mut dir = OutputDir::create(out, "grid", cfg_json, loaded.inputs.clone())?;
    dir.write("grid.csv", grid_csv(&grid).as_bytes())?;
    dir.write("grid_runs.csv", runs_csv(&grid).as_bytes())?;
    for m in Metric::ALL {
        dir.write(&format!("heatmap_{}.svg", m.name()), heatmap_svg(&grid, m).as_bytes())?;
    }
    dir.finish()
}

/// Which quantity an ablation varies.
#[derive(Debug, Clone, PartialEq)]
pub enum Ablation {
    K(Vec<usize>),
    Anchor(Vec<u32>),
    DataSize(Vec<usize>),
}

pub fn cmd_ablate(paths: &DataPaths, cfg: &ExperimentConfig, ablation: &Ablation, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let loaded = load_data(paths)?;
    let (name, csv) = with_context(&loaded, |ctx| {
        with_workers(cfg.workers, || -> Result<(&str, String)> {
            Ok(match ablation {
                Ablation::K(ks) => ("ablate_k", ablation_csv("k", &ctx.ablate_k(cfg, ks)?, true, false)),
                Ablation::Anchor(a) => (
                    "ablate_anchor",
                    ablation_csv("anchor_layer", &ctx.ablate_anchor(cfg, a)?, true, true),
                ),
                Ablation::DataSize(n) => (
                    "ablate_datasize",
                    ablation_csv("n_sentences", &ctx.ablate_datasize(cfg, n)?, false, false),
                ),
            })
        })?
    })?;
    let mut cfg_json = cfg.to_json();
    cfg_json["ablation"] = match ablation {
        Ablation::K(v) => serde_json::json!({ "k": v }),
        Ablation::Anchor(v) => serde_json::json!({ "anchor_layer": v }),
        Ablation::DataSize(v) => serde_json::json!({ "n_sentences": v }),
    };
    let mut dir = OutputDir::create(out, name, cfg_json, loaded.inputs.clone())?;
    dir.write(&format!("{name}.csv"), csv.as_bytes())?;
    dir.finish()
}

/// Pairwise overlaps of saved dimension sets, plus monolingual/parallel
/// agreement for every language that has both kinds.
pub fn cmd_overlap(sets: &[PathBuf], out: &Path) -> Result<PathBuf> {
    let mut inputs = Vec::new();
    let mut loaded: Vec<DimensionSet> = Vec::new();
    for p in sets {
        inputs.push(InputFile::hash(p)?);
        loaded.push(load_dimension_set(p)?);
    }
    let matrix = overlap_matrix(&loaded)?;
    let mut agreement = String::from("lang,k,agreement\n");
    let mut langs: Vec<LangCode> = loaded.iter().map(DimensionSet::lang).collect();
    langs.sort();
    langs.dedup();
    for lang in langs {
        let pick = |s: Setting| loaded.iter().find(|d| d.lang() == lang && d.setting() == s);
        if let (Some(mono), Some(para)) = (pick(Setting::Monolingual), pick(Setting::Parallel)) {
            agreement.push_str(&format!("{lang},{},{}\n", mono.k(), agreement_rate(mono, para)?));
        }
    }
    let cfg = serde_json::json!({ "sets": sets.iter().map(|p| p.display().to_string()).collect::<Vec<_>>() });
    let mut dir = OutputDir::create(out, "overlap", cfg, inputs)?;
    dir.write("overlap_matrix.csv", matrix.to_csv().as_bytes())?;
    dir.write("agreement.csv", agreement.as_bytes())?;
    dir.finish()
}

/// Absolute difference of two languages' mean hidden states at `layer`,
/// over every sentence of each language. The `highlight` largest entries
/// are drawn in a second color.
pub fn cmd_spike(
    paths: &DataPaths,
    cfg: &ExperimentConfig,
    langs: (&str, &str),
    layer: Option<u32>,
    highlight: usize,
    out: &Path,
) -> Result<PathBuf> {
    let loaded = load_data(paths)?;
    let data = &loaded.data;
    let layer = match layer {
        Some(l) => l,
        None => data.final_layer(cfg)?,
    };
    let mean_of = |lang: &str| {
        let mut ids: Vec<u32> = data
            .meta
            .iter()
            .filter(|m| m.lang == lang)
            .map(|m| m.sentence_id)
            .collect();
        ids.sort_unstable();
        if ids.is_empty() {
            return Err(Error::Sample(format!("no sentences in {lang}")));
        }
        let vectors = sentence_means(&data.corpus, &ids, layer, &cfg.token_filter)?;
        corpus_mean(&vectors, LangCode::new(lang)?, layer)
    };
    let (a, b) = with_workers(cfg.workers, || Ok::<_, Error>((mean_of(langs.0)?, mean_of(langs.1)?)))??;
    let profile = spike_profile(&a, &b)?;
    let top = profile.top(highlight.min(profile.values.len()));
    let cfg_json = serde_json::json!({
        "langs": [langs.0, langs.1],
        "layer": layer,
        "highlight": highlight,
        "token_filter": cfg.token_filter,
    });
    let mut dir = OutputDir::create(out, "spike", cfg_json, loaded.inputs.clone())?;
    dir.write("spike.csv", profile.to_csv().as_bytes())?;
    dir.write("spike.svg", spike_svg(&profile, &top).as_bytes())?;
    dir.finish()
}

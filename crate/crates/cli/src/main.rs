// SPDX-License-Identifier: MIT OR Apache-2.0

//! `langdim` command-line driver.
//!
//! Exit codes: 0 on success, 2 for configuration and usage errors, 3 for
//! data errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use langdim::driver::{
    cmd_ablate, cmd_grid, cmd_identify, cmd_intervene, cmd_overlap, cmd_spike, toy_gen, Ablation, DataPaths,
    ExperimentConfig, GridCell, ToyGenOptions,
};
use langdim::intervention::PositionPolicy;
use langdim::metrics::TokenizerPolicy;
use langdim::stats::Setting;
use langdim::toy::{LengthRange, PlantedModelSpec};
use langdim::{Error, Result};

#[derive(Parser)]
#[command(
    name = "langdim",
    version,
    about = "Find and steer language-specific hidden dimensions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted toy model, its activations and evaluation pairs.
    ToyGen(ToyGenArgs),
    /// Select language-specific dimensions.
    Identify(Common),
    /// Steer generation toward each target language.
    Intervene {
        #[command(flatten)]
        common: Common,
        /// Reuse dimension sets and means written by `identify`.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Sweep intervention layer and alpha.
    Grid(Common),
    /// Vary K.
    AblateK {
        #[command(flatten)]
        common: Common,
        #[arg(long = "values", value_delimiter = ',', required = true)]
        values: Vec<usize>,
    },
    /// Vary the monolingual anchor layer.
    AblateAnchor {
        #[command(flatten)]
        common: Common,
        #[arg(long = "values", value_delimiter = ',', required = true)]
        values: Vec<u32>,
    },
    /// Vary the number of identification sentences.
    AblateDatasize {
        #[command(flatten)]
        common: Common,
        #[arg(long = "values", value_delimiter = ',', required = true)]
        values: Vec<usize>,
    },
    /// Overlap matrix and agreement of saved dimension sets.
    Overlap {
        #[arg(required = true)]
        sets: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-dimension difference of two languages' mean hidden states.
    Spike {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "toyA")]
        lang_a: String,
        #[arg(long, default_value = "toyB")]
        lang_b: String,
        /// Layer to compare; defaults to the final layer.
        #[arg(long = "at-layer")]
        at_layer: Option<u32>,
        /// Number of largest dimensions to highlight.
        #[arg(long, default_value_t = 8)]
        highlight: usize,
    },
}

#[derive(Args)]
struct ToyGenArgs {
    #[arg(long)]
    out: PathBuf,
    /// JSON model description; flags below override its fields.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    num_planted: Option<usize>,
    #[arg(long)]
    injection_layer: Option<usize>,
    #[arg(long)]
    magnitude: Option<f64>,
    #[arg(long)]
    mixing_scale: Option<f64>,
    #[arg(long)]
    leaky: bool,
    #[arg(long)]
    model_seed: Option<u64>,
    #[arg(long, default_value_t = 200)]
    pairs: usize,
    #[arg(long, default_value_t = 100)]
    eval_pairs: usize,
    #[arg(long, default_value_t = 5)]
    min_len: usize,
    #[arg(long, default_value_t = 15)]
    max_len: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct Common {
    /// Directory with corpus.ldim, meta.jsonl, eval.jsonl and model.json.
    #[arg(long, default_value = "data")]
    data: PathBuf,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    meta: Option<PathBuf>,
    #[arg(long)]
    eval: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// TOML experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    source_lang: Option<String>,
    #[arg(long, value_delimiter = ',')]
    languages: Option<Vec<String>>,
    #[arg(long)]
    setting: Option<Setting>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    anchor_layer: Option<u32>,
    #[arg(long)]
    final_layer: Option<u32>,
    #[arg(long)]
    layer: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    /// Grid cells to leave out, as `layer:alpha`.
    #[arg(long = "skip", value_delimiter = ',', value_parser = parse_cell)]
    skip: Option<Vec<GridCell>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long)]
    skip_leading: Option<usize>,
    #[arg(long)]
    position_policy: Option<PositionPolicy>,
    #[arg(long)]
    tokenizer: Option<TokenizerPolicy>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
}

fn parse_cell(s: &str) -> std::result::Result<GridCell, String> {
    let (layer, alpha) = s.split_once(':').ok_or("expected layer:alpha")?;
    Ok(GridCell {
        layer: layer.parse().map_err(|e| format!("{e}"))?,
        alpha: alpha.parse().map_err(|e| format!("{e}"))?,
    })
}

macro_rules! set_if {
    ($cfg:ident, $($field:ident <- $value:expr),* $(,)?) => {
        $(if let Some(v) = $value { $cfg.$field = v; })*
    };
}

impl Common {
    fn paths(&self) -> DataPaths {
        let mut paths = DataPaths::in_dir(&self.data);
        set_if!(paths, corpus <- self.corpus.clone(), meta <- self.meta.clone(), eval <- self.eval.clone());
        if self.model.is_some() {
            paths.model = self.model.clone();
        }
        paths
    }

    fn config(&self) -> Result<ExperimentConfig> {
        let cfg = self.merged()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// File configuration with flag overrides, not yet validated.
    fn merged(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        set_if!(cfg,
            source_lang <- self.source_lang.clone(),
            languages <- self.languages.clone(),
            setting <- self.setting,
            k <- self.k,
            anchor_layer <- self.anchor_layer,
            layer <- self.layer,
            alpha <- self.alpha,
            alphas <- self.alphas.clone(),
            layers <- self.layers.clone(),
            skip_cells <- self.skip.clone(),
            seeds <- self.seeds.clone(),
            sample_size <- self.sample_size,
            position_policy <- self.position_policy,
            tokenizer <- self.tokenizer,
            workers <- self.workers,
        );
        if self.final_layer.is_some() {
            cfg.final_layer = self.final_layer;
        }
        if self.max_len.is_some() {
            cfg.max_len = self.max_len;
        }
        if let Some(n) = self.skip_leading {
            cfg.token_filter.skip_leading = n;
        }
        Ok(cfg)
    }
}

fn toy_gen_cmd(args: &ToyGenArgs) -> Result<PathBuf> {
    let mut model = match &args.model {
        Some(p) => serde_json::from_str::<PlantedModelSpec>(&std::fs::read_to_string(p)?)
            .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => PlantedModelSpec::default(),
    };
    set_if!(model,
        hidden_size <- args.hidden_size,
        depth <- args.depth,
        num_planted <- args.num_planted,
        injection_layer <- args.injection_layer,
        magnitude <- args.magnitude,
        mixing_scale <- args.mixing_scale,
        seed <- args.model_seed,
    );
    model.leaky |= args.leaky;
    if args.min_len == 0 || args.min_len > args.max_len {
        return Err(Error::Config("sentence lengths need 1 <= min-len <= max-len".into()));
    }
    let opts = ToyGenOptions {
        model,
        num_pairs: args.pairs,
        num_eval: args.eval_pairs,
        lengths: LengthRange {
            min: args.min_len,
            max: args.max_len,
        },
        seed: args.seed,
    };
    toy_gen(&opts, &args.out)
}

fn run(cli: Cli) -> Result<PathBuf> {
    let ablate = |c: &Common, a: Ablation| cmd_ablate(&c.paths(), &c.config()?, &a, &c.out);
    match cli.command {
        Command::ToyGen(args) => toy_gen_cmd(&args),
        Command::Identify(c) => cmd_identify(&c.paths(), &c.config()?, &c.out),
        Command::Intervene { common: c, from } => cmd_intervene(&c.paths(), &c.config()?, from.as_deref(), &c.out),
        Command::Grid(c) => cmd_grid(&c.paths(), &c.config()?, &c.out),
        Command::AblateK { common, values } => ablate(&common, Ablation::K(values)),
        Command::AblateAnchor { common, values } => ablate(&common, Ablation::Anchor(values)),
        Command::AblateDatasize { common, values } => ablate(&common, Ablation::DataSize(values)),
        Command::Overlap { sets, out } => cmd_overlap(&sets, &out),
        Command::Spike {
            common: c,
            lang_a,
            lang_b,
            at_layer,
            highlight,
        } => cmd_spike(
            &c.paths(),
            &c.merged()?,
            (&lang_a, &lang_b),
            at_layer,
            highlight,
            &c.out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(dir) => {
            println!("{}", Path::new(&dir).join("manifest.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

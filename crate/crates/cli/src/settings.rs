//! Run settings: defaults, then a `key=value` config file, then flags.

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use clap::Args;
use treecomp::model::TrainConfig;
use treecomp::wordrep::{Composition, CompositionInput, Extractor, ReprConfig};

#[derive(Debug, Clone, Default, Args)]
pub struct ReprArgs {
    #[arg(long)]
    pub extractor: Option<Extractor>,
    #[arg(long)]
    pub composition: Option<Composition>,
    /// What the composition function combines: `subtree` or `token` vectors.
    #[arg(long)]
    pub composition_input: Option<CompositionInput>,
    #[arg(long, overrides_with = "no_pos")]
    pub pos: bool,
    #[arg(long, overrides_with = "pos")]
    pub no_pos: bool,
    #[arg(long, overrides_with = "no_char")]
    pub char: bool,
    #[arg(long, overrides_with = "char")]
    pub no_char: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub margin: Option<f64>,
    /// Probability of following a wrong transition that outscores the oracle.
    #[arg(long)]
    pub explore: Option<f64>,
    #[arg(long)]
    pub word_dropout: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Words seen fewer times are mapped to the unknown word.
    #[arg(long)]
    pub min_count: Option<u64>,
    /// Flat `key=value` file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub repr: ReprConfig,
    pub train: TrainConfig,
    pub min_count: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            repr: ReprConfig::default(),
            train: TrainConfig::default(),
            min_count: 1,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> anyhow::Result<T> {
    value
        .parse()
        .map_err(|_| anyhow!("invalid value {value:?} for {key}"))
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> anyhow::Result<()> {
        if self.repr.set(key, value)? {
            return Ok(());
        }
        let t = &mut self.train;
        match key {
            "epochs" => t.epochs = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "margin" => t.margin = parse(key, value)?,
            "explore" => t.explore = parse(key, value)?,
            "explore_from" => t.explore_from = parse(key, value)?,
            "word_dropout" => t.word_dropout = parse(key, value)?,
            "learning_rate" => t.adam.lr = parse(key, value)?,
            "min_count" => self.min_count = parse(key, value)?,
            _ => bail!("unknown setting {key:?}"),
        }
        Ok(())
    }

    /// Applies a config file. Blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> anyhow::Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key=value", i + 1))?;
            self.set(k.trim(), v.trim())
                .with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> anyhow::Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.apply_text(&text)
            .with_context(|| format!("config file {}", path.display()))
    }

    pub fn apply_repr(&mut self, a: &ReprArgs) {
        let r = &mut self.repr;
        if let Some(e) = a.extractor {
            r.extractor = e;
        }
        if let Some(c) = a.composition {
            r.composition = c;
        }
        if let Some(c) = a.composition_input {
            r.composition_input = c;
        }
        if a.pos || a.no_pos {
            r.use_pos = a.pos;
        }
        if a.char || a.no_char {
            r.use_char = a.char;
        }
    }

    pub fn apply_train(&mut self, a: &TrainArgs) {
        let t = &mut self.train;
        if let Some(v) = a.epochs {
            t.epochs = v;
        }
        if let Some(v) = a.seed {
            t.seed = v;
        }
        if let Some(v) = a.margin {
            t.margin = v;
        }
        if let Some(v) = a.explore {
            t.explore = v;
        }
        if let Some(v) = a.word_dropout {
            t.word_dropout = v;
        }
        if let Some(v) = a.learning_rate {
            t.adam.lr = v;
        }
        if let Some(v) = a.min_count {
            self.min_count = v;
        }
    }

    /// Defaults, then `--config`, then the remaining flags.
    pub fn resolve(repr: &ReprArgs, train: &TrainArgs) -> anyhow::Result<Self> {
        let mut s = Settings::default();
        if let Some(path) = &train.config {
            s.apply_file(path)?;
        }
        s.apply_repr(repr);
        s.apply_train(train);
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let t = &self.train;
        if t.margin.is_nan() || t.margin < 0.0 {
            bail!("margin must be non-negative");
        }
        if !(0.0..=1.0).contains(&t.explore) {
            bail!("explore must be a probability");
        }
        if t.word_dropout.is_nan() || t.word_dropout < 0.0 {
            bail!("word_dropout must be non-negative");
        }
        if t.adam.lr.is_nan() || t.adam.lr <= 0.0 {
            bail!("learning_rate must be positive");
        }
        if self.min_count == 0 {
            bail!("min_count must be at least 1");
        }
        let d = &self.repr.dims;
        if [d.word, d.pos, d.char_emb, d.char_hidden, d.seq_hidden, d.relation, d.mlp_hidden].contains(&0) {
            bail!("dimensions must be positive");
        }
        Ok(())
    }
}

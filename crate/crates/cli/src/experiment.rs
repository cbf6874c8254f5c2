//! The ablation grid: feature sets × extractors × compositions × seeds,
//! one independent training run per point.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::json;
use treecomp::conllu::Treebank;
use treecomp::eval::{GridKey, Score};
use treecomp::model::{top_k_mean, ModelError};
use treecomp::wordrep::{build_vocab, Composition, Extractor};
use treecomp::ParserModel;

use crate::settings::Settings;

pub struct Language {
    pub name: String,
    pub train: Treebank,
    pub dev: Treebank,
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub feature_sets: Vec<(bool, bool)>,
    pub extractors: Vec<Extractor>,
    pub compositions: Vec<Composition>,
    pub seeds: Vec<u64>,
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub key: GridKey,
    pub seed: u64,
    pub score: Score,
}

pub const RUNS_HEADER: &str = "lang\textractor\tcomposition\tpos\tchar\tseed\tlas\tuas";

impl Run {
    pub fn tsv_row(&self) -> String {
        let k = &self.key;
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.2}\t{:.2}",
            k.lang,
            k.extractor,
            k.composition,
            k.pos,
            k.char,
            self.seed,
            100.0 * self.score.las,
            100.0 * self.score.uas
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "lang": self.key.lang,
            "extractor": self.key.extractor,
            "composition": self.key.composition,
            "pos": self.key.pos,
            "char": self.key.char,
            "seed": self.seed,
            "las": self.score.las,
            "uas": self.score.uas,
        })
    }
}

/// Parses `pos+char+`, `pos+char-`, `pos-char+` or `pos-char-`.
pub fn parse_feature_set(s: &str) -> Result<(bool, bool), String> {
    let sign = |c: Option<char>| match c {
        Some('+') => Ok(true),
        Some('-') => Ok(false),
        _ => Err(format!("invalid feature set {s:?}")),
    };
    let rest = s.strip_prefix("pos").ok_or_else(|| format!("invalid feature set {s:?}"))?;
    let pos = sign(rest.chars().next())?;
    let rest = rest[1..]
        .strip_prefix("char")
        .ok_or_else(|| format!("invalid feature set {s:?}"))?;
    if rest.len() != 1 {
        return Err(format!("invalid feature set {s:?}"));
    }
    Ok((pos, sign(rest.chars().next())?))
}

fn train_one(lang: &Language, key: &GridKey, seed: u64, base: &Settings, top_k: usize) -> Result<Run, ModelError> {
    let mut s = base.clone();
    s.repr.extractor = key.extractor;
    s.repr.composition = key.composition;
    s.repr.use_pos = key.pos;
    s.repr.use_char = key.char;
    s.train.seed = seed;
    let vocab = build_vocab(&lang.train, s.min_count)?;
    let mut model = ParserModel::new(s.repr, vocab, seed)?;
    let metrics = model.train(&lang.train, Some(&lang.dev), &s.train, |_| {})?;
    let (las, uas) = top_k_mean(&metrics, top_k).unwrap_or((0.0, 0.0));
    Ok(Run {
        key: key.clone(),
        seed,
        score: Score {
            uas,
            las,
            token_count: lang.dev.token_count(),
        },
    })
}

/// Trains every grid point (in parallel) and returns runs in grid order.
pub fn run_grid(
    langs: &[Language],
    grid: &Grid,
    base: &Settings,
    on_run: impl Fn(&Run) + Sync,
) -> Result<Vec<Run>, ModelError> {
    let mut points = Vec::new();
    for (li, lang) in langs.iter().enumerate() {
        for &(pos, char) in &grid.feature_sets {
            for &extractor in &grid.extractors {
                for &composition in &grid.compositions {
                    for &seed in &grid.seeds {
                        let key = GridKey {
                            lang: lang.name.clone(),
                            extractor,
                            composition,
                            pos,
                            char,
                        };
                        points.push((li, key, seed));
                    }
                }
            }
        }
    }
    points
        .par_iter()
        .map(|(li, key, seed)| {
            let run = train_one(&langs[*li], key, *seed, base, grid.top_k)?;
            on_run(&run);
            Ok(run)
        })
        .collect()
}

/// Mean over seeds for each grid cell.
pub fn aggregate(runs: &[Run]) -> BTreeMap<GridKey, Score> {
    let mut groups: BTreeMap<GridKey, Vec<&Score>> = BTreeMap::new();
    for r in runs {
        groups.entry(r.key.clone()).or_default().push(&r.score);
    }
    groups
        .into_iter()
        .map(|(k, scores)| {
            let n = scores.len() as f64;
            let score = Score {
                uas: scores.iter().map(|s| s.uas).sum::<f64>() / n,
                las: scores.iter().map(|s| s.las).sum::<f64>() / n,
                token_count: scores[0].token_count,
            };
            (k, score)
        })
        .collect()
}

//! Attachment scores, Pearson correlation and the experiment-grid report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{base_relation, Treebank};
use crate::wordrep::{Composition, Extractor};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("gold has {gold} sentences, prediction has {pred}")]
    SentenceCount { gold: usize, pred: usize },
    #[error("sentence {sentence}: gold has {gold} tokens, prediction has {pred}")]
    TokenCount {
        sentence: usize,
        gold: usize,
        pred: usize,
    },
    #[error("sentence {sentence}, token {token}: gold head missing")]
    MissingGold { sentence: usize, token: usize },
    #[error("pearson needs equal lengths, got {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("pearson needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("pearson is undefined for a constant series")]
    ZeroVariance,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub uas: f64,
    pub las: f64,
    pub token_count: usize,
}

/// Micro-averaged UAS/LAS over every token, punctuation included. Labels
/// are compared without subtypes. A predicted token without a head counts
/// as wrong.
pub fn score_trees(gold: &Treebank, pred: &Treebank) -> Result<Score, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::SentenceCount {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let (mut total, mut heads, mut labeled) = (0usize, 0usize, 0usize);
    for (si, (g, p)) in gold.sentences.iter().zip(&pred.sentences).enumerate() {
        if g.len() != p.len() {
            return Err(EvalError::TokenCount {
                sentence: si + 1,
                gold: g.len(),
                pred: p.len(),
            });
        }
        for (gt, pt) in g.tokens.iter().zip(&p.tokens) {
            let gh = gt.head.ok_or(EvalError::MissingGold {
                sentence: si + 1,
                token: gt.id,
            })?;
            total += 1;
            if pt.head == Some(gh) {
                heads += 1;
                let gl = gt.deprel.as_deref().map(base_relation);
                let pl = pt.deprel.as_deref().map(base_relation);
                if gl.is_some() && gl == pl {
                    labeled += 1;
                }
            }
        }
    }
    let frac = |k: usize| if total == 0 { 0.0 } else { k as f64 / total as f64 };
    Ok(Score {
        uas: frac(heads),
        las: frac(labeled),
        token_count: total,
    })
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(EvalError::TooFewPoints(xs.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// One cell of the experiment grid.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridKey {
    pub lang: String,
    pub extractor: Extractor,
    pub composition: Composition,
    pub pos: bool,
    pub char: bool,
}

/// LAS difference (in points) above which a composed cell is marked.
pub const MARK_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportCell {
    pub las: f64,
    pub marked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub label: String,
    pub cells: Vec<Option<ReportCell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBlock {
    pub pos: bool,
    pub char: bool,
    pub columns: Vec<(Extractor, Composition)>,
    pub rows: Vec<ReportRow>,
    /// Unweighted mean over languages, absent when there are no rows.
    pub average: Option<ReportRow>,
}

impl ReportBlock {
    pub fn title(&self) -> String {
        let sign = |b: bool| if b { '+' } else { '-' };
        format!("pos{}char{}", sign(self.pos), sign(self.char))
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .map(|&(e, c)| match c {
                Composition::None => e.to_string(),
                _ => format!("{e}+{c}"),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub blocks: Vec<ReportBlock>,
}

/// Arranges LAS results into pos±/char± blocks with one row per language
/// and an average row. A composed cell is marked when it beats the
/// uncomposed cell of the same extractor by more than
/// [`MARK_THRESHOLD`] points (compared before rounding).
pub fn grid_report(results: &BTreeMap<GridKey, Score>) -> GridReport {
    let with_rc = results.keys().any(|k| k.composition == Composition::Rc);
    let mut columns = Vec::new();
    for &e in Extractor::ALL {
        columns.push((e, Composition::None));
        if with_rc {
            columns.push((e, Composition::Rc));
        }
        columns.push((e, Composition::Lc));
    }
    let langs: BTreeSet<&str> = results.keys().map(|k| k.lang.as_str()).collect();

    let mut blocks = Vec::new();
    for (pos, char) in [(true, true), (true, false), (false, true), (false, false)] {
        let value = |lang: &str, e: Extractor, c: Composition| {
            let key = GridKey {
                lang: lang.to_owned(),
                extractor: e,
                composition: c,
                pos,
                char,
            };
            results.get(&key).map(|s| 100.0 * s.las)
        };
        let mut rows = Vec::new();
        let mut per_column: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
        for &lang in &langs {
            let raw: Vec<Option<f64>> = columns.iter().map(|&(e, c)| value(lang, e, c)).collect();
            if raw.iter().all(Option::is_none) {
                continue;
            }
            for (acc, v) in per_column.iter_mut().zip(&raw) {
                acc.extend(v);
            }
            rows.push(ReportRow {
                label: lang.to_owned(),
                cells: mark(&columns, &raw),
            });
        }
        let average = (!rows.is_empty()).then(|| {
            let means: Vec<Option<f64>> = per_column
                .iter()
                .map(|v| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64))
                .collect();
            ReportRow {
                label: "av".to_owned(),
                cells: mark(&columns, &means),
            }
        });
        blocks.push(ReportBlock {
            pos,
            char,
            columns: columns.clone(),
            rows,
            average,
        });
    }
    GridReport { blocks }
}

fn mark(columns: &[(Extractor, Composition)], raw: &[Option<f64>]) -> Vec<Option<ReportCell>> {
    columns
        .iter()
        .zip(raw)
        .map(|(&(e, c), v)| {
            let las = (*v)?;
            let base = columns
                .iter()
                .position(|&col| col == (e, Composition::None))
                .and_then(|i| raw[i]);
            let marked = c != Composition::None && base.is_some_and(|b| las - b > MARK_THRESHOLD);
            Some(ReportCell { las, marked })
        })
        .collect()
}

fn cell_text(cell: &Option<ReportCell>) -> String {
    match cell {
        Some(c) if c.marked => format!("{:.1}*", c.las),
        Some(c) => format!("{:.1}", c.las),
        None => "-".to_owned(),
    }
}

impl GridReport {
    /// Tab-separated: a header line per block, then its rows.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            let _ = writeln!(out, "{}\t{}", b.title(), b.column_names().join("\t"));
            for row in b.rows.iter().chain(&b.average) {
                let cells: Vec<String> = row.cells.iter().map(cell_text).collect();
                let _ = writeln!(out, "{}\t{}", row.label, cells.join("\t"));
            }
        }
        out
    }

    /// Aligned plain text; `*` marks composition gains above the threshold.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let mut lines: Vec<Vec<String>> = Vec::new();
            let mut header = vec![b.title()];
            header.extend(b.column_names());
            lines.push(header);
            for row in b.rows.iter().chain(&b.average) {
                let mut line = vec![row.label.clone()];
                line.extend(row.cells.iter().map(cell_text));
                lines.push(line);
            }
            let widths: Vec<usize> = (0..lines[0].len())
                .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
                .collect();
            for line in &lines {
                let padded: Vec<String> = line
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(c, (s, &w))| if c == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                    .collect();
                let _ = writeln!(out, "{}", padded.join("  ").trim_end());
            }
        }
        out
    }
}

/// The raw grid as JSON records, for plotting elsewhere.
pub fn grid_json(results: &BTreeMap<GridKey, Score>) -> serde_json::Value {
    let records: Vec<serde_json::Value> = results
        .iter()
        .map(|(k, s)| {
            serde_json::json!({
                "lang": k.lang,
                "extractor": k.extractor.name(),
                "composition": k.composition.name(),
                "pos": k.pos,
                "char": k.char,
                "las": s.las,
                "uas": s.uas,
                "tokens": s.token_count,
            })
        })
        .collect();
    serde_json::Value::Array(records)
}

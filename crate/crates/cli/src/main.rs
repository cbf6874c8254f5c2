mod experiment;
mod settings;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use treecomp::conllu::{default_content_relations, parse_conllu, treebank_stats, write_conllu, Treebank};
use treecomp::ensemble::{ablate_one, ensemble_treebank, EnsembleError};
use treecomp::eval::{grid_json, grid_report, score_trees, Score};
use treecomp::model::{EpochMetrics, ModelError};
use treecomp::synth::{generate, SynthConfig, WordOrder};
use treecomp::transition::{trace_line, Transition};
use treecomp::wordrep::{build_vocab, Composition, Extractor};
use treecomp::ParserModel;

use experiment::{aggregate, parse_feature_set, run_grid, Grid, Language, RUNS_HEADER};
use settings::{ReprArgs, Settings, TrainArgs};

#[derive(Parser)]
#[command(name = "treecomp", version, about = "Transition-based dependency parser with subtree composition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a parser and write a model file.
    Train {
        #[arg(long)]
        train: PathBuf,
        /// Dev treebank; the best-LAS epoch is kept.
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        /// Per-epoch metrics as TSV.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[command(flatten)]
        repr: ReprArgs,
        #[command(flatten)]
        opts: TrainArgs,
    },
    /// Parse CoNLL-U with a trained model.
    Parse {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to standard output.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write every transition (kind, label, stack size, buffer size).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score predicted trees against gold trees.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Treebank statistics (head direction, arc lengths, non-projectivity).
    Stats {
        #[arg(long)]
        input: PathBuf,
        /// Relations counted as content relations (comma separated).
        #[arg(long, value_delimiter = ',')]
        content_relations: Option<Vec<String>>,
        #[arg(long)]
        json: bool,
    },
    /// Combine several parsers by reparsing their votes.
    Ensemble {
        /// Model files to run on --input.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        models: Vec<PathBuf>,
        /// Already parsed CoNLL-U files, used instead of (or with) models.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        predictions: Vec<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Also score the ensemble without each system in turn.
        #[arg(long)]
        ablate_one: bool,
        /// Allow exactly one dependent of the root.
        #[arg(long)]
        single_root: bool,
        /// Where to write the ensemble parse.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train the full ablation grid and report it.
    Experiment {
        /// `NAME=TRAIN,DEV`, repeatable.
        #[arg(long = "data", required = true)]
        data: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "bi,bw,fw")]
        extractors: Vec<Extractor>,
        #[arg(long, value_delimiter = ',', default_value = "none,lc")]
        compositions: Vec<Composition>,
        #[arg(long, value_delimiter = ',', default_value = "pos+char+,pos+char-,pos-char+,pos-char-", value_parser = parse_feature_set)]
        feature_sets: Vec<(bool, bool)>,
        /// Dev scores of this many best epochs are averaged per run.
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        opts: TrainArgs,
    },
    /// Generate a synthetic treebank.
    Synth {
        #[arg(long, value_enum, default_value_t = Order::HeadFinal)]
        order: Order,
        #[arg(long, default_value_t = 500)]
        sentences: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Probability of moving a subject modifier to the sentence end.
        #[arg(long, default_value_t = 0.0)]
        extraposition: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    HeadFinal,
    HeadInitial,
}

/// Input problems exit with 2, everything else with 1.
enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl<E: std::error::Error + Send + Sync + 'static> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Internal(e.into())
    }
}

trait Classify<T> {
    fn input(self) -> Result<T, Failure>;
    fn internal(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn internal(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Internal(e.into()))
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Input(anyhow!(msg.into()))
}

/// Data-dependent model errors are the caller's fault.
fn model_failure(e: ModelError) -> Failure {
    match e {
        ModelError::Vocab(_)
        | ModelError::EmptyTreebank
        | ModelError::MissingTree(_)
        | ModelError::Format(_)
        | ModelError::Io(_) => Failure::Input(e.into()),
        e => Failure::Internal(e.into()),
    }
}

fn read_treebank(path: &Path) -> Result<Treebank, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .input()?;
    let mut tb = parse_conllu(&text)
        .with_context(|| format!("{}", path.display()))
        .input()?;
    tb.name = stem(path);
    Ok(tb)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn load_model(path: &Path) -> Result<ParserModel, Failure> {
    let file = fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .input()?;
    ParserModel::load(std::io::BufReader::new(file))
        .with_context(|| format!("loading {}", path.display()))
        .input()
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text)
            .with_context(|| format!("writing {}", p.display()))
            .internal()?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn score_text(s: &Score) -> String {
    format!("UAS\t{}\nLAS\t{}\ntokens\t{}\n", pct(s.uas), pct(s.las), s.token_count)
}

fn train(
    train: &Path,
    dev: Option<&Path>,
    model_path: &Path,
    metrics_path: Option<&Path>,
    repr: &ReprArgs,
    opts: &TrainArgs,
) -> Result<(), Failure> {
    let settings = Settings::resolve(repr, opts).input()?;
    let train_tb = read_treebank(train)?;
    let dev_tb = dev.map(read_treebank).transpose()?;
    let vocab = build_vocab(&train_tb, settings.min_count).input()?;
    let mut model = ParserModel::new(settings.repr, vocab, settings.train.seed).map_err(model_failure)?;
    eprintln!("{}", EpochMetrics::TSV_HEADER);
    let metrics = model
        .train(&train_tb, dev_tb.as_ref(), &settings.train, |m| eprintln!("{}", m.tsv_row()))
        .map_err(model_failure)?;
    let file = fs::File::create(model_path)
        .with_context(|| format!("creating {}", model_path.display()))
        .internal()?;
    model.save(std::io::BufWriter::new(file)).map_err(model_failure)?;
    if let Some(p) = metrics_path {
        let mut tsv = format!("{}\n", EpochMetrics::TSV_HEADER);
        for m in &metrics {
            tsv.push_str(&m.tsv_row());
            tsv.push('\n');
        }
        write_out(Some(p), &tsv)?;
    }
    Ok(())
}

fn parse(model: &Path, input: &Path, output: Option<&Path>, trace: Option<&Path>) -> Result<(), Failure> {
    let model = load_model(model)?;
    let tb = read_treebank(input)?;
    let mut out = tb.clone();
    let mut lines = String::new();
    for (i, s) in tb.sentences.iter().enumerate() {
        if s.is_empty() {
            continue;
        }
        lines.push_str(&format!("# sentence {}\n", i + 1));
        let arcs = model
            .parse_traced(s, |t, c| {
                let label = match t {
                    Transition::LeftArc(l) | Transition::RightArc(l) => Some(model.vocab.deprels.name(l)),
                    _ => None,
                };
                lines.push_str(&trace_line(t, label, c));
                lines.push('\n');
            })
            .map_err(model_failure)?;
        lines.push('\n');
        let named: Vec<(usize, String)> = arcs
            .into_iter()
            .map(|(h, l)| (h, model.vocab.deprels.name(l).to_owned()))
            .collect();
        out.sentences[i].set_arcs(&named);
    }
    if let Some(p) = trace {
        write_out(Some(p), &lines)?;
    }
    write_out(output, &write_conllu(&out))
}

fn eval(gold: &Path, pred: &Path, json: bool) -> Result<(), Failure> {
    let score = score_trees(&read_treebank(gold)?, &read_treebank(pred)?).input()?;
    if json {
        println!("{}", serde_json::to_string_pretty(&score)?);
    } else {
        print!("{}", score_text(&score));
    }
    Ok(())
}

fn stats(input: &Path, relations: Option<Vec<String>>, json: bool) -> Result<(), Failure> {
    let tb = read_treebank(input)?;
    let relations = relations.map_or_else(default_content_relations, |r| r.into_iter().collect());
    let st = treebank_stats(&tb, &relations);
    if json {
        println!("{}", serde_json::to_string_pretty(&st)?);
        return Ok(());
    }
    let opt = |v: Option<f64>| v.map_or("-".to_owned(), |v| format!("{v:.4}"));
    println!("sentences\t{}", st.counts.sentences);
    println!("tokens\t{}", st.counts.tokens);
    println!("right_headedness\t{}", opt(st.right_headedness));
    println!("left_headedness\t{}", opt(st.left_headedness));
    println!("avg_dependency_length\t{:.4}", st.avg_dependency_length);
    println!("avg_sentence_length\t{:.4}", st.avg_sentence_length);
    println!("avg_arc_depth\t{:.4}", st.avg_arc_depth);
    println!("nonprojective_arc_fraction\t{:.4}", st.nonprojective_arc_fraction);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn ensemble(
    models: &[PathBuf],
    predictions: &[PathBuf],
    input: Option<&Path>,
    gold: Option<&Path>,
    ablate: bool,
    single_root: bool,
    output: Option<&Path>,
) -> Result<(), Failure> {
    let k = models.len() + predictions.len();
    if k == 0 {
        return Err(usage("give --models or --predictions"));
    }
    if ablate && k < 2 {
        return Err(usage("--ablate-one needs at least two systems"));
    }
    if ablate && gold.is_none() {
        return Err(usage("--ablate-one needs --gold"));
    }
    let mut systems: Vec<(String, Treebank)> = Vec::new();
    if !models.is_empty() {
        let input = input.ok_or_else(|| usage("--models needs --input"))?;
        let tb = read_treebank(input)?;
        let loaded = models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>, _>>()?;
        let parsed: Vec<Treebank> = loaded
            .par_iter()
            .map(|m| m.parse_treebank(&tb))
            .collect::<Result<_, _>>()
            .map_err(model_failure)?;
        systems.extend(models.iter().map(|p| stem(p)).zip(parsed));
    }
    for p in predictions {
        systems.push((stem(p), read_treebank(p)?));
    }
    let ens_err = |e: EnsembleError| match e {
        EnsembleError::Eval(_)
        | EnsembleError::LengthMismatch { .. }
        | EnsembleError::SentenceCount { .. }
        | EnsembleError::MissingHead { .. }
        | EnsembleError::BadHead { .. } => Failure::Input(e.into()),
        e => Failure::Internal(e.into()),
    };
    let refs: Vec<&Treebank> = systems.iter().map(|(_, tb)| tb).collect();
    let combined = ensemble_treebank(&refs, single_root).map_err(ens_err)?;
    if output.is_some() || gold.is_none() {
        write_out(output, &write_conllu(&combined))?;
    }
    if let Some(g) = gold {
        let gold = read_treebank(g)?;
        println!("system\tuas\tlas");
        if ablate {
            for row in ablate_one(&gold, &systems, single_root).map_err(ens_err)? {
                println!("{}\t{}\t{}", row.name, pct(row.score.uas), pct(row.score.las));
            }
        } else {
            let s = score_trees(&gold, &combined).input()?;
            println!("full\t{}\t{}", pct(s.uas), pct(s.las));
        }
    }
    Ok(())
}

fn experiment(
    data: &[String],
    out: &Path,
    grid: Grid,
    jobs: Option<usize>,
    opts: &TrainArgs,
) -> Result<(), Failure> {
    let settings = Settings::resolve(&ReprArgs::default(), opts).input()?;
    if grid.seeds.is_empty() || grid.top_k == 0 {
        return Err(usage("need at least one seed and --top-k >= 1"));
    }
    let mut langs = Vec::new();
    for entry in data {
        let (name, files) = entry
            .split_once('=')
            .ok_or_else(|| usage(format!("--data {entry:?}: expected NAME=TRAIN,DEV")))?;
        let (train, dev) = files
            .split_once(',')
            .ok_or_else(|| usage(format!("--data {entry:?}: expected NAME=TRAIN,DEV")))?;
        langs.push(Language {
            name: name.to_owned(),
            train: read_treebank(Path::new(train))?,
            dev: read_treebank(Path::new(dev))?,
        });
    }
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .internal()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .internal()?;
    let runs = pool
        .install(|| {
            run_grid(&langs, &grid, &settings, |r| eprintln!("{}", r.tsv_row()))
        })
        .map_err(model_failure)?;

    let mut tsv = format!("{RUNS_HEADER}\n");
    for r in &runs {
        tsv.push_str(&r.tsv_row());
        tsv.push('\n');
    }
    fs::write(out.join("runs.tsv"), tsv)?;
    let cells = aggregate(&runs);
    let report = grid_report(&cells);
    let json = serde_json::json!({
        "top_k": grid.top_k,
        "seeds": grid.seeds,
        "runs": runs.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
        "cells": grid_json(&cells),
    });
    fs::write(out.join("grid.json"), serde_json::to_string_pretty(&json)?)?;
    fs::write(out.join("report.tsv"), report.to_tsv())?;
    let text = report.to_text();
    fs::write(out.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn synth(order: Order, sentences: usize, seed: u64, extraposition: f64, output: Option<&Path>) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&extraposition) {
        return Err(usage("--extraposition must be a probability"));
    }
    let tb = generate(&SynthConfig {
        sentences,
        seed,
        order: match order {
            Order::HeadFinal => WordOrder::HeadFinal,
            Order::HeadInitial => WordOrder::HeadInitial,
        },
        extraposition,
    });
    write_out(output, &write_conllu(&tb))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train {
            train: t,
            dev,
            model,
            metrics,
            repr,
            opts,
        } => train(&t, dev.as_deref(), &model, metrics.as_deref(), &repr, &opts),
        Command::Parse {
            model,
            input,
            output,
            trace,
        } => parse(&model, &input, output.as_deref(), trace.as_deref()),
        Command::Eval { gold, pred, json } => eval(&gold, &pred, json),
        Command::Stats {
            input,
            content_relations,
            json,
        } => stats(&input, content_relations, json),
        Command::Ensemble {
            models,
            predictions,
            input,
            gold,
            ablate_one,
            single_root,
            output,
        } => ensemble(
            &models,
            &predictions,
            input.as_deref(),
            gold.as_deref(),
            ablate_one,
            single_root,
            output.as_deref(),
        ),
        Command::Experiment {
            data,
            out,
            seeds,
            extractors,
            compositions,
            feature_sets,
            top_k,
            jobs,
            opts,
        } => {
            let grid = Grid {
                feature_sets,
                extractors,
                compositions,
                seeds,
                top_k,
            };
            experiment(&data, &out, grid, jobs, &opts)
        }
        Command::Synth {
            order,
            sentences,
            seed,
            extraposition,
            output,
        } => synth(order, sentences, seed, extraposition, output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(1)
        }
    }
}

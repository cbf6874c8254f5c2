//! Acceptance checks. Runs without the libtest harness so every check
//! prints exactly one PASS/FAIL line; exits non-zero if any check fails.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treecomp::conllu::{parse_conllu, Treebank};
use treecomp::ensemble::{ablate_one, cle_mst, ensemble_treebank, ArcVoteMatrix};
use treecomp::eval::{grid_report, score_trees, GridKey, Score};
use treecomp::model::TrainConfig;
use treecomp::synth::{generate, SynthConfig, WordOrder};
use treecomp::wordrep::{build_vocab, Composition, CompositionInput, Dims, Extractor, ReprConfig};
use treecomp::ParserModel;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut nonprojective, mut failures) = (0, 0);
    let trees = 1000;
    for _ in 0..trees {
        let n = rng.gen_range(1..=10);
        let heads = common::random_tree(&mut rng, n);
        let labels: Vec<usize> = (0..=n).map(|_| rng.gen_range(0..5)).collect();
        if !common::is_projective(&heads) {
            nonprojective += 1;
        }
        if !common::zero_cost_path_is_gold(&mut rng, &heads, &labels, 5) {
            failures += 1;
        }
    }
    let frac = nonprojective as f64 / trees as f64;
    check(
        failures == 0 && frac >= 0.3,
        format!("{} of {trees} gold trees rebuilt, {:.1}% non-projective", trees - failures, 100.0 * frac),
    )
}

fn oracle_exactness() -> Outcome {
    let trees = 400;
    let (checked, mismatch) = common::check_costs(102, trees, 6);
    match mismatch {
        Some(m) => Err(m),
        None => check(checked >= 300, format!("{trees} trees, {checked} transition costs equal exhaustive search")),
    }
}

fn gradient_integrity() -> Outcome {
    let mut configs = Vec::new();
    for &e in Extractor::ALL {
        for &c in Composition::ALL {
            configs.push(common::tiny_config(e, c));
        }
        let mut token_input = common::tiny_config(e, Composition::Lc);
        token_input.composition_input = CompositionInput::Token;
        configs.push(token_input);
    }
    let mut worst: f64 = 0.0;
    for cfg in &configs {
        worst = worst.max(common::gradient_check(*cfg));
    }
    check(worst < 1e-4, format!("{} configurations, max relative error {worst:.1e}", configs.len()))
}

fn cle_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for i in 0..200 {
        let n = rng.gen_range(1..=5);
        let mut m = ArcVoteMatrix::zeros(n);
        for h in 0..=n {
            for d in 1..=n {
                if h != d {
                    m.votes[h][d] = rng.gen_range(0..=6);
                }
            }
        }
        let heads = cle_mst(&m, false);
        let (got, best) = (m.weight(&heads), common::brute_force_mst(&m, false));
        if !common::is_tree(&heads) || got != best {
            return Err(format!("matrix {i}: weight {got}, optimum {best}"));
        }
    }
    Ok("200 vote matrices, MST weight equals brute force".into())
}

fn overfit() -> Outcome {
    let tb = parse_conllu(include_str!("../data/toy50.conllu")).map_err(|e| e.to_string())?;
    let nonprojective = tb
        .sentences
        .iter()
        .filter(|s| !common::is_projective(&s.heads().unwrap()))
        .count();
    let vocab = build_vocab(&tb, 1).map_err(|e| e.to_string())?;
    let cfg = ReprConfig {
        extractor: Extractor::Bi,
        composition: Composition::None,
        ..ReprConfig::default()
    };
    let mut model = ParserModel::new(cfg, vocab, 1).map_err(|e| e.to_string())?;
    let tcfg = TrainConfig {
        epochs: 50,
        seed: 1,
        ..TrainConfig::default()
    };
    model.train(&tb, Some(&tb), &tcfg, |_| {}).map_err(|e| e.to_string())?;
    let score = score_trees(&tb, &model.parse_treebank(&tb).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    check(
        score.las >= 0.99 && nonprojective > 0,
        format!(
            "training LAS {:.2}% on {} sentences ({nonprojective} non-projective)",
            100.0 * score.las,
            tb.len()
        ),
    )
}

fn causality() -> Outcome {
    let fw = common::causality_holds(Extractor::Fw);
    let bw = common::causality_holds(Extractor::Bw);
    check(fw && bw, format!("fw ignores later words: {fw}, bw ignores earlier words: {bw}"))
}

fn best_dev_las(train: &Treebank, dev: &Treebank, extractor: Extractor, seed: u64) -> f64 {
    let vocab = build_vocab(train, 1).unwrap();
    let cfg = ReprConfig {
        extractor,
        use_char: false,
        dims: Dims {
            word: 32,
            pos: 8,
            seq_hidden: 32,
            relation: 8,
            mlp_hidden: 32,
            ..Dims::default()
        },
        ..ReprConfig::default()
    };
    let mut model = ParserModel::new(cfg, vocab, seed).unwrap();
    let tcfg = TrainConfig {
        epochs: 10,
        seed,
        ..TrainConfig::default()
    };
    let metrics = model.train(train, Some(dev), &tcfg, |_| {}).unwrap();
    metrics.iter().filter_map(|m| m.las).fold(0.0, f64::max)
}

fn head_finality() -> Outcome {
    let seeds = [1, 2, 3];
    let gap = |order: WordOrder| {
        let tb = generate(&SynthConfig {
            sentences: 500,
            seed: 500,
            order,
            extraposition: 0.0,
        });
        let train = Treebank::new("train", tb.sentences[..400].to_vec());
        let dev = Treebank::new("dev", tb.sentences[400..].to_vec());
        let runs: Vec<f64> = std::thread::scope(|s| {
            let handles: Vec<_> = seeds
                .iter()
                .map(|&seed| {
                    let (train, dev) = (&train, &dev);
                    s.spawn(move || {
                        best_dev_las(train, dev, Extractor::Bi, seed) - best_dev_las(train, dev, Extractor::Fw, seed)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        runs.iter().sum::<f64>() / runs.len() as f64
    };
    let final_gap = gap(WordOrder::HeadFinal);
    let initial_gap = gap(WordOrder::HeadInitial);
    check(
        final_gap > initial_gap,
        format!(
            "bi - fw LAS gap {:.2} points head-final vs {:.2} head-initial (mean of 3 seeds)",
            100.0 * final_gap,
            100.0 * initial_gap
        ),
    )
}

fn composition_plumbing() -> Outcome {
    for &e in Extractor::ALL {
        for &c in Composition::ALL {
            common::composition_plumbing(e, c)?;
        }
    }
    Ok("widths 3v / 6v and c_i = v_i for all 9 configurations".into())
}

fn ensemble_shape() -> Outcome {
    let gold = parse_conllu(include_str!("../data/toy50.conllu")).map_err(|e| e.to_string())?;
    let preds: Vec<&Treebank> = vec![&gold; 6];
    let out = ensemble_treebank(&preds, false).map_err(|e| e.to_string())?;
    let systems: Vec<(String, Treebank)> = (1..=6).map(|i| (format!("p{i}"), gold.clone())).collect();
    let rows = ablate_one(&gold, &systems, false).map_err(|e| e.to_string())?;
    let names: Vec<&str> = rows.iter().map(|r| r.name.as_str()).collect();
    check(
        out == gold && rows.len() == 7 && names[0] == "full" && names[1..].iter().all(|n| n.starts_with('-')),
        format!("unanimous output unchanged: {}, rows: {}", out == gold, names.join(" ")),
    )
}

fn report_arithmetic() -> Outcome {
    let bi = [
        ("cs", 87.9),
        ("en", 82.0),
        ("eu", 73.3),
        ("fi", 79.3),
        ("fr", 87.5),
        ("grc", 75.4),
        ("he", 80.0),
        ("ja", 94.6),
        ("zh", 72.9),
    ];
    let results: BTreeMap<GridKey, Score> = bi
        .iter()
        .map(|&(lang, las)| {
            let key = GridKey {
                lang: lang.into(),
                extractor: Extractor::Bi,
                composition: Composition::None,
                pos: true,
                char: true,
            };
            (key, Score { uas: las / 100.0, las: las / 100.0, token_count: 1 })
        })
        .collect();
    let report = grid_report(&results);
    let block = report.blocks.iter().find(|b| b.pos && b.char).ok_or("no pos+char+ block")?;
    let col = block
        .columns
        .iter()
        .position(|&c| c == (Extractor::Bi, Composition::None))
        .ok_or("no bi column")?;
    let avg = block.average.as_ref().and_then(|r| r.cells[col].as_ref()).ok_or("no average")?.las;
    check((avg - 81.4).abs() <= 0.05, format!("pos+char+ bi average {avg:.3} (81.4 expected)"))
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 10] = [
        ("oracle soundness", oracle_soundness),
        ("oracle cost exactness", oracle_exactness),
        ("gradient integrity", gradient_integrity),
        ("CLE optimality", cle_optimality),
        ("overfit toy treebank", overfit),
        ("causality of fw/bw extractors", causality),
        ("head-finality effect", head_finality),
        ("composition plumbing", composition_plumbing),
        ("ensemble unanimity and ablation rows", ensemble_shape),
        ("report arithmetic", report_arithmetic),
    ];
    let mut failed = 0;
    for (name, run) in checks {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} ({secs:.1}s)");
            }
        }
    }
    println!("{} of {} acceptance checks passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

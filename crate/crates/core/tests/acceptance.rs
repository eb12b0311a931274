//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p biasctx-core --test acceptance`.
//!
//! Criteria that need the full annotated news corpus run only when
//! `BASIL_CORPUS_DIR` points at a copy converted to the article-file layout
//! (`BASIL_ALIAS_MAP` may name the alias map to apply); otherwise the
//! count-law oracle stands in and the line says so.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use biasctx::backtranslate::{
    backtranslate_pool, BtOptions, CachedProvider, IdentityProvider, TranslationCache,
};
use biasctx::config::ProviderSpec;
use biasctx::dataset::{augmentation_pool, BtSettings};
use biasctx::ingest::{load_alias_map, write_corpus};
use biasctx::pipeline::run_build;
use biasctx::synthetic::{generate, CorpusBuilder, SyntheticConfig};
use biasctx::{
    build_abta, build_all_target_contexts, build_banc, build_ebta, build_task_dataset, make_folds,
    normalize_targets, parse_corpus, report_stats, sample_fraction, Augmentations, BiasKind,
    BtPolicy, DatasetOptions, InputSchema, Label, Percent, RunConfig, Source, Split, SplitRatios,
    Task,
};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(
        elapsed < limit,
        format!("took {elapsed:.2?}, limit {limit:?}"),
    )
}

// Expected per-target cells: sentences (FOX, HPO, NYT), article-level
// contexts (FOX, HPO, NYT), event-level contexts, total.
type Cells = ([usize; 3], [usize; 3], usize, usize);
// Event, article-level total, event-level total, total, rows.
type EventTable = (
    &'static str,
    usize,
    usize,
    usize,
    &'static [(&'static str, Cells)],
);

fn table_combinatorics() -> Outcome {
    let start = Instant::now();
    let corpus = parse_corpus(&common::fixture("e18e22"), InputSchema::JsonlV1)
        .map_err(|e| e.to_string())?;
    let contexts =
        build_all_target_contexts(&corpus, BiasKind::Inf, None, " ").map_err(|e| e.to_string())?;
    let report = report_stats(&corpus, &contexts, 10);

    let expected: [EventTable; 2] = [
        (
            "18",
            14,
            9,
            23,
            &[
                ("Barack Obama", ([5, 1, 0], [10, 1, 0], 5, 16)),
                ("Benjamin Netanyahu", ([1, 0, 0], [1, 0, 0], 0, 1)),
                ("Secure America Now", ([0, 2, 2], [0, 1, 1], 4, 6)),
            ],
        ),
        (
            "22",
            16,
            19,
            35,
            &[
                ("Barack Obama", ([2, 2, 0], [1, 1, 0], 4, 6)),
                ("Hillary Clinton", ([5, 0, 3], [10, 0, 3], 15, 28)),
                ("Nancy Pelosi", ([1, 0, 0], [1, 0, 0], 0, 1)),
            ],
        ),
    ];
    for (event, abta, ebta, total, rows) in expected {
        let built = contexts
            .iter()
            .filter(|c| c.event.as_str() == event)
            .count();
        check(
            built == total,
            format!("event {event}: {built} contexts, expected {total}"),
        )?;
        let block = report
            .event(event)
            .ok_or(format!("event {event} missing"))?;
        check(
            (block.abta_total, block.ebta_total, block.total) == (abta, ebta, total),
            format!(
                "event {event}: totals ({}, {}, {}), expected ({abta}, {ebta}, {total})",
                block.abta_total, block.ebta_total, block.total
            ),
        )?;
        check(
            block.rows.len() == rows.len(),
            format!("event {event}: {} rows", block.rows.len()),
        )?;
        for (target, cells) in rows {
            let row = block
                .rows
                .iter()
                .find(|r| r.target == *target)
                .ok_or(format!("event {event}: no row for {target}"))?;
            let got = (row.sentences, row.abta, row.ebta, row.total);
            check(
                got == *cells,
                format!("event {event} {target}: {got:?}, expected {cells:?}"),
            )?;
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "23 (14 + 9) and 35 (16 + 19), all cells exact, {:.2?}",
        start.elapsed()
    ))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(0xB1A5);
    let mut pairs = 0usize;
    for i in 0..1000 {
        let counts = common::random_counts(&mut rng);
        let group = common::synthetic_group(&format!("{i}"), counts);
        let abta = build_abta(&group, " ");
        let ebta = build_ebta(&group, " ");
        let mut built = common::pair_keys(&abta);
        built.extend(common::pair_keys(&ebta));
        check(
            built.len() == abta.len() + ebta.len(),
            format!("group {counts:?}: duplicate pairs"),
        )?;
        check(
            built == common::enumerate_pairs(&group),
            format!("group {counts:?}: pair sets differ"),
        )?;
        let abta_law: usize = counts
            .iter()
            .map(|&n| if n == 1 { 1 } else { common::choose2(n) })
            .sum();
        let ebta_law = counts[0] * counts[1] + counts[0] * counts[2] + counts[1] * counts[2];
        check(
            abta.len() == abta_law,
            format!("group {counts:?}: ABTA {} != {abta_law}", abta.len()),
        )?;
        check(
            ebta.len() == ebta_law,
            format!("group {counts:?}: EBTA {} != {ebta_law}", ebta.len()),
        )?;
        pairs += built.len();
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "1000 groups, {pairs} contexts, {:.2?}",
        start.elapsed()
    ))
}

fn banc_rules() -> Outcome {
    let corpus =
        parse_corpus(&common::fixture("banc"), InputSchema::JsonlV1).map_err(|e| e.to_string())?;
    let article = corpus
        .articles()
        .find(|a| a.source == Source::Nyt)
        .ok_or("fixture article missing")?;
    let windows = |a, kind| -> Vec<Vec<usize>> {
        build_banc(a, kind, " ")
            .iter()
            .map(|b| b.member_indices())
            .collect()
    };
    check(
        windows(article, BiasKind::Lex) == vec![vec![0, 1, 2]],
        "LEX window is not [0, 1, 2]",
    )?;
    check(
        windows(article, BiasKind::Inf) == vec![vec![2, 3, 4]],
        "INF window is not [2, 3, 4]",
    )?;

    const L: &[(BiasKind, &str)] = &[(BiasKind::Lex, "T")];
    const I: &[(BiasKind, &str)] = &[(BiasKind::Inf, "T")];
    let edges = CorpusBuilder::new()
        .article(
            "1",
            Source::Fox,
            &[("a", L), ("b", &[]), ("c", &[]), ("d", I)],
        )
        .article("1", Source::Hpo, &[("a", I), ("b", L), ("c", I)])
        .build();
    let fox = &edges.events.values().next().unwrap().articles[&Source::Fox];
    check(
        windows(fox, BiasKind::Lex) == vec![vec![0, 1]],
        "first-sentence window is not 2 members",
    )?;
    check(
        windows(fox, BiasKind::Inf) == vec![vec![2, 3]],
        "last-sentence window is not 2 members",
    )?;
    let hpo = &edges.events.values().next().unwrap().articles[&Source::Hpo];
    check(
        windows(hpo, BiasKind::Lex) == vec![vec![1]],
        "flanked anchor window is not 1 member",
    )?;
    check(
        windows(hpo, BiasKind::Inf) == vec![vec![0], vec![2]],
        "anchors next to the other kind should stand alone",
    )?;
    Ok("LEX [0,1,2], INF [2,3,4], edges 2 members, flanked 1 member".into())
}

fn real_corpus() -> Option<Result<biasctx::Corpus, String>> {
    let dir = std::env::var_os("BASIL_CORPUS_DIR")?;
    let load = || -> Result<biasctx::Corpus, String> {
        let corpus =
            parse_corpus(Path::new(&dir), InputSchema::JsonlV1).map_err(|e| e.to_string())?;
        match std::env::var_os("BASIL_ALIAS_MAP") {
            Some(map) => {
                let map = load_alias_map(Path::new(&map)).map_err(|e| e.to_string())?;
                normalize_targets(&corpus, &map).map_err(|e| e.to_string())
            }
            None => Ok(corpus),
        }
    };
    Some(load())
}

fn corpus_totals(oracle_passed: bool) -> Outcome {
    let Some(corpus) = real_corpus() else {
        check(oracle_passed, "stand-in count-law oracle failed")?;
        return Ok("BASIL_CORPUS_DIR not set; count-law oracle equivalence stands in".into());
    };
    let corpus = corpus?;
    let mut contexts =
        build_all_target_contexts(&corpus, BiasKind::Inf, None, " ").map_err(|e| e.to_string())?;
    contexts.extend(
        build_all_target_contexts(&corpus, BiasKind::Lex, None, " ").map_err(|e| e.to_string())?,
    );
    let report = report_stats(&corpus, &contexts, usize::MAX);
    let mut problems = Vec::new();
    let (inf, lex) = (report.inf.total, report.lex.total);
    if (inf, lex) != (4987, 1551) {
        problems.push(format!("pools INF {inf} / LEX {lex}, expected 4987 / 1551"));
    }
    for (target, sentences, inf, lex) in [
        ("Donald Trump", 340, 2386, 381),
        ("Barack Obama", 156, 705, 165),
        ("Joe Biden", 32, 241, 84),
    ] {
        match report.row(target) {
            Some(r) if (r.sentence_count, r.inf.total(), r.lex.total()) == (sentences, inf, lex) => {}
            Some(r) => problems.push(format!(
                "{target}: {} sentences, {} (INF {}, LEX {}); expected {sentences}, {} ({inf} + {lex})",
                r.sentence_count,
                r.total,
                r.inf.total(),
                r.lex.total(),
                inf + lex
            )),
            None => problems.push(format!("{target}: no such target")),
        }
    }
    if problems.is_empty() {
        Ok(format!("INF {inf}, LEX {lex}, target rows exact"))
    } else {
        Err(problems.join("; "))
    }
}

fn leakage_grid() -> Outcome {
    let start = Instant::now();
    let corpus = generate(&SyntheticConfig::default(), 30);
    let plan = make_folds(&corpus, 10, SplitRatios::default(), 30).map_err(|e| e.to_string())?;
    let identity = IdentityProvider::new();
    let augs = [
        Augmentations::NONE,
        Augmentations {
            banc: true,
            abta: false,
            ebta: false,
        },
        Augmentations {
            banc: false,
            abta: true,
            ebta: true,
        },
        Augmentations::ALL,
    ];
    let mut datasets = 0;
    let mut violations = Vec::new();
    for task in [Task::InfOth, Task::InfLex] {
        for fraction in [0, 10, 30, 50, 100] {
            for aug in augs {
                for policy in [None, Some(BtPolicy::LexOnly), Some(BtPolicy::BothKinds)] {
                    let bt = policy.map(|policy| BtSettings {
                        policy,
                        provider: &identity,
                        options: BtOptions::default(),
                    });
                    let opts = DatasetOptions {
                        aug,
                        fraction,
                        ..DatasetOptions::regular(task, 30)
                    };
                    for fold in 0..plan.k {
                        let ds = build_task_dataset(&corpus, &plan, fold, &opts, bt.as_ref())
                            .map_err(|e| e.to_string())?;
                        violations.extend(common::leakage_violations(&ds));
                        datasets += 1;
                    }
                }
            }
        }
    }
    check(
        violations.is_empty(),
        format!(
            "{} violations, first: {}",
            violations.len(),
            violations.first().map_or("", |v| v)
        ),
    )?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "{datasets} datasets, 0 violations, {:.2?}",
        start.elapsed()
    ))
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).expect("output directory") {
        let path = entry.expect("dir entry").path();
        out.insert(
            path.strip_prefix(dir).unwrap().to_path_buf(),
            fs::read(&path).expect("output file"),
        );
    }
    out
}

fn determinism() -> Outcome {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus_dir = work.path().join("corpus");
    let cache_dir = work.path().join("translations");
    write_corpus(&generate(&SyntheticConfig::default(), 44), &corpus_dir)
        .map_err(|e| e.to_string())?;
    let base = RunConfig {
        corpus: corpus_dir,
        aug: Augmentations::ALL,
        fraction: 50,
        bt_policy: Some(BtPolicy::BothKinds),
        k: 5,
        seed: 44,
        ..RunConfig::default()
    };

    // Record the fixture translations once through the cache ...
    let recorder = CachedProvider::new(
        common::MarkerProvider::new(),
        TranslationCache::open(&cache_dir).map_err(|e| e.to_string())?,
    );
    let record_cfg = RunConfig {
        out: work.path().join("record"),
        ..base.clone()
    };
    run_build(&record_cfg, Some(&recorder)).map_err(|e| e.to_string())?;

    // ... then replay it in two runs that differ only in concurrency.
    let mut trees = Vec::new();
    for (name, in_flight) in [("a", 1), ("b", 8)] {
        let cfg = RunConfig {
            bt_provider: ProviderSpec::Recorded(cache_dir.clone()),
            bt_max_in_flight: in_flight,
            out: work.path().join(name),
            ..base.clone()
        };
        let manifest = run_build(&cfg, None).map_err(|e| e.to_string())?;
        trees.push((manifest, read_tree(&cfg.out)));
    }
    let (m1, t1) = &trees[0];
    let (m2, t2) = &trees[1];
    check(m1 == m2, "manifests differ")?;
    check(t1.keys().eq(t2.keys()), "file sets differ")?;
    for (path, bytes) in t1 {
        check(&t2[path] == bytes, format!("{} differs", path.display()))?;
    }
    let bt_records: usize = m1
        .files
        .iter()
        .flat_map(|f| f.records_by_provenance.iter())
        .filter(|(p, _)| p.starts_with("BT-of-"))
        .map(|(_, n)| n)
        .sum();
    check(bt_records > 0, "no backtranslated records were produced")?;
    Ok(format!(
        "{} files byte-identical, run {} ({} records, {bt_records} backtranslated)",
        t1.len(),
        m1.run_id,
        m1.total_records()
    ))
}

fn fraction_nesting() -> Outcome {
    let corpus = generate(&SyntheticConfig::default(), 57);
    let plan = make_folds(&corpus, 10, SplitRatios::default(), 57).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for fold in 0..plan.k {
        let train = corpus.subset(&plan.folds[fold].train);
        let pool = augmentation_pool(&train, Augmentations::ALL, None, " ");
        let mut prev: BTreeSet<String> = BTreeSet::new();
        for pct in [10, 30, 50, 100] {
            let sample: BTreeSet<String> = sample_fraction(&pool, Percent::new(pct).unwrap(), 57)
                .into_iter()
                .map(|e| e.id)
                .collect();
            let want = (pool.len() * pct as usize).div_ceil(100);
            check(
                sample.len() == want,
                format!(
                    "fold {fold} {pct}%: {} items, expected {want}",
                    sample.len()
                ),
            )?;
            check(
                prev.is_subset(&sample),
                format!("fold {fold}: S({pct}%) misses earlier items"),
            )?;
            prev = sample;
        }
        // The same nesting through full dataset assembly.
        let mut prev: BTreeSet<String> = BTreeSet::new();
        for pct in [10, 30, 50, 100] {
            let opts = DatasetOptions {
                aug: Augmentations::ALL,
                fraction: pct,
                ..DatasetOptions::regular(Task::InfOth, 57)
            };
            let ds =
                build_task_dataset(&corpus, &plan, fold, &opts, None).map_err(|e| e.to_string())?;
            let ids: BTreeSet<String> = ds
                .records
                .iter()
                .filter(|r| !r.provenance.is_regular())
                .map(|r| r.id.clone())
                .collect();
            check(
                prev.is_subset(&ids),
                format!("fold {fold}: dataset at {pct}% is not a superset"),
            )?;
            prev = ids;
        }
        checked += pool.len();
    }
    Ok(format!("10 folds, pools totalling {checked} items"))
}

fn bt_policy() -> Outcome {
    let corpus = generate(&SyntheticConfig::default(), 61);
    let plan = make_folds(&corpus, 10, SplitRatios::default(), 61).map_err(|e| e.to_string())?;
    let identity = IdentityProvider::new();
    let opts = DatasetOptions {
        aug: Augmentations::ALL,
        fraction: 100,
        ..DatasetOptions::regular(Task::InfLex, 61)
    };
    let bt = BtSettings {
        policy: BtPolicy::LexOnly,
        provider: &identity,
        options: BtOptions::default(),
    };
    for fold in 0..plan.k {
        let plain =
            build_task_dataset(&corpus, &plan, fold, &opts, None).map_err(|e| e.to_string())?;
        let with_bt = build_task_dataset(&corpus, &plan, fold, &opts, Some(&bt))
            .map_err(|e| e.to_string())?;
        let before = plain.label_counts(Split::Train);
        let after = with_bt.label_counts(Split::Train);
        let (lex0, lex1) = (
            before.get(&Label::Lex).copied().unwrap_or(0),
            after.get(&Label::Lex).copied().unwrap_or(0),
        );
        let (inf0, inf1) = (
            before.get(&Label::Inf).copied().unwrap_or(0),
            after.get(&Label::Inf).copied().unwrap_or(0),
        );
        check(
            lex1 == 2 * lex0,
            format!("fold {fold}: LEX {lex0} -> {lex1}"),
        )?;
        check(inf1 == inf0, format!("fold {fold}: INF {inf0} -> {inf1}"))?;
    }

    // Single-target pool of both kinds, doubled by both-kinds round trips.
    let (corpus, label) = match real_corpus() {
        Some(c) => (c?, "real corpus"),
        None => (corpus, "synthetic stand-in"),
    };
    let filter: BTreeSet<String> = ["Donald Trump".to_string()].into_iter().collect();
    let mut pool = Vec::new();
    for kind in BiasKind::ALL {
        match build_all_target_contexts(&corpus, kind, Some(&filter), " ") {
            Ok(c) => pool.extend(c.iter().map(|p| p.to_augmented())),
            Err(e) if label == "real corpus" => return Err(e.to_string()),
            Err(_) => {}
        }
    }
    let out = backtranslate_pool(&pool, BtPolicy::BothKinds, &identity, &BtOptions::default())
        .map_err(|e| e.to_string())?;
    let doubled = pool.len() + out.examples.len();
    check(
        doubled == 2 * pool.len(),
        format!("Donald Trump pool {} -> {doubled}", pool.len()),
    )?;
    if label == "real corpus" {
        check(
            pool.len() == 2767,
            format!("Donald Trump pool {} (expected 2767)", pool.len()),
        )?;
    }
    Ok(format!(
        "LEX doubled, INF unchanged in 10 folds; Donald Trump pool {} -> {doubled} ({label})",
        pool.len()
    ))
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, outcome: &Outcome| {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
        outcome.is_ok()
    };
    report("table-exact combinatorics", &table_combinatorics());
    let oracle_ok = report("oracle equivalence", &oracle_equivalence());
    report("neighbourhood window rules", &banc_rules());
    report("corpus totals", &corpus_totals(oracle_ok));
    report("leakage grid", &leakage_grid());
    report("determinism", &determinism());
    report("fraction nesting", &fraction_nesting());
    report("backtranslation policy", &bt_policy());
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use biasctx::backtranslate::BtPolicy;
use biasctx::config::ProviderSpec;
use biasctx::dataset::FRACTION_GRID;
use biasctx::ingest::{corpus_digest, write_corpus};
use biasctx::pipeline::{load_corpus, plan_splits, run_build};
use biasctx::{
    build_all_banc, build_all_target_contexts, corpus_summary, report_stats, Augmentations,
    BiasKind, Corpus, ExportFormat, Manifest, RunConfig, SplitRatios, Task,
};

/// Bias-aware context augmentation for event-aligned news corpora.
#[derive(Parser, Debug)]
#[command(name = "biasctx", version, about)]
struct Cli {
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Text placed between the sentences of a context.
    #[arg(long, global = true)]
    separator: Option<String>,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a corpus and print its summary.
    Ingest {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Write the normalized corpus here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print target-aware combination counts.
    Stats {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Number of targets in the ranking.
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Bias kinds to include.
        #[arg(long, value_enum, default_value_t = KindArg::Both)]
        kind: KindArg,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Write the contexts of a whole corpus as JSON lines.
    Augment {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Context builders, e.g. `banc,abta,ebta` or `all`.
        #[arg(long, default_value = "all")]
        aug: Augmentations,
        /// Bias kinds to include.
        #[arg(long, value_enum, default_value_t = KindArg::Both)]
        kind: KindArg,
        /// Restrict target-aware contexts to these targets.
        #[arg(long, value_delimiter = ',')]
        targets: Option<Vec<String>>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the event-level fold plan.
    Split {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        split: SplitArgs,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build and export task datasets.
    Build(BuildArgs),
    /// Ingest, report, split and build in one go, all into the output directory.
    All(BuildArgs),
}

#[derive(Args, Debug, Default)]
struct CorpusArgs {
    /// Directory of `<event>_<source>.jsonl` article files.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// JSON object mapping raw target names to canonical ones.
    #[arg(long)]
    alias_map: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct SplitArgs {
    /// Number of event-level folds.
    #[arg(long)]
    k: Option<usize>,
    /// Master seed for shuffling, sampling and balancing.
    #[arg(long)]
    seed: Option<u64>,
    /// Train, val and test percentages, e.g. `80,10,10`.
    #[arg(long, value_parser = parse_ratios)]
    ratios: Option<SplitRatios>,
    /// Rebalance every test set over these targets.
    #[arg(long, value_delimiter = ',')]
    balance_targets: Option<Vec<String>>,
    /// Largest tolerated deviation from an equal target share.
    #[arg(long)]
    balance_tolerance: Option<f64>,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// `inf-oth` or `inf-lex`.
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    /// Context builders, e.g. `banc,abta,ebta`, `all` or `none`.
    #[arg(long)]
    aug: Option<Augmentations>,
    /// Percentage of the augmentation pool added to train.
    #[arg(long, value_parser = parse_fraction)]
    fraction: Option<u32>,
    #[arg(long, value_enum)]
    bt_policy: Option<BtPolicyArg>,
    /// `identity`, `http` or `recorded:<path>`.
    #[arg(long)]
    bt_provider: Option<ProviderSpec>,
    /// Pivot language of the round trip.
    #[arg(long)]
    pivot: Option<String>,
    /// Directory of the on-disk translation cache.
    #[arg(long)]
    bt_cache_dir: Option<PathBuf>,
    /// Largest tolerated share of failed round trips.
    #[arg(long)]
    bt_fail_threshold: Option<f64>,
    /// Concurrent translation requests.
    #[arg(long)]
    bt_max_in_flight: Option<usize>,
    /// Build only this fold.
    #[arg(long)]
    fold: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict target-aware contexts to these targets.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<String>>,
    /// Drop augmented records whose text equals a regular training record.
    #[arg(long)]
    dedup: bool,
    /// `jsonl` or `csv`.
    #[arg(long, value_parser = parse_format)]
    format: Option<ExportFormat>,
    /// Take every setting from an earlier run's manifest.
    #[arg(long, conflicts_with = "config")]
    from_manifest: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum KindArg {
    Inf,
    Lex,
    Both,
}

impl KindArg {
    fn kinds(self) -> &'static [BiasKind] {
        match self {
            KindArg::Inf => &[BiasKind::Inf],
            KindArg::Lex => &[BiasKind::Lex],
            KindArg::Both => &BiasKind::ALL,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum BtPolicyArg {
    None,
    LexOnly,
    Both,
}

fn parse_fraction(s: &str) -> Result<u32, String> {
    let v: u32 = s.parse().map_err(|e| format!("{e}"))?;
    if FRACTION_GRID.contains(&v) {
        Ok(v)
    } else {
        Err(format!("must be one of {FRACTION_GRID:?}"))
    }
}

fn parse_ratios(s: &str) -> Result<SplitRatios, String> {
    let parts: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        &[train, val, test] => SplitRatios::new(train, val, test).map_err(|e| e.to_string()),
        _ => Err("expected three comma-separated percentages".into()),
    }
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse()
}

fn parse_format(s: &str) -> Result<ExportFormat, String> {
    s.parse()
}

fn base_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_toml_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(sep) = &cli.separator {
        cfg.separator.clone_from(sep);
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    init_threads(cfg.threads)?;
    Ok(cfg)
}

/// Sizes the global worker pool once; later calls are no-ops.
fn init_threads(threads: Option<usize>) -> Result<()> {
    match threads {
        Some(0) => bail!("thread count must be positive"),
        Some(n) => {
            if rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .is_ok()
            {
                info!("using {n} worker threads");
            }
            Ok(())
        }
        None => Ok(()),
    }
}

fn apply_corpus(cfg: &mut RunConfig, args: &CorpusArgs) {
    if let Some(c) = &args.corpus {
        cfg.corpus.clone_from(c);
    }
    if args.alias_map.is_some() {
        cfg.alias_map.clone_from(&args.alias_map);
    }
}

fn apply_split(cfg: &mut RunConfig, args: &SplitArgs) {
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(r) = args.ratios {
        cfg.ratios = r;
    }
    if args.balance_targets.is_some() {
        cfg.balance_targets.clone_from(&args.balance_targets);
    }
    if let Some(t) = args.balance_tolerance {
        cfg.balance_tolerance = t;
    }
}

fn manifest_config(path: &Path) -> Result<RunConfig> {
    let manifest = Manifest::read(path)?;
    serde_json::from_value(manifest.flags)
        .with_context(|| format!("{} does not hold run settings", path.display()))
}

fn build_config(cli: &Cli, args: &BuildArgs) -> Result<RunConfig> {
    let mut cfg = match &args.from_manifest {
        Some(path) => manifest_config(path)?,
        None => base_config(cli)?,
    };
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    apply_corpus(&mut cfg, &args.corpus);
    apply_split(&mut cfg, &args.split);
    if let Some(task) = args.task {
        cfg.task = task;
    }
    if let Some(aug) = args.aug {
        cfg.aug = aug;
    }
    if let Some(f) = args.fraction {
        cfg.fraction = f;
    }
    match args.bt_policy {
        Some(BtPolicyArg::None) => cfg.bt_policy = None,
        Some(BtPolicyArg::LexOnly) => cfg.bt_policy = Some(BtPolicy::LexOnly),
        Some(BtPolicyArg::Both) => cfg.bt_policy = Some(BtPolicy::BothKinds),
        None => {}
    }
    if let Some(p) = &args.bt_provider {
        cfg.bt_provider = p.clone();
    }
    if let Some(p) = &args.pivot {
        cfg.pivot.clone_from(p);
    }
    if args.bt_cache_dir.is_some() {
        cfg.bt_cache_dir.clone_from(&args.bt_cache_dir);
    }
    if let Some(t) = args.bt_fail_threshold {
        cfg.bt_fail_threshold = t;
    }
    if let Some(n) = args.bt_max_in_flight {
        cfg.bt_max_in_flight = n;
    }
    if args.fold.is_some() {
        cfg.fold = args.fold;
    }
    if let Some(out) = &args.out {
        cfg.out.clone_from(out);
    }
    if args.targets.is_some() {
        cfg.targets.clone_from(&args.targets);
    }
    if args.dedup {
        cfg.dedup = true;
    }
    if let Some(f) = args.format {
        cfg.format = f;
    }
    if let Some(sep) = &cli.separator {
        cfg.separator.clone_from(sep);
    }
    init_threads(cfg.threads)?;
    Ok(cfg)
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
        }
        None => io::stdout()
            .lock()
            .write_all(bytes)
            .context("writing to stdout"),
    }
}

fn contexts(
    corpus: &Corpus,
    kinds: &[BiasKind],
    targets: Option<&BTreeSet<String>>,
    sep: &str,
) -> Result<Vec<biasctx::PairExample>> {
    let mut out = Vec::new();
    for &kind in kinds {
        out.extend(build_all_target_contexts(corpus, kind, targets, sep)?);
    }
    Ok(out)
}

fn summary_json(corpus: &Corpus) -> serde_json::Value {
    serde_json::json!({
        "digest": corpus_digest(corpus),
        "summary": corpus_summary(corpus),
    })
}

fn to_pretty(v: &impl serde::Serialize) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("serializable");
    bytes.push(b'\n');
    bytes
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest { corpus, out } => {
            let mut cfg = base_config(cli)?;
            apply_corpus(&mut cfg, corpus);
            let c = load_corpus(&cfg)?;
            if let Some(dir) = out {
                let files = write_corpus(&c, dir)?;
                info!("wrote {} article files to {}", files.len(), dir.display());
            }
            write_output(None, &to_pretty(&summary_json(&c)))
        }
        Command::Stats {
            corpus,
            top,
            kind,
            json,
        } => {
            let mut cfg = base_config(cli)?;
            apply_corpus(&mut cfg, corpus);
            let c = load_corpus(&cfg)?;
            let report = report_stats(&c, &contexts(&c, kind.kinds(), None, &cfg.separator)?, *top);
            if *json {
                write_output(None, &to_pretty(&report))
            } else {
                write_output(None, report.render_text().as_bytes())
            }
        }
        Command::Augment {
            corpus,
            aug,
            kind,
            targets,
            out,
        } => {
            let mut cfg = base_config(cli)?;
            apply_corpus(&mut cfg, corpus);
            let c = load_corpus(&cfg)?;
            let filter: Option<BTreeSet<String>> =
                targets.as_ref().map(|t| t.iter().cloned().collect());
            let mut examples = Vec::new();
            for &k in kind.kinds() {
                if aug.banc {
                    examples.extend(
                        build_all_banc(&c, k, &cfg.separator)
                            .iter()
                            .map(|b| b.to_augmented()),
                    );
                }
                if aug.abta || aug.ebta {
                    examples.extend(
                        contexts(&c, &[k], filter.as_ref(), &cfg.separator)?
                            .iter()
                            .filter(|p| match p.scope {
                                biasctx::Scope::Abta => aug.abta,
                                biasctx::Scope::Ebta => aug.ebta,
                            })
                            .map(|p| p.to_augmented()),
                    );
                }
            }
            let mut bytes = Vec::new();
            for e in &examples {
                serde_json::to_writer(&mut bytes, e)?;
                bytes.push(b'\n');
            }
            info!("{} contexts", examples.len());
            write_output(out.as_deref(), &bytes)
        }
        Command::Split { corpus, split, out } => {
            let mut cfg = base_config(cli)?;
            apply_corpus(&mut cfg, corpus);
            apply_split(&mut cfg, split);
            let c = load_corpus(&cfg)?;
            let plan = plan_splits(&cfg, &c)?;
            write_output(out.as_deref(), &to_pretty(&plan))
        }
        Command::Build(args) => {
            let cfg = build_config(cli, args)?;
            let manifest = run_build(&cfg, None)?;
            println!(
                "{} files, {} records, run {} -> {}",
                manifest.files.len(),
                manifest.total_records(),
                manifest.run_id,
                cfg.out.display()
            );
            Ok(())
        }
        Command::All(args) => {
            let cfg = build_config(cli, args)?;
            cfg.validate()?;
            let c = load_corpus(&cfg)?;
            fs::create_dir_all(&cfg.out)
                .with_context(|| format!("creating {}", cfg.out.display()))?;
            write_output(
                Some(&cfg.out.join("corpus_summary.json")),
                &to_pretty(&summary_json(&c)),
            )?;
            let report = report_stats(&c, &contexts(&c, &BiasKind::ALL, None, &cfg.separator)?, 10);
            write_output(
                Some(&cfg.out.join("stats.txt")),
                report.render_text().as_bytes(),
            )?;
            write_output(Some(&cfg.out.join("stats.json")), &to_pretty(&report))?;
            let manifest = run_build(&cfg, None)?;
            println!(
                "{} files, {} records, run {} -> {}",
                manifest.files.len(),
                manifest.total_records(),
                manifest.run_id,
                cfg.out.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn grammar_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn value_parsers() {
        assert_eq!(parse_fraction("30"), Ok(30));
        assert!(parse_fraction("35").is_err());
        assert!(parse_fraction("x").is_err());
        assert_eq!(
            parse_ratios("70, 15, 15").unwrap(),
            SplitRatios::new(70, 15, 15).unwrap()
        );
        assert!(parse_ratios("80,10").is_err());
        assert!(parse_ratios("80,10,20").is_err());
    }

    #[test]
    fn flags_override_defaults() {
        let cli = Cli::parse_from([
            "biasctx",
            "--separator",
            " || ",
            "build",
            "--aug",
            "banc",
            "--bt-policy",
            "both",
            "--targets",
            "A,B",
        ]);
        let Command::Build(args) = &cli.command else {
            unreachable!()
        };
        let cfg = build_config(&cli, args).unwrap();
        assert!(cfg.aug.banc && !cfg.aug.abta);
        assert_eq!(cfg.bt_policy, Some(BtPolicy::BothKinds));
        assert_eq!(cfg.targets, Some(vec!["A".to_string(), "B".to_string()]));
        assert_eq!(cfg.separator, " || ");
    }
}

//! End-to-end stages driven by a [`RunConfig`].

use std::collections::BTreeSet;
use std::fs;
use std::time::Duration;

use log::info;

use crate::backtranslate::{
    BtOptions, CachedProvider, HttpProvider, IdentityProvider, LangCode, RecordedProvider,
    RetryPolicy, TranslationCache, TranslationProvider,
};
use crate::config::{ProviderSpec, RunConfig};
use crate::dataset::{build_task_dataset, BtSettings, DatasetOptions};
use crate::error::{Error, Result};
use crate::export::{emit_dataset, Manifest, RunInfo};
use crate::ingest::{corpus_digest, load_alias_map, normalize_targets, parse_corpus, InputSchema};
use crate::model::Corpus;
use crate::split::{make_folds, target_balanced_test, SplitPlan};

pub const RUN_MANIFEST: &str = "manifest.json";
pub const SPLIT_PLAN_FILE: &str = "split_plan.json";

/// Parses the corpus and applies the alias map, if any.
pub fn load_corpus(cfg: &RunConfig) -> Result<Corpus> {
    let corpus = parse_corpus(&cfg.corpus, InputSchema::JsonlV1)?;
    match &cfg.alias_map {
        Some(path) => normalize_targets(&corpus, &load_alias_map(path)?),
        None => Ok(corpus),
    }
}

/// Folds for the corpus; with balance targets set, every fold's test set is
/// rebalanced.
pub fn plan_splits(cfg: &RunConfig, corpus: &Corpus) -> Result<SplitPlan> {
    let mut plan = make_folds(corpus, cfg.k, cfg.ratios, cfg.seed)?;
    if let Some(targets) = &cfg.balance_targets {
        let targets: BTreeSet<String> = targets.iter().cloned().collect();
        for fold in 0..plan.k {
            plan = target_balanced_test(corpus, &plan, fold, &targets, cfg.balance_tolerance)?;
        }
    }
    Ok(plan)
}

/// Provider named by the configuration, wrapped in the on-disk cache when a
/// cache directory is set.
pub fn make_provider(cfg: &RunConfig) -> Result<Box<dyn TranslationProvider>> {
    let base: Box<dyn TranslationProvider> = match &cfg.bt_provider {
        ProviderSpec::Identity => Box::new(IdentityProvider::new()),
        ProviderSpec::Recorded(path) => Box::new(RecordedProvider::load(path)?),
        ProviderSpec::Http => Box::new(HttpProvider::from_env(Duration::from_secs(30))?),
    };
    Ok(match &cfg.bt_cache_dir {
        Some(dir) => Box::new(CachedProvider::new(base, TranslationCache::open(dir)?)),
        None => base,
    })
}

impl TranslationProvider for Box<dyn TranslationProvider> {
    fn capabilities(&self) -> &crate::backtranslate::Capabilities {
        (**self).capabilities()
    }

    fn translate_text(
        &self,
        text: &str,
        src: &LangCode,
        dst: &LangCode,
    ) -> std::result::Result<String, crate::backtranslate::BtError> {
        (**self).translate_text(text, src, dst)
    }
}

pub fn dataset_options(cfg: &RunConfig) -> DatasetOptions {
    DatasetOptions {
        task: cfg.task,
        aug: cfg.aug,
        fraction: cfg.fraction,
        seed: cfg.seed,
        separator: cfg.separator.clone(),
        dedup: cfg.dedup,
        targets: cfg.targets.as_ref().map(|t| t.iter().cloned().collect()),
    }
}

pub fn bt_options(cfg: &RunConfig) -> BtOptions {
    BtOptions {
        pivot: LangCode::new(&cfg.pivot),
        retry: RetryPolicy::default(),
        fail_threshold: cfg.bt_fail_threshold,
        max_in_flight: cfg.bt_max_in_flight,
    }
}

/// Builds and writes the datasets of the configured fold (or of every fold)
/// into `cfg.out`, together with the split plan and a run manifest that
/// lists every file. `provider` overrides the configured provider.
pub fn run_build(cfg: &RunConfig, provider: Option<&dyn TranslationProvider>) -> Result<Manifest> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let plan = plan_splits(cfg, &corpus)?;

    let owned_provider;
    let provider: Option<&dyn TranslationProvider> = match (cfg.bt_policy, provider) {
        (None, _) => None,
        (Some(_), Some(p)) => Some(p),
        (Some(_), None) => {
            owned_provider = make_provider(cfg)?;
            Some(owned_provider.as_ref())
        }
    };
    let bt = match (cfg.bt_policy, provider) {
        (Some(policy), Some(provider)) => Some(BtSettings {
            policy,
            provider,
            options: bt_options(cfg),
        }),
        _ => None,
    };

    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let plan_path = cfg.out.join(SPLIT_PLAN_FILE);
    let mut plan_bytes = serde_json::to_vec_pretty(&plan).expect("plan serializes");
    plan_bytes.push(b'\n');
    fs::write(&plan_path, plan_bytes).map_err(|e| Error::io(&plan_path, e))?;

    let run = RunInfo {
        corpus_digest: corpus_digest(&corpus),
        seed: cfg.seed,
        flags: cfg.manifest_flags(),
    };
    let opts = dataset_options(cfg);
    let folds: Vec<usize> = match cfg.fold {
        Some(f) => vec![f],
        None => (0..plan.k).collect(),
    };
    let mut manifest = Manifest::new(&run);
    for fold in folds {
        let ds = build_task_dataset(&corpus, &plan, fold, &opts, bt.as_ref())?;
        let m = emit_dataset(&ds, &cfg.out, cfg.format, &run)?;
        manifest.files.extend(m.files);
    }
    manifest.write(&cfg.out.join(RUN_MANIFEST))?;
    info!(
        "wrote {} files ({} records) to {}",
        manifest.files.len(),
        manifest.total_records(),
        cfg.out.display()
    );
    Ok(manifest)
}

//! Context augmentation for sentence-level media bias corpora.
//!
//! The crate reads span-annotated, event-aligned news articles (three
//! sources per event) and turns them into training data for sentence-level
//! bias classification:
//!
//! * [`banc`] adds label-compatible neighbouring sentences to each biased
//!   sentence,
//! * [`target`] pairs sentences that share a bias target and kind, within
//!   an article and across the articles of one event,
//! * [`backtranslate`] paraphrases examples through a pivot language,
//! * [`split`] and [`dataset`] build leakage-free event-level folds and
//!   the INF/OTH and INF/LEX task datasets,
//! * [`export`] writes datasets, manifests and count reports.

pub mod backtranslate;
pub mod banc;
pub mod config;
pub mod dataset;
pub mod error;
pub mod export;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod split;
pub mod synthetic;
pub mod target;

pub use backtranslate::{BtExample, BtPolicy, LangCode, TranslationProvider};
pub use banc::{build_all_banc, build_banc, BancExample};
pub use config::RunConfig;
pub use dataset::{
    build_task_dataset, Augmentations, DatasetOptions, Label, Task, TaskDataset, TaskRecord,
};
pub use error::{Error, Result};
pub use export::{emit_dataset, report_stats, ExportFormat, Manifest, StatsReport};
pub use ingest::{corpus_summary, normalize_targets, parse_corpus, CorpusSummary, InputSchema};
pub use model::{
    Article, AugmentedExample, BiasAnnotation, BiasKind, Corpus, Event, EventId, Method,
    Provenance, Sentence, SentenceId, Source,
};
pub use split::{
    make_folds, sample_fraction, target_balanced_test, Percent, Split, SplitPlan, SplitRatios,
};
pub use target::{
    build_abta, build_all_target_contexts, build_ebta, collect_target_groups, PairExample, Scope,
    TargetGroup,
};

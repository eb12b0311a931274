//! Task datasets: regular sentence records for every split, plus
//! augmentation and backtranslation records in the training split only.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::backtranslate::{backtranslate_pool, BtOptions, BtPolicy, TranslationProvider};
use crate::banc::{build_banc, DEFAULT_SEPARATOR};
use crate::error::{Error, Result};
use crate::model::{AugmentedExample, BiasKind, Corpus, EventId, Provenance, SentenceId, Source};
use crate::split::{derive_seed, sample_fraction, Percent, Split, SplitPlan};
use crate::target::{build_abta, build_ebta, collect_target_groups};

/// Fractions of the augmentation pool that may be added to training.
pub const FRACTION_GRID: [u32; 7] = [0, 10, 20, 30, 40, 50, 100];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    /// Informational bias against everything else (lexical and unbiased).
    #[serde(rename = "INF_OTH", alias = "inf-oth")]
    InfOth,
    /// Informational against lexical, annotated sentences only.
    #[serde(rename = "INF_LEX", alias = "inf-lex")]
    InfLex,
}

impl Task {
    pub fn slug(self) -> &'static str {
        match self {
            Task::InfOth => "inf-oth",
            Task::InfLex => "inf-lex",
        }
    }

    /// Label of an example standing for `kind`, or `None` when the example
    /// does not belong to this task.
    pub fn label(self, kind: Option<BiasKind>) -> Option<Label> {
        match (self, kind) {
            (Task::InfOth, Some(BiasKind::Inf)) => Some(Label::Inf),
            (Task::InfOth, _) => Some(Label::Oth),
            (Task::InfLex, Some(BiasKind::Inf)) => Some(Label::Inf),
            (Task::InfLex, Some(BiasKind::Lex)) => Some(Label::Lex),
            (Task::InfLex, None) => None,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::InfOth => "INF_OTH",
            Task::InfLex => "INF_LEX",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "inf-oth" => Ok(Task::InfOth),
            "inf-lex" => Ok(Task::InfLex),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Inf,
    Oth,
    Lex,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Inf => "INF",
            Label::Oth => "OTH",
            Label::Lex => "LEX",
        })
    }
}

/// Which context builders feed the augmentation pool.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Augmentations {
    pub banc: bool,
    pub abta: bool,
    pub ebta: bool,
}

impl Augmentations {
    pub const NONE: Augmentations = Augmentations {
        banc: false,
        abta: false,
        ebta: false,
    };
    pub const ALL: Augmentations = Augmentations {
        banc: true,
        abta: true,
        ebta: true,
    };

    pub fn is_empty(&self) -> bool {
        !(self.banc || self.abta || self.ebta)
    }
}

impl FromStr for Augmentations {
    type Err = String;

    /// Comma-separated list of `banc`, `abta`, `ebta`; `none`, `all` and the
    /// empty string are accepted too.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut out = Augmentations::NONE;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "banc" => out.banc = true,
                "abta" => out.abta = true,
                "ebta" => out.ebta = true,
                "all" => out = Augmentations::ALL,
                "none" => {}
                other => return Err(format!("unknown augmentation `{other}`")),
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Augmentations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = [
            (self.banc, "banc"),
            (self.abta, "abta"),
            (self.ebta, "ebta"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

/// One exported record. Field order is the export order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskRecord {
    pub id: String,
    pub task: Task,
    pub split: Split,
    pub label: Label,
    pub provenance: Provenance,
    pub event: EventId,
    pub sources: Vec<Source>,
    pub sentence_ids: Vec<SentenceId>,
    pub target: Option<String>,
    pub text: String,
}

impl TaskRecord {
    fn from_example(ex: AugmentedExample, task: Task, split: Split, label: Label) -> Self {
        TaskRecord {
            id: ex.id,
            task,
            split,
            label,
            provenance: ex.provenance,
            event: ex.event,
            sources: ex.sources,
            sentence_ids: ex.sentence_ids,
            target: ex.target,
            text: ex.text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetOptions {
    pub task: Task,
    pub aug: Augmentations,
    /// Must be one of [`FRACTION_GRID`].
    pub fraction: u32,
    pub seed: u64,
    pub separator: String,
    /// Drop augmented records whose text equals a regular training record.
    pub dedup: bool,
    /// Restrict target-aware contexts to these targets.
    pub targets: Option<BTreeSet<String>>,
}

impl DatasetOptions {
    pub fn regular(task: Task, seed: u64) -> Self {
        DatasetOptions {
            task,
            aug: Augmentations::NONE,
            fraction: 0,
            seed,
            separator: DEFAULT_SEPARATOR.to_owned(),
            dedup: false,
            targets: None,
        }
    }
}

/// Backtranslation configuration for [`build_task_dataset`].
pub struct BtSettings<'a> {
    pub policy: BtPolicy,
    pub provider: &'a dyn TranslationProvider,
    pub options: BtOptions,
}

/// Record counts of the assembly stages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AssemblyCounts {
    pub regular_train: usize,
    pub regular_val: usize,
    pub regular_test: usize,
    /// Augmentation pool size before sampling (after dedup).
    pub aug_pool: usize,
    pub aug_sampled: usize,
    pub bt_admitted: usize,
    pub bt_added: usize,
    pub bt_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskDataset {
    pub task: Task,
    pub fold: usize,
    pub records: Vec<TaskRecord>,
    pub counts: AssemblyCounts,
}

impl TaskDataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &TaskRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn label_counts(&self, split: Split) -> BTreeMap<Label, usize> {
        let mut out = BTreeMap::new();
        for r in self.split(split) {
            *out.entry(r.label).or_default() += 1;
        }
        out
    }
}

/// The augmentation pool of a set of training events: BANC contexts of both
/// kinds, then target-aware contexts group by group, filtered by `aug` and
/// `targets`.
pub fn augmentation_pool(
    train: &Corpus,
    aug: Augmentations,
    targets: Option<&BTreeSet<String>>,
    separator: &str,
) -> Vec<AugmentedExample> {
    let mut pool = Vec::new();
    if aug.banc {
        for kind in BiasKind::ALL {
            for article in train.articles() {
                pool.extend(
                    build_banc(article, kind, separator)
                        .iter()
                        .map(|b| b.to_augmented()),
                );
            }
        }
    }
    if aug.abta || aug.ebta {
        for group in collect_target_groups(train) {
            if targets.is_some_and(|t| !t.contains(&group.target)) {
                continue;
            }
            if aug.abta {
                pool.extend(
                    build_abta(&group, separator)
                        .iter()
                        .map(|p| p.to_augmented()),
                );
            }
            if aug.ebta {
                pool.extend(
                    build_ebta(&group, separator)
                        .iter()
                        .map(|p| p.to_augmented()),
                );
            }
        }
    }
    pool
}

/// Assembles the dataset of one fold.
///
/// Every sentence of the fold's events yields a regular record (for INF/LEX
/// only annotated ones). The augmentation pool is built from training events
/// alone, a seeded prefix sample of `fraction` percent of it is added to
/// train, and with `bt` set the sampled pool plus the regular training
/// records admitted by the policy are backtranslated into train as well.
/// Val and test stay regular.
pub fn build_task_dataset(
    corpus: &Corpus,
    plan: &SplitPlan,
    fold: usize,
    opts: &DatasetOptions,
    bt: Option<&BtSettings<'_>>,
) -> Result<TaskDataset> {
    if !FRACTION_GRID.contains(&opts.fraction) {
        return Err(Error::InvalidFraction(opts.fraction));
    }
    let split_fold = plan.fold(fold)?;
    if let Some(targets) = &opts.targets {
        let known: BTreeSet<String> = corpus
            .sentences()
            .flat_map(|s| s.annotations.iter().map(|a| a.target.clone()))
            .collect();
        if let Some(missing) = targets.iter().find(|t| !known.contains(*t)) {
            return Err(Error::UnknownTarget(missing.clone()));
        }
    }
    let task = opts.task;
    let mut counts = AssemblyCounts::default();
    let mut records = Vec::new();
    let mut train_regular: Vec<AugmentedExample> = Vec::new();

    for split in [Split::Train, Split::Val, Split::Test] {
        for event_id in split_fold.events(split) {
            let Some(event) = corpus.events.get(event_id) else {
                continue;
            };
            for sentence in event.sentences() {
                let ex = AugmentedExample::regular(sentence);
                let Some(label) = task.label(ex.kind) else {
                    continue;
                };
                match split {
                    Split::Train => {
                        counts.regular_train += 1;
                        train_regular.push(ex.clone());
                    }
                    Split::Val => counts.regular_val += 1,
                    Split::Test => counts.regular_test += 1,
                }
                records.push(TaskRecord::from_example(ex, task, split, label));
            }
        }
    }

    let train_corpus = corpus.subset(&split_fold.train);
    let mut pool = augmentation_pool(
        &train_corpus,
        opts.aug,
        opts.targets.as_ref(),
        &opts.separator,
    );
    if opts.dedup {
        let regular_texts: HashSet<&str> = train_regular.iter().map(|e| e.text.as_str()).collect();
        pool.retain(|e| !regular_texts.contains(e.text.as_str()));
    }
    counts.aug_pool = pool.len();
    let pct = Percent::new(opts.fraction).expect("fraction grid is within 0..=100");
    let sampled = sample_fraction(&pool, pct, derive_seed(opts.seed, fold, "augment"));
    counts.aug_sampled = sampled.len();

    for ex in &sampled {
        if let Some(label) = task.label(ex.kind) {
            records.push(TaskRecord::from_example(
                ex.clone(),
                task,
                Split::Train,
                label,
            ));
        }
    }

    if let Some(bt) = bt {
        let mut bt_input = sampled;
        bt_input.extend(train_regular);
        counts.bt_admitted = bt_input.iter().filter(|e| bt.policy.admits(e.kind)).count();
        let outcome = backtranslate_pool(&bt_input, bt.policy, bt.provider, &bt.options)?;
        for (origin, err) in &outcome.failures {
            warn!("backtranslation of {origin} failed: {err}");
        }
        counts.bt_failed = outcome.failures.len();
        for b in outcome.examples {
            let ex = b.to_augmented();
            if let Some(label) = task.label(ex.kind) {
                counts.bt_added += 1;
                records.push(TaskRecord::from_example(ex, task, Split::Train, label));
            }
        }
    }

    info!(
        "{} fold {fold}: {} train regular, {} pool, {} sampled, {} backtranslated",
        task, counts.regular_train, counts.aug_pool, counts.aug_sampled, counts.bt_added
    );
    Ok(TaskDataset {
        task,
        fold,
        records,
        counts,
    })
}

//! Shared fixtures and independent oracles for the integration tests.
//!
//! The oracles deliberately avoid the library's builders: pair sets are
//! enumerated from all 2-subsets of a group, BANC windows from a direct
//! reading of the neighbour rule.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use biasctx::backtranslate::{BtError, Capabilities, LangCode, TranslationProvider};
use biasctx::model::{Article, BiasKind, SentenceId, Source};
use biasctx::target::{GroupSentence, PairExample, Scope, TargetGroup};
use biasctx::EventId;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures_dir().join(name)
}

/// A pair set entry: scope plus the member ids as a sorted set.
pub type PairKey = (Scope, BTreeSet<SentenceId>);

pub fn pair_keys(examples: &[PairExample]) -> BTreeSet<PairKey> {
    examples
        .iter()
        .map(|p| (p.scope, p.members.iter().cloned().collect()))
        .collect()
}

/// Every 2-subset of the group's sentences, classified as article-level
/// when both come from one source and event-level otherwise, plus the
/// lone sentence of every single-sentence source.
pub fn enumerate_pairs(group: &TargetGroup) -> BTreeSet<PairKey> {
    let all: Vec<&SentenceId> = group.per_source.values().flatten().map(|s| &s.id).collect();
    let mut out = BTreeSet::new();
    for i in 0..all.len() {
        for j in 0..all.len() {
            if i >= j {
                continue;
            }
            let scope = if all[i].source == all[j].source {
                Scope::Abta
            } else {
                Scope::Ebta
            };
            out.insert((
                scope,
                [all[i].clone(), all[j].clone()].into_iter().collect(),
            ));
        }
    }
    for source in Source::ALL {
        let members: Vec<&&SentenceId> = all.iter().filter(|id| id.source == source).collect();
        if members.len() == 1 {
            out.insert((Scope::Abta, [(*members[0]).clone()].into_iter().collect()));
        }
    }
    out
}

pub fn choose2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// A group with `counts[s]` sentences for source `s` (FOX, HPO, NYT).
pub fn synthetic_group(event: &str, counts: [usize; 3]) -> TargetGroup {
    let mut per_source = BTreeMap::new();
    for (source, &n) in Source::ALL.iter().zip(&counts) {
        if n == 0 {
            continue;
        }
        let sentences = (0..n)
            .map(|i| GroupSentence {
                id: SentenceId::new(event, *source, 2 * i + 1),
                text: format!("{source}-{i}"),
            })
            .collect();
        per_source.insert(*source, sentences);
    }
    TargetGroup {
        event: EventId::new(event),
        target: "T".into(),
        kind: BiasKind::Inf,
        per_source,
    }
}

pub fn random_counts(rng: &mut ChaCha8Rng) -> [usize; 3] {
    [
        rng.random_range(0..=6),
        rng.random_range(0..=6),
        rng.random_range(0..=6),
    ]
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Member indices of each window, read straight off the rule: the anchor,
/// plus each existing immediate neighbour that has no annotation of the
/// other kind.
pub fn banc_oracle(article: &Article, kind: BiasKind) -> Vec<Vec<usize>> {
    let other = match kind {
        BiasKind::Inf => BiasKind::Lex,
        BiasKind::Lex => BiasKind::Inf,
    };
    let annotated =
        |i: usize, k: BiasKind| article.sentences[i].annotations.iter().any(|a| a.kind == k);
    let n = article.sentences.len();
    (0..n)
        .filter(|&i| annotated(i, kind))
        .map(|i| {
            let mut w = Vec::new();
            if i > 0 && !annotated(i - 1, other) {
                w.push(i - 1);
            }
            w.push(i);
            if i + 1 < n && !annotated(i + 1, other) {
                w.push(i + 1);
            }
            w
        })
        .collect()
}

/// Deterministic stand-in for a translation service: marks the pivot leg
/// and rewrites a few words on the way back, so paraphrases differ from
/// their inputs.
pub struct MarkerProvider {
    caps: Capabilities,
}

impl MarkerProvider {
    pub fn new() -> Self {
        MarkerProvider {
            caps: Capabilities::en_es(),
        }
    }
}

impl TranslationProvider for MarkerProvider {
    fn capabilities(&self) -> &Capabilities {
        &self.caps
    }

    fn translate_text(
        &self,
        text: &str,
        src: &LangCode,
        dst: &LangCode,
    ) -> Result<String, BtError> {
        Ok(match (src.as_str(), dst.as_str()) {
            ("en", _) => format!("<{}> {text}", dst.as_str()),
            (p, "en") => text
                .trim_start_matches(&format!("<{p}> "))
                .replace("about", "concerning")
                .replace("sentence", "line"),
            _ => text.to_owned(),
        })
    }
}

/// Leakage violations of one dataset: sentences shared between train and
/// evaluation records, and non-regular evaluation records.
pub fn leakage_violations(ds: &biasctx::TaskDataset) -> Vec<String> {
    use biasctx::Split;
    let mut train = BTreeSet::new();
    let mut eval = BTreeSet::new();
    let mut out = Vec::new();
    for r in &ds.records {
        match r.split {
            Split::Train => train.extend(r.sentence_ids.iter().cloned()),
            Split::Val | Split::Test => {
                if !r.provenance.is_regular() {
                    out.push(format!(
                        "{} in {} has provenance {}",
                        r.id, r.split, r.provenance
                    ));
                }
                eval.extend(r.sentence_ids.iter().cloned())
            }
        }
    }
    out.extend(
        train
            .intersection(&eval)
            .map(|id| format!("sentence {id} in train and eval")),
    );
    out
}

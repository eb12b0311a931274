//! Target-aware contexts.
//!
//! Sentences of one event that share a (target, bias kind) form a group.
//! Article-based contexts (ABTA) pair sentences inside one article; a source
//! with a single sentence contributes that sentence alone. Event-based
//! contexts (EBTA) take the cross product between every two sources of the
//! event. Only unordered pairs are produced, never triples, and groups
//! never span events.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    join_texts, AugmentedExample, BiasKind, Corpus, EventId, Method, Provenance, SentenceId, Source,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scope {
    Abta,
    Ebta,
}

impl Scope {
    pub fn method(self) -> Method {
        match self {
            Scope::Abta => Method::Abta,
            Scope::Ebta => Method::Ebta,
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.method().as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSentence {
    pub id: SentenceId,
    pub text: String,
}

/// Sentences of one event sharing a (target, kind), per source, in index
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetGroup {
    pub event: EventId,
    pub target: String,
    pub kind: BiasKind,
    pub per_source: BTreeMap<Source, Vec<GroupSentence>>,
}

impl TargetGroup {
    pub fn count(&self, source: Source) -> usize {
        self.per_source.get(&source).map_or(0, Vec::len)
    }

    pub fn total(&self) -> usize {
        self.per_source.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairExample {
    pub kind: BiasKind,
    pub target: String,
    pub scope: Scope,
    pub members: Vec<SentenceId>,
    pub sources: Vec<Source>,
    pub text: String,
    pub event: EventId,
}

impl PairExample {
    pub fn is_singleton(&self) -> bool {
        self.members.len() == 1
    }

    pub fn to_augmented(&self) -> AugmentedExample {
        let members: Vec<String> = self.members.iter().map(ToString::to_string).collect();
        AugmentedExample {
            id: format!(
                "{}:{}:{}:{}",
                self.scope.method().as_str().to_ascii_lowercase(),
                self.kind,
                self.target,
                members.join("+")
            ),
            text: self.text.clone(),
            provenance: Provenance::of(self.scope.method()),
            kind: Some(self.kind),
            event: self.event.clone(),
            sources: self.sources.clone(),
            sentence_ids: self.members.clone(),
            target: Some(self.target.clone()),
        }
    }
}

/// One group per (event, kind, target) with at least one sentence, ordered
/// by event, then kind, then target.
///
/// A sentence with several annotations joins every group it names, once per
/// group.
pub fn collect_target_groups(corpus: &Corpus) -> Vec<TargetGroup> {
    let mut groups: BTreeMap<(EventId, BiasKind, String), TargetGroup> = BTreeMap::new();
    for sentence in corpus.sentences() {
        for kind in BiasKind::ALL {
            for target in sentence.targets_of(kind) {
                let key = (sentence.id.event.clone(), kind, target.to_owned());
                let group = groups.entry(key).or_insert_with(|| TargetGroup {
                    event: sentence.id.event.clone(),
                    target: target.to_owned(),
                    kind,
                    per_source: BTreeMap::new(),
                });
                group
                    .per_source
                    .entry(sentence.id.source)
                    .or_default()
                    .push(GroupSentence {
                        id: sentence.id.clone(),
                        text: sentence.text.clone(),
                    });
            }
        }
    }
    groups.into_values().collect()
}

fn pair(
    group: &TargetGroup,
    scope: Scope,
    members: &[(&GroupSentence, Source)],
    separator: &str,
) -> PairExample {
    PairExample {
        kind: group.kind,
        target: group.target.clone(),
        scope,
        members: members.iter().map(|(s, _)| s.id.clone()).collect(),
        sources: members.iter().map(|&(_, src)| src).collect(),
        text: join_texts(members.iter().map(|(s, _)| s.text.as_str()), separator),
        event: group.event.clone(),
    }
}

/// Within-article combinations: C(n, 2) pairs per source with n >= 2, the
/// sentence alone when n = 1.
pub fn build_abta(group: &TargetGroup, separator: &str) -> Vec<PairExample> {
    let mut out = Vec::new();
    for (&source, sentences) in &group.per_source {
        match sentences.as_slice() {
            [] => {}
            [only] => out.push(pair(group, Scope::Abta, &[(only, source)], separator)),
            many => {
                for (i, a) in many.iter().enumerate() {
                    for b in &many[i + 1..] {
                        out.push(pair(
                            group,
                            Scope::Abta,
                            &[(a, source), (b, source)],
                            separator,
                        ));
                    }
                }
            }
        }
    }
    out
}

/// Cross-article combinations: n_a * n_b pairs for every two sources, the
/// earlier source (FOX < HPO < NYT) first.
pub fn build_ebta(group: &TargetGroup, separator: &str) -> Vec<PairExample> {
    let sources: Vec<(&Source, &Vec<GroupSentence>)> = group
        .per_source
        .iter()
        .filter(|(_, s)| !s.is_empty())
        .collect();
    let mut out = Vec::new();
    for (i, &(&src_a, list_a)) in sources.iter().enumerate() {
        for &(&src_b, list_b) in &sources[i + 1..] {
            for a in list_a {
                for b in list_b {
                    out.push(pair(
                        group,
                        Scope::Ebta,
                        &[(a, src_a), (b, src_b)],
                        separator,
                    ));
                }
            }
        }
    }
    out
}

/// ABTA followed by EBTA for one group.
pub fn build_group_contexts(group: &TargetGroup, separator: &str) -> Vec<PairExample> {
    let mut out = build_abta(group, separator);
    out.extend(build_ebta(group, separator));
    out
}

/// All target-aware contexts of `kind`, optionally restricted to a set of
/// targets. Every filter entry must name a target present in the corpus.
pub fn build_all_target_contexts(
    corpus: &Corpus,
    kind: BiasKind,
    target_filter: Option<&BTreeSet<String>>,
    separator: &str,
) -> Result<Vec<PairExample>> {
    let groups = collect_target_groups(corpus);
    if let Some(filter) = target_filter {
        let known: BTreeSet<&str> = groups.iter().map(|g| g.target.as_str()).collect();
        if let Some(missing) = filter.iter().find(|t| !known.contains(t.as_str())) {
            return Err(Error::UnknownTarget(missing.clone()));
        }
    }
    let selected: Vec<&TargetGroup> = groups
        .iter()
        .filter(|g| g.kind == kind)
        .filter(|g| target_filter.is_none_or(|f| f.contains(&g.target)))
        .collect();
    Ok(selected
        .par_iter()
        .flat_map_iter(|g| build_group_contexts(g, separator))
        .collect())
}

/// ABTA/EBTA tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ScopeCounts {
    pub abta: usize,
    pub ebta: usize,
}

impl ScopeCounts {
    pub fn total(&self) -> usize {
        self.abta + self.ebta
    }

    pub fn add(&mut self, scope: Scope) {
        match scope {
            Scope::Abta => self.abta += 1,
            Scope::Ebta => self.ebta += 1,
        }
    }
}

/// Per-(target, kind) counts of a list of contexts.
pub fn count_by_target(contexts: &[PairExample]) -> BTreeMap<(String, BiasKind), ScopeCounts> {
    let mut out: BTreeMap<(String, BiasKind), ScopeCounts> = BTreeMap::new();
    for c in contexts {
        out.entry((c.target.clone(), c.kind))
            .or_default()
            .add(c.scope);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(counts: [usize; 3]) -> TargetGroup {
        let mut per_source = BTreeMap::new();
        for (source, n) in Source::ALL.into_iter().zip(counts) {
            if n > 0 {
                per_source.insert(
                    source,
                    (0..n)
                        .map(|i| GroupSentence {
                            id: SentenceId::new("1", source, i * 2),
                            text: format!("{source}{i}"),
                        })
                        .collect(),
                );
            }
        }
        TargetGroup {
            event: EventId::new("1"),
            target: "T".into(),
            kind: BiasKind::Inf,
            per_source,
        }
    }

    #[test]
    fn table_cells() {
        // (FOX, HPO, NYT) -> (ABTA, EBTA)
        let cases = [
            ([5, 1, 0], 11, 5),
            ([0, 2, 2], 2, 4),
            ([1, 0, 0], 1, 0),
            ([5, 0, 3], 13, 15),
            ([2, 2, 0], 2, 4),
        ];
        for (counts, abta, ebta) in cases {
            let g = group(counts);
            assert_eq!(build_abta(&g, " ").len(), abta, "{counts:?}");
            assert_eq!(build_ebta(&g, " ").len(), ebta, "{counts:?}");
        }
    }

    #[test]
    fn four_in_one_source_gives_six_pairs() {
        let got = build_abta(&group([0, 0, 4]), " ");
        let pairs: Vec<(usize, usize)> = got
            .iter()
            .map(|p| (p.members[0].index, p.members[1].index))
            .collect();
        assert_eq!(pairs, [(0, 2), (0, 4), (0, 6), (2, 4), (2, 6), (4, 6)]);
    }

    #[test]
    fn pair_text_order() {
        let g = group([1, 0, 2]);
        let abta = build_abta(&g, " ");
        assert_eq!(abta[0].text, "fox0");
        assert!(abta[0].is_singleton());
        assert_eq!(abta[1].text, "nyt0 nyt1");
        let ebta = build_ebta(&g, "|");
        assert_eq!(ebta[0].text, "fox0|nyt0");
        assert_eq!(ebta[0].sources, [Source::Fox, Source::Nyt]);
    }

    #[test]
    fn augmented_ids_are_unique_per_target() {
        let mut g = group([2, 1, 0]);
        let a: Vec<String> = build_group_contexts(&g, " ")
            .iter()
            .map(|p| p.to_augmented().id)
            .collect();
        g.target = "U".into();
        let b: Vec<String> = build_group_contexts(&g, " ")
            .iter()
            .map(|p| p.to_augmented().id)
            .collect();
        assert!(a.iter().all(|id| !b.contains(id)));
        assert_eq!(a[0], "abta:INF:T:1_fox_0+1_fox_2");
    }
}

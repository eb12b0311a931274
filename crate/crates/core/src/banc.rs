//! Bias-aware neighborhood contexts.
//!
//! Every sentence annotated with a given kind becomes an anchor. Its
//! immediate predecessor and successor join the window when they exist and
//! carry no annotation of the opposite kind. An anchor with no compatible
//! neighbor is emitted alone, so the example count always equals the anchor
//! count.

use rayon::prelude::*;

use crate::model::{
    join_texts, Article, AugmentedExample, BiasKind, Corpus, EventId, Method, Provenance, Sentence,
    SentenceId, Source,
};

pub const DEFAULT_SEPARATOR: &str = " ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BancExample {
    pub kind: BiasKind,
    pub anchor: SentenceId,
    /// Consecutive sentence ids in document order, 1 to 3 of them.
    pub members: Vec<SentenceId>,
    pub text: String,
    pub event: EventId,
    pub source: Source,
}

impl BancExample {
    pub fn member_indices(&self) -> Vec<usize> {
        self.members.iter().map(|m| m.index).collect()
    }

    pub fn to_augmented(&self) -> AugmentedExample {
        AugmentedExample {
            id: format!("banc:{}:{}", self.kind, self.anchor),
            text: self.text.clone(),
            provenance: Provenance::of(Method::Banc),
            kind: Some(self.kind),
            event: self.event.clone(),
            sources: vec![self.source],
            sentence_ids: self.members.clone(),
            target: None,
        }
    }
}

/// Whether `neighbor` may share a window with an anchor of `kind`:
/// unannotated, or annotated only with the same kind.
pub fn is_compatible_neighbor(neighbor: &Sentence, kind: BiasKind) -> bool {
    !neighbor.has_kind(kind.opposite())
}

/// One example per `kind`-annotated sentence of `article`, ordered by anchor.
pub fn build_banc(article: &Article, kind: BiasKind, separator: &str) -> Vec<BancExample> {
    let sentences = &article.sentences;
    let mut out = Vec::new();
    for (i, anchor) in sentences.iter().enumerate() {
        if !anchor.has_kind(kind) {
            continue;
        }
        let mut window: Vec<&Sentence> = Vec::with_capacity(3);
        if let Some(prev) = i.checked_sub(1).map(|p| &sentences[p]) {
            if is_compatible_neighbor(prev, kind) {
                window.push(prev);
            }
        }
        window.push(anchor);
        if let Some(next) = sentences.get(i + 1) {
            if is_compatible_neighbor(next, kind) {
                window.push(next);
            }
        }
        out.push(BancExample {
            kind,
            anchor: anchor.id.clone(),
            members: window.iter().map(|s| s.id.clone()).collect(),
            text: join_texts(window.iter().map(|s| s.text.as_str()), separator),
            event: article.event.clone(),
            source: article.source,
        });
    }
    out
}

/// [`build_banc`] over every article, ordered by (event, source, anchor).
pub fn build_all_banc(corpus: &Corpus, kind: BiasKind, separator: &str) -> Vec<BancExample> {
    let articles: Vec<&Article> = corpus.articles().collect();
    // par_iter + collect keeps input order, which is already canonical.
    articles
        .par_iter()
        .flat_map_iter(|a| build_banc(a, kind, separator))
        .collect()
}

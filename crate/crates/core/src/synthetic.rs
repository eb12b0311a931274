//! Programmatic corpora: a small builder and a seeded random generator,
//! used by tests, benchmarks and the acceptance suite.

use std::collections::BTreeMap;

use rand::Rng;

use crate::model::{
    Article, BiasAnnotation, BiasKind, Corpus, Event, EventId, Sentence, SentenceId, Source,
};
use crate::split::seeded_rng;

/// Assembles a corpus article by article. Sentence ids are assigned from
/// position; no validation beyond that is done.
#[derive(Debug, Default)]
pub struct CorpusBuilder {
    corpus: Corpus,
}

impl CorpusBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an article whose sentences are `(text, [(kind, target)])`.
    pub fn article(
        mut self,
        event: &str,
        source: Source,
        sentences: &[(&str, &[(BiasKind, &str)])],
    ) -> Self {
        let event_id = EventId::new(event);
        let sentences = sentences
            .iter()
            .enumerate()
            .map(|(i, (text, anns))| Sentence {
                id: SentenceId::new(event_id.clone(), source, i),
                text: (*text).to_owned(),
                annotations: anns
                    .iter()
                    .map(|&(kind, target)| BiasAnnotation {
                        kind,
                        target: target.to_owned(),
                        span: None,
                    })
                    .collect(),
            })
            .collect();
        self.push(Article {
            event: event_id,
            source,
            sentences,
        });
        self
    }

    pub fn push(&mut self, article: Article) {
        let event = self
            .corpus
            .events
            .entry(article.event.clone())
            .or_insert_with(|| Event {
                id: article.event.clone(),
                articles: BTreeMap::new(),
            });
        event.articles.insert(article.source, article);
    }

    pub fn build(self) -> Corpus {
        self.corpus
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub events: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    /// Chance that a sentence carries a bias annotation.
    pub annotated_prob: f64,
    /// Share of annotations that are lexical.
    pub lex_share: f64,
    /// Chance that an annotated sentence carries a second annotation.
    pub second_annotation_prob: f64,
    pub targets: Vec<String>,
    /// Chance that an event lacks one of its three articles.
    pub missing_article_prob: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            events: 30,
            min_sentences: 4,
            max_sentences: 14,
            annotated_prob: 0.35,
            lex_share: 0.3,
            second_annotation_prob: 0.1,
            targets: [
                "Donald Trump",
                "Barack Obama",
                "Hillary Clinton",
                "Joe Biden",
                "Paul Ryan",
                "Congress",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            missing_article_prob: 0.05,
        }
    }
}

/// Random BASIL-shaped corpus; identical for identical (config, seed).
pub fn generate(cfg: &SyntheticConfig, seed: u64) -> Corpus {
    let mut rng = seeded_rng(seed);
    let mut builder = CorpusBuilder::new();
    for e in 0..cfg.events {
        let event = EventId::new(e.to_string());
        let skip = if rng.random_bool(cfg.missing_article_prob) {
            Some(Source::ALL[rng.random_range(0..3)])
        } else {
            None
        };
        for source in Source::ALL {
            if Some(source) == skip {
                continue;
            }
            let n = rng.random_range(cfg.min_sentences..=cfg.max_sentences);
            let sentences = (0..n)
                .map(|i| {
                    let mut annotations = Vec::new();
                    if rng.random_bool(cfg.annotated_prob) {
                        let extra = usize::from(rng.random_bool(cfg.second_annotation_prob));
                        for _ in 0..=extra {
                            let kind = if rng.random_bool(cfg.lex_share) {
                                BiasKind::Lex
                            } else {
                                BiasKind::Inf
                            };
                            let target =
                                cfg.targets[rng.random_range(0..cfg.targets.len())].clone();
                            annotations.push(BiasAnnotation {
                                kind,
                                target,
                                span: None,
                            });
                        }
                    }
                    Sentence {
                        id: SentenceId::new(event.clone(), source, i),
                        text: format!(
                            "Event {e} {source} sentence {i} token{}.",
                            rng.random_range(0..1000)
                        ),
                        annotations,
                    }
                })
                .collect();
            builder.push(Article {
                event: event.clone(),
                source,
                sentences,
            });
        }
    }
    builder.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_seeded() {
        let cfg = SyntheticConfig::default();
        assert_eq!(generate(&cfg, 3), generate(&cfg, 3));
        assert_ne!(generate(&cfg, 3), generate(&cfg, 4));
        assert_eq!(generate(&cfg, 3).events.len(), 30);
    }
}

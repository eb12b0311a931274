//! Reading, validating and normalizing article files.
//!
//! A corpus directory holds one line-delimited JSON file per article, named
//! `<event>_<source>.jsonl`. Every line is one sentence record:
//!
//! ```text
//! {"event":"18","source":"fox","index":0,"text":"...","annotations":[{"kind":"INF","target":"Barack Obama","start":0,"end":12}]}
//! ```
//!
//! `start`/`end` are optional character offsets into `text`; when present
//! both must be given. Nested directories are walked; files with other
//! extensions are ignored. `schema/article-record.schema.json` in the
//! repository documents the record shape.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::model::{
    Article, BiasAnnotation, BiasKind, Corpus, Event, EventId, Sentence, SentenceId, Source, Span,
};

/// Input layouts understood by [`parse_corpus`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum InputSchema {
    /// One `<event>_<source>.jsonl` file per article.
    #[default]
    JsonlV1,
}

#[derive(Debug, Deserialize)]
struct InputRecord {
    #[serde(deserialize_with = "string_or_number")]
    event: String,
    source: Source,
    index: usize,
    text: String,
    #[serde(default)]
    annotations: Vec<InputAnnotation>,
}

#[derive(Debug, Deserialize)]
struct InputAnnotation {
    kind: BiasKind,
    target: String,
    #[serde(default)]
    start: Option<usize>,
    #[serde(default)]
    end: Option<usize>,
}

#[derive(Serialize)]
struct OutputRecord<'a> {
    event: &'a str,
    source: Source,
    index: usize,
    text: &'a str,
    annotations: Vec<OutputAnnotation<'a>>,
}

#[derive(Serialize)]
struct OutputAnnotation<'a> {
    kind: BiasKind,
    target: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    start: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    end: Option<usize>,
}

fn string_or_number<'de, D: serde::Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    match Value::deserialize(d)? {
        Value::String(s) => Ok(s),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(serde::de::Error::custom(format!(
            "expected string or integer event id, found {other}"
        ))),
    }
}

/// Trims and collapses internal whitespace of a target name.
pub fn normalize_target_name(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses every article file under `root` into a validated corpus.
pub fn parse_corpus(root: &Path, schema: InputSchema) -> Result<Corpus> {
    let InputSchema::JsonlV1 = schema;
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "corpus directory not found"),
        ));
    }

    let mut files = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::io(root, e.into()))?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|ext| ext == "jsonl")
        {
            files.push(entry.into_path());
        }
    }
    if files.is_empty() {
        return Err(Error::MalformedFile {
            path: root.to_path_buf(),
            reason: "no articles found".into(),
        });
    }

    // Collect all results first so the reported error does not depend on
    // thread scheduling.
    let parsed: Vec<Result<Article>> = files.par_iter().map(|p| parse_article_file(p)).collect();

    let mut events: BTreeMap<EventId, Event> = BTreeMap::new();
    for article in parsed {
        let article = article?;
        let event = events
            .entry(article.event.clone())
            .or_insert_with(|| Event {
                id: article.event.clone(),
                articles: BTreeMap::new(),
            });
        if event.articles.contains_key(&article.source) {
            return Err(Error::DuplicateArticle {
                event: article.event.to_string(),
                outlet: article.source.to_string(),
            });
        }
        event.articles.insert(article.source, article);
    }

    Ok(Corpus {
        events,
        alias_map: BTreeMap::new(),
    })
}

fn file_identity(path: &Path) -> Result<(EventId, Source)> {
    let violation = |reason: String| Error::SchemaViolation {
        path: path.to_path_buf(),
        reason,
    };
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| violation("file name is not valid UTF-8".into()))?;
    let (event, source) = stem
        .rsplit_once('_')
        .ok_or_else(|| violation(format!("file name `{stem}` is not `<event>_<source>`")))?;
    if event.is_empty() {
        return Err(violation(format!(
            "file name `{stem}` has an empty event id"
        )));
    }
    let source: Source = source.parse().map_err(violation)?;
    Ok((EventId::new(event), source))
}

fn parse_article_file(path: &Path) -> Result<Article> {
    let (event, source) = file_identity(path)?;
    let content = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::InvalidData => Error::MalformedFile {
            path: path.to_path_buf(),
            reason: "file is not valid UTF-8".into(),
        },
        _ => Error::io(path, e),
    })?;

    let malformed = |reason: String| Error::MalformedFile {
        path: path.to_path_buf(),
        reason,
    };
    let violation = |reason: String| Error::SchemaViolation {
        path: path.to_path_buf(),
        reason,
    };

    let mut sentences = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(line).map_err(|e| malformed(format!("line {lineno}: {e}")))?;
        let record: InputRecord =
            serde_json::from_value(value).map_err(|e| violation(format!("line {lineno}: {e}")))?;

        if record.event != event.as_str() || record.source != source {
            return Err(violation(format!(
                "line {lineno}: record belongs to {}_{}, file is {event}_{source}",
                record.event, record.source
            )));
        }
        if record.index != sentences.len() {
            return Err(violation(format!(
                "line {lineno}: sentence index {} where {} was expected (indices must be contiguous from 0)",
                record.index,
                sentences.len()
            )));
        }
        if record.text.trim().is_empty() {
            return Err(violation(format!("line {lineno}: empty sentence text")));
        }

        let id = SentenceId::new(event.clone(), source, record.index);
        let len = record.text.chars().count();
        let mut annotations = Vec::with_capacity(record.annotations.len());
        for ann in record.annotations {
            let target = normalize_target_name(&ann.target);
            if target.is_empty() {
                return Err(violation(format!("line {lineno}: empty annotation target")));
            }
            let span = match (ann.start, ann.end) {
                (None, None) => None,
                (Some(start), Some(end)) => {
                    if start >= end || end > len {
                        return Err(Error::DanglingAnnotation {
                            sentence: id.to_string(),
                            start,
                            end,
                            len,
                        });
                    }
                    Some(Span { start, end })
                }
                _ => {
                    return Err(violation(format!(
                        "line {lineno}: annotation span needs both `start` and `end`"
                    )))
                }
            };
            annotations.push(BiasAnnotation {
                kind: ann.kind,
                target,
                span,
            });
        }

        sentences.push(Sentence {
            id,
            text: record.text,
            annotations,
        });
    }

    if sentences.is_empty() {
        return Err(malformed("article has no sentences".into()));
    }
    Ok(Article {
        event,
        source,
        sentences,
    })
}

/// Writes `corpus` back out in the input layout. Parsing the result yields
/// a structurally identical corpus (the alias map is not part of the
/// article files).
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for article in corpus.articles() {
        let path = dir.join(format!("{}.jsonl", article.id()));
        let mut buf = Vec::new();
        write_article_lines(article, &mut buf);
        fs::write(&path, &buf).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

fn write_article_lines(article: &Article, out: &mut Vec<u8>) {
    for s in &article.sentences {
        let record = OutputRecord {
            event: article.event.as_str(),
            source: article.source,
            index: s.id.index,
            text: &s.text,
            annotations: s
                .annotations
                .iter()
                .map(|a| OutputAnnotation {
                    kind: a.kind,
                    target: &a.target,
                    start: a.span.map(|sp| sp.start),
                    end: a.span.map(|sp| sp.end),
                })
                .collect(),
        };
        serde_json::to_writer(&mut *out, &record).expect("in-memory serialization");
        out.push(b'\n');
    }
}

/// SHA-256 over the canonical serialization of all articles followed by the
/// alias map, hex encoded.
pub fn corpus_digest(corpus: &Corpus) -> String {
    let mut hasher = Sha256::new();
    let mut buf = Vec::new();
    for article in corpus.articles() {
        buf.clear();
        writeln!(buf, "# {}", article.id()).expect("in-memory write");
        write_article_lines(article, &mut buf);
        hasher.update(&buf);
    }
    for (raw, canonical) in &corpus.alias_map {
        hasher.update(format!("alias\t{raw}\t{canonical}\n").as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Loads an alias map from a JSON object of `raw -> canonical` strings.
pub fn load_alias_map(path: &Path) -> Result<BTreeMap<String, String>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: BTreeMap<String, String> =
        serde_json::from_str(&content).map_err(|e| Error::MalformedFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    Ok(raw
        .into_iter()
        .map(|(k, v)| (normalize_target_name(&k), normalize_target_name(&v)))
        .collect())
}

/// Rewrites every annotation target through `alias_map`.
///
/// A canonical name may map to itself but must not be aliased to anything
/// else; otherwise the map is not idempotent and [`Error::AliasCycle`] is
/// returned.
pub fn normalize_targets(corpus: &Corpus, alias_map: &BTreeMap<String, String>) -> Result<Corpus> {
    let alias_map: BTreeMap<String, String> = alias_map
        .iter()
        .map(|(k, v)| (normalize_target_name(k), normalize_target_name(v)))
        .collect();
    for (raw, canonical) in &alias_map {
        if let Some(next) = alias_map.get(canonical) {
            if next != canonical {
                return Err(Error::AliasCycle {
                    raw: raw.clone(),
                    canonical: canonical.clone(),
                    next: next.clone(),
                });
            }
        }
    }

    let mut out = corpus.clone();
    if alias_map.is_empty() {
        return Ok(out);
    }
    for event in out.events.values_mut() {
        for article in event.articles.values_mut() {
            for sentence in &mut article.sentences {
                for ann in &mut sentence.annotations {
                    if let Some(canonical) = alias_map.get(&ann.target) {
                        ann.target.clone_from(canonical);
                    }
                }
            }
        }
    }
    out.alias_map.extend(alias_map);
    Ok(out)
}

/// Bias-sentence counts for one target.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TargetCounts {
    /// Sentences with at least one annotation on this target.
    pub sentences: usize,
    pub inf: usize,
    pub lex: usize,
}

/// Sentence-level counts of a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CorpusSummary {
    pub events: usize,
    pub articles: usize,
    pub sentences: usize,
    /// Sentences carrying at least one INF annotation.
    pub inf_sentences: usize,
    /// Sentences carrying at least one LEX annotation.
    pub lex_sentences: usize,
    pub annotations: usize,
    pub per_target: BTreeMap<String, TargetCounts>,
    pub articles_per_event: BTreeMap<String, usize>,
}

pub fn corpus_summary(corpus: &Corpus) -> CorpusSummary {
    let mut summary = CorpusSummary {
        events: corpus.events.len(),
        ..Default::default()
    };
    for event in corpus.events.values() {
        summary
            .articles_per_event
            .insert(event.id.to_string(), event.articles.len());
        summary.articles += event.articles.len();
    }
    for s in corpus.sentences() {
        summary.sentences += 1;
        summary.annotations += s.annotations.len();
        summary.inf_sentences += usize::from(s.has_kind(BiasKind::Inf));
        summary.lex_sentences += usize::from(s.has_kind(BiasKind::Lex));

        let targets: BTreeSet<&str> = s.annotations.iter().map(|a| a.target.as_str()).collect();
        for target in targets {
            let counts = summary.per_target.entry(target.to_owned()).or_default();
            counts.sentences += 1;
            let on_target = |kind| {
                s.annotations
                    .iter()
                    .any(|a| a.kind == kind && a.target == target)
            };
            counts.inf += usize::from(on_target(BiasKind::Inf));
            counts.lex += usize::from(on_target(BiasKind::Lex));
        }
    }
    summary
}

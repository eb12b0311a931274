//! Document model: events group article triplets, articles hold ordered
//! sentences, sentences carry zero or more bias annotations.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Bias kind of an annotated span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BiasKind {
    /// Informational bias.
    Inf,
    /// Lexical bias.
    Lex,
}

impl BiasKind {
    pub const ALL: [BiasKind; 2] = [BiasKind::Inf, BiasKind::Lex];

    pub fn opposite(self) -> BiasKind {
        match self {
            BiasKind::Inf => BiasKind::Lex,
            BiasKind::Lex => BiasKind::Inf,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BiasKind::Inf => "INF",
            BiasKind::Lex => "LEX",
        }
    }
}

impl fmt::Display for BiasKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BiasKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "informational" => Ok(BiasKind::Inf),
            "lex" | "lexical" => Ok(BiasKind::Lex),
            other => Err(format!("unknown bias kind `{other}`")),
        }
    }
}

/// News source of an article. The derived order (FOX < HPO < NYT) is the
/// canonical source order used everywhere output order matters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Fox,
    Hpo,
    Nyt,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::Fox, Source::Hpo, Source::Nyt];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Fox => "fox",
            Source::Hpo => "hpo",
            Source::Nyt => "nyt",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fox" => Ok(Source::Fox),
            "hpo" => Ok(Source::Hpo),
            "nyt" => Ok(Source::Nyt),
            other => Err(format!("unknown source `{other}`")),
        }
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(deserializer)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(BiasKind);
string_serde!(Source);

/// Event identifier. Ids that are plain integers order numerically
/// (`"2" < "18" < "100"`); everything else orders lexicographically after them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(String);

impl EventId {
    pub fn new(id: impl Into<String>) -> Self {
        EventId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn numeric(&self) -> Option<u64> {
        self.0.parse().ok()
    }
}

impl Ord for EventId {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.numeric(), other.numeric()) {
            (Some(a), Some(b)) => a.cmp(&b).then_with(|| self.0.cmp(&other.0)),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for EventId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EventId {
    fn from(s: &str) -> Self {
        EventId::new(s)
    }
}

/// An article is identified by its (event, source) pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArticleId {
    pub event: EventId,
    pub source: Source,
}

impl fmt::Display for ArticleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.event, self.source)
    }
}

/// Globally unique sentence id: article plus 0-based position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SentenceId {
    pub event: EventId,
    pub source: Source,
    pub index: usize,
}

impl SentenceId {
    pub fn new(event: impl Into<EventId>, source: Source, index: usize) -> Self {
        SentenceId {
            event: event.into(),
            source,
            index,
        }
    }

    pub fn article(&self) -> ArticleId {
        ArticleId {
            event: self.event.clone(),
            source: self.source,
        }
    }
}

impl fmt::Display for SentenceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}_{}", self.event, self.source, self.index)
    }
}

impl Serialize for SentenceId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Character span within a sentence, `start < end <= chars(text)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiasAnnotation {
    pub kind: BiasKind,
    pub target: String,
    pub span: Option<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub id: SentenceId,
    pub text: String,
    pub annotations: Vec<BiasAnnotation>,
}

impl Sentence {
    pub fn has_kind(&self, kind: BiasKind) -> bool {
        self.annotations.iter().any(|a| a.kind == kind)
    }

    pub fn is_annotated(&self) -> bool {
        !self.annotations.is_empty()
    }

    /// The single bias kind a sentence stands for when it is used as a
    /// regular example. INF wins when both kinds are present.
    pub fn primary_kind(&self) -> Option<BiasKind> {
        if self.has_kind(BiasKind::Inf) {
            Some(BiasKind::Inf)
        } else if self.has_kind(BiasKind::Lex) {
            Some(BiasKind::Lex)
        } else {
            None
        }
    }

    /// Distinct targets annotated with `kind`, in first-seen order.
    pub fn targets_of(&self, kind: BiasKind) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for a in self.annotations.iter().filter(|a| a.kind == kind) {
            if !out.contains(&a.target.as_str()) {
                out.push(&a.target);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Article {
    pub event: EventId,
    pub source: Source,
    pub sentences: Vec<Sentence>,
}

impl Article {
    pub fn id(&self) -> ArticleId {
        ArticleId {
            event: self.event.clone(),
            source: self.source,
        }
    }
}

/// Up to three articles of one event, keyed by source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub id: EventId,
    pub articles: BTreeMap<Source, Article>,
}

impl Event {
    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.articles.values().flat_map(|a| a.sentences.iter())
    }
}

/// Immutable, validated corpus. Iteration order is (event, source, index).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub events: BTreeMap<EventId, Event>,
    pub alias_map: BTreeMap<String, String>,
}

impl Corpus {
    pub fn articles(&self) -> impl Iterator<Item = &Article> {
        self.events.values().flat_map(|e| e.articles.values())
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.articles().flat_map(|a| a.sentences.iter())
    }

    pub fn event_ids(&self) -> Vec<EventId> {
        self.events.keys().cloned().collect()
    }

    pub fn sentence(&self, id: &SentenceId) -> Option<&Sentence> {
        self.events
            .get(&id.event)?
            .articles
            .get(&id.source)?
            .sentences
            .get(id.index)
    }

    pub fn annotation_count(&self) -> usize {
        self.sentences().map(|s| s.annotations.len()).sum()
    }

    /// Restrict to the given events; alias map is kept.
    pub fn subset<'a>(&self, events: impl IntoIterator<Item = &'a EventId>) -> Corpus {
        let events = events
            .into_iter()
            .filter_map(|id| self.events.get(id).map(|e| (id.clone(), e.clone())))
            .collect();
        Corpus {
            events,
            alias_map: self.alias_map.clone(),
        }
    }
}

/// How an example was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Regular,
    Banc,
    Abta,
    Ebta,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Regular => "REGULAR",
            Method::Banc => "BANC",
            Method::Abta => "ABTA",
            Method::Ebta => "EBTA",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "regular" => Ok(Method::Regular),
            "banc" => Ok(Method::Banc),
            "abta" => Ok(Method::Abta),
            "ebta" => Ok(Method::Ebta),
            other => Err(format!("unknown augmentation `{other}`")),
        }
    }
}

/// Example provenance: the producing method, optionally wrapped in a
/// backtranslation round trip (`BT-of-ABTA`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Provenance {
    pub method: Method,
    pub backtranslated: bool,
}

impl Provenance {
    pub const REGULAR: Provenance = Provenance::of(Method::Regular);

    pub const fn of(method: Method) -> Self {
        Provenance {
            method,
            backtranslated: false,
        }
    }

    pub fn backtranslation(self) -> Self {
        Provenance {
            method: self.method,
            backtranslated: true,
        }
    }

    pub fn is_regular(self) -> bool {
        self == Provenance::REGULAR
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.backtranslated {
            write!(f, "BT-of-{}", self.method.as_str())
        } else {
            f.write_str(self.method.as_str())
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix("BT-of-") {
            Some(rest) => Ok(Provenance::of(rest.parse()?).backtranslation()),
            None => Ok(Provenance::of(s.parse()?)),
        }
    }
}

string_serde!(Provenance);

/// The common currency of every builder: a text made of one or more corpus
/// sentences, with enough provenance to audit leakage and labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AugmentedExample {
    pub id: String,
    pub text: String,
    pub provenance: Provenance,
    /// Bias kind the example stands for; `None` for unannotated sentences.
    pub kind: Option<BiasKind>,
    pub event: EventId,
    pub sources: Vec<Source>,
    pub sentence_ids: Vec<SentenceId>,
    pub target: Option<String>,
}

impl AugmentedExample {
    pub fn regular(sentence: &Sentence) -> Self {
        AugmentedExample {
            id: format!("reg:{}", sentence.id),
            text: sentence.text.clone(),
            provenance: Provenance::REGULAR,
            kind: sentence.primary_kind(),
            event: sentence.id.event.clone(),
            sources: vec![sentence.id.source],
            sentence_ids: vec![sentence.id.clone()],
            target: None,
        }
    }
}

/// Joins member texts with `separator`.
pub(crate) fn join_texts<'a>(texts: impl IntoIterator<Item = &'a str>, separator: &str) -> String {
    let mut out = String::new();
    for (i, t) in texts.into_iter().enumerate() {
        if i > 0 {
            out.push_str(separator);
        }
        out.push_str(t);
    }
    out
}

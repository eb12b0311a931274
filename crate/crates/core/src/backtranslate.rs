//! Backtranslation through a pivot language behind a pluggable provider.
//!
//! Providers shipped here:
//!
//! * [`IdentityProvider`] returns its input, for wiring tests.
//! * [`RecordedProvider`] replays a translation log keyed by text hash.
//! * [`HttpProvider`] talks to a JSON translation endpoint.
//! * [`CachedProvider`] wraps any provider with a content-addressed,
//!   disk-persisted cache whose file doubles as a replay log.
//!
//! Cache and replay files hold one JSON record per line:
//! `{"text_hash": "<sha256 hex>", "src": "en", "dst": "es", "output": "..."}`.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use parking_lot::{Mutex, RwLock};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{AugmentedExample, BiasKind, EventId, Provenance, SentenceId, Source};

pub const API_URL_ENV: &str = "BIASCTX_TRANSLATE_URL";
pub const API_KEY_ENV: &str = "BIASCTX_TRANSLATE_API_KEY";
pub const CACHE_FILE_NAME: &str = "translations.jsonl";
pub const SOURCE_LANG: &str = "en";
pub const DEFAULT_PIVOT: &str = "es";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BtError {
    #[error("unsupported language pair {src} -> {dst}")]
    UnsupportedPair { src: String, dst: String },
    #[error("text of {len} chars exceeds provider limit of {max}")]
    TextTooLong { len: usize, max: usize },
    #[error("translation provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("translation provider rejected the request: {0}")]
    ProviderRejected(String),
    #[error("provider returned an empty translation")]
    EmptyTranslation,
    #[error("no recorded translation for {src} -> {dst} text {text_hash}")]
    NotRecorded {
        text_hash: String,
        src: String,
        dst: String,
    },
    #[error("backtranslation of `{origin}` failed: {reason}")]
    BtFailed { origin: String, reason: String },
    #[error("{failed} of {admitted} backtranslations failed, above threshold {threshold}")]
    TooManyFailures {
        failed: usize,
        admitted: usize,
        threshold: f64,
    },
    #[error("translation cache: {0}")]
    Cache(String),
}

/// Lower-case language code such as `en` or `es`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LangCode(String);

impl LangCode {
    pub fn new(code: &str) -> Self {
        LangCode(code.trim().to_ascii_lowercase())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LangCode {
    fn from(s: &str) -> Self {
        LangCode::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Capabilities {
    /// Supported (src, dst) pairs; empty means any pair.
    pub pairs: Vec<(LangCode, LangCode)>,
    /// Maximum input length in characters.
    pub max_text_len: usize,
}

impl Capabilities {
    pub fn en_es() -> Self {
        Capabilities {
            pairs: vec![("en".into(), "es".into()), ("es".into(), "en".into())],
            max_text_len: 5000,
        }
    }

    pub fn any(max_text_len: usize) -> Self {
        Capabilities {
            pairs: Vec::new(),
            max_text_len,
        }
    }

    pub fn supports(&self, src: &LangCode, dst: &LangCode) -> bool {
        self.pairs.is_empty() || self.pairs.iter().any(|(s, d)| s == src && d == dst)
    }
}

pub trait TranslationProvider: Send + Sync {
    fn capabilities(&self) -> &Capabilities;

    /// Raw provider call. Callers go through [`translate`], which checks
    /// capabilities and rejects empty output.
    fn translate_text(&self, text: &str, src: &LangCode, dst: &LangCode)
        -> Result<String, BtError>;
}

/// Translates `text` with `provider`, enforcing its capability descriptor.
/// The provider output is returned verbatim.
pub fn translate(
    provider: &dyn TranslationProvider,
    text: &str,
    src: &LangCode,
    dst: &LangCode,
) -> Result<String, BtError> {
    let caps = provider.capabilities();
    if !caps.supports(src, dst) {
        return Err(BtError::UnsupportedPair {
            src: src.to_string(),
            dst: dst.to_string(),
        });
    }
    let len = text.chars().count();
    if len > caps.max_text_len {
        return Err(BtError::TextTooLong {
            len,
            max: caps.max_text_len,
        });
    }
    let out = provider.translate_text(text, src, dst)?;
    if out.trim().is_empty() {
        return Err(BtError::EmptyTranslation);
    }
    Ok(out)
}

pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone)]
pub struct IdentityProvider {
    caps: Capabilities,
}

impl IdentityProvider {
    pub fn new() -> Self {
        IdentityProvider {
            caps: Capabilities::en_es(),
        }
    }

    pub fn with_capabilities(caps: Capabilities) -> Self {
        IdentityProvider { caps }
    }
}

impl Default for IdentityProvider {
    fn default() -> Self {
        Self::new()
    }
}

impl TranslationProvider for IdentityProvider {
    fn capabilities(&self) -> &Capabilities {
        &self.caps
    }

    fn translate_text(&self, text: &str, _: &LangCode, _: &LangCode) -> Result<String, BtError> {
        Ok(text.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub text_hash: String,
    pub src: LangCode,
    pub dst: LangCode,
    pub output: String,
}

type CacheKey = (String, LangCode, LangCode);

fn read_records(path: &Path) -> Result<Vec<CacheRecord>, BtError> {
    let file = File::open(path).map_err(|e| BtError::Cache(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| BtError::Cache(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CacheRecord = serde_json::from_str(&line)
            .map_err(|e| BtError::Cache(format!("{} line {}: {e}", path.display(), n + 1)))?;
        out.push(record);
    }
    Ok(out)
}

/// Replays recorded translations; a miss is an error, never a guess.
#[derive(Debug, Clone)]
pub struct RecordedProvider {
    caps: Capabilities,
    records: HashMap<CacheKey, String>,
}

impl RecordedProvider {
    pub fn from_records(records: impl IntoIterator<Item = CacheRecord>) -> Self {
        RecordedProvider {
            caps: Capabilities::any(usize::MAX),
            records: records
                .into_iter()
                .map(|r| ((r.text_hash, r.src, r.dst), r.output))
                .collect(),
        }
    }

    /// Loads a replay log (a cache file, or a directory containing one).
    pub fn load(path: &Path) -> Result<Self, BtError> {
        let file = if path.is_dir() {
            path.join(CACHE_FILE_NAME)
        } else {
            path.to_path_buf()
        };
        Ok(Self::from_records(read_records(&file)?))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl TranslationProvider for RecordedProvider {
    fn capabilities(&self) -> &Capabilities {
        &self.caps
    }

    fn translate_text(
        &self,
        text: &str,
        src: &LangCode,
        dst: &LangCode,
    ) -> Result<String, BtError> {
        let hash = text_hash(text);
        let key = (hash, src.clone(), dst.clone());
        self.records
            .get(&key)
            .cloned()
            .ok_or_else(|| BtError::NotRecorded {
                text_hash: key.0,
                src: src.to_string(),
                dst: dst.to_string(),
            })
    }
}

/// Content-addressed translation cache, optionally persisted as an
/// append-only line file. Safe for concurrent use.
pub struct TranslationCache {
    entries: RwLock<HashMap<CacheKey, String>>,
    file: Option<(PathBuf, Mutex<File>)>,
}

impl TranslationCache {
    pub fn in_memory() -> Self {
        TranslationCache {
            entries: RwLock::new(HashMap::new()),
            file: None,
        }
    }

    /// Opens (creating if needed) `dir/translations.jsonl`.
    pub fn open(dir: &Path) -> Result<Self, BtError> {
        fs::create_dir_all(dir).map_err(|e| BtError::Cache(format!("{}: {e}", dir.display())))?;
        let path = dir.join(CACHE_FILE_NAME);
        let mut entries = HashMap::new();
        if path.exists() {
            for r in read_records(&path)? {
                entries.insert((r.text_hash, r.src, r.dst), r.output);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| BtError::Cache(format!("{}: {e}", path.display())))?;
        debug!(
            "translation cache {} with {} entries",
            path.display(),
            entries.len()
        );
        Ok(TranslationCache {
            entries: RwLock::new(entries),
            file: Some((path, Mutex::new(file))),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, text: &str, src: &LangCode, dst: &LangCode) -> Option<String> {
        self.entries
            .read()
            .get(&(text_hash(text), src.clone(), dst.clone()))
            .cloned()
    }

    pub fn insert(
        &self,
        text: &str,
        src: &LangCode,
        dst: &LangCode,
        output: &str,
    ) -> Result<(), BtError> {
        let key = (text_hash(text), src.clone(), dst.clone());
        let mut entries = self.entries.write();
        if entries.contains_key(&key) {
            return Ok(());
        }
        if let Some((path, file)) = &self.file {
            let record = CacheRecord {
                text_hash: key.0.clone(),
                src: key.1.clone(),
                dst: key.2.clone(),
                output: output.to_owned(),
            };
            let mut line = serde_json::to_string(&record).expect("cache record serializes");
            line.push('\n');
            file.lock()
                .write_all(line.as_bytes())
                .map_err(|e| BtError::Cache(format!("{}: {e}", path.display())))?;
        }
        entries.insert(key, output.to_owned());
        Ok(())
    }
}

pub struct CachedProvider<P> {
    inner: P,
    cache: TranslationCache,
}

impl<P: TranslationProvider> CachedProvider<P> {
    pub fn new(inner: P, cache: TranslationCache) -> Self {
        CachedProvider { inner, cache }
    }

    pub fn cache(&self) -> &TranslationCache {
        &self.cache
    }
}

impl<P: TranslationProvider> TranslationProvider for CachedProvider<P> {
    fn capabilities(&self) -> &Capabilities {
        self.inner.capabilities()
    }

    fn translate_text(
        &self,
        text: &str,
        src: &LangCode,
        dst: &LangCode,
    ) -> Result<String, BtError> {
        if let Some(hit) = self.cache.get(text, src, dst) {
            return Ok(hit);
        }
        let out = self.inner.translate_text(text, src, dst)?;
        if !out.trim().is_empty() {
            self.cache.insert(text, src, dst, &out)?;
        }
        Ok(out)
    }
}

#[derive(Debug, Serialize)]
struct TranslateRequest<'a> {
    q: &'a str,
    source: &'a str,
    target: &'a str,
    format: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    api_key: Option<&'a str>,
}

#[derive(Debug, Deserialize)]
struct TranslateResponse {
    #[serde(rename = "translatedText")]
    translated_text: String,
}

/// Client for a JSON translation endpoint.
///
/// `POST <endpoint>` with body `{"q", "source", "target", "format": "text",
/// "api_key"}` and, when a key is set, an `Authorization: Bearer <key>`
/// header. A 2xx response must carry `{"translatedText": "..."}`. Transport
/// errors, 429 and 5xx map to [`BtError::ProviderUnavailable`] (retryable);
/// other statuses map to [`BtError::ProviderRejected`].
pub struct HttpProvider {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    caps: Capabilities,
}

impl HttpProvider {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpProvider {
            endpoint: endpoint.into(),
            api_key,
            agent,
            caps: Capabilities::any(5000),
        }
    }

    /// Endpoint from `BIASCTX_TRANSLATE_URL`, credential from
    /// `BIASCTX_TRANSLATE_API_KEY`.
    pub fn from_env(timeout: Duration) -> Result<Self, BtError> {
        let endpoint = std::env::var(API_URL_ENV)
            .map_err(|_| BtError::ProviderUnavailable(format!("{API_URL_ENV} is not set")))?;
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Ok(Self::new(endpoint, key, timeout))
    }

    pub fn with_capabilities(mut self, caps: Capabilities) -> Self {
        self.caps = caps;
        self
    }
}

impl TranslationProvider for HttpProvider {
    fn capabilities(&self) -> &Capabilities {
        &self.caps
    }

    fn translate_text(
        &self,
        text: &str,
        src: &LangCode,
        dst: &LangCode,
    ) -> Result<String, BtError> {
        let body = TranslateRequest {
            q: text,
            source: src.as_str(),
            target: dst.as_str(),
            format: "text",
            api_key: self.api_key.as_deref(),
        };
        let mut request = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(&body)
            .map_err(|e| BtError::ProviderUnavailable(e.to_string()))?;
        let status = response.status().as_u16();
        match status {
            200..=299 => {
                let parsed: TranslateResponse = response
                    .body_mut()
                    .read_json()
                    .map_err(|e| BtError::ProviderRejected(format!("bad response body: {e}")))?;
                Ok(parsed.translated_text)
            }
            429 | 500..=599 => Err(BtError::ProviderUnavailable(format!("HTTP {status}"))),
            _ => Err(BtError::ProviderRejected(format!("HTTP {status}"))),
        }
    }
}

/// Bounded retry with exponential backoff, applied to
/// [`BtError::ProviderUnavailable`] only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            max_attempts: 1,
            base_delay: Duration::ZERO,
        }
    }

    fn run<T>(&self, mut op: impl FnMut() -> Result<T, BtError>) -> Result<T, BtError> {
        let attempts = self.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            match op() {
                Err(BtError::ProviderUnavailable(reason)) if attempt < attempts => {
                    let delay = self.base_delay * 2u32.saturating_pow(attempt - 1);
                    warn!(
                        "provider unavailable ({reason}), retry {attempt}/{attempts} in {delay:?}"
                    );
                    thread::sleep(delay);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// Which examples get a backtranslated copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BtPolicy {
    /// Examples standing for either bias kind.
    #[serde(rename = "both")]
    BothKinds,
    /// Lexical-bias examples only.
    LexOnly,
}

impl BtPolicy {
    pub fn admits(self, kind: Option<BiasKind>) -> bool {
        match self {
            BtPolicy::BothKinds => kind.is_some(),
            BtPolicy::LexOnly => kind == Some(BiasKind::Lex),
        }
    }
}

impl std::str::FromStr for BtPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both" | "both-kinds" => Ok(BtPolicy::BothKinds),
            "lex-only" | "lex" => Ok(BtPolicy::LexOnly),
            other => Err(format!("unknown backtranslation policy `{other}`")),
        }
    }
}

impl fmt::Display for BtPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BtPolicy::BothKinds => "both",
            BtPolicy::LexOnly => "lex-only",
        })
    }
}

/// A round-tripped copy of an example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BtExample {
    /// Id of the example this was produced from.
    pub origin: String,
    pub text: String,
    pub pivot: LangCode,
    pub provenance: Provenance,
    pub kind: Option<BiasKind>,
    pub event: EventId,
    pub sources: Vec<Source>,
    pub sentence_ids: Vec<SentenceId>,
    pub target: Option<String>,
}

impl BtExample {
    pub fn to_augmented(&self) -> AugmentedExample {
        AugmentedExample {
            id: format!("bt-{}:{}", self.pivot, self.origin),
            text: self.text.clone(),
            provenance: self.provenance,
            kind: self.kind,
            event: self.event.clone(),
            sources: self.sources.clone(),
            sentence_ids: self.sentence_ids.clone(),
            target: self.target.clone(),
        }
    }
}

/// `en -> pivot -> en` round trip of one example.
pub fn backtranslate(
    example: &AugmentedExample,
    provider: &dyn TranslationProvider,
    pivot: &LangCode,
    retry: RetryPolicy,
) -> Result<BtExample, BtError> {
    let en = LangCode::new(SOURCE_LANG);
    let leg = |text: &str, src: &LangCode, dst: &LangCode| {
        retry
            .run(|| translate(provider, text, src, dst))
            .map_err(|e| match e {
                BtError::ProviderUnavailable(reason) => BtError::BtFailed {
                    origin: example.id.clone(),
                    reason,
                },
                other => other,
            })
    };
    let forward = leg(&example.text, &en, pivot)?;
    let back = leg(&forward, pivot, &en)?;
    Ok(BtExample {
        origin: example.id.clone(),
        text: back,
        pivot: pivot.clone(),
        provenance: example.provenance.backtranslation(),
        kind: example.kind,
        event: example.event.clone(),
        sources: example.sources.clone(),
        sentence_ids: example.sentence_ids.clone(),
        target: example.target.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BtOptions {
    pub pivot: LangCode,
    pub retry: RetryPolicy,
    /// Largest tolerated share of failed round trips, in [0, 1].
    pub fail_threshold: f64,
    /// Concurrent provider calls.
    pub max_in_flight: usize,
}

impl Default for BtOptions {
    fn default() -> Self {
        BtOptions {
            pivot: LangCode::new(DEFAULT_PIVOT),
            retry: RetryPolicy::default(),
            fail_threshold: 0.0,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BtPoolOutcome {
    /// Sorted by origin id.
    pub examples: Vec<BtExample>,
    /// (origin id, error) of every failed round trip.
    pub failures: Vec<(String, BtError)>,
}

/// Backtranslates every member of `pool` that `policy` admits.
///
/// Failures are collected; the call fails only when the failed share of the
/// admitted subset exceeds `options.fail_threshold`.
pub fn backtranslate_pool(
    pool: &[AugmentedExample],
    policy: BtPolicy,
    provider: &dyn TranslationProvider,
    options: &BtOptions,
) -> Result<BtPoolOutcome, BtError> {
    let admitted: Vec<&AugmentedExample> = pool.iter().filter(|e| policy.admits(e.kind)).collect();
    if admitted.is_empty() {
        return Ok(BtPoolOutcome::default());
    }
    let run = || -> Vec<Result<BtExample, (String, BtError)>> {
        admitted
            .par_iter()
            .map(|e| {
                backtranslate(e, provider, &options.pivot, options.retry)
                    .map_err(|err| (e.id.clone(), err))
            })
            .collect()
    };
    let results = match rayon::ThreadPoolBuilder::new()
        .num_threads(options.max_in_flight.max(1))
        .build()
    {
        Ok(pool) => pool.install(run),
        Err(e) => {
            warn!("falling back to the global thread pool: {e}");
            run()
        }
    };

    let mut outcome = BtPoolOutcome::default();
    for r in results {
        match r {
            Ok(ex) => outcome.examples.push(ex),
            Err(f) => outcome.failures.push(f),
        }
    }
    outcome.examples.sort_by(|a, b| a.origin.cmp(&b.origin));
    outcome.failures.sort_by(|a, b| a.0.cmp(&b.0));

    let failed = outcome.failures.len();
    if failed as f64 > options.fail_threshold * admitted.len() as f64 {
        return Err(BtError::TooManyFailures {
            failed,
            admitted: admitted.len(),
            threshold: options.fail_threshold,
        });
    }
    Ok(outcome)
}

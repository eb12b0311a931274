//! Dataset files, run manifests and the combination-count report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{TaskDataset, TaskRecord};
use crate::error::{Error, Result};
use crate::ingest::corpus_summary;
use crate::model::{BiasKind, Corpus, Source};
use crate::target::{collect_target_groups, PairExample, Scope, ScopeCounts};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    /// One JSON object per line.
    #[default]
    Lines,
    /// Comma-separated with a header row; list fields joined by `|`.
    Tabular,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Lines => "jsonl",
            ExportFormat::Tabular => "csv",
        }
    }
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "lines" | "jsonl" => Ok(ExportFormat::Lines),
            "tabular" | "csv" => Ok(ExportFormat::Tabular),
            other => Err(format!("unknown export format `{other}`")),
        }
    }
}

/// Column order of exported records.
pub const RECORD_FIELDS: [&str; 10] = [
    "id",
    "task",
    "split",
    "label",
    "provenance",
    "event",
    "sources",
    "sentence_ids",
    "target",
    "text",
];

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Inputs that identify a run, recorded in every manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub corpus_digest: String,
    pub seed: u64,
    pub flags: serde_json::Value,
}

impl RunInfo {
    /// Stable id derived from the inputs, so identical runs share it.
    pub fn run_id(&self) -> String {
        let canonical = serde_json::to_string(self).expect("run info serializes");
        sha256_hex(canonical.as_bytes())[..16].to_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the manifest.
    pub path: String,
    pub format: ExportFormat,
    pub records: usize,
    pub sha256: String,
    pub records_by_split: BTreeMap<String, usize>,
    pub records_by_provenance: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub corpus_digest: String,
    pub seed: u64,
    pub flags: serde_json::Value,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(run: &RunInfo) -> Self {
        Manifest {
            run_id: run.run_id(),
            corpus_digest: run.corpus_digest.clone(),
            seed: run.seed,
            flags: run.flags.clone(),
            files: Vec::new(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("manifest serializes");
        out.push(b'\n');
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::MalformedFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn total_records(&self) -> usize {
        self.files.iter().map(|f| f.records).sum()
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("|")
}

/// Serializes records in export order, stably sorted by (split, id).
pub fn render_records(records: &[TaskRecord], format: ExportFormat) -> Vec<u8> {
    let mut sorted: Vec<&TaskRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.split.cmp(&b.split).then_with(|| a.id.cmp(&b.id)));
    match format {
        ExportFormat::Lines => {
            let mut out = Vec::new();
            for r in sorted {
                serde_json::to_writer(&mut out, r).expect("record serializes");
                out.push(b'\n');
            }
            out
        }
        ExportFormat::Tabular => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(RECORD_FIELDS).expect("in-memory csv");
            for r in sorted {
                w.write_record([
                    r.id.as_str(),
                    &r.task.to_string(),
                    &r.split.to_string(),
                    &r.label.to_string(),
                    &r.provenance.to_string(),
                    r.event.as_str(),
                    &join(&r.sources),
                    &join(&r.sentence_ids),
                    r.target.as_deref().unwrap_or(""),
                    r.text.as_str(),
                ])
                .expect("in-memory csv");
            }
            w.into_inner().expect("in-memory csv")
        }
    }
}

/// File stem of a dataset: `<task>_fold<k>`.
pub fn dataset_stem(ds: &TaskDataset) -> String {
    format!("{}_fold{}", ds.task.slug(), ds.fold)
}

/// Writes `ds` into `dir` as `<task>_fold<k>.<ext>` with a
/// `<task>_fold<k>.manifest.json` next to it, and returns that manifest.
pub fn emit_dataset(
    ds: &TaskDataset,
    dir: &Path,
    format: ExportFormat,
    run: &RunInfo,
) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = dataset_stem(ds);
    let name = format!("{stem}.{}", format.extension());
    let path = dir.join(&name);
    let bytes = render_records(&ds.records, format);
    fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;

    let mut by_split = BTreeMap::new();
    let mut by_provenance = BTreeMap::new();
    for r in &ds.records {
        *by_split.entry(r.split.to_string()).or_insert(0) += 1;
        *by_provenance.entry(r.provenance.to_string()).or_insert(0) += 1;
    }
    let mut manifest = Manifest::new(run);
    manifest.files.push(FileEntry {
        path: name,
        format,
        records: ds.records.len(),
        sha256: sha256_hex(&bytes),
        records_by_split: by_split,
        records_by_provenance: by_provenance,
    });
    manifest.write(&dir.join(format!("{stem}.manifest.json")))?;
    Ok(manifest)
}

/// Combination counts of one target across the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TargetRow {
    pub target: String,
    /// Sentences with at least one bias annotation on the target.
    pub sentence_count: usize,
    pub inf: ScopeCounts,
    pub lex: ScopeCounts,
    pub abta_count: usize,
    pub ebta_count: usize,
    pub total: usize,
}

impl TargetRow {
    pub fn kind(&self, kind: BiasKind) -> ScopeCounts {
        match kind {
            BiasKind::Inf => self.inf,
            BiasKind::Lex => self.lex,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct KindTotals {
    pub sentences: usize,
    pub abta: usize,
    pub ebta: usize,
    pub total: usize,
}

/// One (target, kind) line of an event block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventTargetRow {
    pub target: String,
    pub kind: BiasKind,
    /// Sentences per source in FOX, HPO, NYT order.
    pub sentences: [usize; 3],
    /// Article-level contexts per source in FOX, HPO, NYT order.
    pub abta: [usize; 3],
    pub ebta: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventBlock {
    pub event: String,
    pub rows: Vec<EventTargetRow>,
    pub abta_total: usize,
    pub ebta_total: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatsReport {
    pub rows: Vec<TargetRow>,
    pub inf: KindTotals,
    pub lex: KindTotals,
    pub events: Vec<EventBlock>,
}

impl StatsReport {
    pub fn totals(&self, kind: BiasKind) -> KindTotals {
        match kind {
            BiasKind::Inf => self.inf,
            BiasKind::Lex => self.lex,
        }
    }

    pub fn row(&self, target: &str) -> Option<&TargetRow> {
        self.rows.iter().find(|r| r.target == target)
    }

    pub fn event(&self, event: &str) -> Option<&EventBlock> {
        self.events.iter().find(|e| e.event == event)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let cell = |n: usize| {
            if n == 0 {
                "-".to_string()
            } else {
                n.to_string()
            }
        };
        for block in &self.events {
            let _ = writeln!(out, "event {}", block.event);
            let _ = writeln!(
                out,
                "  {:<28} {:>4}  {:>3} {:>3} {:>3}  {:>4} {:>4} {:>4}  {:>5}  {:>5}",
                "target", "kind", "FOX", "HPO", "NYT", "aFOX", "aHPO", "aNYT", "event", "total"
            );
            for r in &block.rows {
                let _ = writeln!(
                    out,
                    "  {:<28} {:>4}  {:>3} {:>3} {:>3}  {:>4} {:>4} {:>4}  {:>5}  {:>5}",
                    r.target,
                    r.kind,
                    cell(r.sentences[0]),
                    cell(r.sentences[1]),
                    cell(r.sentences[2]),
                    cell(r.abta[0]),
                    cell(r.abta[1]),
                    cell(r.abta[2]),
                    cell(r.ebta),
                    r.total
                );
            }
            let _ = writeln!(
                out,
                "  total: within articles {}, across articles {}, all {}",
                block.abta_total, block.ebta_total, block.total
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<28} {:>9}  combinations", "target", "sentences");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<28} {:>9}  {} (Inf: {}, Lex: {})",
                r.target,
                r.sentence_count,
                r.total,
                r.inf.total(),
                r.lex.total()
            );
        }
        let _ = writeln!(out);
        for (name, t) in [("INF", self.inf), ("LEX", self.lex)] {
            let _ = writeln!(
                out,
                "{name}: {} sentences, {} contexts (ABTA {}, EBTA {})",
                t.sentences, t.total, t.abta, t.ebta
            );
        }
        out
    }
}

fn source_slot(source: Source) -> usize {
    match source {
        Source::Fox => 0,
        Source::Hpo => 1,
        Source::Nyt => 2,
    }
}

/// Combination counts of `contexts` against `corpus`: the `top_n` targets
/// by sentence count (ties by name), corpus totals per kind over all
/// contexts, and one block per event.
pub fn report_stats(corpus: &Corpus, contexts: &[PairExample], top_n: usize) -> StatsReport {
    let summary = corpus_summary(corpus);

    let mut per_target: BTreeMap<&str, (ScopeCounts, ScopeCounts)> = BTreeMap::new();
    let mut per_event: BTreeMap<(String, String, BiasKind), ([usize; 3], usize)> = BTreeMap::new();
    let mut inf = KindTotals {
        sentences: summary.inf_sentences,
        ..Default::default()
    };
    let mut lex = KindTotals {
        sentences: summary.lex_sentences,
        ..Default::default()
    };
    for c in contexts {
        let entry = per_target.entry(c.target.as_str()).or_default();
        let (counts, totals) = match c.kind {
            BiasKind::Inf => (&mut entry.0, &mut inf),
            BiasKind::Lex => (&mut entry.1, &mut lex),
        };
        counts.add(c.scope);
        match c.scope {
            Scope::Abta => totals.abta += 1,
            Scope::Ebta => totals.ebta += 1,
        }
        let ev = per_event
            .entry((c.event.to_string(), c.target.clone(), c.kind))
            .or_default();
        match c.scope {
            Scope::Abta => ev.0[source_slot(c.sources[0])] += 1,
            Scope::Ebta => ev.1 += 1,
        }
    }
    inf.total = inf.abta + inf.ebta;
    lex.total = lex.abta + lex.ebta;

    let mut ranked: Vec<(&String, usize)> = summary
        .per_target
        .iter()
        .map(|(t, c)| (t, c.sentences))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let rows = ranked
        .into_iter()
        .take(top_n)
        .map(|(target, sentence_count)| {
            let (i, l) = per_target.get(target.as_str()).copied().unwrap_or_default();
            TargetRow {
                target: target.clone(),
                sentence_count,
                inf: i,
                lex: l,
                abta_count: i.abta + l.abta,
                ebta_count: i.ebta + l.ebta,
                total: i.total() + l.total(),
            }
        })
        .collect();

    let mut blocks: Vec<EventBlock> = Vec::new();
    for group in collect_target_groups(corpus) {
        let event = group.event.to_string();
        if blocks.last().is_none_or(|b| b.event != event) {
            blocks.push(EventBlock {
                event: event.clone(),
                rows: Vec::new(),
                abta_total: 0,
                ebta_total: 0,
                total: 0,
            });
        }
        let block = blocks.last_mut().expect("pushed above");
        let (abta, ebta) = per_event
            .get(&(event, group.target.clone(), group.kind))
            .copied()
            .unwrap_or_default();
        let mut sentences = [0usize; 3];
        for source in Source::ALL {
            sentences[source_slot(source)] = group.count(source);
        }
        let abta_sum: usize = abta.iter().sum();
        block.abta_total += abta_sum;
        block.ebta_total += ebta;
        block.total += abta_sum + ebta;
        block.rows.push(EventTargetRow {
            target: group.target,
            kind: group.kind,
            sentences,
            abta,
            ebta,
            total: abta_sum + ebta,
        });
    }

    StatsReport {
        rows,
        inf,
        lex,
        events: blocks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Label, Task};
    use crate::model::{EventId, Provenance, SentenceId};
    use crate::split::Split;

    fn record(id: &str, split: Split) -> TaskRecord {
        TaskRecord {
            id: id.into(),
            task: Task::InfOth,
            split,
            label: Label::Oth,
            provenance: Provenance::REGULAR,
            event: EventId::new("1"),
            sources: vec![Source::Fox],
            sentence_ids: vec![SentenceId::new("1", Source::Fox, 0)],
            target: None,
            text: "a, \"quoted\" text".into(),
        }
    }

    #[test]
    fn line_records_have_canonical_field_order() {
        let bytes = render_records(
            &[record("b", Split::Test), record("a", Split::Train)],
            ExportFormat::Lines,
        );
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with(r#"{"id":"a","task":"INF_OTH","split":"train","label":"OTH","provenance":"REGULAR","event":"1","sources":["fox"],"sentence_ids":["1_fox_0"],"target":null,"text":"#));
        let v: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), RECORD_FIELDS.len());
    }

    #[test]
    fn tabular_mirror() {
        let bytes = render_records(&[record("a", Split::Val)], ExportFormat::Tabular);
        let mut r = csv::Reader::from_reader(bytes.as_slice());
        let headers: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(headers, RECORD_FIELDS);
        let row = r.records().next().unwrap().unwrap();
        assert_eq!(&row[3], "OTH");
        assert_eq!(&row[9], "a, \"quoted\" text");
    }

    #[test]
    fn run_id_tracks_inputs() {
        let a = RunInfo {
            corpus_digest: "x".into(),
            seed: 1,
            flags: serde_json::json!({"k": 10}),
        };
        let mut b = a.clone();
        assert_eq!(a.run_id(), b.run_id());
        b.seed = 2;
        assert_ne!(a.run_id(), b.run_id());
    }

    #[test]
    fn unwritable_path_is_io_failure() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let ds = TaskDataset {
            task: Task::InfOth,
            fold: 0,
            records: vec![record("a", Split::Train)],
            counts: Default::default(),
        };
        let run = RunInfo {
            corpus_digest: String::new(),
            seed: 0,
            flags: serde_json::Value::Null,
        };
        assert!(matches!(
            emit_dataset(&ds, &blocker.join("sub"), ExportFormat::Lines, &run),
            Err(Error::IoFailure { .. })
        ));
    }
}

//! File-in/file-out pipeline stages behind the CLI subcommands.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::human::{self, HumanEvalReport};
use crate::metrics::{self, CorpusReport, DocumentScore, DEFAULT_LONG_THRESHOLD};
use crate::model::{self, numbered_lines, write_file, Document, ShuffledDocument};
use crate::oracle::{MissingPolicy, OracleKind, OracleSource};
use crate::ordering::{self, OrderingResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sorter {
    /// Full tournament plus depth-first topological sort.
    #[default]
    Topo,
    /// Merge sort with on-demand queries.
    Merge,
}

impl FromStr for Sorter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "topo" => Ok(Sorter::Topo),
            "merge" => Ok(Sorter::Merge),
            other => Err(format!("unknown sorter {other:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub seed: u64,
    pub oracle: OracleKind,
    pub sorter: Sorter,
    pub missing: MissingPolicy,
    /// Predicted-orders file read by `eval`.
    pub orders: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub long_threshold: usize,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            manifest: None,
            seed: 0,
            oracle: OracleKind::Gold,
            sorter: Sorter::Topo,
            missing: MissingPolicy::Strict,
            orders: None,
            out: None,
            long_threshold: DEFAULT_LONG_THRESHOLD,
            jobs: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.long_threshold < 1 {
            return Err(Error::Config("long-document threshold must be at least 1".into()));
        }
        if self.jobs < 1 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }

    fn require<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::Config(format!("--{flag} is required")))
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        self.validate()?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))
    }
}

/// Runs `f` over `items` on the configured pool, keeping input order. The
/// first failure in input order is reported, whatever the schedule.
fn par_map<T, U, F>(pool: &rayon::ThreadPool, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    let results: Vec<Result<U>> = pool.install(|| items.par_iter().map(&f).collect());
    results.into_iter().collect()
}

/// Writes the shuffle manifest for the corpus.
pub fn cmd_shuffle(config: &RunConfig) -> Result<Vec<ShuffledDocument>> {
    config.validate()?;
    let docs = model::load_corpus(config.require(&config.corpus, "corpus")?)?;
    let manifest = model::shuffle_corpus(&docs, config.seed);
    if let Some(out) = &config.out {
        model::write_manifest(out, &manifest)?;
    }
    Ok(manifest)
}

/// Corpus documents paired with their manifest entries, in corpus order.
fn join_manifest(docs: &[Document], manifest: Vec<ShuffledDocument>) -> Result<Vec<ShuffledDocument>> {
    let mut by_id: HashMap<String, ShuffledDocument> =
        manifest.into_iter().map(|e| (e.doc_id.clone(), e)).collect();
    let mut joined = Vec::with_capacity(docs.len());
    for doc in docs {
        let entry = by_id
            .remove(&doc.id)
            .ok_or_else(|| Error::MissingManifestEntry(doc.id.clone()))?;
        if entry.len() != doc.len() {
            return Err(Error::LengthMismatch {
                left: entry.len(),
                right: doc.len(),
            });
        }
        joined.push(entry);
    }
    if let Some(extra) = by_id.into_keys().min() {
        return Err(Error::UnknownDocument(extra));
    }
    Ok(joined)
}

fn load_joined(config: &RunConfig) -> Result<(Vec<Document>, Vec<ShuffledDocument>)> {
    let docs = model::load_corpus(config.require(&config.corpus, "corpus")?)?;
    let manifest = model::load_manifest(config.require(&config.manifest, "manifest")?)?;
    let joined = join_manifest(&docs, manifest)?;
    Ok((docs, joined))
}

/// One row of a predicted-orders file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredictedOrder {
    pub doc_id: String,
    /// Shuffled indices in predicted order. Not necessarily a valid permutation
    /// when produced by an external system.
    pub order: Vec<usize>,
    pub queries: Option<usize>,
    pub dropped_edges: Option<usize>,
}

impl PredictedOrder {
    fn from_result(doc_id: &str, result: OrderingResult) -> Self {
        PredictedOrder {
            doc_id: doc_id.to_string(),
            order: result.order.into_vec(),
            queries: Some(result.queries_made),
            dropped_edges: Some(result.dropped_edges),
        }
    }
}

impl fmt::Display for PredictedOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t", self.doc_id)?;
        model::write_space_separated(f, &self.order)?;
        if let (Some(q), Some(d)) = (self.queries, self.dropped_edges) {
            write!(f, "\t{q}\t{d}")?;
        }
        Ok(())
    }
}

pub fn orders_to_tsv(rows: &[PredictedOrder]) -> String {
    rows.iter().map(|r| format!("{r}\n")).collect()
}

/// Reads a predicted-orders TSV: `doc_id, order[, queries, dropped_edges]`.
pub fn load_orders(path: impl AsRef<Path>) -> Result<Vec<PredictedOrder>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (line_no, line) in numbered_lines(&text) {
        let bad = |msg: String| Error::malformed(path, line_no, msg);
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 && cols.len() != 4 {
            return Err(bad(format!("expected 2 or 4 tab-separated columns, found {}", cols.len())));
        }
        let order = cols[1]
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| bad(format!("order entry {tok:?} is not a non-negative integer")))
            })
            .collect::<Result<Vec<_>>>()?;
        let count = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| bad(format!("count {s:?} is not a non-negative integer")))
        };
        let (queries, dropped_edges) = if cols.len() == 4 {
            (Some(count(cols[2])?), Some(count(cols[3])?))
        } else {
            (None, None)
        };
        rows.push(PredictedOrder {
            doc_id: cols[0].to_string(),
            order,
            queries,
            dropped_edges,
        });
    }
    Ok(rows)
}

/// Runs the configured oracle and sorter over every document.
pub fn cmd_order(config: &RunConfig) -> Result<Vec<PredictedOrder>> {
    let pool = config.pool()?;
    let (_, shuffled) = load_joined(config)?;
    let source = OracleSource::load(&config.oracle)?;
    let rows = par_map(&pool, &shuffled, |shdoc| {
        let oracle = source.for_document(shdoc, config.missing);
        let result = match config.sorter {
            Sorter::Topo => ordering::topological_order(shdoc.len(), &oracle)?,
            Sorter::Merge => ordering::merge_sort_order(shdoc.len(), &oracle)?,
        };
        Ok(PredictedOrder::from_result(&shdoc.doc_id, result))
    })?;
    if let Some(out) = &config.out {
        write_file(out, orders_to_tsv(&rows).as_bytes())?;
    }
    Ok(rows)
}

/// Scores predicted orders against the gold order recorded by the manifest.
///
/// A corpus document with no prediction row counts as a mismatch.
pub fn score_orders(shuffled: &[ShuffledDocument], rows: &[PredictedOrder], jobs: usize) -> Result<Vec<DocumentScore>> {
    let known: HashSet<&str> = shuffled.iter().map(|s| s.doc_id.as_str()).collect();
    let mut by_id: HashMap<&str, &PredictedOrder> = HashMap::new();
    for (k, row) in rows.iter().enumerate() {
        if !known.contains(row.doc_id.as_str()) {
            return Err(Error::UnknownDocument(row.doc_id.clone()));
        }
        if by_id.insert(&row.doc_id, row).is_some() {
            return Err(Error::DuplicateId {
                id: row.doc_id.clone(),
                line: k + 1,
            });
        }
    }
    let config = RunConfig {
        jobs,
        ..RunConfig::default()
    };
    par_map(&config.pool()?, shuffled, |shdoc| {
        Ok(match by_id.get(shdoc.doc_id.as_str()) {
            Some(row) => DocumentScore::compute(&shdoc.doc_id, &row.order, &shdoc.gold_order()),
            None => DocumentScore::mismatched(&shdoc.doc_id, shdoc.len()),
        })
    })
}

pub fn report_json(report: &impl Serialize) -> String {
    let mut json = serde_json::to_string_pretty(report).expect("reports serialize");
    json.push('\n');
    json
}

/// Text companion of a JSON report at `out`.
pub fn text_path(out: &Path) -> PathBuf {
    out.with_extension("txt")
}

fn write_reports(out: &Path, json: &str, text: &str) -> Result<()> {
    write_file(out, json.as_bytes())?;
    write_file(&text_path(out), text.as_bytes())
}

/// Evaluates a predicted-orders file; writes the JSON report to `out` and
/// the text rendering next to it.
pub fn cmd_eval(config: &RunConfig) -> Result<CorpusReport> {
    config.validate()?;
    let (_, shuffled) = load_joined(config)?;
    let rows = load_orders(config.require(&config.orders, "orders")?)?;
    let scores = score_orders(&shuffled, &rows, config.jobs)?;
    let report = metrics::corpus_report(&scores, config.long_threshold)?;
    if let Some(out) = &config.out {
        write_reports(out, &report_json(&report), &report.to_text())?;
    }
    Ok(report)
}

pub fn cmd_human_eval(annotations: &Path, labels: &Path, out: Option<&Path>) -> Result<HumanEvalReport> {
    let anns = human::load_annotations(annotations)?;
    let labels = human::load_labels(labels)?;
    let report = human::human_eval_aggregate(&anns, &labels)?;
    if let Some(out) = out {
        write_reports(out, &report_json(&report), &report.to_text())?;
    }
    Ok(report)
}

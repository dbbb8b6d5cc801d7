//! Pairwise precedence oracles.
//!
//! Every oracle answers the same question: given shuffled indices `i < j`, what
//! is the probability that sentence `i` comes before sentence `j`? A value
//! `>= 0.5` is read as "i before j"; the reverse direction is the complement.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{keyed_rng, numbered_lines, ShuffledDocument};

/// Decision threshold on `p_precedes`. Ties go to the shuffled input order.
pub const PRECEDES_THRESHOLD: f64 = 0.5;

pub trait PairOracle {
    /// Probability that shuffled sentence `i` precedes shuffled sentence `j`, `i < j`.
    fn query(&self, i: usize, j: usize) -> Result<f64>;
}

impl<F> PairOracle for F
where
    F: Fn(usize, usize) -> Result<f64>,
{
    fn query(&self, i: usize, j: usize) -> Result<f64> {
        self(i, j)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleKind {
    Gold,
    Noisy { flip_probability: f64, seed: u64 },
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    /// An absent pair is an error.
    #[default]
    Strict,
    /// An absent pair keeps the shuffled input order (`i` before `j`).
    InputOrder,
}

fn check_pair(i: usize, j: usize, v: usize) -> Result<()> {
    if i < j && j < v {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { i, j, v })
    }
}

fn check_probability(p: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Error::ProbabilityOutOfRange(p))
    }
}

/// 1.0 if the sentence at shuffled index `i` precedes the one at `j` in gold order.
pub fn gold_query(shdoc: &ShuffledDocument, i: usize, j: usize) -> Result<f64> {
    check_pair(i, j, shdoc.len())?;
    Ok(if shdoc.shuffle[i] < shdoc.shuffle[j] { 1.0 } else { 0.0 })
}

/// The gold answer, flipped with probability `flip_probability`.
///
/// The flip for a given `(seed, doc_id, i, j)` is fixed, so repeated queries agree.
pub fn noisy_query(
    shdoc: &ShuffledDocument,
    i: usize,
    j: usize,
    flip_probability: f64,
    seed: u64,
) -> Result<f64> {
    check_probability(flip_probability)?;
    let gold = gold_query(shdoc, i, j)?;
    let mut rng = keyed_rng(
        "noise",
        seed,
        &[
            shdoc.doc_id.as_bytes(),
            &(i as u64).to_le_bytes(),
            &(j as u64).to_le_bytes(),
        ],
    );
    let draw: f64 = rng.gen();
    Ok(if draw < flip_probability { 1.0 - gold } else { gold })
}

/// Externally produced pair probabilities, keyed by document and `(i, j)` with `i < j`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionTable {
    docs: HashMap<String, HashMap<(usize, usize), f64>>,
    len: usize,
}

impl PredictionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, doc_id: &str, i: usize, j: usize, p: f64) -> Result<Option<f64>> {
        if i >= j {
            return Err(Error::IndexOutOfRange { i, j, v: j });
        }
        check_probability(p)?;
        let previous = self
            .docs
            .entry(doc_id.to_string())
            .or_default()
            .insert((i, j), p);
        if previous.is_none() {
            self.len += 1;
        }
        Ok(previous)
    }

    pub fn get(&self, doc_id: &str, i: usize, j: usize) -> Option<f64> {
        self.docs.get(doc_id)?.get(&(i, j)).copied()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Rows in canonical order (doc id, then `i`, then `j`).
    pub fn rows(&self) -> Vec<(&str, usize, usize, f64)> {
        let mut rows: Vec<_> = self
            .docs
            .iter()
            .flat_map(|(doc, pairs)| pairs.iter().map(move |(&(i, j), &p)| (doc.as_str(), i, j, p)))
            .collect();
        rows.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
        rows
    }

    /// TSV text in the prediction-file format.
    pub fn to_tsv(&self) -> String {
        self.rows()
            .into_iter()
            .map(|(doc, i, j, p)| format!("{doc}\t{i}\t{j}\t{p}\n"))
            .collect()
    }
}

/// Loads a prediction file: TSV rows `doc_id, i, j, p_precedes`, no header.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<PredictionTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text, path)
}

pub(crate) fn parse_predictions(text: &str, path: &Path) -> Result<PredictionTable> {
    let mut table = PredictionTable::new();
    for (line_no, line) in numbered_lines(text) {
        let bad = |msg: String| Error::malformed(path, line_no, msg);
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad(format!("expected 4 tab-separated columns, found {}", cols.len())));
        }
        let doc_id = cols[0];
        if doc_id.is_empty() {
            return Err(bad("empty document id".into()));
        }
        let index = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| bad(format!("index {s:?} is not a non-negative integer")))
        };
        let i = index(cols[1])?;
        let j = index(cols[2])?;
        if i >= j {
            return Err(bad(format!("expected i < j, found i={i}, j={j}")));
        }
        let p: f64 = cols[3]
            .trim()
            .parse()
            .map_err(|_| bad(format!("probability {:?} is not a number", cols[3])))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(bad(format!("probability {p} is outside [0, 1]")));
        }
        if table.insert(doc_id, i, j, p)?.is_some() {
            return Err(bad(format!("duplicate pair ({doc_id}, {i}, {j})")));
        }
    }
    Ok(table)
}

/// Looks up a stored prediction, applying `policy` when the pair is absent.
pub fn file_query(
    table: &PredictionTable,
    doc_id: &str,
    i: usize,
    j: usize,
    policy: MissingPolicy,
) -> Result<f64> {
    if i >= j {
        return Err(Error::IndexOutOfRange { i, j, v: j });
    }
    match (table.get(doc_id, i, j), policy) {
        (Some(p), _) => Ok(p),
        (None, MissingPolicy::InputOrder) => Ok(1.0),
        (None, MissingPolicy::Strict) => Err(Error::MissingPair {
            doc_id: doc_id.to_string(),
            i,
            j,
        }),
    }
}

/// An oracle kind with any backing data loaded.
#[derive(Debug, Clone)]
pub enum OracleSource {
    Gold,
    Noisy { flip_probability: f64, seed: u64 },
    File(PredictionTable),
}

impl OracleSource {
    pub fn load(kind: &OracleKind) -> Result<Self> {
        Ok(match kind {
            OracleKind::Gold => OracleSource::Gold,
            &OracleKind::Noisy {
                flip_probability,
                seed,
            } => {
                check_probability(flip_probability)?;
                OracleSource::Noisy {
                    flip_probability,
                    seed,
                }
            }
            OracleKind::File(path) => OracleSource::File(load_predictions(path)?),
        })
    }

    /// Binds this source to one document.
    pub fn for_document<'a>(&'a self, shdoc: &'a ShuffledDocument, policy: MissingPolicy) -> DocumentOracle<'a> {
        DocumentOracle {
            source: self,
            shdoc,
            policy,
        }
    }
}

/// An [`OracleSource`] bound to a single shuffled document.
#[derive(Debug, Clone, Copy)]
pub struct DocumentOracle<'a> {
    source: &'a OracleSource,
    shdoc: &'a ShuffledDocument,
    policy: MissingPolicy,
}

impl PairOracle for DocumentOracle<'_> {
    fn query(&self, i: usize, j: usize) -> Result<f64> {
        match self.source {
            OracleSource::Gold => gold_query(self.shdoc, i, j),
            &OracleSource::Noisy {
                flip_probability,
                seed,
            } => noisy_query(self.shdoc, i, j, flip_probability, seed),
            OracleSource::File(table) => {
                check_pair(i, j, self.shdoc.len())?;
                file_query(table, &self.shdoc.doc_id, i, j, self.policy)
            }
        }
    }
}

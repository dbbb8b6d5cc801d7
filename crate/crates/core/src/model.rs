//! Documents, permutations, deterministic shuffling and the two JSONL file
//! formats (corpus and shuffle manifest).
//!
//! Sentence indices everywhere outside the manifest refer to *shuffled*
//! positions. The manifest is the only artifact that maps a shuffled position
//! back to its gold position.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A document with its sentences in gold order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, sentences: Vec<String>) -> Result<Self> {
        let doc = Document {
            id: id.into(),
            sentences,
        };
        doc.validate()?;
        Ok(doc)
    }

    /// Number of sentences.
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Config("document id must be non-empty".into()));
        }
        if self.sentences.is_empty() {
            return Err(Error::EmptyDocument(self.id.clone()));
        }
        if let Some(index) = self.sentences.iter().position(|s| s.is_empty()) {
            return Err(Error::EmptySentence {
                doc_id: self.id.clone(),
                index,
            });
        }
        Ok(())
    }
}

/// A bijection on `0..len`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(values: Vec<usize>) -> Result<Self> {
        check_permutation(&values)?;
        Ok(Permutation(values))
    }

    pub fn identity(len: usize) -> Self {
        Permutation((0..len).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    /// `inverse()[self[k]] == k`.
    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (k, &x) in self.0.iter().enumerate() {
            inv[x] = k;
        }
        Permutation(inv)
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(k, &x)| k == x)
    }
}

impl std::ops::Index<usize> for Permutation {
    type Output = usize;

    fn index(&self, k: usize) -> &usize {
        &self.0[k]
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_space_separated(f, &self.0)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<usize>::deserialize(deserializer)?;
        Permutation::new(values).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn write_space_separated(f: &mut impl fmt::Write, values: &[usize]) -> fmt::Result {
    for (k, x) in values.iter().enumerate() {
        if k > 0 {
            f.write_char(' ')?;
        }
        write!(f, "{x}")?;
    }
    Ok(())
}

/// Returns `true` if `values` is a bijection on `0..values.len()`.
pub fn is_permutation(values: &[usize]) -> bool {
    check_permutation(values).is_ok()
}

fn check_permutation(values: &[usize]) -> Result<()> {
    let len = values.len();
    let mut seen = vec![false; len];
    for &x in values {
        if x >= len {
            return Err(Error::InvalidPermutation {
                len,
                detail: format!("value {x} out of range"),
            });
        }
        if std::mem::replace(&mut seen[x], true) {
            return Err(Error::InvalidPermutation {
                len,
                detail: format!("value {x} repeated"),
            });
        }
    }
    Ok(())
}

/// A document presented in random order. `shuffle[k]` is the gold position of
/// the sentence shown at shuffled position `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuffledDocument {
    #[serde(rename = "id")]
    pub doc_id: String,
    pub seed: u64,
    pub shuffle: Permutation,
}

impl ShuffledDocument {
    pub fn len(&self) -> usize {
        self.shuffle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shuffle.is_empty()
    }

    /// The gold order expressed in shuffled indices: element `p` is the
    /// shuffled index of the sentence whose gold position is `p`.
    pub fn gold_order(&self) -> Permutation {
        self.shuffle.inverse()
    }
}

/// A ChaCha stream derived from a global seed and a list of key parts.
///
/// Parts are length-prefixed before hashing so `("ab", "c")` and `("a", "bc")`
/// produce different streams.
pub(crate) fn keyed_rng(domain: &str, seed: u64, parts: &[&[u8]]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(domain.as_bytes());
    hasher.update(seed.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Draws a uniformly random order for `doc`, keyed by `(seed, doc.id)`.
pub fn shuffle_document(doc: &Document, seed: u64) -> ShuffledDocument {
    let mut rng = keyed_rng("shuffle", seed, &[doc.id.as_bytes()]);
    let mut values: Vec<usize> = (0..doc.len()).collect();
    values.shuffle(&mut rng);
    ShuffledDocument {
        doc_id: doc.id.clone(),
        seed,
        shuffle: Permutation(values),
    }
}

/// All index pairs `(i, j)` with `i < j < v`, in lexicographic order.
pub fn enumerate_pairs(v: usize) -> Vec<(usize, usize)> {
    (0..v)
        .flat_map(|i| (i + 1..v).map(move |j| (i, j)))
        .collect()
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-blank lines of `text`, numbered from 1.
pub(crate) fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, line)| (k + 1, line))
        .filter(|(_, line)| !line.trim().is_empty())
}

/// Loads a JSONL corpus, one `{"id": ..., "sentences": [...]}` object per line.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    parse_corpus(&read_to_string(path)?, path)
}

pub(crate) fn parse_corpus(text: &str, path: &Path) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut ids = HashSet::new();
    for (line_no, line) in numbered_lines(text) {
        let doc: Document =
            serde_json::from_str(line).map_err(|e| Error::malformed(path, line_no, e.to_string()))?;
        doc.validate().map_err(|e| match e {
            Error::Config(msg) => Error::malformed(path, line_no, msg),
            other => other,
        })?;
        if !ids.insert(doc.id.clone()) {
            return Err(Error::DuplicateId {
                id: doc.id,
                line: line_no,
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Serializes documents in the canonical corpus form accepted by [`load_corpus`].
pub fn corpus_to_jsonl(docs: &[Document]) -> String {
    to_jsonl(docs)
}

pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    write_file(path.as_ref(), corpus_to_jsonl(docs).as_bytes())
}

fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        // Serializing plain structs of strings and integers cannot fail.
        out.push_str(&serde_json::to_string(item).expect("serializable record"));
        out.push('\n');
    }
    out
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Shuffles every document of a corpus.
pub fn shuffle_corpus(docs: &[Document], seed: u64) -> Vec<ShuffledDocument> {
    docs.iter().map(|d| shuffle_document(d, seed)).collect()
}

pub fn manifest_to_jsonl(entries: &[ShuffledDocument]) -> String {
    to_jsonl(entries)
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ShuffledDocument]) -> Result<()> {
    write_file(path.as_ref(), manifest_to_jsonl(entries).as_bytes())
}

/// Loads a shuffle manifest (`{"id", "seed", "shuffle"}` per line).
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ShuffledDocument>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut entries = Vec::new();
    let mut ids = HashSet::new();
    for (line_no, line) in numbered_lines(&text) {
        let entry: ShuffledDocument =
            serde_json::from_str(line).map_err(|e| Error::malformed(path, line_no, e.to_string()))?;
        if entry.is_empty() {
            return Err(Error::malformed(path, line_no, "empty shuffle"));
        }
        if !ids.insert(entry.doc_id.clone()) {
            return Err(Error::DuplicateId {
                id: entry.doc_id,
                line: line_no,
            });
        }
        entries.push(entry);
    }
    Ok(entries)
}
